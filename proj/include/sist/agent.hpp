#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>

#include "sist/backends.hpp"
#include "sist/error.hpp"
#include "sist/memory.hpp"
#include "sist/metrics.hpp"
#include "sist/retriever.hpp"
#include "sist/stream.hpp"

namespace sist {

struct SessionConfig {
    double step_s = kDefaultStepS;
    SessionMode mode;
    std::size_t retriever_k = 5;
    std::uint64_t seed = 0;
    std::size_t max_context_rounds = kDefaultContextRounds;
    // Added to every emission timestamp to model compute delay.
    double processing_latency_s = 0.0;
    Tokenization target_tokenization = Tokenization::whitespace;
    // Empty means default_instruction(mode).
    std::string instruction;
};

// Throws UsageError for inconsistent settings.
void validate_config(const SessionConfig& cfg);

struct SessionResult {
    std::string session_id;
    std::string final_translation;
    EmissionLog emission_log;
    Memory memory;
    std::size_t rounds_run = 0;
};

// Thrown when a round fails; carries everything committed before the failure.
class SessionAborted : public Error {
public:
    SessionAborted(ErrorKind kind, const std::string& message, SessionResult partial)
        : Error(kind, message), partial_(std::move(partial)) {}

    const SessionResult& partial() const noexcept { return partial_; }

private:
    SessionResult partial_;
};

struct RoundOutcome {
    StreamWindow window;
    // Empty for a wait round.
    std::optional<RoundRecord> record;
};

// Mutable state of one session: cursor, memory, emission log, round counter.
class Session {
public:
    Session(const StreamingSample& sample, const SessionConfig& cfg);

    bool finished() const noexcept { return cursor_.at_end(); }

    // One input -> retrieve -> load memory -> generate -> update memory cycle.
    // Precondition: !finished().
    RoundOutcome run_round(Backend& backend, Retriever* retriever);

    const StreamCursor& cursor() const noexcept { return cursor_; }
    const Memory& memory() const noexcept { return memory_; }
    const EmissionLog& emission_log() const noexcept { return log_; }
    std::size_t rounds_run() const noexcept { return rounds_run_; }

    SessionResult result() const;

private:
    const StreamingSample* sample_;
    SessionConfig cfg_;
    StreamCursor cursor_;
    Memory memory_;
    EmissionLog log_;
    std::size_t rounds_run_ = 0;
};

// Runs rounds until the final window has been processed. Offline mode
// (mode.streaming == false) is a single round over the whole sample.
SessionResult run_session(const StreamingSample& sample, Backend& backend, Retriever* retriever,
                          const SessionConfig& cfg);

}  // namespace sist

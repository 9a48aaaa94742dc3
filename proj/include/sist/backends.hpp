#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sist/core.hpp"
#include "sist/memory.hpp"
#include "sist/stream.hpp"

namespace sist {

// The task configuration flags; 2^3 translation setups plus retrieval.
struct SessionMode {
    bool cot_transcription = false;
    bool streaming = true;
    bool use_context = true;
    bool use_retrieval = false;

    bool operator==(const SessionMode&) const = default;
};

// Default instruction text for a mode.
std::string default_instruction(const SessionMode& mode);

struct BackendRequest {
    std::string session_id;
    std::size_t round = 0;
    StreamWindow window;
    std::vector<RoundRecord> context;
    std::vector<KnowledgeItem> retrieved;
    SessionMode mode;
    std::string instruction;
    bool is_final = false;
};

// An empty translation is a wait: nothing was complete, no progress.
struct BackendResponse {
    std::optional<std::string> transcription;
    std::string translation;
    double cutoff_s = 0.0;

    bool is_wait() const noexcept { return translation.empty(); }
    bool operator==(const BackendResponse&) const = default;
};

// Throws ProtocolError when resp breaks the response invariants for req.
void check_response(const BackendRequest& req, const BackendResponse& resp);

class Backend {
public:
    virtual ~Backend() = default;
    virtual BackendResponse respond(const BackendRequest& req) = 0;
};

// Ground-truth policy: emits every chunk whose end has been heard.
BackendResponse oracle_respond(const BackendRequest& req,
                               const std::vector<SemanticChunk>& sample_chunks,
                               Tokenization tok = Tokenization::whitespace);

class OracleBackend : public Backend {
public:
    OracleBackend(std::vector<SemanticChunk> chunks, Tokenization tok)
        : chunks_(std::move(chunks)), tok_(tok) {}

    BackendResponse respond(const BackendRequest& req) override {
        return oracle_respond(req, chunks_, tok_);
    }

private:
    std::vector<SemanticChunk> chunks_;
    Tokenization tok_;
};

using Lexicon = std::map<std::string, std::string, std::less<>>;

// Marks a source token that the lexicon does not cover.
std::string pass_through(const std::string& source_token);

// Pause-segmentation baseline: commits up to the last long silence inside the
// window and translates word by word.
BackendResponse pause_respond(const BackendRequest& req, const Lexicon& lexicon,
                              double gap_threshold_s,
                              Tokenization tok = Tokenization::whitespace);

class PauseBackend : public Backend {
public:
    PauseBackend(Lexicon lexicon, double gap_threshold_s, Tokenization tok)
        : lexicon_(std::move(lexicon)), gap_threshold_s_(gap_threshold_s), tok_(tok) {}

    BackendResponse respond(const BackendRequest& req) override {
        return pause_respond(req, lexicon_, gap_threshold_s_, tok_);
    }

private:
    Lexicon lexicon_;
    double gap_threshold_s_;
    Tokenization tok_;
};

// Deterministic text prompt for a request. Block layout:
//   ### Instruction / ### Context / ### Knowledge / ### Speech / ### Response
// Context and Knowledge are omitted when empty or disabled by the mode.
std::string build_prompt(const BackendRequest& req);

}  // namespace sist

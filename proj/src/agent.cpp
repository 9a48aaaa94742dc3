#include "sist/agent.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace sist {

void validate_config(const SessionConfig& cfg) {
    if (!(cfg.step_s > 0.0)) throw UsageError("step must be positive");
    if (cfg.mode.use_retrieval && cfg.retriever_k < 1)
        throw UsageError("retriever_k must be at least 1 when retrieval is enabled");
    if (!(cfg.processing_latency_s >= 0.0)) throw UsageError("processing latency must be nonnegative");
}

namespace {

double effective_step(const StreamingSample& sample, const SessionConfig& cfg) {
    if (cfg.mode.streaming) return cfg.step_s;
    return std::max(sample.source.duration_s, cfg.step_s);
}

}  // namespace

Session::Session(const StreamingSample& sample, const SessionConfig& cfg)
    : sample_(&sample),
      cfg_(cfg),
      cursor_((validate_config(cfg), open_stream(sample, effective_step(sample, cfg)))),
      memory_(cfg.max_context_rounds) {
    log_.tok = cfg.target_tokenization;
}

RoundOutcome Session::run_round(Backend& backend, Retriever* retriever) {
    auto window = cursor_.advance();
    if (!window) throw UsageError("run_round called after end of stream");
    ++rounds_run_;

    BackendRequest req;
    req.session_id = sample_->id;
    req.round = rounds_run_;
    req.mode = cfg_.mode;
    req.instruction = cfg_.instruction;
    req.is_final = window->is_final;
    if (cfg_.mode.use_retrieval && retriever)
        req.retrieved = retriever->retrieve(*window, cfg_.retriever_k);
    if (cfg_.mode.use_context) req.context = memory_.load();
    req.window = *window;

    const BackendResponse resp = backend.respond(req);
    check_response(req, resp);

    RoundOutcome out{std::move(*window), std::nullopt};
    if (resp.is_wait()) return out;

    RoundRecord rec;
    rec.round_index = rounds_run_;
    rec.transcription = resp.transcription;
    rec.translation = resp.translation;
    rec.cutoff_s = resp.cutoff_s;
    for (const auto& k : req.retrieved) rec.retrieved.push_back(k.key);

    cursor_.set_cutoff(resp.cutoff_s);
    memory_.update(rec);
    log_.events.push_back(EmissionEvent{out.window.window_end_s + cfg_.processing_latency_s,
                                        EmissionKind::append, resp.translation, 0});
    out.record = std::move(rec);
    return out;
}

SessionResult Session::result() const {
    SessionResult r;
    r.session_id = sample_->id;
    std::vector<std::string> pieces;
    for (const auto& rec : memory_.records()) pieces.push_back(rec.translation);
    r.final_translation = join_target(pieces, cfg_.target_tokenization);
    r.emission_log = log_;
    r.memory = memory_;
    r.rounds_run = rounds_run_;
    return r;
}

SessionResult run_session(const StreamingSample& sample, Backend& backend, Retriever* retriever,
                          const SessionConfig& cfg) {
    Session session(sample, cfg);
    while (!session.finished()) {
        try {
            session.run_round(backend, retriever);
        } catch (const Error& e) {
            throw SessionAborted(e.kind(),
                                 fmt::format("session '{}' aborted in round {}: {}", sample.id,
                                             session.rounds_run(), e.what()),
                                 session.result());
        }
    }
    return session.result();
}

}  // namespace sist

#include <gtest/gtest.h>

#include "sist/agent.hpp"
#include "sist/io.hpp"
#include "sist/rng.hpp"
#include "support/fixtures.hpp"
#include "support/synthetic.hpp"

namespace sist {
namespace {

using testing::three_chunk_sample;

class ScriptedBackend : public Backend {
public:
    explicit ScriptedBackend(std::function<BackendResponse(const BackendRequest&)> f) : f_(std::move(f)) {}
    BackendResponse respond(const BackendRequest& req) override {
        requests.push_back(req);
        return f_(req);
    }
    std::vector<BackendRequest> requests;

private:
    std::function<BackendResponse(const BackendRequest&)> f_;
};

class FixedRetriever : public Retriever {
public:
    std::vector<KnowledgeItem> retrieve(const StreamWindow&, std::size_t k) override {
        ++calls;
        std::vector<KnowledgeItem> items{{"Ising model", "伊辛模型"}, {"spin", "自旋"}};
        items.resize(std::min(k, items.size()));
        return items;
    }
    int calls = 0;
};

TEST(RunRound, OracleCommitsCompleteChunk) {
    const auto s = three_chunk_sample();
    SessionConfig cfg;
    cfg.step_s = 4.0;
    Session session(s, cfg);
    OracleBackend oracle(s.chunks, Tokenization::whitespace);
    const auto out = session.run_round(oracle, nullptr);
    ASSERT_TRUE(out.record);
    EXPECT_EQ(out.record->translation, "y1");
    EXPECT_EQ(out.record->cutoff_s, 3.0);
    EXPECT_EQ(session.cursor().committed_cutoff_s(), 3.0);
    ASSERT_EQ(session.emission_log().events.size(), 1u);
    EXPECT_EQ(session.emission_log().events[0].time_s, 4.0);
}

TEST(RunRound, WaitLeavesCutoff) {
    const auto s = three_chunk_sample();
    SessionConfig cfg;
    cfg.step_s = 2.0;
    Session session(s, cfg);
    OracleBackend oracle(s.chunks, Tokenization::whitespace);
    const auto out = session.run_round(oracle, nullptr);
    EXPECT_FALSE(out.record);
    EXPECT_EQ(session.cursor().committed_cutoff_s(), 0.0);
    EXPECT_TRUE(session.memory().records().empty());
    EXPECT_TRUE(session.emission_log().events.empty());
}

TEST(RunRound, CutoffBeyondNowIsProtocolError) {
    const auto s = three_chunk_sample();
    SessionConfig cfg;
    cfg.step_s = 4.0;
    Session session(s, cfg);
    ScriptedBackend bad([](const BackendRequest&) { return BackendResponse{std::nullopt, "x", 5.0}; });
    try {
        session.run_round(bad, nullptr);
        FAIL();
    } catch (const ProtocolError& e) {
        EXPECT_NE(std::string(e.what()).find("5.0"), std::string::npos) << e.what();
    }
}

TEST(RunSession, ThreeChunksTenRounds) {
    const auto s = three_chunk_sample();
    OracleBackend oracle(s.chunks, Tokenization::whitespace);
    const auto r = run_session(s, oracle, nullptr, {});
    EXPECT_EQ(r.final_translation, "y1 y2 y3");
    EXPECT_EQ(r.rounds_run, 10u);
    ASSERT_EQ(r.memory.records().size(), 3u);
    EXPECT_EQ(r.memory.records()[0].round_index, 3u);
    EXPECT_EQ(r.memory.records()[1].round_index, 6u);
    EXPECT_EQ(r.memory.records()[2].round_index, 9u);
}

TEST(RunSession, OfflineIsSingleRound) {
    const auto s = three_chunk_sample();
    OracleBackend oracle(s.chunks, Tokenization::whitespace);
    SessionConfig cfg;
    cfg.mode.streaming = false;
    const auto r = run_session(s, oracle, nullptr, cfg);
    EXPECT_EQ(r.rounds_run, 1u);
    EXPECT_EQ(r.final_translation, "y1 y2 y3");
}

TEST(RunSession, EmptySample) {
    StreamingSample s;
    s.id = "empty";
    s.source = {"en", {}, 3.0};
    OracleBackend oracle(s.chunks, Tokenization::whitespace);
    const auto r = run_session(s, oracle, nullptr, {});
    EXPECT_EQ(r.final_translation, "");
    EXPECT_TRUE(r.memory.records().empty());
    EXPECT_EQ(r.rounds_run, 3u);
}

TEST(RunSession, PauseBackendFlushesAtFinalRound) {
    StreamingSample s;
    s.id = "p";
    s.source = {"en", testing::uniform_tokens(8, 0.3, 0.1, "w"), 4.0};
    PauseBackend pause({{"w0", "v0"}}, 0.5, Tokenization::whitespace);
    const auto r = run_session(s, pause, nullptr, {});
    ASSERT_EQ(r.memory.records().size(), 1u);
    EXPECT_EQ(r.memory.records()[0].round_index, r.rounds_run);
    EXPECT_EQ(r.final_translation, "v0 [w1] [w2] [w3] [w4] [w5] [w6] [w7]");
}

TEST(RunSession, CharacterTargetsJoinWithoutSpaces) {
    auto s = three_chunk_sample();
    s.chunks[0].target_text = "你好";
    s.chunks[1].target_text = "世";
    s.chunks[2].target_text = "界";
    SessionConfig cfg;
    cfg.target_tokenization = Tokenization::per_character;
    OracleBackend oracle(s.chunks, cfg.target_tokenization);
    EXPECT_EQ(run_session(s, oracle, nullptr, cfg).final_translation, "你好世界");
}

TEST(RunSession, ContextAndRetrievalReachBackend) {
    const auto s = three_chunk_sample();
    OracleBackend oracle(s.chunks, Tokenization::whitespace);
    ScriptedBackend spy([&](const BackendRequest& req) { return oracle.respond(req); });
    FixedRetriever retriever;
    SessionConfig cfg;
    cfg.mode.use_retrieval = true;
    cfg.retriever_k = 1;
    cfg.max_context_rounds = 1;
    const auto r = run_session(s, spy, &retriever, cfg);
    EXPECT_EQ(retriever.calls, 10);
    ASSERT_EQ(spy.requests.size(), 10u);
    EXPECT_TRUE(spy.requests[0].context.empty());
    EXPECT_EQ(spy.requests.back().context.size(), 1u);
    EXPECT_EQ(spy.requests.back().context[0].translation, "y3");
    EXPECT_EQ(spy.requests[4].retrieved.size(), 1u);
    EXPECT_EQ(r.memory.records()[0].retrieved, (std::vector<std::string>{"Ising model"}));
    EXPECT_TRUE(spy.requests.back().is_final);
}

TEST(RunSession, NoContextMode) {
    const auto s = three_chunk_sample();
    OracleBackend oracle(s.chunks, Tokenization::whitespace);
    ScriptedBackend spy([&](const BackendRequest& req) { return oracle.respond(req); });
    SessionConfig cfg;
    cfg.mode.use_context = false;
    run_session(s, spy, nullptr, cfg);
    for (const auto& req : spy.requests) EXPECT_TRUE(req.context.empty());
}

TEST(RunSession, AbortCarriesPartialResult) {
    const auto s = three_chunk_sample();
    OracleBackend oracle(s.chunks, Tokenization::whitespace);
    ScriptedBackend flaky([&](const BackendRequest& req) {
        if (req.round == 5) throw BackendError("connection reset");
        return oracle.respond(req);
    });
    try {
        run_session(s, flaky, nullptr, {});
        FAIL();
    } catch (const SessionAborted& e) {
        EXPECT_EQ(e.exit_code(), 3);
        EXPECT_EQ(e.partial().final_translation, "y1");
        EXPECT_EQ(e.partial().rounds_run, 5u);
    }
}

TEST(RunSession, ProcessingLatencyShiftsEmissions) {
    const auto s = three_chunk_sample();
    OracleBackend oracle(s.chunks, Tokenization::whitespace);
    SessionConfig cfg;
    cfg.processing_latency_s = 0.25;
    const auto r = run_session(s, oracle, nullptr, cfg);
    EXPECT_EQ(commit_times(r.emission_log), (std::vector<double>{3.25, 6.25, 9.25}));
}

TEST(RunSession, InvalidConfig) {
    const auto s = three_chunk_sample();
    OracleBackend oracle(s.chunks, Tokenization::whitespace);
    SessionConfig cfg;
    cfg.step_s = 0;
    EXPECT_THROW(run_session(s, oracle, nullptr, cfg), UsageError);
    cfg = {};
    cfg.mode.use_retrieval = true;
    cfg.retriever_k = 0;
    EXPECT_THROW(run_session(s, oracle, nullptr, cfg), UsageError);
}

// Append-only output, monotone cutoffs, every chunk exactly once, and
// byte-identical serialization on rerun.
TEST(RunSession, RandomizedOracleSessions) {
    Rng rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        const auto s = testing::random_sample(rng, 1 + rng.below(15));
        SessionConfig cfg;
        cfg.step_s = 0.1 + 2 * rng.uniform01();
        OracleBackend oracle(s.chunks, Tokenization::whitespace);
        const auto r = run_session(s, oracle, nullptr, cfg);
        std::vector<std::string> want;
        for (const auto& c : s.chunks) want.push_back(c.target_text);
        EXPECT_EQ(replay_tokens(r.emission_log), want);
        double prev = 0.0;
        for (const auto& rec : r.memory.records()) {
            EXPECT_GE(rec.cutoff_s, prev);
            prev = rec.cutoff_s;
        }
        for (const auto& e : r.emission_log.events) EXPECT_EQ(e.kind, EmissionKind::append);
        OracleBackend again(s.chunks, Tokenization::whitespace);
        EXPECT_EQ(io::session_result_to_json(r).dump(),
                  io::session_result_to_json(run_session(s, again, nullptr, cfg)).dump());
    }
}

}  // namespace
}  // namespace sist

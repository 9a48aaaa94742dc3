#include <gtest/gtest.h>

#include <sstream>

#include "sist/cli.hpp"
#include "sist/io.hpp"
#include "sist/rng.hpp"
#include "support/fixtures.hpp"
#include "support/synthetic.hpp"
#include "support/tempdir.hpp"

namespace sist {
namespace {

using testing::TempDir;

struct Run {
    int code = 0;
    std::string out, err;
};

Run run(std::vector<std::string> args) {
    std::ostringstream out, err;
    Run r;
    r.code = cli::dispatch(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string write_samples(const TempDir& dir, std::size_t n, std::uint64_t seed = 1) {
    Rng rng(seed);
    std::vector<io::json> rows;
    for (std::size_t i = 0; i < n; ++i)
        rows.push_back(io::sample_to_json(testing::random_sample(rng, 2 + rng.below(6), "s" + std::to_string(i))));
    const auto path = dir / "samples.jsonl";
    io::write_file_atomic(path, io::to_jsonl(rows));
    return path;
}

TEST(Cli, VersionAndHelp) {
    auto r = run({"--version"});
    EXPECT_EQ(r.code, 0);
    EXPECT_EQ(r.out, std::string("sist ") + kVersion + "\n");
    r = run({"--help"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("emission log (JSONL)"), std::string::npos);
    EXPECT_NE(r.out.find("flags > --config file > environment > defaults"), std::string::npos);
}

TEST(Cli, UsageErrors) {
    EXPECT_EQ(run({}).code, 1);
    EXPECT_EQ(run({"frobnicate"}).code, 1);
    auto r = run({"simulate", "--samples", "x", "--out", "y", "--bogus"});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("Usage"), std::string::npos);
}

TEST(Cli, JsonErrors) {
    const auto r = run({"--json-errors", "eval-vip", "--ann", "/nonexistent/a.json"});
    EXPECT_EQ(r.code, 2);
    const auto j = io::json::parse(r.err);
    EXPECT_EQ(j["error"], "data");
    EXPECT_EQ(j["exit_code"], 2);
}

TEST(Cli, SimulateOracleWritesOneResultPerSample) {
    TempDir dir;
    const auto samples = write_samples(dir, 4);
    const auto before = io::read_file(samples);
    const auto r = run({"simulate", "--backend", "oracle", "--samples", samples, "--out", dir / "r"});
    ASSERT_EQ(r.code, 0) << r.err;
    for (const auto& s : io::read_samples(samples)) {
        const auto res = io::json::parse(io::read_file(dir / ("r/" + s.id + ".json")));
        std::vector<std::string> targets;
        for (const auto& c : s.chunks) targets.push_back(c.target_text);
        EXPECT_EQ(res["final_translation"], join_target(targets, Tokenization::whitespace));
        EXPECT_TRUE(std::filesystem::exists(dir / ("r/" + s.id + ".emissions.jsonl")));
    }
    EXPECT_EQ(io::read_file(samples), before);
}

TEST(Cli, SimulateIsDeterministicAcrossJobCounts) {
    TempDir dir;
    const auto samples = write_samples(dir, 6);
    ASSERT_EQ(run({"simulate", "--samples", samples, "--out", dir / "a", "--seed", "7", "--jobs", "1"}).code, 0);
    ASSERT_EQ(run({"simulate", "--samples", samples, "--out", dir / "b", "--seed", "7", "--jobs", "3"}).code, 0);
    for (const auto& s : io::read_samples(samples)) {
        for (const std::string ext : {".json", ".emissions.jsonl"})
            EXPECT_EQ(io::read_file(dir / ("a/" + s.id + ext)), io::read_file(dir / ("b/" + s.id + ext)));
    }
}

TEST(Cli, SimulateBadSampleIsDataError) {
    TempDir dir;
    auto s = testing::three_chunk_sample();
    s.chunks[1].start_s = 3.5;
    io::write_file_atomic(dir / "bad.jsonl", io::sample_to_json(s).dump() + "\n");
    const auto r = run({"simulate", "--samples", dir / "bad.jsonl", "--out", dir / "r"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("chunk 1 start 3.5 != chunk 0 end 3.0"), std::string::npos) << r.err;
}

TEST(Cli, SimulateLlmEndpointDown) {
    TempDir dir;
    const auto samples = write_samples(dir, 1);
    const auto r = run({"simulate", "--backend", "llm", "--endpoint", "http://127.0.0.1:9/x", "--samples",
                        samples, "--out", dir / "r", "--backoff", "0.001", "--timeout", "1"});
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("after 4 attempts"), std::string::npos) << r.err;
    const auto res = io::json::parse(io::read_file(dir / "r/s0.json"));
    EXPECT_EQ(res["error"]["kind"], "backend");
}

TEST(Cli, SimulateLlmNeedsEndpoint) {
    TempDir dir;
    const auto samples = write_samples(dir, 1);
    EXPECT_EQ(run({"simulate", "--backend", "llm", "--samples", samples, "--out", dir / "r"}).code, 1);
}

TEST(Cli, GenDataIsSeeded) {
    TempDir dir;
    const auto samples = write_samples(dir, 3);
    ASSERT_EQ(run({"gen-data", "--in", samples, "--pairs-per-sample", "20", "--seed", "5", "--out", dir / "a.jsonl"}).code, 0);
    ASSERT_EQ(run({"gen-data", "--in", samples, "--pairs-per-sample", "20", "--seed", "5", "--out", dir / "b.jsonl"}).code, 0);
    ASSERT_EQ(run({"gen-data", "--in", samples, "--pairs-per-sample", "20", "--seed", "6", "--out", dir / "c.jsonl"}).code, 0);
    EXPECT_EQ(io::read_file(dir / "a.jsonl"), io::read_file(dir / "b.jsonl"));
    EXPECT_NE(io::read_file(dir / "a.jsonl"), io::read_file(dir / "c.jsonl"));
    EXPECT_EQ(io::read_jsonl(dir / "a.jsonl").size(), 60u);
}

TEST(Cli, GenDataSegmentsUnchunkedSamples) {
    TempDir dir;
    StreamingSample s;
    s.id = "raw";
    s.source = {"en", {{"hello", 0.0, 0.5}, {"world.", 0.5, 1.0}, {"next", 2.0, 2.5}}, 3.0};
    io::write_file_atomic(dir / "raw.jsonl", io::sample_to_json(s).dump() + "\n");
    ASSERT_EQ(run({"gen-data", "--in", dir / "raw.jsonl", "--pairs-per-sample", "50", "--out", dir / "p.jsonl"}).code, 0);
    for (const auto& row : io::read_jsonl(dir / "p.jsonl")) {
        const auto p = io::eq2_pair_from_json(row);
        if (p.prefix_end_s >= 1.0) EXPECT_GE(p.expected_outputs.size(), 1u);
        if (p.prefix_end_s < 1.0) EXPECT_TRUE(p.expected_outputs.empty());
    }
}

TEST(Cli, EvalLatency) {
    TempDir dir;
    StreamingSample s;
    s.id = "lat";
    s.source = {"en", {}, 10.0};
    s.reference_translation = "a b c d e f g h i j";
    io::write_file_atomic(dir / "s.jsonl", io::sample_to_json(s).dump() + "\n");
    EmissionLog log;
    for (int i = 1; i <= 5; ++i) log.events.push_back({2.0 * i, EmissionKind::append, "w", 0});
    io::write_file_atomic(dir / "log.jsonl", io::emission_log_to_jsonl(log));
    const auto r = run({"eval-latency", "--log", dir / "log.jsonl", "--sample", dir / "s.jsonl"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = io::json::parse(r.out);
    EXPECT_NEAR(j["al_s"].get<double>(), 2.0, 1e-9);
    EXPECT_NEAR(j["laal_s"].get<double>(), 4.0, 1e-9);
    EXPECT_EQ(j["flal_s"], 2.0);
}

TEST(Cli, Corr) {
    TempDir dir;
    io::write_file_atomic(dir / "x.tsv", "a\t1\nb\t2\nc\t3\nd\t4\n");
    io::write_file_atomic(dir / "y.tsv", "d\t4\nc\t2\nb\t3\na\t1\n");
    const auto r = run({"corr", "--x", dir / "x.tsv", "--y", dir / "y.tsv"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NEAR(io::json::parse(r.out)["kendall_tau_b"].get<double>(), 4.0 / 6.0, 1e-12);
    io::write_file_atomic(dir / "z.tsv", "a\t1\nb\t2\n");
    EXPECT_EQ(run({"corr", "--x", dir / "x.tsv", "--y", dir / "z.tsv"}).code, 2);
}

TEST(Bundle, ThreeRoundsTwoBreaks) {
    const auto s = testing::three_chunk_sample();
    OracleBackend oracle(s.chunks, Tokenization::whitespace);
    const auto r = run_session(s, oracle, nullptr, {});
    const auto b = export_annotation_bundle(r, s);
    EXPECT_EQ(b["suggested_breaks"], io::json::array({1, 2}));
    EXPECT_EQ(b["source_tokens"].size(), 6u);
    EXPECT_EQ(b["final_translation"], "y1 y2 y3");
}

TEST(Bundle, EmptyTranslation) {
    StreamingSample s;
    s.id = "e";
    s.source = {"en", {}, 2.0};
    OracleBackend oracle(s.chunks, Tokenization::whitespace);
    const auto r = run_session(s, oracle, nullptr, {});
    try {
        export_annotation_bundle(r, s);
        FAIL();
    } catch (const DataError& e) {
        EXPECT_STREQ(e.what(), "nothing to annotate");
    }
}

// Simulated annotator: splits the bundle at its suggested breaks and judges
// each fragment, then feeds the set back through eval-vip.
TEST(Bundle, AnnotationRoundTrip) {
    TempDir dir;
    const auto s = testing::three_chunk_sample();
    io::write_file_atomic(dir / "s.jsonl", io::sample_to_json(s).dump() + "\n");
    ASSERT_EQ(run({"simulate", "--samples", dir / "s.jsonl", "--out", dir / "r"}).code, 0);
    ASSERT_EQ(run({"export-annotation", "--result", dir / "r/three.json", "--samples", dir / "s.jsonl", "--out",
                   dir / "bundle.json"}).code, 0);
    const auto bundle = io::json::parse(io::read_file(dir / "bundle.json"));
    const auto tokens = tokenize_target(bundle["final_translation"].get<std::string>(), Tokenization::whitespace);
    std::vector<std::size_t> cuts{0};
    for (const auto& b : bundle["suggested_breaks"]) cuts.push_back(b.get<std::size_t>());
    cuts.push_back(tokens.size());
    AnnotationSet ann{bundle["session_id"], "tester", {}};
    for (std::size_t f = 0; f + 1 < cuts.size(); ++f) {
        std::vector<std::string> piece(tokens.begin() + cuts[f], tokens.begin() + cuts[f + 1]);
        const bool ok = f != 1;
        ann.fragments.push_back({join_target(piece, Tokenization::whitespace), ok,
                                 ok ? std::nullopt : std::optional(FailureKind::correctness)});
    }
    io::write_file_atomic(dir / "ann.json", io::annotations_to_json(ann).dump());
    const auto r = run({"eval-vip", "--ann", dir / "ann.json", "--result", dir / "r/three.json"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = io::json::parse(r.out);
    EXPECT_EQ(j["valid"], 2);
    EXPECT_EQ(j["total"], 3);
    EXPECT_DOUBLE_EQ(j["vip"].get<double>(), 66.7);

    ann.fragments.pop_back();
    io::write_file_atomic(dir / "short.json", io::annotations_to_json(ann).dump());
    EXPECT_EQ(run({"eval-vip", "--ann", dir / "short.json", "--result", dir / "r/three.json"}).code, 2);
}

}  // namespace
}  // namespace sist

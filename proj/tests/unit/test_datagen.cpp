#include <gtest/gtest.h>

#include "sist/datagen.hpp"
#include "sist/error.hpp"
#include "sist/rng.hpp"
#include "support/fixtures.hpp"
#include "support/synthetic.hpp"

namespace sist {
namespace {

using testing::three_chunk_sample;
using testing::uniform_tokens;

TEST(Segment, PunctuationThenSpeech) {
    TimedTranscript t{"zh", {{"我们", 0.0, 1.5}, {"开始。", 1.5, 3.0}, {"今天", 3.0, 5.0}, {"讲", 5.0, 7.0}}, 7.0};
    EXPECT_EQ(segment_transcript(t), (std::vector<double>{3.0, 7.0}));
}

TEST(Segment, MaxChunkTokens) {
    TimedTranscript t{"en", uniform_tokens(12, 0.2, 0.1), 0.0};
    t.duration_s = t.tokens.back().end_s;
    SegmentationRules rules;
    rules.max_chunk_tokens = 5;
    const auto groups = segment_token_groups(t, rules);
    ASSERT_EQ(groups.size(), 3u);
    EXPECT_EQ(groups[0], (TokenRange{0, 5}));
    EXPECT_EQ(groups[1], (TokenRange{5, 10}));
    EXPECT_EQ(groups[2], (TokenRange{10, 12}));
    EXPECT_EQ(segment_transcript(t, rules).size(), 3u);
}

TEST(Segment, PauseBoundaryIsGapMidpoint) {
    TimedTranscript t{"en", {{"a", 1.0, 2.0}, {"b", 2.8, 3.0}}, 4.0};
    EXPECT_EQ(segment_transcript(t), (std::vector<double>{2.4, 4.0}));
}

TEST(Segment, EmptyTranscript) {
    TimedTranscript t{"en", {}, 5.0};
    EXPECT_EQ(segment_transcript(t), (std::vector<double>{5.0}));
}

TEST(Segment, RejectsBadRules) {
    TimedTranscript t{"en", {}, 5.0};
    SegmentationRules rules;
    rules.pause_gap_s = 0.0;
    EXPECT_THROW(segment_transcript(t, rules), DataError);
}

TEST(Align, TwoChunks) {
    TimedTranscript t{"en", uniform_tokens(6, 0.5, 0.25, "w"), 6.0};
    const auto spans = align_chunks(t, {"w0 w1 w2", "w3 w4 w5"});
    ASSERT_EQ(spans.size(), 2u);
    EXPECT_EQ(spans[0].start_s, t.tokens[0].start_s);
    EXPECT_EQ(spans[0].end_s, t.tokens[2].end_s);
    EXPECT_EQ(spans[1].start_s, t.tokens[2].end_s);
    EXPECT_EQ(spans[1].end_s, 6.0);
    EXPECT_EQ(spans[1].tokens, (TokenRange{3, 6}));
}

TEST(Align, IgnoresWhitespace) {
    TimedTranscript t{"zh", {{"你", 0.0, 0.5}, {"好", 0.5, 1.0}, {"世界", 1.0, 2.0}}, 2.0};
    const auto spans = align_chunks(t, {"你好", "世 界"});
    ASSERT_EQ(spans.size(), 2u);
    EXPECT_EQ(spans[0].end_s, 1.0);
}

TEST(Align, SingleChunk) {
    TimedTranscript t{"en", uniform_tokens(4, 0.5, 0.1, "w"), 5.0};
    const auto spans = align_chunks(t, {"w0 w1 w2 w3"});
    ASSERT_EQ(spans.size(), 1u);
    EXPECT_EQ(spans[0].start_s, 0.0);
    EXPECT_EQ(spans[0].end_s, 5.0);
}

TEST(Align, MismatchNamesToken) {
    TimedTranscript t{"en", uniform_tokens(4, 0.5, 0.1, "w"), 5.0};
    try {
        align_chunks(t, {"w0 w1", "wX w3"});
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("token 2 'w2'"), std::string::npos) << e.what();
    }
    EXPECT_THROW(align_chunks(t, {"w0 w1 w2"}), DataError);
}

// Segment boundaries sit in the middle of pauses while aligned chunks end at
// their last token, so the round trip is compared on token groups, and on
// boundary times only where there are no pauses.
TEST(Align, RoundTripsSegmentation) {
    Rng rng(5);
    for (int trial = 0; trial < 200; ++trial) {
        const auto s = testing::random_sample(rng, 1 + rng.below(10));
        SegmentationRules rules;
        rules.max_chunk_tokens = 1 + rng.below(6);
        const auto groups = segment_token_groups(s.source, rules);
        const auto spans = align_chunks(s.source, group_texts(s.source, groups));
        ASSERT_EQ(spans.size(), groups.size());
        for (std::size_t i = 0; i < groups.size(); ++i) EXPECT_EQ(spans[i].tokens, groups[i]);
    }
    for (int trial = 0; trial < 100; ++trial) {
        const auto n = 1 + rng.below(40);
        TimedTranscript t{"en", uniform_tokens(n, 0.1 + rng.uniform01(), 0.0), 0.0};
        t.duration_s = t.tokens.back().end_s + rng.uniform01() + 0.1;
        SegmentationRules rules;
        rules.max_chunk_tokens = 1 + rng.below(8);
        const auto bounds = segment_transcript(t, rules);
        const auto spans = align_chunks(t, group_texts(t, segment_token_groups(t, rules)));
        ASSERT_EQ(spans.size(), bounds.size());
        for (std::size_t i = 0; i < spans.size(); ++i) EXPECT_EQ(spans[i].end_s, bounds[i]);
    }
}

TEST(Eq2, ChunkEndsInclusive) {
    const auto s = three_chunk_sample();
    auto p = eq2_pair_at(s, 7.0);
    EXPECT_EQ(p.expected_outputs, (std::vector<std::string>{"y1", "y2"}));
    EXPECT_EQ(p.expected_cutoff_s, 6.0);
    p = eq2_pair_at(s, 2.0);
    EXPECT_TRUE(p.expected_outputs.empty());
    EXPECT_EQ(p.expected_cutoff_s, 0.0);
    p = eq2_pair_at(s, 9.0);
    EXPECT_EQ(p.expected_outputs, (std::vector<std::string>{"y1", "y2", "y3"}));
    EXPECT_EQ(p.expected_cutoff_s, 9.0);
}

TEST(Eq2, LiteralStartRule) {
    const auto s = three_chunk_sample();
    const auto p = eq2_pair_at(s, 7.0, CompletionRule::literal_start);
    EXPECT_EQ(p.expected_outputs, (std::vector<std::string>{"y1", "y2", "y3"}));
    EXPECT_EQ(p.expected_cutoff_s, 6.0);
}

TEST(Eq2, SeededAndInRange) {
    const auto s = three_chunk_sample();
    const auto a = make_eq2_pairs(s, 500, 3);
    EXPECT_EQ(a, make_eq2_pairs(s, 500, 3));
    EXPECT_NE(a, make_eq2_pairs(s, 500, 4));
    for (const auto& p : a) {
        EXPECT_GT(p.prefix_end_s, 0.0);
        EXPECT_LE(p.prefix_end_s, 10.0);
    }
}

TEST(Eq2, Errors) {
    const auto s = three_chunk_sample();
    EXPECT_THROW(make_eq2_pairs(s, 0, 1), DataError);
    auto bad = s;
    bad.chunks[0].end_s = 2.0;
    EXPECT_THROW(make_eq2_pairs(bad, 1, 1), DataError);
}

}  // namespace
}  // namespace sist

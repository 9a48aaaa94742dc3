#include <gtest/gtest.h>

#include <set>

#include "sist/error.hpp"
#include "sist/rng.hpp"
#include "sist/stream.hpp"
#include "support/fixtures.hpp"
#include "support/synthetic.hpp"

namespace sist {
namespace {

using testing::three_chunk_sample;

TEST(OpenStream, StartsAtZero) {
    const auto s = three_chunk_sample();
    const auto c = open_stream(s, 1.0);
    EXPECT_EQ(c.now_s(), 0.0);
    EXPECT_EQ(c.committed_cutoff_s(), 0.0);
    EXPECT_FALSE(c.at_end());
}

TEST(OpenStream, RejectsZeroStep) {
    const auto s = three_chunk_sample();
    try {
        open_stream(s, 0.0);
        FAIL();
    } catch (const DataError& e) {
        EXPECT_STREQ(e.what(), "step must be positive");
    }
}

TEST(OpenStream, RejectsInvalidSample) {
    auto s = three_chunk_sample();
    s.chunks[1].start_s = 3.5;
    EXPECT_THROW(open_stream(s, 1.0), DataError);
}

TEST(Advance, WindowsClampToDuration) {
    const auto s = three_chunk_sample();
    auto c = open_stream(s, 4.0);
    std::vector<double> ends;
    std::vector<bool> finals;
    while (auto w = c.advance()) {
        ends.push_back(w->window_end_s);
        finals.push_back(w->is_final);
    }
    EXPECT_EQ(ends, (std::vector<double>{4.0, 8.0, 10.0}));
    EXPECT_EQ(finals, (std::vector<bool>{false, false, true}));
    EXPECT_TRUE(c.at_end());
    EXPECT_FALSE(c.advance().has_value());
}

TEST(Advance, HalfHeardTokenWaitsForNextWindow) {
    StreamingSample s;
    s.id = "x";
    s.source = {"en", {{"early", 1.0, 2.0}, {"span", 3.8, 4.2}}, 10.0};
    auto c = open_stream(s, 4.0);
    const auto w1 = c.advance();
    ASSERT_EQ(w1->tokens.size(), 1u);
    EXPECT_EQ(w1->tokens[0].text, "early");
    c.set_cutoff(2.0);
    const auto w2 = c.advance();
    ASSERT_EQ(w2->tokens.size(), 1u);
    EXPECT_EQ(w2->tokens[0].text, "span");
}

TEST(Advance, CutoffHidesCommittedTokens) {
    const auto s = three_chunk_sample();
    auto c = open_stream(s, 4.0);
    c.advance();
    c.advance();
    c.set_cutoff(6.0);
    const auto w = c.current_window();
    EXPECT_EQ(w.window_start_s, 6.0);
    for (const auto& t : w.tokens) EXPECT_GT(t.start_s, 6.0);
    ASSERT_EQ(w.tokens.size(), 1u);
    EXPECT_EQ(w.tokens[0].text, "e");
}

TEST(SetCutoff, Range) {
    const auto s = three_chunk_sample();
    auto c = open_stream(s, 4.0);
    c.advance();
    c.set_cutoff(3.0);
    EXPECT_EQ(c.committed_cutoff_s(), 3.0);
    try {
        c.set_cutoff(2.0);
        FAIL();
    } catch (const DataError& e) {
        EXPECT_NE(std::string(e.what()).find("cutoff must be within [prev_cutoff, now]"),
                  std::string::npos);
    }
    EXPECT_THROW(c.set_cutoff(4.5), DataError);
    c.set_cutoff(4.0);
    EXPECT_EQ(c.committed_cutoff_s(), 4.0);
}

TEST(Advance, StepDoesNotDrift) {
    StreamingSample s;
    s.id = "x";
    s.source = {"en", {}, 1.0};
    auto c = open_stream(s, 0.1);
    std::size_t n = 0;
    while (auto w = c.advance()) ++n;
    EXPECT_EQ(n, 10u);
}

// With the cutoff pinned at 0, successive windows overlap; what matters is that
// the first window containing each token sees it whole and nothing is invented.
// With the cutoff following now, every token appears in exactly one window.
TEST(Advance, WindowsPartitionTokensWhenCutoffFollowsNow) {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const auto s = testing::random_sample(rng, 1 + rng.below(12));
        const double step = 0.05 + 1.5 * rng.uniform01();
        auto c = open_stream(s, step);
        std::vector<TimedToken> seen;
        std::vector<TimedToken> last_at_zero;
        auto z = open_stream(s, step);
        while (auto w = z.advance()) last_at_zero = w->tokens;
        EXPECT_EQ(last_at_zero, s.source.tokens);
        while (auto w = c.advance()) {
            for (const auto& t : w->tokens) {
                EXPECT_LE(t.end_s, w->window_end_s);
                EXPECT_GT(t.start_s, w->window_start_s - kTimeEps);
                seen.push_back(t);
            }
            // Commit everything that has been heard.
            double cut = c.committed_cutoff_s();
            for (const auto& t : w->tokens) cut = std::max(cut, t.end_s);
            c.set_cutoff(cut);
        }
        EXPECT_EQ(seen, s.source.tokens);
    }
}

TEST(Advance, Deterministic) {
    const auto s = three_chunk_sample();
    auto a = open_stream(s, 0.7);
    auto b = open_stream(s, 0.7);
    while (true) {
        const auto wa = a.advance();
        const auto wb = b.advance();
        ASSERT_EQ(wa, wb);
        if (!wa) break;
    }
}

}  // namespace
}  // namespace sist

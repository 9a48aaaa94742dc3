#include <gtest/gtest.h>

#include "sist/core.hpp"
#include "sist/error.hpp"
#include "support/fixtures.hpp"

namespace sist {
namespace {

using testing::three_chunk_sample;

TEST(ValidateSample, WellFormedSampleHasNoViolations) {
    EXPECT_TRUE(validate_sample(three_chunk_sample()).empty());
}

TEST(ValidateSample, ChunkGapIsReported) {
    auto s = three_chunk_sample();
    s.chunks[1].start_s = 3.5;
    const auto v = validate_sample(s);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_EQ(v[0], "chunk 1 start 3.5 != chunk 0 end 3.0");
}

TEST(ValidateSample, ReversedTokenNamesItsIndex) {
    auto s = three_chunk_sample();
    s.source.tokens[2] = {"c", 4.5, 3.5};
    const auto v = validate_sample(s);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_NE(v[0].find("token 2"), std::string::npos) << v[0];
}

TEST(ValidateSample, CollectsEveryViolation) {
    auto s = three_chunk_sample();
    s.source.tokens[0].text.clear();
    s.chunks[2].target_text.clear();
    s.source.duration_s = 8.0;
    EXPECT_GE(validate_sample(s).size(), 3u);
    EXPECT_THROW(require_valid(s), DataError);
}

TEST(Tokenize, Whitespace) {
    EXPECT_EQ(tokenize_target("hello world", Tokenization::whitespace),
              (std::vector<std::string>{"hello", "world"}));
    EXPECT_EQ(tokenize_target("  a \t b\n", Tokenization::whitespace),
              (std::vector<std::string>{"a", "b"}));
}

TEST(Tokenize, PerCharacterSkipsSpaces) {
    EXPECT_EQ(tokenize_target("你好 世界", Tokenization::per_character),
              (std::vector<std::string>{"你", "好", "世", "界"}));
    EXPECT_EQ(tokenize_target("你　好", Tokenization::per_character).size(), 2u);
}

TEST(Tokenize, EmptyText) {
    EXPECT_TRUE(tokenize_target("", Tokenization::whitespace).empty());
    EXPECT_TRUE(tokenize_target("", Tokenization::per_character).empty());
}

TEST(Tokenize, RejoinIsIdempotent) {
    for (std::string text : {"a  b c", " x", "one two  three  ", ""}) {
        const auto once = tokenize_target(text, Tokenization::whitespace);
        const auto twice = tokenize_target(join_target(once, Tokenization::whitespace),
                                           Tokenization::whitespace);
        EXPECT_EQ(once, twice) << text;
    }
}

TEST(Tokenize, DefaultsByLanguage) {
    EXPECT_EQ(default_tokenization("zh"), Tokenization::per_character);
    EXPECT_EQ(default_tokenization("en"), Tokenization::whitespace);
    EXPECT_EQ(parse_tokenization("char"), Tokenization::per_character);
    EXPECT_EQ(parse_tokenization("ws"), Tokenization::whitespace);
    EXPECT_THROW(parse_tokenization("bytes"), UsageError);
}

TEST(FormatTime, AlwaysHasFraction) {
    EXPECT_EQ(format_time(3.0), "3.0");
    EXPECT_EQ(format_time(3.4), "3.4");
    EXPECT_EQ(format_time(0.1 + 0.2), "0.30000000000000004");
}

}  // namespace
}  // namespace sist

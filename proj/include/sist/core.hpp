#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sist {

// Times are seconds from stream start; all time equality checks use this tolerance.
inline constexpr double kTimeEps = 1e-6;

struct TimedToken {
    std::string text;
    double start_s = 0.0;
    double end_s = 0.0;

    bool operator==(const TimedToken&) const = default;
};

// Word-level stand-in for the audio stream.
struct TimedTranscript {
    std::string lang;
    std::vector<TimedToken> tokens;
    double duration_s = 0.0;

    bool operator==(const TimedTranscript&) const = default;
};

// Source span [start_s, end_s) and its translation.
struct SemanticChunk {
    double start_s = 0.0;
    double end_s = 0.0;
    std::string source_text;
    std::string target_text;

    bool operator==(const SemanticChunk&) const = default;
};

struct StreamingSample {
    std::string id;
    TimedTranscript source;
    std::vector<SemanticChunk> chunks;
    std::optional<std::string> reference_translation;
    std::optional<std::string> domain_tag;

    bool operator==(const StreamingSample&) const = default;
};

struct KnowledgeItem {
    std::string key;
    std::string value;

    bool operator==(const KnowledgeItem&) const = default;
};

enum class Tokenization { whitespace, per_character };

// zh/ja/ko targets count characters, everything else counts whitespace words.
Tokenization default_tokenization(std::string_view lang);

Tokenization parse_tokenization(std::string_view name);
std::string_view tokenization_name(Tokenization tok);

// Every invariant violation of the sample, each naming the offending index.
// An empty result means the sample is valid.
std::vector<std::string> validate_sample(const StreamingSample& sample);

// Throws DataError with the first violation if the sample is invalid.
void require_valid(const StreamingSample& sample);

std::vector<std::string> tokenize_target(std::string_view text, Tokenization tok);

// Inverse of tokenize_target up to whitespace: single spaces, or no separator
// for per-character targets.
std::string join_target(const std::vector<std::string>& pieces, Tokenization tok);

// Splits a UTF-8 string into code points, each returned as its own byte string.
// Invalid bytes are returned one byte at a time.
std::vector<std::string> utf8_chars(std::string_view text);

bool is_space_char(std::string_view utf8_char);

// Removes every whitespace character (ASCII and U+3000).
std::string strip_whitespace(std::string_view text);

// Shortest round-trip decimal form, always with a fractional part ("3.0", "3.4").
std::string format_time(double seconds);

}  // namespace sist

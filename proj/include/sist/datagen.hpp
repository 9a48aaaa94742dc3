#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "sist/core.hpp"

namespace sist {

struct SegmentationRules {
    double pause_gap_s = 0.5;
    // Each entry is one UTF-8 character.
    std::vector<std::string> boundary_punctuation = utf8_chars("。？！?!.,，；;");
    std::size_t max_chunk_tokens = 30;
};

// Throws DataError when the rules break their invariants.
void validate_rules(const SegmentationRules& rules);

// Half-open token index range [first, last) belonging to one chunk.
struct TokenRange {
    std::size_t first = 0;
    std::size_t last = 0;

    bool operator==(const TokenRange&) const = default;
};

// Rule-based chunking. Returns strictly increasing boundary times; the last
// one is always the transcript duration.
std::vector<double> segment_transcript(const TimedTranscript& transcript,
                                       const SegmentationRules& rules = {});

// Same segmentation expressed as token groups.
std::vector<TokenRange> segment_token_groups(const TimedTranscript& transcript,
                                             const SegmentationRules& rules = {});

// Source text for each token group (tokens joined with single spaces).
std::vector<std::string> group_texts(const TimedTranscript& transcript,
                                     const std::vector<TokenRange>& groups);

struct ChunkSpan {
    double start_s = 0.0;
    double end_s = 0.0;
    std::string source_text;
    TokenRange tokens;

    bool operator==(const ChunkSpan&) const = default;
};

// Greedy left-to-right matching of chunk texts onto transcript tokens,
// ignoring whitespace. Spans tile [first token start, duration].
std::vector<ChunkSpan> align_chunks(const TimedTranscript& transcript,
                                    const std::vector<std::string>& chunk_source_texts);

struct Eq2Pair {
    std::string sample_id;
    double prefix_end_s = 0.0;
    std::vector<std::string> expected_outputs;
    double expected_cutoff_s = 0.0;

    bool operator==(const Eq2Pair&) const = default;
};

enum class CompletionRule {
    // A chunk is complete once its end boundary has been heard.
    end_complete,
    // Reads the index condition over chunk starts as written: every chunk
    // whose start precedes t is emitted, and the cutoff is that chunk's start.
    literal_start,
};

// Expected policy output for a prefix ending at t.
Eq2Pair eq2_pair_at(const StreamingSample& sample, double t,
                    CompletionRule rule = CompletionRule::end_complete);

// Draws n prefix ends uniformly from (0, duration] and pairs each with the
// expected outputs. Deterministic for a fixed seed on every platform.
std::vector<Eq2Pair> make_eq2_pairs(const StreamingSample& sample, std::size_t n,
                                    std::uint64_t seed,
                                    CompletionRule rule = CompletionRule::end_complete);

}  // namespace sist

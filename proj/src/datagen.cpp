#include "sist/datagen.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "sist/error.hpp"
#include "sist/rng.hpp"

namespace sist {

void validate_rules(const SegmentationRules& rules) {
    if (!(rules.pause_gap_s > 0.0)) throw DataError("pause_gap_s must be positive");
    if (rules.max_chunk_tokens < 1) throw DataError("max_chunk_tokens must be at least 1");
}

namespace {

bool ends_with_boundary(const std::string& text, const SegmentationRules& rules) {
    auto chars = utf8_chars(text);
    if (chars.empty()) return false;
    return std::find(rules.boundary_punctuation.begin(), rules.boundary_punctuation.end(),
                     chars.back()) != rules.boundary_punctuation.end();
}

double gap_boundary(const TimedToken& left, const TimedToken& right) {
    double gap = right.start_s - left.end_s;
    return gap > 0.0 ? left.end_s + 0.5 * gap : left.end_s;
}

}  // namespace

std::vector<TokenRange> segment_token_groups(const TimedTranscript& transcript,
                                             const SegmentationRules& rules) {
    validate_rules(rules);
    const auto& toks = transcript.tokens;
    std::vector<TokenRange> groups;
    std::size_t first = 0;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        const bool last = i + 1 == toks.size();
        bool cut = last;
        if (!last) {
            cut = toks[i + 1].start_s - toks[i].end_s >= rules.pause_gap_s - kTimeEps ||
                  ends_with_boundary(toks[i].text, rules) ||
                  i + 1 - first >= rules.max_chunk_tokens;
        }
        if (cut) {
            groups.push_back({first, i + 1});
            first = i + 1;
        }
    }
    return groups;
}

std::vector<double> segment_transcript(const TimedTranscript& transcript,
                                       const SegmentationRules& rules) {
    const auto groups = segment_token_groups(transcript, rules);
    const auto& toks = transcript.tokens;
    std::vector<double> bounds;
    for (std::size_t g = 0; g + 1 < groups.size(); ++g) {
        const std::size_t i = groups[g].last - 1;
        const double b = gap_boundary(toks[i], toks[i + 1]);
        if (bounds.empty() || b > bounds.back() + kTimeEps) bounds.push_back(b);
    }
    while (!bounds.empty() && bounds.back() >= transcript.duration_s - kTimeEps) bounds.pop_back();
    bounds.push_back(transcript.duration_s);
    return bounds;
}

std::vector<std::string> group_texts(const TimedTranscript& transcript,
                                     const std::vector<TokenRange>& groups) {
    std::vector<std::string> out;
    out.reserve(groups.size());
    for (const auto& g : groups) {
        std::string text;
        for (std::size_t i = g.first; i < g.last; ++i) {
            if (!text.empty()) text += ' ';
            text += transcript.tokens[i].text;
        }
        out.push_back(std::move(text));
    }
    return out;
}

std::vector<ChunkSpan> align_chunks(const TimedTranscript& transcript,
                                    const std::vector<std::string>& chunk_source_texts) {
    const auto& toks = transcript.tokens;
    std::vector<ChunkSpan> spans;
    std::size_t ti = 0;
    for (std::size_t c = 0; c < chunk_source_texts.size(); ++c) {
        const std::string want = strip_whitespace(chunk_source_texts[c]);
        if (want.empty()) throw DataError(fmt::format("chunk {} text is empty", c));
        std::size_t pos = 0;
        const std::size_t first = ti;
        while (pos < want.size()) {
            if (ti >= toks.size())
                throw DataError(fmt::format(
                    "chunk {} text continues past the end of the transcript at '{}'", c,
                    want.substr(pos)));
            const std::string tok = strip_whitespace(toks[ti].text);
            if (want.compare(pos, tok.size(), tok) != 0)
                throw DataError(fmt::format("chunk {} diverges from transcript at token {} '{}'",
                                            c, ti, toks[ti].text));
            pos += tok.size();
            ++ti;
        }
        spans.push_back({0.0, 0.0, chunk_source_texts[c], {first, ti}});
    }
    if (ti < toks.size())
        throw DataError(fmt::format("transcript token {} '{}' is not covered by any chunk", ti,
                                    toks[ti].text));
    for (std::size_t c = 0; c < spans.size(); ++c) {
        spans[c].start_s = c == 0 ? toks[spans[c].tokens.first].start_s : spans[c - 1].end_s;
        spans[c].end_s = c + 1 == spans.size() ? transcript.duration_s
                                               : toks[spans[c].tokens.last - 1].end_s;
    }
    return spans;
}

Eq2Pair eq2_pair_at(const StreamingSample& sample, double t, CompletionRule rule) {
    Eq2Pair pair;
    pair.sample_id = sample.id;
    pair.prefix_end_s = t;
    for (const auto& c : sample.chunks) {
        if (rule == CompletionRule::end_complete) {
            if (c.end_s > t + kTimeEps) break;
            pair.expected_outputs.push_back(c.target_text);
            pair.expected_cutoff_s = c.end_s;
        } else {
            if (!(c.start_s < t)) break;
            pair.expected_outputs.push_back(c.target_text);
            pair.expected_cutoff_s = c.start_s;
        }
    }
    return pair;
}

std::vector<Eq2Pair> make_eq2_pairs(const StreamingSample& sample, std::size_t n,
                                    std::uint64_t seed, CompletionRule rule) {
    if (n < 1) throw DataError("pairs per sample must be at least 1");
    require_valid(sample);
    const double duration = sample.source.duration_s;
    if (!(duration > 0.0))
        throw DataError(fmt::format("sample '{}' has zero duration", sample.id));
    Rng rng(seed);
    std::vector<Eq2Pair> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        // 1 - U[0,1) lies in (0, 1], which excludes the empty prefix.
        const double t = duration * (1.0 - rng.uniform01());
        out.push_back(eq2_pair_at(sample, t, rule));
    }
    return out;
}

}  // namespace sist

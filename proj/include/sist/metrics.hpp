#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "sist/core.hpp"

namespace sist {

enum class EmissionKind { append, rewrite_from };

struct EmissionEvent {
    double time_s = 0.0;
    EmissionKind kind = EmissionKind::append;
    std::string text;
    // Target-token index the rewrite replaces from; unused for appends.
    std::size_t rewrite_index = 0;

    bool operator==(const EmissionEvent&) const = default;
};

struct EmissionLog {
    std::vector<EmissionEvent> events;
    Tokenization tok = Tokenization::whitespace;

    bool operator==(const EmissionLog&) const = default;
};

// Final token sequence after replaying every event.
std::vector<std::string> replay_tokens(const EmissionLog& log);

// Commit time of each final token: the earliest time after which it and every
// token before it never changed. Nondecreasing.
std::vector<double> commit_times(const EmissionLog& log);

struct LatencyReport {
    double al_s = 0.0;
    double laal_s = 0.0;
    double flal_s = 0.0;
    std::size_t tau = 0;
    std::size_t n_hyp = 0;
    std::size_t n_ref = 0;
    // True when no commit reached the source duration and tau fell back to n_hyp.
    bool tau_fallback = false;
};

// Number of tokens scored by AL-style metrics: first i with d_i >= T, else n_hyp.
std::size_t lagging_cutoff_index(const std::vector<double>& d, double source_duration_s,
                                 bool* fell_back = nullptr);

double average_lagging(const std::vector<double>& d, double source_duration_s, std::size_t n_hyp);
double laal(const std::vector<double>& d, double source_duration_s, std::size_t n_hyp,
            std::size_t n_ref);
double flal(const std::vector<double>& d);
double mean_flal(const std::vector<double>& per_session_flal);

LatencyReport latency_report(const EmissionLog& log, double source_duration_s,
                             std::size_t n_ref);

enum class FailureKind { correctness, expressiveness };

struct FragmentAnnotation {
    std::string fragment_text;
    bool valid = true;
    std::optional<FailureKind> failure_kind;

    bool operator==(const FragmentAnnotation&) const = default;
};

struct AnnotationSet {
    std::string session_id;
    std::string annotator_id;
    std::vector<FragmentAnnotation> fragments;

    bool operator==(const AnnotationSet&) const = default;
};

FailureKind parse_failure_kind(std::string_view name);
std::string_view failure_kind_name(FailureKind kind);

// Throws DataError on an empty set or a failure_kind/valid mismatch.
void validate_annotations(const AnnotationSet& ann);

// Throws DataError unless the fragments concatenate to final_translation,
// ignoring whitespace.
void check_fragment_coverage(const AnnotationSet& ann, std::string_view final_translation);

struct VipResult {
    double percent = 0.0;
    std::size_t valid = 0;
    std::size_t total = 0;
};

// Percentage of valid fragments, in [0, 100].
VipResult vip(const AnnotationSet& ann);

// Rounds a percentage to one decimal for reporting.
double round_tenth(double percent);

struct PairCounts {
    long long concordant = 0;
    long long discordant = 0;
    long long ties_x_only = 0;
    long long ties_y_only = 0;
    long long ties_both = 0;
};

// Kendall's tau-b in O(n log n). Throws DataError on length mismatch, fewer
// than two points, non-finite values, or a constant series.
double kendall_tau_b(const std::vector<double>& xs, const std::vector<double>& ys);

// tau-b from precomputed pair counts; shared by the fast path and test oracles.
double tau_b_from_counts(const PairCounts& counts);

}  // namespace sist

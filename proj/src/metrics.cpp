#include "sist/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "sist/error.hpp"

namespace sist {

namespace {

struct ReplayState {
    std::vector<std::string> tokens;
    std::vector<double> stable_since;
};

ReplayState replay(const EmissionLog& log) {
    ReplayState st;
    double last_time = -INFINITY;
    for (std::size_t e = 0; e < log.events.size(); ++e) {
        const auto& ev = log.events[e];
        if (!std::isfinite(ev.time_s))
            throw DataError(fmt::format("malformed emission log: event {} time is not finite", e));
        if (ev.time_s < last_time)
            throw DataError(fmt::format("malformed emission log: event {} time {} goes backwards",
                                        e, format_time(ev.time_s)));
        last_time = ev.time_s;

        auto incoming = tokenize_target(ev.text, log.tok);
        std::size_t keep = st.tokens.size();
        if (ev.kind == EmissionKind::rewrite_from) {
            if (ev.rewrite_index > st.tokens.size())
                throw DataError(fmt::format(
                    "malformed emission log: event {} rewrites from {} but only {} tokens exist", e,
                    ev.rewrite_index, st.tokens.size()));
            keep = ev.rewrite_index;
        }
        std::vector<std::string> next(st.tokens.begin(), st.tokens.begin() + keep);
        next.insert(next.end(), std::make_move_iterator(incoming.begin()),
                    std::make_move_iterator(incoming.end()));

        std::vector<double> since(next.size());
        for (std::size_t p = 0; p < next.size(); ++p) {
            const bool unchanged = p < st.tokens.size() && st.tokens[p] == next[p];
            since[p] = unchanged ? st.stable_since[p] : ev.time_s;
        }
        st.tokens = std::move(next);
        st.stable_since = std::move(since);
    }
    return st;
}

void require_commits(const std::vector<double>& d) {
    if (d.empty()) throw DataError("no output");
}

double lagging(const std::vector<double>& d, double source_duration_s, double rate_denominator) {
    require_commits(d);
    if (!(source_duration_s > 0.0)) throw DataError("source duration must be positive");
    const std::size_t tau = lagging_cutoff_index(d, source_duration_s);
    const double step = source_duration_s / rate_denominator;
    double sum = 0.0;
    for (std::size_t i = 0; i < tau; ++i) sum += d[i] - static_cast<double>(i) * step;
    return sum / static_cast<double>(tau);
}

}  // namespace

std::vector<std::string> replay_tokens(const EmissionLog& log) { return replay(log).tokens; }

std::vector<double> commit_times(const EmissionLog& log) {
    auto d = replay(log).stable_since;
    for (std::size_t i = 1; i < d.size(); ++i) d[i] = std::max(d[i], d[i - 1]);
    return d;
}

std::size_t lagging_cutoff_index(const std::vector<double>& d, double source_duration_s,
                                 bool* fell_back) {
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d[i] >= source_duration_s - kTimeEps) {
            if (fell_back) *fell_back = false;
            return i + 1;
        }
    }
    if (fell_back) *fell_back = true;
    return d.size();
}

double average_lagging(const std::vector<double>& d, double source_duration_s,
                       std::size_t n_hyp) {
    require_commits(d);
    if (n_hyp != d.size())
        throw DataError(fmt::format("n_hyp {} does not match {} commit times", n_hyp, d.size()));
    return lagging(d, source_duration_s, static_cast<double>(n_hyp));
}

double laal(const std::vector<double>& d, double source_duration_s, std::size_t n_hyp,
            std::size_t n_ref) {
    require_commits(d);
    if (n_hyp != d.size())
        throw DataError(fmt::format("n_hyp {} does not match {} commit times", n_hyp, d.size()));
    if (n_ref < 1) throw DataError("reference length must be at least 1");
    return lagging(d, source_duration_s, static_cast<double>(std::max(n_hyp, n_ref)));
}

double flal(const std::vector<double>& d) {
    require_commits(d);
    return d.front();
}

double mean_flal(const std::vector<double>& per_session_flal) {
    require_commits(per_session_flal);
    return std::accumulate(per_session_flal.begin(), per_session_flal.end(), 0.0) /
           static_cast<double>(per_session_flal.size());
}

LatencyReport latency_report(const EmissionLog& log, double source_duration_s,
                             std::size_t n_ref) {
    const auto d = commit_times(log);
    LatencyReport r;
    r.n_hyp = d.size();
    r.n_ref = n_ref;
    r.al_s = average_lagging(d, source_duration_s, r.n_hyp);
    r.laal_s = laal(d, source_duration_s, r.n_hyp, n_ref);
    r.flal_s = flal(d);
    r.tau = lagging_cutoff_index(d, source_duration_s, &r.tau_fallback);
    return r;
}

FailureKind parse_failure_kind(std::string_view name) {
    if (name == "correctness") return FailureKind::correctness;
    if (name == "expressiveness") return FailureKind::expressiveness;
    throw DataError(fmt::format("unknown failure_kind '{}'", name));
}

std::string_view failure_kind_name(FailureKind kind) {
    return kind == FailureKind::correctness ? "correctness" : "expressiveness";
}

void validate_annotations(const AnnotationSet& ann) {
    if (ann.fragments.empty())
        throw DataError(fmt::format("annotation set '{}' has no fragments", ann.session_id));
    for (std::size_t i = 0; i < ann.fragments.size(); ++i) {
        const auto& f = ann.fragments[i];
        if (f.valid && f.failure_kind)
            throw DataError(fmt::format("fragment {} is valid but carries a failure_kind", i));
        if (!f.valid && !f.failure_kind)
            throw DataError(fmt::format("fragment {} is invalid without a failure_kind", i));
    }
}

void check_fragment_coverage(const AnnotationSet& ann, std::string_view final_translation) {
    std::string joined;
    for (const auto& f : ann.fragments) joined += strip_whitespace(f.fragment_text);
    if (joined != strip_whitespace(final_translation))
        throw DataError(fmt::format(
            "fragments of '{}' do not concatenate to the session's final translation",
            ann.session_id));
}

VipResult vip(const AnnotationSet& ann) {
    validate_annotations(ann);
    VipResult r;
    r.total = ann.fragments.size();
    r.valid = static_cast<std::size_t>(std::count_if(
        ann.fragments.begin(), ann.fragments.end(), [](const auto& f) { return f.valid; }));
    r.percent = 100.0 * static_cast<double>(r.valid) / static_cast<double>(r.total);
    return r;
}

double round_tenth(double percent) { return std::round(percent * 10.0) / 10.0; }

double tau_b_from_counts(const PairCounts& c) {
    const double cd = static_cast<double>(c.concordant + c.discordant);
    const double denom = std::sqrt((cd + static_cast<double>(c.ties_x_only)) *
                                   (cd + static_cast<double>(c.ties_y_only)));
    if (denom == 0.0) throw DataError("kendall tau-b undefined for a constant series");
    return static_cast<double>(c.concordant - c.discordant) / denom;
}

namespace {

// Pairs tied within runs of equal values of an already-sorted sequence.
template <class Eq>
long long tied_pairs(std::size_t n, Eq&& equal_to_prev) {
    long long total = 0;
    long long run = 1;
    for (std::size_t i = 1; i <= n; ++i) {
        if (i < n && equal_to_prev(i)) {
            ++run;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    return total;
}

// Sorts v ascending and returns the number of strict inversions.
long long merge_count(std::vector<double>& v, std::vector<double>& scratch, std::size_t lo,
                      std::size_t hi) {
    if (hi - lo < 2) return 0;
    const std::size_t mid = lo + (hi - lo) / 2;
    long long swaps = merge_count(v, scratch, lo, mid) + merge_count(v, scratch, mid, hi);
    std::size_t i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        if (v[j] < v[i]) {
            swaps += static_cast<long long>(mid - i);
            scratch[k++] = v[j++];
        } else {
            scratch[k++] = v[i++];
        }
    }
    while (i < mid) scratch[k++] = v[i++];
    while (j < hi) scratch[k++] = v[j++];
    std::copy(scratch.begin() + static_cast<std::ptrdiff_t>(lo),
              scratch.begin() + static_cast<std::ptrdiff_t>(hi),
              v.begin() + static_cast<std::ptrdiff_t>(lo));
    return swaps;
}

}  // namespace

double kendall_tau_b(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size())
        throw DataError(fmt::format("length mismatch: {} vs {}", xs.size(), ys.size()));
    const std::size_t n = xs.size();
    if (n < 2) throw DataError("kendall tau-b needs at least two points");
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(xs[i]) || !std::isfinite(ys[i]))
            throw DataError(fmt::format("non-finite score at index {}", i));

    // Knight's algorithm: order by (x, y), then count y inversions by merge sort.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return xs[a] != xs[b] ? xs[a] < xs[b] : ys[a] < ys[b];
    });
    const long long n1 = tied_pairs(n, [&](std::size_t i) { return xs[order[i]] == xs[order[i - 1]]; });
    const long long n3 = tied_pairs(n, [&](std::size_t i) {
        return xs[order[i]] == xs[order[i - 1]] && ys[order[i]] == ys[order[i - 1]];
    });

    std::vector<double> y_sorted(n), scratch(n);
    for (std::size_t i = 0; i < n; ++i) y_sorted[i] = ys[order[i]];
    const long long discordant = merge_count(y_sorted, scratch, 0, n);
    const long long n2 = tied_pairs(n, [&](std::size_t i) { return y_sorted[i] == y_sorted[i - 1]; });

    const long long n0 = static_cast<long long>(n) * static_cast<long long>(n - 1) / 2;
    if (n1 == n0 || n2 == n0) throw DataError("kendall tau-b undefined for a constant series");

    PairCounts c;
    c.ties_both = n3;
    c.ties_x_only = n1 - n3;
    c.ties_y_only = n2 - n3;
    c.discordant = discordant;
    c.concordant = n0 - n1 - n2 + n3 - discordant;
    return tau_b_from_counts(c);
}

}  // namespace sist

#include "sist/stream.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "sist/error.hpp"

namespace sist {

bool token_in_window(const TimedToken& token, double window_start_s, double window_end_s) {
    return token.end_s <= window_end_s + kTimeEps && token.start_s > window_start_s - kTimeEps;
}

StreamCursor open_stream(const StreamingSample& sample, double step_s) {
    if (!(step_s > 0.0) || !std::isfinite(step_s)) throw DataError("step must be positive");
    require_valid(sample);
    return StreamCursor(sample, step_s);
}

StreamWindow StreamCursor::current_window() const {
    StreamWindow w;
    w.window_start_s = cutoff_s_;
    w.window_end_s = now_s_;
    w.is_final = now_s_ >= duration_s() - kTimeEps;
    const auto& toks = sample_->source.tokens;
    // Tokens are sorted by start, so skip the committed prefix with a binary search.
    auto first = std::partition_point(toks.begin(), toks.end(), [&](const TimedToken& t) {
        return t.start_s <= cutoff_s_ - kTimeEps;
    });
    for (auto it = first; it != toks.end() && it->start_s <= now_s_ + kTimeEps; ++it)
        if (token_in_window(*it, w.window_start_s, w.window_end_s)) w.tokens.push_back(*it);
    return w;
}

std::optional<StreamWindow> StreamCursor::advance() {
    if (finished_) return std::nullopt;
    ++steps_taken_;
    // Multiply instead of accumulating so long streams do not drift.
    double next = step_s_ * static_cast<double>(steps_taken_);
    if (next >= duration_s() - kTimeEps) next = duration_s();
    now_s_ = next;
    auto w = current_window();
    if (w.is_final) finished_ = true;
    return w;
}

void StreamCursor::set_cutoff(double t_cut) {
    if (!std::isfinite(t_cut) || t_cut < cutoff_s_ - kTimeEps || t_cut > now_s_ + kTimeEps)
        throw DataError(fmt::format("cutoff must be within [prev_cutoff, now]: got {} with [{}, {}]",
                                    format_time(t_cut), format_time(cutoff_s_),
                                    format_time(now_s_)));
    cutoff_s_ = std::clamp(t_cut, cutoff_s_, now_s_);
}

}  // namespace sist

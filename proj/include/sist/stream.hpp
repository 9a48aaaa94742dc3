#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "sist/core.hpp"

namespace sist {

inline constexpr double kDefaultStepS = 1.0;

// Tokens fully heard inside (window_start_s, window_end_s].
struct StreamWindow {
    std::vector<TimedToken> tokens;
    double window_start_s = 0.0;
    double window_end_s = 0.0;
    bool is_final = false;

    bool operator==(const StreamWindow&) const = default;
};

// Virtual-time cursor over one sample. Holds a pointer to the sample, which
// must outlive the cursor.
class StreamCursor {
public:
    double step_s() const noexcept { return step_s_; }
    double now_s() const noexcept { return now_s_; }
    double committed_cutoff_s() const noexcept { return cutoff_s_; }
    double duration_s() const noexcept { return sample_->source.duration_s; }
    bool at_end() const noexcept { return finished_; }
    const StreamingSample& sample() const noexcept { return *sample_; }

    // Grows the stream by one step (clamped to the duration) and returns the
    // uncommitted window. Returns nullopt once the final window was handed out.
    std::optional<StreamWindow> advance();

    // Window over (committed_cutoff_s, now_s] without moving time.
    StreamWindow current_window() const;

    // Commits translation up to t_cut; cutoffs never move backwards.
    void set_cutoff(double t_cut);

private:
    friend StreamCursor open_stream(const StreamingSample& sample, double step_s);
    StreamCursor(const StreamingSample& sample, double step_s)
        : sample_(&sample), step_s_(step_s) {}

    const StreamingSample* sample_;
    double step_s_;
    double now_s_ = 0.0;
    double cutoff_s_ = 0.0;
    std::uint64_t steps_taken_ = 0;
    bool finished_ = false;
};

// Throws DataError for an invalid sample or a non-positive step.
StreamCursor open_stream(const StreamingSample& sample, double step_s = kDefaultStepS);

// Containment rule shared by windows and tests: a token is heard once it has ended.
bool token_in_window(const TimedToken& token, double window_start_s, double window_end_s);

}  // namespace sist

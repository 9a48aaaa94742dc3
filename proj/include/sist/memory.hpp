#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace sist {

inline constexpr std::size_t kDefaultContextRounds = 8;

// One committed round: what was said, what was emitted, and where it stopped.
struct RoundRecord {
    std::size_t round_index = 0;
    std::optional<std::string> transcription;
    std::string translation;
    double cutoff_s = 0.0;
    std::vector<std::string> retrieved;

    bool operator==(const RoundRecord&) const = default;
};

// Round memory. Only rounds that produced output are stored.
class Memory {
public:
    explicit Memory(std::size_t max_context_rounds = kDefaultContextRounds)
        : max_context_rounds_(max_context_rounds) {}

    // The most recent max_context_rounds records, oldest first.
    std::vector<RoundRecord> load() const;

    // Throws DataError for wait rounds, out-of-order indices, or a cutoff
    // earlier than the last stored one; memory is left unchanged.
    void update(RoundRecord record);

    const std::vector<RoundRecord>& records() const noexcept { return records_; }
    std::size_t max_context_rounds() const noexcept { return max_context_rounds_; }

    bool operator==(const Memory&) const = default;

private:
    std::vector<RoundRecord> records_;
    std::size_t max_context_rounds_;
};

}  // namespace sist

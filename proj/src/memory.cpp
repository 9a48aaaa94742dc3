#include "sist/memory.hpp"

#include <fmt/format.h>

#include "sist/core.hpp"
#include "sist/error.hpp"

namespace sist {

std::vector<RoundRecord> Memory::load() const {
    const std::size_t n = std::min(records_.size(), max_context_rounds_);
    return {records_.end() - static_cast<std::ptrdiff_t>(n), records_.end()};
}

void Memory::update(RoundRecord record) {
    if (record.translation.empty())
        throw DataError(fmt::format("round {} has no translation; wait rounds are not stored",
                                    record.round_index));
    if (!records_.empty()) {
        const auto& last = records_.back();
        if (record.round_index <= last.round_index)
            throw DataError(fmt::format("round {} stored after round {}", record.round_index,
                                        last.round_index));
        if (record.cutoff_s < last.cutoff_s - kTimeEps)
            throw DataError(fmt::format("round {} cutoff {} precedes stored cutoff {}",
                                        record.round_index, format_time(record.cutoff_s),
                                        format_time(last.cutoff_s)));
    }
    records_.push_back(std::move(record));
}

}  // namespace sist

#pragma once

// Small hand-built samples shared by unit and acceptance tests.

#include <string>
#include <vector>

#include "sist/core.hpp"

namespace sist::testing {

// Chunks ending at 3, 6 and 9 over a 10 s stream, targets y1..y3.
inline StreamingSample three_chunk_sample() {
    StreamingSample s;
    s.id = "three";
    s.source.lang = "en";
    s.source.duration_s = 10.0;
    s.source.tokens = {{"a", 0.5, 1.0}, {"b", 1.5, 3.0}, {"c", 3.5, 4.5},
                       {"d", 5.0, 6.0}, {"e", 6.5, 8.0}, {"f", 8.2, 9.0}};
    s.chunks = {{0.0, 3.0, "a b", "y1"}, {3.0, 6.0, "c d", "y2"}, {6.0, 9.0, "e f", "y3"}};
    return s;
}

inline std::vector<TimedToken> uniform_tokens(std::size_t n, double len, double gap,
                                              const std::string& prefix = "t") {
    std::vector<TimedToken> out;
    double t = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back({prefix + std::to_string(i), t, t + len});
        t += len + gap;
    }
    return out;
}

}  // namespace sist::testing

#include "sist/core.hpp"

#include <charconv>
#include <cmath>

#include <fmt/format.h>

#include "sist/error.hpp"

namespace sist {

const char* error_kind_name(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::usage: return "usage";
        case ErrorKind::data: return "data";
        case ErrorKind::backend: return "backend";
    }
    return "unknown";
}

Tokenization default_tokenization(std::string_view lang) {
    auto base = lang.substr(0, lang.find_first_of("-_"));
    if (base == "zh" || base == "ja" || base == "ko") return Tokenization::per_character;
    return Tokenization::whitespace;
}

Tokenization parse_tokenization(std::string_view name) {
    if (name == "ws" || name == "whitespace") return Tokenization::whitespace;
    if (name == "char" || name == "per_character") return Tokenization::per_character;
    throw UsageError(fmt::format("unknown tokenization '{}' (expected ws or char)", name));
}

std::string_view tokenization_name(Tokenization tok) {
    return tok == Tokenization::whitespace ? "ws" : "char";
}

std::string format_time(double seconds) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), seconds);
    std::string s(buf, end);
    if (std::isfinite(seconds) && s.find_first_of(".e") == std::string::npos) s += ".0";
    return s;
}

std::vector<std::string> validate_sample(const StreamingSample& sample) {
    std::vector<std::string> out;
    const auto& src = sample.source;
    const auto& toks = src.tokens;

    if (sample.id.empty()) out.emplace_back("sample id is empty");
    if (!(src.duration_s >= 0.0) || !std::isfinite(src.duration_s))
        out.push_back(fmt::format("duration {} is not a finite nonnegative time",
                                  format_time(src.duration_s)));

    for (std::size_t i = 0; i < toks.size(); ++i) {
        const auto& t = toks[i];
        if (t.text.empty()) out.push_back(fmt::format("token {} text is empty", i));
        if (!(t.start_s >= 0.0))
            out.push_back(fmt::format("token {} start {} is negative", i, format_time(t.start_s)));
        if (!(t.end_s >= t.start_s))
            out.push_back(fmt::format("token {} end {} < start {}", i, format_time(t.end_s),
                                      format_time(t.start_s)));
        if (i + 1 < toks.size()) {
            const auto& next = toks[i + 1];
            if (next.start_s < t.start_s)
                out.push_back(fmt::format("token {} start {} < token {} start {}", i + 1,
                                          format_time(next.start_s), i, format_time(t.start_s)));
            else if (t.end_s > next.start_s + kTimeEps)
                out.push_back(fmt::format("token {} end {} overlaps token {} start {}", i,
                                          format_time(t.end_s), i + 1,
                                          format_time(next.start_s)));
        }
    }
    if (!toks.empty() && toks.back().end_s > src.duration_s + kTimeEps)
        out.push_back(fmt::format("token {} end {} exceeds duration {}", toks.size() - 1,
                                  format_time(toks.back().end_s), format_time(src.duration_s)));

    const auto& chunks = sample.chunks;
    for (std::size_t j = 0; j < chunks.size(); ++j) {
        const auto& c = chunks[j];
        if (!(c.start_s < c.end_s))
            out.push_back(fmt::format("chunk {} start {} is not before end {}", j,
                                      format_time(c.start_s), format_time(c.end_s)));
        if (c.start_s < -kTimeEps || c.end_s > src.duration_s + kTimeEps)
            out.push_back(fmt::format("chunk {} span [{}, {}) lies outside [0, {}]", j,
                                      format_time(c.start_s), format_time(c.end_s),
                                      format_time(src.duration_s)));
        if (c.target_text.empty())
            out.push_back(fmt::format("chunk {} target_text is empty", j));
        if (j + 1 < chunks.size() && std::abs(chunks[j + 1].start_s - c.end_s) > kTimeEps)
            out.push_back(fmt::format("chunk {} start {} != chunk {} end {}", j + 1,
                                      format_time(chunks[j + 1].start_s), j,
                                      format_time(c.end_s)));
    }
    return out;
}

void require_valid(const StreamingSample& sample) {
    auto violations = validate_sample(sample);
    if (!violations.empty())
        throw DataError(fmt::format("invalid sample '{}': {}", sample.id, violations.front()));
}

std::vector<std::string> utf8_chars(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < text.size()) {
        auto lead = static_cast<unsigned char>(text[i]);
        std::size_t len = 1;
        if (lead >= 0xF0 && lead < 0xF8) len = 4;
        else if (lead >= 0xE0) len = lead < 0xF0 ? 3 : 1;
        else if (lead >= 0xC0) len = 2;
        if (i + len > text.size()) len = 1;
        for (std::size_t k = 1; k < len; ++k) {
            if ((static_cast<unsigned char>(text[i + k]) & 0xC0) != 0x80) {
                len = 1;
                break;
            }
        }
        out.emplace_back(text.substr(i, len));
        i += len;
    }
    return out;
}

bool is_space_char(std::string_view c) {
    if (c.size() == 1) {
        switch (c[0]) {
            case ' ': case '\t': case '\n': case '\r': case '\v': case '\f': return true;
            default: return false;
        }
    }
    return c == "　";
}

std::string strip_whitespace(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    for (const auto& c : utf8_chars(text))
        if (!is_space_char(c)) out += c;
    return out;
}

std::vector<std::string> tokenize_target(std::string_view text, Tokenization tok) {
    std::vector<std::string> out;
    std::string current;
    for (auto& c : utf8_chars(text)) {
        if (is_space_char(c)) {
            if (!current.empty()) out.push_back(std::move(current));
            current.clear();
        } else if (tok == Tokenization::per_character) {
            out.push_back(std::move(c));
        } else {
            current += c;
        }
    }
    if (!current.empty()) out.push_back(std::move(current));
    return out;
}

std::string join_target(const std::vector<std::string>& pieces, Tokenization tok) {
    std::string out;
    for (const auto& p : pieces) {
        if (p.empty()) continue;
        if (!out.empty() && tok == Tokenization::whitespace) out += ' ';
        out += p;
    }
    return out;
}

}  // namespace sist

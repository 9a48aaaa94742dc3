#include "sist/backends.hpp"

#include <cmath>

#include <fmt/format.h>

#include "sist/error.hpp"

namespace sist {

std::string default_instruction(const SessionMode& mode) {
    std::string s;
    if (!mode.streaming)
        s = "The complete speech is given. Translate it into the target language.";
    else
        s = "The speech is still arriving. Translate only the segments whose meaning is "
            "complete, and report the time at which the last translated segment ends. "
            "Output nothing if no segment is complete yet.";
    if (mode.cot_transcription) s += " Transcribe the segments first, then translate them.";
    if (mode.use_context)
        s += " Earlier translations are provided as context; do not repeat them.";
    return s;
}

void check_response(const BackendRequest& req, const BackendResponse& resp) {
    const auto& w = req.window;
    if (resp.is_wait()) {
        if (std::abs(resp.cutoff_s - w.window_start_s) > kTimeEps)
            throw ProtocolError(fmt::format("wait response moved the cutoff to {} (window start {})",
                                            format_time(resp.cutoff_s),
                                            format_time(w.window_start_s)));
        return;
    }
    if (!(resp.cutoff_s > w.window_start_s + kTimeEps && resp.cutoff_s <= w.window_end_s + kTimeEps))
        throw ProtocolError(fmt::format("cutoff {} outside ({}, {}]", format_time(resp.cutoff_s),
                                        format_time(w.window_start_s),
                                        format_time(w.window_end_s)));
    if (req.mode.cot_transcription != resp.transcription.has_value())
        throw ProtocolError(req.mode.cot_transcription
                                ? "transcription missing in chain-of-thought mode"
                                : "transcription present outside chain-of-thought mode");
}

BackendResponse oracle_respond(const BackendRequest& req,
                               const std::vector<SemanticChunk>& chunks, Tokenization tok) {
    const auto& w = req.window;
    // The window must resume at a chunk boundary: before the first chunk or at a chunk end.
    const bool before_first = chunks.empty() || w.window_start_s <= chunks.front().start_s + kTimeEps;
    bool aligned = before_first;
    for (std::size_t j = 0; !aligned && j < chunks.size(); ++j)
        aligned = std::abs(chunks[j].end_s - w.window_start_s) <= kTimeEps;
    if (!aligned)
        throw DataError(fmt::format("window start {} is not a chunk boundary",
                                    format_time(w.window_start_s)));

    BackendResponse resp;
    resp.cutoff_s = w.window_start_s;
    std::vector<std::string> targets, sources;
    for (const auto& c : chunks) {
        if (c.end_s <= w.window_start_s + kTimeEps) continue;
        if (!req.is_final && c.end_s > w.window_end_s + kTimeEps) break;
        targets.push_back(c.target_text);
        sources.push_back(c.source_text);
        resp.cutoff_s = std::min(c.end_s, w.window_end_s);
    }
    if (targets.empty()) {
        if (req.mode.cot_transcription) resp.transcription = std::nullopt;
        return resp;
    }
    resp.translation = join_target(targets, tok);
    if (req.mode.cot_transcription) {
        std::string t;
        for (const auto& s : sources) {
            if (!t.empty() && !s.empty()) t += ' ';
            t += s;
        }
        resp.transcription = std::move(t);
    }
    return resp;
}

std::string pass_through(const std::string& source_token) { return "[" + source_token + "]"; }

BackendResponse pause_respond(const BackendRequest& req, const Lexicon& lexicon,
                              double gap_threshold_s, Tokenization tok) {
    const auto& w = req.window;
    const auto& toks = w.tokens;
    BackendResponse resp;
    resp.cutoff_s = w.window_start_s;

    std::size_t upto = 0;  // number of tokens to translate
    if (req.is_final) {
        upto = toks.size();
    } else {
        for (std::size_t i = 0; i + 1 < toks.size(); ++i)
            if (toks[i + 1].start_s - toks[i].end_s >= gap_threshold_s - kTimeEps) upto = i + 1;
    }
    // A token ending exactly at the window start cannot move the cutoff forward.
    while (upto > 0 && toks[upto - 1].end_s <= w.window_start_s + kTimeEps) --upto;
    if (upto == 0) return resp;

    std::vector<std::string> out;
    std::string transcript;
    for (std::size_t i = 0; i < upto; ++i) {
        auto it = lexicon.find(toks[i].text);
        out.push_back(it != lexicon.end() ? it->second : pass_through(toks[i].text));
        if (!transcript.empty()) transcript += ' ';
        transcript += toks[i].text;
    }
    resp.translation = join_target(out, tok);
    if (resp.translation.empty()) return BackendResponse{std::nullopt, {}, w.window_start_s};
    resp.cutoff_s = toks[upto - 1].end_s;
    if (req.mode.cot_transcription) resp.transcription = std::move(transcript);
    return resp;
}

namespace {

// Keeps every entry on one line so line counts in the prompt match item counts.
std::string one_line(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string build_prompt(const BackendRequest& req) {
    std::string p;
    p += "### Instruction\n";
    p += one_line(req.instruction.empty() ? default_instruction(req.mode) : req.instruction);
    p += '\n';

    if (req.mode.use_context && !req.context.empty()) {
        p += "### Context\n";
        for (const auto& r : req.context) {
            p += fmt::format("[{}] ", r.round_index);
            if (r.transcription) p += fmt::format("transcription: {} | ", one_line(*r.transcription));
            p += fmt::format("translation: {}\n", one_line(r.translation));
        }
    }
    if (!req.retrieved.empty()) {
        p += "### Knowledge\n";
        for (const auto& k : req.retrieved)
            p += fmt::format("{} == {}\n", one_line(k.key), one_line(k.value));
    }

    const auto& w = req.window;
    p += fmt::format("### Speech [{}-{}]{}\n", format_time(w.window_start_s),
                     format_time(w.window_end_s), req.is_final ? " final" : "");
    for (const auto& t : w.tokens)
        p += fmt::format("{}[{}-{}]\n", one_line(t.text), format_time(t.start_s), format_time(t.end_s));

    p += "### Response\n";
    if (req.mode.cot_transcription)
        p += "Reply with JSON {\"transcription\": string, \"translation\": string, "
             "\"cutoff_ms\": integer}. Write the transcription before the translation.\n";
    else
        p += "Reply with JSON {\"translation\": string, \"cutoff_ms\": integer}.\n";
    p += "cutoff_ms is the end of the last translated segment in milliseconds from stream "
         "start. An empty translation means wait.\n";
    return p;
}

}  // namespace sist

#include "sist/io.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "sist/error.hpp"

namespace sist::io {

namespace {

template <class T>
T field(const json& j, const char* key) {
    if (!j.is_object()) throw DataError("expected a JSON object");
    auto it = j.find(key);
    if (it == j.end()) throw DataError(fmt::format("missing field '{}'", key));
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw DataError(fmt::format("field '{}' has the wrong type", key));
    }
}

template <class T>
std::optional<T> opt_field(const json& j, const char* key) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return field<T>(j, key);
}

json token_to_json(const TimedToken& t) {
    return {{"text", t.text}, {"start_s", t.start_s}, {"end_s", t.end_s}};
}

TimedToken token_from_json(const json& j) {
    return {field<std::string>(j, "text"), field<double>(j, "start_s"), field<double>(j, "end_s")};
}

std::vector<std::vector<std::string>> read_tsv(const fs::path& path, std::size_t columns) {
    std::istringstream in(read_file(path));
    std::vector<std::vector<std::string>> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::size_t pos = 0;
        for (std::size_t c = 0; c + 1 < columns; ++c) {
            auto tab = line.find('\t', pos);
            if (tab == std::string::npos)
                throw DataError(fmt::format("{}:{}: expected {} tab-separated columns", path.string(),
                                            lineno, columns));
            cols.push_back(line.substr(pos, tab - pos));
            pos = tab + 1;
        }
        cols.push_back(line.substr(pos));
        rows.push_back(std::move(cols));
    }
    return rows;
}

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

Matrix matrix_from_json(const json& j, const char* name, std::size_t dim) {
    const auto d = static_cast<Eigen::Index>(dim);
    if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != d)
        throw DataError(fmt::format("{} must have {} rows", name, dim));
    Matrix m(d, d);
    for (Eigen::Index r = 0; r < d; ++r) {
        const auto& row = j[static_cast<std::size_t>(r)];
        if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != d)
            throw DataError(fmt::format("{} row {} must have {} entries", name, r, dim));
        for (Eigen::Index c = 0; c < d; ++c) {
            const auto& v = row[static_cast<std::size_t>(c)];
            if (!v.is_number()) throw DataError(fmt::format("{}[{}][{}] is not a number", name, r, c));
            m(r, c) = v.get<double>();
        }
    }
    return m;
}

}  // namespace

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot read '{}'", path.string()));
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError(fmt::format("cannot write '{}'", tmp.string()));
        out << content;
        out.flush();
        if (!out) throw DataError(fmt::format("write to '{}' failed", tmp.string()));
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw DataError(fmt::format("cannot move output into '{}': {}", path.string(), ec.message()));
    }
}

std::vector<json> read_jsonl(const fs::path& path) {
    std::istringstream in(read_file(path));
    std::vector<json> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            rows.push_back(json::parse(line));
        } catch (const json::parse_error& e) {
            throw DataError(fmt::format("{}:{}: {}", path.string(), lineno, e.what()));
        }
    }
    return rows;
}

std::string to_jsonl(const std::vector<json>& rows) {
    std::string out;
    for (const auto& r : rows) {
        out += r.dump();
        out += '\n';
    }
    return out;
}

json sample_to_json(const StreamingSample& s) {
    json tokens = json::array();
    for (const auto& t : s.source.tokens) tokens.push_back(token_to_json(t));
    json chunks = json::array();
    for (const auto& c : s.chunks)
        chunks.push_back({{"start_s", c.start_s},
                          {"end_s", c.end_s},
                          {"source_text", c.source_text},
                          {"target_text", c.target_text}});
    json j;
    j["id"] = s.id;
    j["lang"] = s.source.lang;
    j["duration_s"] = s.source.duration_s;
    j["tokens"] = std::move(tokens);
    j["chunks"] = std::move(chunks);
    if (s.reference_translation) j["reference_translation"] = *s.reference_translation;
    if (s.domain_tag) j["domain_tag"] = *s.domain_tag;
    return j;
}

StreamingSample sample_from_json(const json& j) {
    StreamingSample s;
    s.id = field<std::string>(j, "id");
    s.source.lang = field<std::string>(j, "lang");
    s.source.duration_s = field<double>(j, "duration_s");
    for (const auto& t : field<json>(j, "tokens")) s.source.tokens.push_back(token_from_json(t));
    for (const auto& c : field<json>(j, "chunks"))
        s.chunks.push_back({field<double>(c, "start_s"), field<double>(c, "end_s"),
                            field<std::string>(c, "source_text"),
                            field<std::string>(c, "target_text")});
    s.reference_translation = opt_field<std::string>(j, "reference_translation");
    s.domain_tag = opt_field<std::string>(j, "domain_tag");
    return s;
}

std::vector<StreamingSample> read_samples(const fs::path& path) {
    const auto rows = read_jsonl(path);
    std::vector<StreamingSample> out;
    out.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        try {
            out.push_back(sample_from_json(rows[i]));
        } catch (const DataError& e) {
            throw DataError(fmt::format("{}: sample {}: {}", path.string(), i, e.what()));
        }
    }
    return out;
}

json eq2_pair_to_json(const Eq2Pair& p) {
    json j;
    j["sample_id"] = p.sample_id;
    j["prefix_end_s"] = p.prefix_end_s;
    j["expected_outputs"] = p.expected_outputs;
    j["expected_cutoff_s"] = p.expected_cutoff_s;
    return j;
}

Eq2Pair eq2_pair_from_json(const json& j) {
    return {field<std::string>(j, "sample_id"), field<double>(j, "prefix_end_s"),
            field<std::vector<std::string>>(j, "expected_outputs"),
            field<double>(j, "expected_cutoff_s")};
}

json emission_event_to_json(const EmissionEvent& e) {
    json j;
    j["time_s"] = e.time_s;
    j["kind"] = e.kind == EmissionKind::append ? "append" : "rewrite_from";
    j["text"] = e.text;
    if (e.kind == EmissionKind::rewrite_from) j["rewrite_index"] = e.rewrite_index;
    return j;
}

EmissionEvent emission_event_from_json(const json& j) {
    EmissionEvent e;
    e.time_s = field<double>(j, "time_s");
    const auto kind = field<std::string>(j, "kind");
    if (kind == "append") {
        e.kind = EmissionKind::append;
    } else if (kind == "rewrite_from") {
        e.kind = EmissionKind::rewrite_from;
        const auto idx = field<long long>(j, "rewrite_index");
        if (idx < 0) throw DataError("rewrite_index is negative");
        e.rewrite_index = static_cast<std::size_t>(idx);
    } else {
        throw DataError(fmt::format("unknown emission kind '{}'", kind));
    }
    e.text = field<std::string>(j, "text");
    return e;
}

std::string emission_log_to_jsonl(const EmissionLog& log) {
    std::vector<json> rows;
    for (const auto& e : log.events) rows.push_back(emission_event_to_json(e));
    return to_jsonl(rows);
}

EmissionLog read_emission_log(const fs::path& path, Tokenization tok) {
    EmissionLog log;
    log.tok = tok;
    const auto rows = read_jsonl(path);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        try {
            log.events.push_back(emission_event_from_json(rows[i]));
        } catch (const DataError& e) {
            throw DataError(fmt::format("{}: event {}: {}", path.string(), i, e.what()));
        }
    }
    return log;
}

json round_record_to_json(const RoundRecord& r) {
    json j;
    j["round_index"] = r.round_index;
    if (r.transcription) j["transcription"] = *r.transcription;
    j["translation"] = r.translation;
    j["cutoff_s"] = r.cutoff_s;
    j["retrieved"] = r.retrieved;
    return j;
}

RoundRecord round_record_from_json(const json& j) {
    RoundRecord r;
    r.round_index = field<std::size_t>(j, "round_index");
    r.transcription = opt_field<std::string>(j, "transcription");
    r.translation = field<std::string>(j, "translation");
    r.cutoff_s = field<double>(j, "cutoff_s");
    r.retrieved = opt_field<std::vector<std::string>>(j, "retrieved").value_or(std::vector<std::string>{});
    return r;
}

json session_result_to_json(const SessionResult& r) {
    json rounds = json::array();
    for (const auto& rec : r.memory.records()) rounds.push_back(round_record_to_json(rec));
    json events = json::array();
    for (const auto& e : r.emission_log.events) events.push_back(emission_event_to_json(e));
    json j;
    j["session_id"] = r.session_id;
    j["final_translation"] = r.final_translation;
    j["rounds_run"] = r.rounds_run;
    j["tokenization"] = tokenization_name(r.emission_log.tok);
    j["max_context_rounds"] = r.memory.max_context_rounds();
    j["rounds"] = std::move(rounds);
    j["emission_log"] = std::move(events);
    return j;
}

SessionResult session_result_from_json(const json& j) {
    SessionResult r;
    r.session_id = field<std::string>(j, "session_id");
    r.final_translation = field<std::string>(j, "final_translation");
    r.rounds_run = field<std::size_t>(j, "rounds_run");
    r.emission_log.tok = parse_tokenization(field<std::string>(j, "tokenization"));
    r.memory = Memory(opt_field<std::size_t>(j, "max_context_rounds").value_or(kDefaultContextRounds));
    for (const auto& rec : field<json>(j, "rounds")) r.memory.update(round_record_from_json(rec));
    for (const auto& e : field<json>(j, "emission_log"))
        r.emission_log.events.push_back(emission_event_from_json(e));
    return r;
}

json annotations_to_json(const AnnotationSet& a) {
    json frags = json::array();
    for (const auto& f : a.fragments) {
        json fj;
        fj["fragment_text"] = f.fragment_text;
        fj["valid"] = f.valid;
        if (f.failure_kind) fj["failure_kind"] = failure_kind_name(*f.failure_kind);
        frags.push_back(std::move(fj));
    }
    json j;
    j["session_id"] = a.session_id;
    j["annotator_id"] = a.annotator_id;
    j["fragments"] = std::move(frags);
    return j;
}

AnnotationSet annotations_from_json(const json& j) {
    AnnotationSet a;
    a.session_id = field<std::string>(j, "session_id");
    a.annotator_id = field<std::string>(j, "annotator_id");
    for (const auto& f : field<json>(j, "fragments")) {
        FragmentAnnotation fa;
        fa.fragment_text = field<std::string>(f, "fragment_text");
        fa.valid = field<bool>(f, "valid");
        if (auto k = opt_field<std::string>(f, "failure_kind")) fa.failure_kind = parse_failure_kind(*k);
        a.fragments.push_back(std::move(fa));
    }
    return a;
}

KnowledgeBase read_knowledge_base(const fs::path& path) {
    KnowledgeBase kb;
    for (auto& row : read_tsv(path, 2)) {
        try {
            kb.add({std::move(row[0]), std::move(row[1])});
        } catch (const DataError& e) {
            throw DataError(fmt::format("{}: {}", path.string(), e.what()));
        }
    }
    return kb;
}

std::string knowledge_base_to_tsv(const KnowledgeBase& kb) {
    std::string out;
    for (const auto& it : kb.items()) out += it.key + '\t' + it.value + '\n';
    return out;
}

Lexicon read_lexicon(const fs::path& path) {
    Lexicon lex;
    for (auto& row : read_tsv(path, 2)) lex.insert_or_assign(std::move(row[0]), std::move(row[1]));
    return lex;
}

std::vector<std::pair<std::string, double>> read_scores(const fs::path& path) {
    std::vector<std::pair<std::string, double>> out;
    for (auto& row : read_tsv(path, 2)) {
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(row[1], &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != row[1].size())
            throw DataError(fmt::format("{}: score '{}' for '{}' is not a number", path.string(),
                                        row[1], row[0]));
        out.emplace_back(std::move(row[0]), v);
    }
    return out;
}

json feature_config_to_json(const FeatureConfig& cfg) {
    json j;
    j["n_gram"] = cfg.n_gram;
    j["hash_buckets"] = cfg.hash_buckets;
    j["dim"] = cfg.dim;
    j["heads"] = cfg.heads;
    j["projection_seed"] = cfg.projection_seed;
    j["pooling"] = cfg.pooling == Pooling::mean ? "mean" : "max";
    return j;
}

FeatureConfig feature_config_from_json(const json& j) {
    FeatureConfig cfg;
    if (auto v = opt_field<std::size_t>(j, "n_gram")) cfg.n_gram = *v;
    if (auto v = opt_field<std::size_t>(j, "hash_buckets")) cfg.hash_buckets = *v;
    if (auto v = opt_field<std::size_t>(j, "dim")) cfg.dim = *v;
    if (auto v = opt_field<std::size_t>(j, "heads")) cfg.heads = *v;
    if (auto v = opt_field<std::uint64_t>(j, "projection_seed")) cfg.projection_seed = *v;
    if (auto v = opt_field<std::string>(j, "pooling")) {
        if (*v == "mean") cfg.pooling = Pooling::mean;
        else if (*v == "max") cfg.pooling = Pooling::max;
        else throw DataError(fmt::format("unknown pooling '{}'", *v));
    }
    validate_feature_config(cfg);
    return cfg;
}

json params_to_json(const FusionParams& p, const FeatureConfig& cfg) {
    json j;
    j["config"] = feature_config_to_json(cfg);
    j["W_q"] = matrix_to_json(p.w_q);
    j["W_k"] = matrix_to_json(p.w_k);
    j["W_v"] = matrix_to_json(p.w_v);
    json w = json::array();
    for (Eigen::Index i = 0; i < p.w.size(); ++i) w.push_back(p.w[i]);
    j["w"] = std::move(w);
    j["b"] = p.b;
    return j;
}

std::pair<FusionParams, FeatureConfig> params_from_json(const json& j) {
    const auto cfg = feature_config_from_json(field<json>(j, "config"));
    FusionParams p;
    p.w_q = matrix_from_json(field<json>(j, "W_q"), "W_q", cfg.dim);
    p.w_k = matrix_from_json(field<json>(j, "W_k"), "W_k", cfg.dim);
    p.w_v = matrix_from_json(field<json>(j, "W_v"), "W_v", cfg.dim);
    const auto w = field<std::vector<double>>(j, "w");
    if (w.size() != cfg.dim) throw DataError(fmt::format("w must have {} entries", cfg.dim));
    p.w = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
    p.b = field<double>(j, "b");
    validate_params(p, cfg);
    return {std::move(p), cfg};
}

json rules_to_json(const SegmentationRules& r) {
    std::string punct;
    for (const auto& c : r.boundary_punctuation) punct += c;
    json j;
    j["pause_gap_s"] = r.pause_gap_s;
    j["boundary_punctuation"] = punct;
    j["max_chunk_tokens"] = r.max_chunk_tokens;
    return j;
}

SegmentationRules rules_from_json(const json& j) {
    SegmentationRules r;
    if (auto v = opt_field<double>(j, "pause_gap_s")) r.pause_gap_s = *v;
    if (auto v = opt_field<std::string>(j, "boundary_punctuation")) r.boundary_punctuation = utf8_chars(*v);
    if (auto v = opt_field<std::size_t>(j, "max_chunk_tokens")) r.max_chunk_tokens = *v;
    validate_rules(r);
    return r;
}

void apply_session_config(const json& j, SessionConfig& cfg) {
    if (!j.is_object()) throw DataError("session config must be a JSON object");
    if (auto v = opt_field<double>(j, "step_s")) cfg.step_s = *v;
    if (auto v = opt_field<bool>(j, "cot_transcription")) cfg.mode.cot_transcription = *v;
    if (auto v = opt_field<bool>(j, "streaming")) cfg.mode.streaming = *v;
    if (auto v = opt_field<bool>(j, "use_context")) cfg.mode.use_context = *v;
    if (auto v = opt_field<bool>(j, "use_retrieval")) cfg.mode.use_retrieval = *v;
    if (auto v = opt_field<std::size_t>(j, "retriever_k")) cfg.retriever_k = *v;
    if (auto v = opt_field<std::uint64_t>(j, "seed")) cfg.seed = *v;
    if (auto v = opt_field<std::size_t>(j, "max_context_rounds")) cfg.max_context_rounds = *v;
    if (auto v = opt_field<double>(j, "processing_latency_s")) cfg.processing_latency_s = *v;
    if (auto v = opt_field<std::string>(j, "tokenization")) cfg.target_tokenization = parse_tokenization(*v);
    if (auto v = opt_field<std::string>(j, "instruction")) cfg.instruction = *v;
}

json session_config_to_json(const SessionConfig& cfg) {
    json j;
    j["step_s"] = cfg.step_s;
    j["cot_transcription"] = cfg.mode.cot_transcription;
    j["streaming"] = cfg.mode.streaming;
    j["use_context"] = cfg.mode.use_context;
    j["use_retrieval"] = cfg.mode.use_retrieval;
    j["retriever_k"] = cfg.retriever_k;
    j["seed"] = cfg.seed;
    j["max_context_rounds"] = cfg.max_context_rounds;
    j["processing_latency_s"] = cfg.processing_latency_s;
    j["tokenization"] = tokenization_name(cfg.target_tokenization);
    if (!cfg.instruction.empty()) j["instruction"] = cfg.instruction;
    return j;
}

}  // namespace sist::io

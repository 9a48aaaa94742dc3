#include "sist/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "sist/io.hpp"
#include "sist/llm_client.hpp"
#include "sist/rng.hpp"

namespace sist {

nlohmann::ordered_json export_annotation_bundle(const SessionResult& result,
                                                const StreamingSample& sample) {
    if (result.final_translation.empty()) throw DataError("nothing to annotate");
    if (result.memory.records().empty())
        throw DataError(fmt::format("session '{}' result has no rounds", result.session_id));
    const auto tok = result.emission_log.tok;
    std::vector<std::size_t> breaks;
    std::size_t offset = 0;
    std::string rebuilt;
    std::vector<std::string> pieces;
    for (const auto& rec : result.memory.records()) {
        if (offset > 0) breaks.push_back(offset);
        offset += tokenize_target(rec.translation, tok).size();
        pieces.push_back(rec.translation);
    }
    if (strip_whitespace(join_target(pieces, tok)) != strip_whitespace(result.final_translation))
        throw DataError(fmt::format("session '{}' result is incomplete: rounds do not add up to "
                                    "the final translation",
                                    result.session_id));
    io::json tokens = io::json::array();
    for (const auto& t : sample.source.tokens)
        tokens.push_back({{"text", t.text}, {"start_s", t.start_s}, {"end_s", t.end_s}});
    io::json j;
    j["session_id"] = result.session_id;
    j["tokenization"] = tokenization_name(tok);
    j["source_tokens"] = std::move(tokens);
    j["final_translation"] = result.final_translation;
    j["suggested_breaks"] = breaks;
    return j;
}

namespace cli {

namespace {

using io::json;
namespace fs = std::filesystem;

constexpr const char* kFormatsHelp = R"(File formats:
  samples (JSONL)      {id, lang, duration_s, tokens[{text,start_s,end_s}],
                        chunks[{start_s,end_s,source_text,target_text}],
                        reference_translation?, domain_tag?}
  Eq2 pairs (JSONL)    {sample_id, prefix_end_s, expected_outputs[], expected_cutoff_s}
  emission log (JSONL) {time_s, kind: append|rewrite_from, text, rewrite_index?}
  annotations (JSON)   {session_id, annotator_id,
                        fragments[{fragment_text, valid, failure_kind?}]}
  knowledge base (TSV) key<TAB>value
  lexicon (TSV)        source<TAB>target
  scores (TSV)         session_id<TAB>score
  LLM wire protocol    POST JSON {session_id, round, is_final, mode, instruction, context,
                        knowledge, window, prompt} -> {transcription?, translation, cutoff_ms}

Configuration precedence: flags > --config file > environment > defaults.
Environment: SIST_SEED, SIST_STEP_S, SIST_TOKENIZATION, SIST_ENDPOINT, SIST_JOBS,
             CLASI_LLM_TOKEN (bearer token for the LLM endpoint).
Exit codes: 0 ok, 1 usage, 2 data/validation, 3 backend/transport.)";

std::optional<std::string> env(const char* name) {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
}

template <class T>
T env_or(const char* name, T fallback) {
    auto v = env(name);
    if (!v) return fallback;
    try {
        if constexpr (std::is_same_v<T, double>) return std::stod(*v);
        else if constexpr (std::is_same_v<T, std::uint64_t>) return std::stoull(*v);
        else if constexpr (std::is_same_v<T, std::size_t>) return static_cast<std::size_t>(std::stoull(*v));
        else return *v;
    } catch (const std::exception&) {
        throw UsageError(fmt::format("environment variable {}='{}' is not valid", name, *v));
    }
}

void emit(std::ostream& out, const std::optional<std::string>& path, const json& j) {
    const std::string text = j.dump(2) + "\n";
    if (path) io::write_file_atomic(*path, text);
    else out << text;
}

std::string safe_file_stem(const std::string& id) {
    std::string s = id;
    for (auto& c : s)
        if (c == '/' || c == '\\' || c == ':' || c == '\0') c = '_';
    if (s.empty() || s == "." || s == "..") s = "_" + s;
    return s;
}

// Source tokens of each chunk (or the whole transcript when a sample has no chunks).
std::vector<std::vector<std::string>> sample_windows(const std::vector<StreamingSample>& samples) {
    std::vector<std::vector<std::string>> out;
    for (const auto& s : samples) {
        if (s.chunks.empty()) {
            std::vector<std::string> w;
            for (const auto& t : s.source.tokens) w.push_back(t.text);
            if (!w.empty()) out.push_back(std::move(w));
            continue;
        }
        for (const auto& c : s.chunks) {
            std::vector<std::string> w;
            for (const auto& t : s.source.tokens) {
                const double mid = 0.5 * (t.start_s + t.end_s);
                if (mid >= c.start_s - kTimeEps && mid < c.end_s + kTimeEps) w.push_back(t.text);
            }
            if (!w.empty()) out.push_back(std::move(w));
        }
    }
    return out;
}

struct Globals {
    bool json_errors = false;
};

// ------------------------------------------------------------------ gen-data

struct GenDataOpts {
    std::string in, rules, out;
    std::size_t pairs = 1;
    std::optional<std::uint64_t> seed;
    bool literal = false;
};

int run_gen_data(const GenDataOpts& o) {
    const auto samples = io::read_samples(o.in);
    SegmentationRules rules;
    if (!o.rules.empty()) rules = io::rules_from_json(json::parse(io::read_file(o.rules)));
    const auto rule = o.literal ? CompletionRule::literal_start : CompletionRule::end_complete;
    const std::uint64_t seed = o.seed.value_or(env_or<std::uint64_t>("SIST_SEED", 0));
    std::vector<json> rows;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        auto sample = samples[i];
        if (sample.chunks.empty() && !sample.source.tokens.empty()) {
            // No chunk annotation: segment by rule and keep the source text as the target.
            const auto groups = segment_token_groups(sample.source, rules);
            const auto spans = align_chunks(sample.source, group_texts(sample.source, groups));
            for (const auto& sp : spans)
                sample.chunks.push_back({sp.start_s, sp.end_s, sp.source_text, sp.source_text});
        }
        // Per-sample seeds keep each sample's pairs independent of file order.
        for (const auto& p : make_eq2_pairs(sample, o.pairs, seed + i, rule))
            rows.push_back(io::eq2_pair_to_json(p));
    }
    io::write_file_atomic(o.out, io::to_jsonl(rows));
    return 0;
}

// ------------------------------------------------------------------ simulate

struct SimulateOpts {
    std::string samples, backend = "oracle", config, out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> jobs;
    std::optional<double> step;
    std::optional<std::string> tokenization;
    std::optional<std::string> endpoint;
    double timeout_s = 30.0;
    int retries = 3;
    double backoff_s = 0.5;
    std::string lexicon, kb, params;
    double gap_s = 0.5;
    std::optional<std::size_t> k;
    bool cot = false, offline = false, no_context = false, retrieval = false;
    std::optional<double> latency;
};

int run_simulate(const SimulateOpts& o, std::ostream& err) {
    if (o.backend != "oracle" && o.backend != "pause" && o.backend != "llm")
        throw UsageError(fmt::format("unknown backend '{}'", o.backend));

    // defaults < environment < config file < flags
    SessionConfig cfg;
    cfg.seed = env_or<std::uint64_t>("SIST_SEED", cfg.seed);
    cfg.step_s = env_or<double>("SIST_STEP_S", cfg.step_s);
    if (auto t = env("SIST_TOKENIZATION")) cfg.target_tokenization = parse_tokenization(*t);
    std::string endpoint_url = env_or<std::string>("SIST_ENDPOINT", "");
    std::size_t jobs = env_or<std::size_t>("SIST_JOBS", std::max(1u, std::thread::hardware_concurrency()));
    double gap_s = o.gap_s;
    if (!o.config.empty()) {
        const auto j = json::parse(io::read_file(o.config), nullptr, false);
        if (j.is_discarded()) throw DataError(fmt::format("{}: not valid JSON", o.config));
        io::apply_session_config(j, cfg);
        if (j.contains("endpoint") && j["endpoint"].is_string()) endpoint_url = j["endpoint"].get<std::string>();
        if (j.contains("gap_threshold_s") && j["gap_threshold_s"].is_number()) gap_s = j["gap_threshold_s"].get<double>();
    }
    if (o.seed) cfg.seed = *o.seed;
    if (o.step) cfg.step_s = *o.step;
    if (o.tokenization) cfg.target_tokenization = parse_tokenization(*o.tokenization);
    if (o.endpoint) endpoint_url = *o.endpoint;
    if (o.jobs) jobs = std::max<std::size_t>(1, *o.jobs);
    if (o.k) cfg.retriever_k = *o.k;
    if (o.latency) cfg.processing_latency_s = *o.latency;
    if (o.cot) cfg.mode.cot_transcription = true;
    if (o.offline) cfg.mode.streaming = false;
    if (o.no_context) cfg.mode.use_context = false;
    if (o.retrieval) cfg.mode.use_retrieval = true;
    validate_config(cfg);

    EndpointConfig endpoint;
    if (o.backend == "llm") {
        if (endpoint_url.empty()) throw UsageError("--backend llm requires --endpoint URL");
        endpoint.url = endpoint_url;
        endpoint.timeout_s = o.timeout_s;
        endpoint.max_retries = o.retries;
        endpoint.backoff_base_s = o.backoff_s;
        LlmBackend probe(endpoint);  // validates the URL before any session starts
    }
    Lexicon lexicon;
    if (!o.lexicon.empty()) lexicon = io::read_lexicon(o.lexicon);

    std::optional<FusionParams> params;
    FeatureConfig feature_cfg;
    KnowledgeBase kb;
    if (cfg.mode.use_retrieval) {
        if (o.kb.empty() || o.params.empty())
            throw UsageError("retrieval requires --kb and --params");
        kb = io::read_knowledge_base(o.kb);
        auto [p, fc] = io::params_from_json(json::parse(io::read_file(o.params)));
        params = std::move(p);
        feature_cfg = fc;
    }

    const auto samples = io::read_samples(o.samples);
    std::map<std::string, std::size_t> seen;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        require_valid(samples[i]);
        if (!seen.emplace(safe_file_stem(samples[i].id), i).second)
            throw DataError(fmt::format("duplicate sample id '{}'", samples[i].id));
    }
    fs::create_directories(o.out);

    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::vector<int> codes(samples.size(), 0);
    auto worker = [&] {
        for (std::size_t i = next++; i < samples.size(); i = next++) {
            const auto& sample = samples[i];
            std::unique_ptr<Backend> backend;
            if (o.backend == "oracle")
                backend = std::make_unique<OracleBackend>(sample.chunks, cfg.target_tokenization);
            else if (o.backend == "pause")
                backend = std::make_unique<PauseBackend>(lexicon, gap_s, cfg.target_tokenization);
            else
                backend = std::make_unique<LlmBackend>(endpoint);
            std::unique_ptr<FusionRetriever> retriever;
            if (params) retriever = std::make_unique<FusionRetriever>(*params, feature_cfg, kb);

            SessionResult result;
            json extra;
            try {
                result = run_session(sample, *backend, retriever.get(), cfg);
            } catch (const SessionAborted& e) {
                result = e.partial();
                extra["error"] = {{"kind", error_kind_name(e.kind())}, {"message", e.what()}};
                codes[i] = e.exit_code();
                std::lock_guard lock(err_mu);
                err << e.what() << '\n';
            } catch (const Error& e) {
                result.session_id = sample.id;
                extra["error"] = {{"kind", error_kind_name(e.kind())}, {"message", e.what()}};
                codes[i] = e.exit_code();
                std::lock_guard lock(err_mu);
                err << e.what() << '\n';
            }
            auto j = io::session_result_to_json(result);
            j["config"] = io::session_config_to_json(cfg);
            j["backend"] = o.backend;
            if (!extra.is_null()) j["error"] = extra["error"];
            const auto stem = (fs::path(o.out) / safe_file_stem(sample.id)).string();
            io::write_file_atomic(stem + ".json", j.dump(2) + "\n");
            io::write_file_atomic(stem + ".emissions.jsonl", io::emission_log_to_jsonl(result.emission_log));
        }
    };
    const std::size_t n_threads = std::min(jobs, std::max<std::size_t>(1, samples.size()));
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    }
    return codes.empty() ? 0 : *std::max_element(codes.begin(), codes.end());
}

// ------------------------------------------------------------------ retriever

struct RetrieverOpts {
    std::string samples, kb, params, text;
    std::optional<std::string> out;
    std::size_t k = 10;
    std::optional<std::uint64_t> seed;
    FeatureConfig features;
    std::string pooling = "mean";
    TrainHyper hyper;
    std::size_t positives = 1;
    std::size_t negatives = 5;
};

std::vector<TrainExample> kb_examples(const std::vector<std::vector<std::string>>& windows,
                                      const KnowledgeBase& kb, std::size_t negatives, Rng& rng) {
    std::vector<TrainExample> out;
    for (const auto& w : windows) {
        for (const auto& item : kb.items()) {
            if (!window_mentions(w, item.key)) continue;
            out.push_back({w, item.key, 1});
            for (std::size_t n = 0, tries = 0; n < negatives && tries < 50 * negatives; ++tries) {
                const auto& cand = kb.items()[rng.below(kb.size())].key;
                if (window_mentions(w, cand)) continue;
                out.push_back({w, cand, 0});
                ++n;
            }
        }
    }
    return out;
}

std::vector<LabeledWindow> labeled_windows(const std::vector<std::vector<std::string>>& windows,
                                           const KnowledgeBase& kb) {
    std::vector<LabeledWindow> out;
    for (const auto& w : windows) {
        LabeledWindow lw{w, {}};
        for (const auto& item : kb.items())
            if (window_mentions(w, item.key)) lw.true_keys.push_back(item.key);
        if (!lw.true_keys.empty()) out.push_back(std::move(lw));
    }
    return out;
}

int run_retriever_train(RetrieverOpts o, std::ostream& out) {
    if (o.samples.empty()) throw UsageError("retriever train requires --samples");
    if (o.params.empty()) throw UsageError("retriever train requires --params (output path)");
    const std::uint64_t seed = o.seed.value_or(env_or<std::uint64_t>("SIST_SEED", 0));
    o.features.pooling = o.pooling == "max" ? Pooling::max : Pooling::mean;
    o.features.projection_seed = seed;
    o.hyper.seed = seed;
    const Featurizer featurizer(o.features);
    const auto windows = sample_windows(io::read_samples(o.samples));
    auto examples = make_train_examples(windows, o.positives, o.negatives, seed);
    if (!o.kb.empty()) {
        Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
        auto more = kb_examples(windows, io::read_knowledge_base(o.kb), o.negatives, rng);
        examples.insert(examples.end(), more.begin(), more.end());
    }
    const auto result = train(init_params(o.features, seed), featurizer, examples, o.hyper);
    io::write_file_atomic(o.params, io::params_to_json(result.params, o.features).dump() + "\n");
    json report;
    report["examples"] = examples.size();
    report["epochs"] = result.epoch_losses.size();
    report["final_loss"] = result.final_loss();
    emit(out, o.out, report);
    return 0;
}

int run_retriever_eval(const RetrieverOpts& o, std::ostream& out) {
    if (o.samples.empty() || o.kb.empty() || o.params.empty())
        throw UsageError("retriever eval requires --samples, --kb and --params");
    const auto kb = io::read_knowledge_base(o.kb);
    const auto [params, cfg] = io::params_from_json(json::parse(io::read_file(o.params)));
    const auto windows = labeled_windows(sample_windows(io::read_samples(o.samples)), kb);
    if (windows.empty()) throw DataError("no window mentions any knowledge-base key");
    json report;
    report["k"] = o.k;
    report["windows"] = windows.size();
    report["recall"] = eval_recall(params, Featurizer(cfg), windows, kb, o.k);
    emit(out, o.out, report);
    return 0;
}

int run_retriever_topk(const RetrieverOpts& o, std::ostream& out) {
    if (o.kb.empty() || o.params.empty()) throw UsageError("retriever topk requires --kb and --params");
    if (o.text.empty() == o.samples.empty()) throw UsageError("retriever topk needs exactly one of --text or --samples");
    const auto kb = io::read_knowledge_base(o.kb);
    const auto [params, cfg] = io::params_from_json(json::parse(io::read_file(o.params)));
    const Featurizer featurizer(cfg);
    std::vector<std::vector<std::string>> windows;
    if (!o.text.empty()) windows.push_back(tokenize_target(o.text, Tokenization::whitespace));
    else windows = sample_windows(io::read_samples(o.samples));
    json rows = json::array();
    for (const auto& w : windows) {
        json keys = json::array();
        for (const auto& item : top_k(params, featurizer, kb, featurizer.encode(w), o.k))
            keys.push_back({{"key", item.key}, {"value", item.value}});
        rows.push_back({{"window", join_target(w, Tokenization::whitespace)}, {"top_k", std::move(keys)}});
    }
    emit(out, o.out, rows);
    return 0;
}

// ------------------------------------------------------------------ eval-latency / eval-vip / corr

struct LatencyOpts {
    std::string log, sample, id;
    std::optional<std::string> tokenization, out;
};

int run_eval_latency(const LatencyOpts& o, std::ostream& out) {
    const auto samples = io::read_samples(o.sample);
    const StreamingSample* sample = nullptr;
    if (!o.id.empty()) {
        for (const auto& s : samples)
            if (s.id == o.id) sample = &s;
        if (!sample) throw DataError(fmt::format("sample '{}' not found in {}", o.id, o.sample));
    } else {
        if (samples.size() != 1)
            throw UsageError(fmt::format("{} holds {} samples; pick one with --id", o.sample, samples.size()));
        sample = &samples.front();
    }
    const Tokenization tok = o.tokenization ? parse_tokenization(*o.tokenization)
                                            : parse_tokenization(env_or<std::string>("SIST_TOKENIZATION", "ws"));
    const auto log = io::read_emission_log(o.log, tok);
    std::string reference;
    if (sample->reference_translation) {
        reference = *sample->reference_translation;
    } else {
        std::vector<std::string> targets;
        for (const auto& c : sample->chunks) targets.push_back(c.target_text);
        reference = join_target(targets, tok);
    }
    const auto n_ref = tokenize_target(reference, tok).size();
    if (n_ref == 0) throw DataError(fmt::format("sample '{}' has no reference translation", sample->id));
    const auto r = latency_report(log, sample->source.duration_s, n_ref);
    json j;
    j["session_id"] = sample->id;
    j["al_s"] = r.al_s;
    j["laal_s"] = r.laal_s;
    j["flal_s"] = r.flal_s;
    j["tau"] = r.tau;
    j["tau_fallback"] = r.tau_fallback;
    j["n_hyp"] = r.n_hyp;
    j["n_ref"] = r.n_ref;
    j["tokenization"] = tokenization_name(tok);
    emit(out, o.out, j);
    return 0;
}

struct VipOpts {
    std::string ann, result;
    std::optional<std::string> out;
};

int run_eval_vip(const VipOpts& o, std::ostream& out) {
    const auto ann = io::annotations_from_json(json::parse(io::read_file(o.ann)));
    if (!o.result.empty()) {
        const auto result = io::session_result_from_json(json::parse(io::read_file(o.result)));
        check_fragment_coverage(ann, result.final_translation);
    }
    const auto r = vip(ann);
    json j;
    j["session_id"] = ann.session_id;
    j["annotator_id"] = ann.annotator_id;
    j["valid"] = r.valid;
    j["total"] = r.total;
    j["vip"] = round_tenth(r.percent);
    j["vip_exact"] = r.percent;
    emit(out, o.out, j);
    return 0;
}

struct CorrOpts {
    std::string x, y;
    std::optional<std::string> out;
};

int run_corr(const CorrOpts& o, std::ostream& out) {
    const auto xs = io::read_scores(o.x);
    const auto ys = io::read_scores(o.y);
    std::map<std::string, double> y_by_id;
    for (const auto& [id, v] : ys)
        if (!y_by_id.emplace(id, v).second) throw DataError(fmt::format("{}: duplicate session '{}'", o.y, id));
    std::vector<double> a, b;
    std::map<std::string, bool> x_seen;
    for (const auto& [id, v] : xs) {
        if (!x_seen.emplace(id, true).second) throw DataError(fmt::format("{}: duplicate session '{}'", o.x, id));
        auto it = y_by_id.find(id);
        if (it == y_by_id.end()) throw DataError(fmt::format("session '{}' missing from {}", id, o.y));
        a.push_back(v);
        b.push_back(it->second);
    }
    if (xs.size() != ys.size()) throw DataError(fmt::format("{} and {} list different sessions", o.x, o.y));
    json j;
    j["n"] = a.size();
    j["kendall_tau_b"] = kendall_tau_b(a, b);
    emit(out, o.out, j);
    return 0;
}

struct ExportOpts {
    std::string result, samples, out;
};

int run_export(const ExportOpts& o) {
    const auto result = io::session_result_from_json(json::parse(io::read_file(o.result)));
    const auto samples = io::read_samples(o.samples);
    auto it = std::find_if(samples.begin(), samples.end(),
                           [&](const StreamingSample& s) { return s.id == result.session_id; });
    if (it == samples.end())
        throw DataError(fmt::format("sample '{}' not found in {}", result.session_id, o.samples));
    io::write_file_atomic(o.out, export_annotation_bundle(result, *it).dump(2) + "\n");
    return 0;
}

void report_error(std::ostream& err, const Globals& g, ErrorKind kind, const std::string& msg) {
    if (g.json_errors) {
        json j;
        j["error"] = error_kind_name(kind);
        j["message"] = msg;
        j["exit_code"] = static_cast<int>(kind);
        err << j.dump() << '\n';
    } else {
        err << "error: " << msg << '\n';
    }
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Globals g;
    CLI::App app{"Simultaneous interpretation engine and evaluation workbench", "sist"};
    app.footer(kFormatsHelp);
    app.set_version_flag("--version", std::string("sist ") + kVersion);
    app.add_flag("--json-errors", g.json_errors, "Report errors as one JSON object on stderr");
    app.require_subcommand(1);

    GenDataOpts gd;
    auto* gen = app.add_subcommand("gen-data", "Build random-prefix policy training pairs");
    gen->add_option("--in", gd.in, "Samples JSONL")->required();
    gen->add_option("--rules", gd.rules, "Segmentation rules JSON (used for samples without chunks)");
    gen->add_option("--pairs-per-sample", gd.pairs, "Pairs drawn per sample")->check(CLI::PositiveNumber);
    gen->add_option("--seed", gd.seed, "Random seed");
    gen->add_option("--out", gd.out, "Output pairs JSONL")->required();
    gen->add_flag("--eq2-literal", gd.literal, "Treat chunks as complete once their start is heard");

    SimulateOpts so;
    auto* sim = app.add_subcommand("simulate", "Run streaming sessions and write results");
    sim->add_option("--samples", so.samples, "Samples JSONL")->required();
    sim->add_option("--backend", so.backend, "oracle | pause | llm")->check(CLI::IsMember({"oracle", "pause", "llm"}));
    sim->add_option("--config", so.config, "Session config JSON");
    sim->add_option("--out", so.out, "Output directory")->required();
    sim->add_option("--seed", so.seed, "Session seed");
    sim->add_option("--jobs", so.jobs, "Concurrent sessions (default: logical cores)");
    sim->add_option("--step", so.step, "Window growth per round in seconds");
    sim->add_option("--tokenization", so.tokenization, "Target tokenization: ws | char");
    sim->add_option("--endpoint", so.endpoint, "LLM endpoint URL");
    sim->add_option("--timeout", so.timeout_s, "LLM request timeout in seconds");
    sim->add_option("--retries", so.retries, "LLM transport retries");
    sim->add_option("--backoff", so.backoff_s, "First retry delay in seconds (doubles each retry)");
    sim->add_option("--lexicon", so.lexicon, "Lexicon TSV for the pause backend");
    sim->add_option("--gap", so.gap_s, "Pause threshold in seconds for the pause backend");
    sim->add_option("--kb", so.kb, "Knowledge base TSV");
    sim->add_option("--params", so.params, "Retriever params JSON");
    sim->add_option("--k", so.k, "Retrieved items per round");
    sim->add_option("--latency", so.latency, "Processing latency added to emission times");
    sim->add_flag("--cot", so.cot, "Transcribe before translating");
    sim->add_flag("--offline", so.offline, "Translate the complete speech in one round");
    sim->add_flag("--no-context", so.no_context, "Do not send earlier rounds as context");
    sim->add_flag("--retrieval", so.retrieval, "Retrieve knowledge items each round");

    RetrieverOpts ro;
    auto* ret = app.add_subcommand("retriever", "Train, evaluate and query the terminology retriever");
    ret->require_subcommand(1);
    auto add_common = [&](CLI::App* c) {
        c->add_option("--kb", ro.kb, "Knowledge base TSV");
        c->add_option("--params", ro.params, "Params JSON");
        c->add_option("--samples", ro.samples, "Samples JSONL");
        c->add_option("--k", ro.k, "Top-k")->check(CLI::PositiveNumber);
        c->add_option("--seed", ro.seed, "Random seed");
        c->add_option("--out", ro.out, "Write the report here instead of stdout");
    };
    auto* rtrain = ret->add_subcommand("train", "Fit the fusion scorer with BCE");
    add_common(rtrain);
    rtrain->add_option("--dim", ro.features.dim, "Embedding dimension");
    rtrain->add_option("--heads", ro.features.heads, "Attention heads");
    rtrain->add_option("--buckets", ro.features.hash_buckets, "Hash buckets");
    rtrain->add_option("--ngram", ro.features.n_gram, "Character n-gram order");
    rtrain->add_option("--pooling", ro.pooling, "mean | max")->check(CLI::IsMember({"mean", "max"}));
    rtrain->add_option("--lr", ro.hyper.lr, "Learning rate");
    rtrain->add_option("--epochs", ro.hyper.epochs, "Epochs");
    rtrain->add_option("--batch", ro.hyper.batch, "Mini-batch size");
    rtrain->add_option("--positives", ro.positives, "Positive words drawn per window");
    rtrain->add_option("--negatives", ro.negatives, "Negatives per positive");
    auto* reval = ret->add_subcommand("eval", "Recall@k on windows that mention knowledge keys");
    add_common(reval);
    auto* rtopk = ret->add_subcommand("topk", "Rank knowledge items for a text or for sample windows");
    add_common(rtopk);
    rtopk->add_option("--text", ro.text, "Window text");

    LatencyOpts lo;
    auto* lat = app.add_subcommand("eval-latency", "AL, LAAL and FLAL of an emission log");
    lat->add_option("--log", lo.log, "Emission log JSONL")->required();
    lat->add_option("--sample", lo.sample, "Samples JSONL holding the source")->required();
    lat->add_option("--id", lo.id, "Sample id when the file holds several");
    lat->add_option("--tokenization", lo.tokenization, "ws | char");
    lat->add_option("--out", lo.out, "Write the report here instead of stdout");

    VipOpts vo;
    auto* vipc = app.add_subcommand("eval-vip", "Valid information proportion of an annotation set");
    vipc->add_option("--ann", vo.ann, "Annotation JSON")->required();
    vipc->add_option("--result", vo.result, "Session result JSON to check fragment coverage against");
    vipc->add_option("--out", vo.out, "Write the report here instead of stdout");

    CorrOpts co;
    auto* corr = app.add_subcommand("corr", "Kendall tau-b between two per-session score files");
    corr->add_option("--x", co.x, "Scores TSV")->required();
    corr->add_option("--y", co.y, "Scores TSV")->required();
    corr->add_option("--out", co.out, "Write the report here instead of stdout");

    ExportOpts eo;
    auto* exp = app.add_subcommand("export-annotation", "Write an annotation bundle for a session result");
    exp->add_option("--result", eo.result, "Session result JSON")->required();
    exp->add_option("--samples", eo.samples, "Samples JSONL")->required();
    exp->add_option("--out", eo.out, "Bundle JSON")->required();

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << app.version() << '\n';
        return 0;
    } catch (const CLI::ParseError& e) {
        report_error(err, g, ErrorKind::usage, e.what());
        if (!g.json_errors) err << app.help();
        return 1;
    }

    try {
        if (gen->parsed()) return run_gen_data(gd);
        if (sim->parsed()) return run_simulate(so, err);
        if (rtrain->parsed()) return run_retriever_train(ro, out);
        if (reval->parsed()) return run_retriever_eval(ro, out);
        if (rtopk->parsed()) return run_retriever_topk(ro, out);
        if (lat->parsed()) return run_eval_latency(lo, out);
        if (vipc->parsed()) return run_eval_vip(vo, out);
        if (corr->parsed()) return run_corr(co, out);
        if (exp->parsed()) return run_export(eo);
    } catch (const Error& e) {
        report_error(err, g, e.kind(), e.what());
        return e.exit_code();
    } catch (const nlohmann::json::exception& e) {
        report_error(err, g, ErrorKind::data, e.what());
        return static_cast<int>(ErrorKind::data);
    } catch (const std::filesystem::filesystem_error& e) {
        report_error(err, g, ErrorKind::data, e.what());
        return static_cast<int>(ErrorKind::data);
    }
    report_error(err, g, ErrorKind::usage, "no subcommand given");
    return 1;
}

}  // namespace cli
}  // namespace sist

#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sist/agent.hpp"
#include "sist/backends.hpp"
#include "sist/core.hpp"
#include "sist/datagen.hpp"
#include "sist/metrics.hpp"
#include "sist/retriever.hpp"

// File formats. Readers throw DataError naming the file and line on bad input.
namespace sist::io {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

std::string read_file(const fs::path& path);

// Writes to a sibling temp file, then renames over the target.
void write_file_atomic(const fs::path& path, const std::string& content);

// Non-blank lines, each parsed as JSON. Errors carry "path:line".
std::vector<json> read_jsonl(const fs::path& path);
std::string to_jsonl(const std::vector<json>& rows);

// Streaming samples: {id, lang, duration_s, tokens[], chunks[], reference_translation?, domain_tag?}
json sample_to_json(const StreamingSample& s);
StreamingSample sample_from_json(const json& j);
std::vector<StreamingSample> read_samples(const fs::path& path);

json eq2_pair_to_json(const Eq2Pair& p);
Eq2Pair eq2_pair_from_json(const json& j);

// Emission log rows: {time_s, kind, text, rewrite_index?}
json emission_event_to_json(const EmissionEvent& e);
EmissionEvent emission_event_from_json(const json& j);
std::string emission_log_to_jsonl(const EmissionLog& log);
EmissionLog read_emission_log(const fs::path& path, Tokenization tok);

json round_record_to_json(const RoundRecord& r);
RoundRecord round_record_from_json(const json& j);

// {session_id, final_translation, rounds_run, tokenization, rounds[], emission_log[]}
json session_result_to_json(const SessionResult& r);
SessionResult session_result_from_json(const json& j);

// {session_id, annotator_id, fragments[{fragment_text, valid, failure_kind?}]}
json annotations_to_json(const AnnotationSet& a);
AnnotationSet annotations_from_json(const json& j);

// key<TAB>value per line.
KnowledgeBase read_knowledge_base(const fs::path& path);
std::string knowledge_base_to_tsv(const KnowledgeBase& kb);

// source<TAB>target per line.
Lexicon read_lexicon(const fs::path& path);

// session_id<TAB>score per line, file order preserved.
std::vector<std::pair<std::string, double>> read_scores(const fs::path& path);

json feature_config_to_json(const FeatureConfig& cfg);
FeatureConfig feature_config_from_json(const json& j);

// {config, W_q, W_k, W_v, w, b}; matrices as row-major nested arrays.
json params_to_json(const FusionParams& p, const FeatureConfig& cfg);
std::pair<FusionParams, FeatureConfig> params_from_json(const json& j);

json rules_to_json(const SegmentationRules& r);
SegmentationRules rules_from_json(const json& j);

// Overlays the keys present in j onto cfg.
void apply_session_config(const json& j, SessionConfig& cfg);
json session_config_to_json(const SessionConfig& cfg);

}  // namespace sist::io

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sist/agent.hpp"
#include "sist/core.hpp"

namespace sist {

inline constexpr const char* kVersion = "0.1.0";

// Starting point for human fragment annotation:
// {session_id, tokenization, source_tokens[], final_translation, suggested_breaks[]}.
// suggested_breaks are target-token indices where rounds after the first begin.
// Throws DataError("nothing to annotate") for an empty translation.
nlohmann::ordered_json export_annotation_bundle(const SessionResult& result,
                                                const StreamingSample& sample);

namespace cli {

// Runs one command line (args excludes the program name). Returns the process
// exit code: 0 ok, 1 usage, 2 data/validation, 3 backend/transport.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cli
}  // namespace sist

// Thin bindings. Structured values cross the boundary as JSON text; the
// Python package converts to and from dicts.

#include <sstream>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "sist/agent.hpp"
#include "sist/backends.hpp"
#include "sist/cli.hpp"
#include "sist/datagen.hpp"
#include "sist/error.hpp"
#include "sist/io.hpp"
#include "sist/metrics.hpp"

namespace py = pybind11;
using namespace sist;

namespace {

Tokenization parse_tok(const std::string& name) {
    if (name == "whitespace") return Tokenization::whitespace;
    if (name == "per_character") return Tokenization::per_character;
    throw UsageError("unknown tokenization '" + name + "'");
}

std::string oracle_session(const std::string& sample_json, const std::string& config_json) {
    const auto sample = io::sample_from_json(io::json::parse(sample_json));
    validate_sample(sample);
    SessionConfig cfg;
    io::apply_session_config(io::json::parse(config_json), cfg);
    OracleBackend oracle(sample.chunks, cfg.target_tokenization);
    return io::session_result_to_json(run_session(sample, oracle, nullptr, cfg)).dump();
}

std::vector<std::string> eq2_pairs(const std::string& sample_json, std::size_t n, std::uint64_t seed) {
    const auto sample = io::sample_from_json(io::json::parse(sample_json));
    validate_sample(sample);
    std::vector<std::string> out;
    for (const auto& p : make_eq2_pairs(sample, n, seed)) out.push_back(io::eq2_pair_to_json(p).dump());
    return out;
}

py::dict latency(const std::string& log_jsonl, double duration_s, std::size_t n_ref, const std::string& tok) {
    EmissionLog log;
    log.tok = parse_tok(tok);
    std::istringstream in(log_jsonl);
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) log.events.push_back(io::emission_event_from_json(io::json::parse(line)));
    const auto r = latency_report(log, duration_s, n_ref);
    py::dict d;
    d["al_s"] = r.al_s;
    d["laal_s"] = r.laal_s;
    d["flal_s"] = r.flal_s;
    d["tau"] = r.tau;
    d["n_hyp"] = r.n_hyp;
    d["n_ref"] = r.n_ref;
    d["tau_fallback"] = r.tau_fallback;
    return d;
}

py::tuple run_cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    int code;
    {
        py::gil_scoped_release release;
        code = cli::dispatch(args, out, err);
    }
    return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_sist, m) {
    m.attr("__version__") = kVersion;

    auto base = py::register_exception<Error>(m, "SistError");
    py::register_exception<UsageError>(m, "UsageError", base);
    py::register_exception<DataError>(m, "DataError", base);
    py::register_exception<BackendError>(m, "BackendError", base);
    py::register_exception<ProtocolError>(m, "ProtocolError", base);
    // Malformed JSON text surfaces as ValueError.
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const nlohmann::json::exception& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        }
    });

    m.def("kendall_tau_b", &kendall_tau_b, py::arg("xs"), py::arg("ys"));
    m.def("average_lagging", &average_lagging, py::arg("d"), py::arg("source_duration_s"), py::arg("n_hyp"));
    m.def("laal", &laal, py::arg("d"), py::arg("source_duration_s"), py::arg("n_hyp"), py::arg("n_ref"));
    m.def("flal", &flal, py::arg("d"));
    m.def("round_tenth", &round_tenth, py::arg("percent"));
    m.def("vip_json", [](const std::string& ann_json) {
        const auto r = vip(io::annotations_from_json(io::json::parse(ann_json)));
        return py::make_tuple(r.valid, r.total, r.percent);
    });
    m.def("latency_json", &latency, py::arg("log_jsonl"), py::arg("source_duration_s"), py::arg("n_ref"),
          py::arg("tokenization") = "whitespace");
    m.def("oracle_session_json", &oracle_session, py::arg("sample_json"), py::arg("config_json") = "{}");
    m.def("eq2_pairs_json", &eq2_pairs, py::arg("sample_json"), py::arg("n"), py::arg("seed"));
    m.def("annotation_bundle_json", [](const std::string& result_json, const std::string& sample_json) {
        return export_annotation_bundle(io::session_result_from_json(io::json::parse(result_json)),
                                        io::sample_from_json(io::json::parse(sample_json)))
            .dump();
    });
    m.def("run_cli", &run_cli, py::arg("args"));
}

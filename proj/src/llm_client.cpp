#include "sist/llm_client.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <fmt/format.h>
#include <httplib.h>

#include "sist/error.hpp"

namespace sist {

namespace {

using ojson = nlohmann::ordered_json;

struct ParsedUrl {
    std::string host_port;  // "http://host:port"
    std::string path;
};

ParsedUrl parse_url(const std::string& url) {
    constexpr std::string_view scheme = "http://";
    if (url.rfind(scheme, 0) != 0)
        throw UsageError(fmt::format("endpoint '{}' must start with http://", url));
    const auto slash = url.find('/', scheme.size());
    ParsedUrl p;
    p.host_port = url.substr(0, slash);
    p.path = slash == std::string::npos ? "/" : url.substr(slash);
    if (p.host_port.size() == scheme.size())
        throw UsageError(fmt::format("endpoint '{}' has no host", url));
    return p;
}

ojson token_json(const TimedToken& t) {
    return {{"text", t.text}, {"start_s", t.start_s}, {"end_s", t.end_s}};
}

}  // namespace

ojson wire_request(const BackendRequest& req) {
    ojson context = ojson::array();
    for (const auto& r : req.context) {
        ojson c = ojson::object();
        if (r.transcription) c["transcription"] = *r.transcription;
        c["translation"] = r.translation;
        context.push_back(std::move(c));
    }
    ojson knowledge = ojson::array();
    for (const auto& k : req.retrieved) knowledge.push_back({{"key", k.key}, {"value", k.value}});
    ojson tokens = ojson::array();
    for (const auto& t : req.window.tokens) tokens.push_back(token_json(t));

    ojson body;
    body["session_id"] = req.session_id;
    body["round"] = req.round;
    body["is_final"] = req.is_final;
    body["mode"] = {{"cot", req.mode.cot_transcription},
                    {"streaming", req.mode.streaming},
                    {"use_context", req.mode.use_context}};
    body["instruction"] = req.instruction.empty() ? default_instruction(req.mode) : req.instruction;
    body["context"] = std::move(context);
    body["knowledge"] = std::move(knowledge);
    body["window"] = {{"start_s", req.window.window_start_s},
                      {"end_s", req.window.window_end_s},
                      {"tokens", std::move(tokens)}};
    body["prompt"] = build_prompt(req);
    return body;
}

BackendResponse parse_wire_response(const BackendRequest& req, const std::string& body) {
    ojson j;
    try {
        j = ojson::parse(body);
    } catch (const ojson::parse_error& e) {
        throw ProtocolError(fmt::format("reply is not JSON: {}", e.what()), body);
    }
    if (!j.is_object()) throw ProtocolError("reply is not a JSON object", body);
    if (!j.contains("translation") || !j["translation"].is_string())
        throw ProtocolError("reply missing string field 'translation'", body);
    if (!j.contains("cutoff_ms") || !j["cutoff_ms"].is_number_integer())
        throw ProtocolError("reply missing integer field 'cutoff_ms'", body);

    BackendResponse resp;
    resp.translation = j["translation"].get<std::string>();
    if (j.contains("transcription") && !j["transcription"].is_null()) {
        if (!j["transcription"].is_string())
            throw ProtocolError("reply field 'transcription' is not a string", body);
        resp.transcription = j["transcription"].get<std::string>();
    }
    const auto& w = req.window;
    if (resp.is_wait()) {
        resp.transcription.reset();
        resp.cutoff_s = w.window_start_s;
        return resp;
    }
    const auto cutoff_ms = j["cutoff_ms"].get<long long>();
    double cutoff = static_cast<double>(cutoff_ms) / 1000.0;
    // Millisecond rounding may overshoot the window end by up to half a millisecond.
    if (cutoff > w.window_end_s && cutoff <= w.window_end_s + 0.0005) cutoff = w.window_end_s;
    resp.cutoff_s = cutoff;
    if (req.mode.cot_transcription && !resp.transcription)
        throw ProtocolError("reply missing 'transcription' in chain-of-thought mode", body);
    if (!req.mode.cot_transcription) resp.transcription.reset();
    try {
        check_response(req, resp);
    } catch (const ProtocolError& e) {
        throw ProtocolError(fmt::format("invalid cutoff_ms {}: {}", cutoff_ms, e.what()), body);
    }
    return resp;
}

struct LlmBackend::Impl {
    ParsedUrl url;
    httplib::Client client;
    explicit Impl(ParsedUrl u) : url(std::move(u)), client(url.host_port) {}
};

LlmBackend::LlmBackend(EndpointConfig endpoint, Sleeper sleeper)
    : endpoint_(std::move(endpoint)), sleeper_(std::move(sleeper)) {
    if (!sleeper_)
        sleeper_ = [](double s) { std::this_thread::sleep_for(std::chrono::duration<double>(s)); };
    if (endpoint_.max_retries < 0) throw UsageError("max_retries must be nonnegative");
    if (!(endpoint_.timeout_s > 0.0)) throw UsageError("timeout must be positive");
    impl_ = std::make_unique<Impl>(parse_url(endpoint_.url));
    const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
        std::chrono::duration<double>(endpoint_.timeout_s));
    impl_->client.set_connection_timeout(timeout);
    impl_->client.set_read_timeout(timeout);
    impl_->client.set_write_timeout(timeout);
    impl_->client.set_keep_alive(true);
}

LlmBackend::~LlmBackend() = default;

BackendResponse LlmBackend::respond(const BackendRequest& req) {
    const std::string payload = wire_request(req).dump();
    httplib::Headers headers;
    if (const char* token = std::getenv(endpoint_.token_env.c_str()); token && *token)
        headers.emplace("Authorization", std::string("Bearer ") + token);

    std::string last_error;
    double delay = endpoint_.backoff_base_s;
    last_attempts_ = 0;
    for (int attempt = 0; attempt <= endpoint_.max_retries; ++attempt) {
        if (attempt > 0) {
            sleeper_(delay);
            delay *= endpoint_.backoff_factor;
        }
        ++last_attempts_;
        auto res = impl_->client.Post(impl_->url.path, headers, payload, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500 || res->status == 429) {
            last_error = fmt::format("HTTP {}", res->status);
            continue;
        }
        if (res->status != 200)
            throw ProtocolError(fmt::format("endpoint answered HTTP {}", res->status), res->body);
        return parse_wire_response(req, res->body);
    }
    throw BackendError(fmt::format("backend unreachable at {} after {} attempts: {}",
                                   endpoint_.url, last_attempts_, last_error));
}

BackendResponse llm_respond(const BackendRequest& req, const EndpointConfig& endpoint) {
    LlmBackend backend(endpoint);
    return backend.respond(req);
}

}  // namespace sist

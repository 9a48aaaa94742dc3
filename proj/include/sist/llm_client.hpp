#pragma once

#include <functional>
#include <string>

#include <nlohmann/json.hpp>

#include "sist/backends.hpp"

namespace sist {

inline constexpr const char* kTokenEnvVar = "CLASI_LLM_TOKEN";

struct EndpointConfig {
    std::string url;  // http://host[:port][/path]
    std::string token_env = kTokenEnvVar;
    double timeout_s = 30.0;
    int max_retries = 3;
    double backoff_base_s = 0.5;
    double backoff_factor = 2.0;
};

// Wire request body for one round.
nlohmann::ordered_json wire_request(const BackendRequest& req);

// Parses and validates a wire response body against the request's window.
// Wait replies are normalized to cutoff == window start. Throws ProtocolError
// with the raw body attached.
BackendResponse parse_wire_response(const BackendRequest& req, const std::string& body);

// Blocking HTTP client for an external translation model.
class LlmBackend : public Backend {
public:
    using Sleeper = std::function<void(double seconds)>;

    explicit LlmBackend(EndpointConfig endpoint, Sleeper sleeper = {});
    ~LlmBackend() override;

    BackendResponse respond(const BackendRequest& req) override;

    // Transport attempts made by the most recent respond() call.
    int last_attempts() const noexcept { return last_attempts_; }

private:
    struct Impl;
    EndpointConfig endpoint_;
    Sleeper sleeper_;
    std::unique_ptr<Impl> impl_;
    int last_attempts_ = 0;
};

BackendResponse llm_respond(const BackendRequest& req, const EndpointConfig& endpoint);

}  // namespace sist

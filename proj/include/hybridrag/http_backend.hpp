#pragma once

#include <string>

#include <httplib.h>
#include <json.hpp>

#include "hybridrag/backend.hpp"

namespace hybridrag {

/// Splits "http://host:port/path" into ("http://host:port", "/path").
inline std::pair<std::string, std::string> split_url(const std::string& url) {
    const auto scheme = url.find("://");
    const auto path_at = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (path_at == std::string::npos) return {url, "/"};
    return {url.substr(0, path_at), url.substr(path_at)};
}

/// Remote completion endpoint:
///   POST {prompt, max_tokens, temperature, top_p} -> {text}
class HttpBackend final : public LlmBackend {
public:
    HttpBackend(std::string id, std::string endpoint, std::string bearer_token = {}, Millis timeout = Millis{30000})
        : id_(std::move(id)), endpoint_(std::move(endpoint)), token_(std::move(bearer_token)), timeout_(timeout) {}

    std::string id() const override { return id_; }

    std::string complete(const CompletionRequest& req) const override {
        const auto [base, path] = split_url(endpoint_);
        httplib::Client cli(base);
        const auto ms = static_cast<long>(timeout_.count());
        cli.set_connection_timeout(ms / 1000, (ms % 1000) * 1000);
        cli.set_read_timeout(ms / 1000, (ms % 1000) * 1000);
        cli.set_write_timeout(ms / 1000, (ms % 1000) * 1000);
        httplib::Headers headers;
        if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
        const nlohmann::json body = {
            {"prompt", req.prompt}, {"max_tokens", req.max_tokens}, {"temperature", req.temperature}, {"top_p", req.top_p}};
        auto res = cli.Post(path, headers, body.dump(), "application/json");
        if (!res) {
            if (res.error() == httplib::Error::Read || res.error() == httplib::Error::Write ||
                res.error() == httplib::Error::ConnectionTimeout)
                throw BackendTimeout("remote backend " + endpoint_ + ": " + httplib::to_string(res.error()));
            throw BackendError("remote backend " + endpoint_ + ": " + httplib::to_string(res.error()));
        }
        if (res->status != 200)
            throw BackendError("remote backend " + endpoint_ + " returned HTTP " + std::to_string(res->status));
        try {
            return nlohmann::json::parse(res->body).at("text").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw BackendError("remote backend " + endpoint_ + " sent a malformed body: " + e.what());
        }
    }

private:
    std::string id_;
    std::string endpoint_;
    std::string token_;
    Millis timeout_;
};

} // namespace hybridrag

#include "kga/http_client.hpp"

#include <chrono>

#include <httplib.h>

namespace kga::llm {

HttpChatClient::HttpChatClient(HttpClientConfig config) : config_(std::move(config)) {}

ChatResponse HttpChatClient::send(const ChatRequest& req) {
    nlohmann::json body;
    body["model"] = req.model;
    body["temperature"] = req.temperature;
    if (req.seed) body["seed"] = *req.seed;
    nlohmann::json messages = nlohmann::json::array();
    for (const auto& m : req.messages)
        messages.push_back({{"role", m.role}, {"content", m.content}});
    body["messages"] = std::move(messages);

    httplib::Client client(config_.base_url);
    client.set_connection_timeout(config_.timeout_seconds);
    client.set_read_timeout(config_.timeout_seconds);
    httplib::Headers headers;
    if (!config_.api_key.empty())
        headers.emplace("Authorization", "Bearer " + config_.api_key);

    auto start = std::chrono::steady_clock::now();
    httplib::Result res = client.Post(config_.path, headers, body.dump(),
                                      "application/json");
    auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - start);

    if (!res)
        throw TransportError("connection to " + config_.base_url + " failed: " +
                                 httplib::to_string(res.error()),
                             /*retryable=*/true);
    if (res->status == 408 || res->status == 429 || res->status >= 500)
        throw TransportError("server returned " + std::to_string(res->status),
                             /*retryable=*/true, res->status);
    if (res->status < 200 || res->status >= 300)
        throw TransportError("server returned " + std::to_string(res->status) + ": " +
                                 res->body,
                             /*retryable=*/false, res->status);

    nlohmann::json j = nlohmann::json::parse(res->body, nullptr, false);
    if (j.is_discarded() || !j.contains("choices") || j["choices"].empty())
        throw TransportError("malformed completion response", /*retryable=*/false);

    ChatResponse out;
    out.text = j["choices"][0].value("message", nlohmann::json::object())
                   .value("content", "");
    if (j.contains("usage")) {
        out.prompt_tokens = j["usage"].value("prompt_tokens", 0);
        out.completion_tokens = j["usage"].value("completion_tokens", 0);
    } else {
        for (const auto& m : req.messages)
            out.prompt_tokens += approximate_tokens(m.content);
        out.completion_tokens = approximate_tokens(out.text);
    }
    out.latency = elapsed;
    return out;
}

} // namespace kga::llm

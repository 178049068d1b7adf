#pragma once

#include <string>

#include "kga/llm.hpp"

namespace kga::llm {

struct HttpClientConfig {
    std::string base_url = "http://localhost:8080"; // scheme://host[:port]
    std::string path = "/v1/chat/completions";
    std::string api_key;        // sent as Bearer token when non-empty
    int timeout_seconds = 120;
};

// Chat client speaking the common completions wire format: POST {path} with
// {"model", "messages", "temperature"}, answer read from
// choices[0].message.content and usage.{prompt,completion}_tokens.
// Connection failures and 408/429/5xx map to retryable transport errors,
// remaining 4xx to non-retryable ones.
class HttpChatClient : public ChatClient {
public:
    explicit HttpChatClient(HttpClientConfig config);
    ChatResponse send(const ChatRequest& req) override;

private:
    HttpClientConfig config_;
};

} // namespace kga::llm

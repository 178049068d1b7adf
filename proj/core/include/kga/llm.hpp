#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace kga::llm {

struct ChatMessage {
    std::string role; // "system", "user", "assistant"
    std::string content;
};

struct ChatRequest {
    std::vector<ChatMessage> messages;
    std::string model;
    double temperature = 0.0;
    std::optional<std::uint64_t> seed;
    // Stable label for this call site ("next_step", "insert_query", ...);
    // scripted transcripts key on it and the usage ledger groups by it.
    std::string tag;
};

struct ChatResponse {
    std::string text;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    std::chrono::milliseconds latency{0};
};

class TransportError : public std::runtime_error {
public:
    TransportError(const std::string& what, bool retryable, int status = 0)
        : std::runtime_error(what), retryable_(retryable), status_(status) {}
    bool retryable() const { return retryable_; }
    int status() const { return status_; }

private:
    bool retryable_;
    int status_;
};

class LlmError : public std::runtime_error {
public:
    explicit LlmError(const std::string& what) : std::runtime_error(what) {}
};

class ChatClient {
public:
    virtual ~ChatClient() = default;
    virtual ChatResponse send(const ChatRequest& req) = 0;
};

// Rough byte-based token estimate used when no provider count is available;
// deterministic so scripted runs have reproducible ledgers.
std::int64_t approximate_tokens(const std::string& text);

// Deterministic stand-in for a chat provider. Loads a JSONL transcript whose
// lines look like {"tag": "...", "index": 0, "response": "...",
// "fail_times": 0}; the pair (tag, occurrence index) addresses one reply.
// The entry fails `fail_times` times with a retryable error before
// succeeding. A missing entry raises a non-retryable error naming the tag.
class ScriptedChatClient : public ChatClient {
public:
    static ScriptedChatClient from_file(const std::string& path);
    static ScriptedChatClient from_string(const std::string& jsonl);

    ScriptedChatClient() = default;
    ScriptedChatClient(ScriptedChatClient&& other) noexcept
        : entries_(std::move(other.entries_)), next_index_(std::move(other.next_index_)) {}

    ChatResponse send(const ChatRequest& req) override;

    std::size_t entry_count() const { return entries_.size(); }

private:
    struct Entry {
        std::string response;
        int fail_times = 0;
        int fails_done = 0;
    };
    std::map<std::pair<std::string, int>, Entry> entries_;
    std::map<std::string, int> next_index_;
    std::mutex mutex_;
};

struct UsageRecord {
    std::string tag;
    std::string model;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    std::chrono::milliseconds latency{0};
    int attempts = 1;
    double cost = 0.0;
};

struct UsageTotals {
    std::int64_t calls = 0;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    double cost = 0.0;
};

// Append-only, internally synchronized record of every completed call.
class UsageLedger {
public:
    void append(UsageRecord record);
    std::vector<UsageRecord> records() const;
    UsageTotals totals() const;
    std::map<std::string, UsageTotals> totals_by_tag() const;

private:
    mutable std::mutex mutex_;
    std::vector<UsageRecord> records_;
};

struct ModelPricing {
    double prompt_per_million = 0.0;
    double completion_per_million = 0.0;
};

struct PricingTable {
    std::map<std::string, ModelPricing> models;

    static PricingTable from_json(const nlohmann::json& j);
    static PricingTable from_file(const std::string& path);
};

// Sums token counts priced per million; throws LlmError when a record names
// a model the table does not cover.
double compute_cost(const UsageLedger& ledger, const PricingTable& pricing);

struct BackoffPolicy {
    double min_wait_seconds = 1.0;
    double max_wait_seconds = 60.0;
    int max_attempts = 6;
};

class Sleeper {
public:
    virtual ~Sleeper() = default;
    virtual void sleep(std::chrono::duration<double> d) = 0;
};

class RealSleeper : public Sleeper {
public:
    void sleep(std::chrono::duration<double> d) override;
};

class RecordingSleeper : public Sleeper {
public:
    void sleep(std::chrono::duration<double> d) override;
    std::vector<double> waits_seconds() const;

private:
    mutable std::mutex mutex_;
    std::vector<double> waits_;
};

struct SampleResult {
    std::vector<ChatResponse> responses;
    std::vector<std::string> failures; // messages of samples that exhausted retries
};

// Retry wrapper around a ChatClient: full-jitter exponential backoff where
// the k-th retry waits clamp(U(0, 2^k), min, max) seconds, at most
// max_attempts tries, retrying only errors flagged retryable. Every
// successful call lands in the ledger with its cost.
class Gateway {
public:
    Gateway(ChatClient& client, UsageLedger& ledger, BackoffPolicy policy,
            PricingTable pricing, std::uint64_t seed, Sleeper* sleeper = nullptr);

    ChatResponse complete(const ChatRequest& req);
    // n independent completions of the same request; failed samples are
    // skipped and reported, at least one must succeed.
    SampleResult sample_n(const ChatRequest& req, int n);

    // The k-th (1-based) retry wait in seconds; exposed for property tests.
    double sample_wait(int k);

private:
    ChatClient& client_;
    UsageLedger& ledger_;
    BackoffPolicy policy_;
    PricingTable pricing_;
    std::mt19937_64 rng_;
    std::mutex rng_mutex_;
    Sleeper* sleeper_;
};

enum class FieldKind { Text, Integer, Number, Boolean, Any };

struct FieldSpec {
    std::string name;
    FieldKind kind = FieldKind::Any;
    bool required = true;
};

using Schema = std::vector<FieldSpec>;

class StructuredParseError : public std::runtime_error {
public:
    StructuredParseError(const std::string& what, std::string raw)
        : std::runtime_error(what), raw_(std::move(raw)) {}
    const std::string& raw() const { return raw_; }

private:
    std::string raw_;
};

// Extracts the first JSON object embedded in model output that satisfies
// `schema` (code fences, surrounding prose, and doubly-escaped quotes are
// tolerated). Boolean fields accept true/false strings. On failure throws
// StructuredParseError carrying the raw text for retry prompts.
nlohmann::json parse_structured(const std::string& text, const Schema& schema);

} // namespace kga::llm

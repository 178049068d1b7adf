#include "kga/llm.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "kga/textfix.hpp"

namespace kga::llm {

std::int64_t approximate_tokens(const std::string& text) {
    return static_cast<std::int64_t>((text.size() + 3) / 4);
}

namespace {

std::int64_t request_tokens(const ChatRequest& req) {
    std::int64_t total = 0;
    for (const auto& m : req.messages) total += approximate_tokens(m.content);
    return total;
}

} // namespace

ScriptedChatClient ScriptedChatClient::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw LlmError("cannot open transcript: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_string(ss.str());
}

ScriptedChatClient ScriptedChatClient::from_string(const std::string& jsonl) {
    ScriptedChatClient client;
    std::istringstream in(jsonl);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw LlmError("transcript line " + std::to_string(lineno) + ": " + e.what());
        }
        std::string tag = j.at("tag").get<std::string>();
        int index = j.at("index").get<int>();
        Entry entry;
        entry.response = j.at("response").get<std::string>();
        entry.fail_times = j.value("fail_times", 0);
        auto key = std::make_pair(std::move(tag), index);
        if (client.entries_.count(key))
            throw LlmError("transcript line " + std::to_string(lineno) +
                           ": duplicate (tag, index)");
        client.entries_.emplace(std::move(key), std::move(entry));
    }
    return client;
}

ChatResponse ScriptedChatClient::send(const ChatRequest& req) {
    std::lock_guard<std::mutex> lock(mutex_);
    std::string tag = req.tag.empty() ? "untagged" : req.tag;
    int index = next_index_[tag];
    auto it = entries_.find({tag, index});
    if (it == entries_.end())
        throw TransportError("transcript has no entry for tag '" + tag + "' index " +
                                 std::to_string(index),
                             /*retryable=*/false);
    Entry& entry = it->second;
    if (entry.fails_done < entry.fail_times) {
        ++entry.fails_done;
        throw TransportError("scripted failure " + std::to_string(entry.fails_done) + "/" +
                                 std::to_string(entry.fail_times) + " for tag '" + tag + "'",
                             /*retryable=*/true, 500);
    }
    ++next_index_[tag];
    ChatResponse resp;
    resp.text = entry.response;
    resp.prompt_tokens = request_tokens(req);
    resp.completion_tokens = approximate_tokens(entry.response);
    resp.latency = std::chrono::milliseconds(0);
    return resp;
}

void UsageLedger::append(UsageRecord record) {
    std::lock_guard<std::mutex> lock(mutex_);
    records_.push_back(std::move(record));
}

std::vector<UsageRecord> UsageLedger::records() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return records_;
}

UsageTotals UsageLedger::totals() const {
    std::lock_guard<std::mutex> lock(mutex_);
    UsageTotals t;
    for (const auto& r : records_) {
        ++t.calls;
        t.prompt_tokens += r.prompt_tokens;
        t.completion_tokens += r.completion_tokens;
        t.cost += r.cost;
    }
    return t;
}

std::map<std::string, UsageTotals> UsageLedger::totals_by_tag() const {
    std::lock_guard<std::mutex> lock(mutex_);
    std::map<std::string, UsageTotals> out;
    for (const auto& r : records_) {
        UsageTotals& t = out[r.tag];
        ++t.calls;
        t.prompt_tokens += r.prompt_tokens;
        t.completion_tokens += r.completion_tokens;
        t.cost += r.cost;
    }
    return out;
}

PricingTable PricingTable::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw LlmError("pricing table must be a JSON object");
    PricingTable table;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const nlohmann::json& entry = it.value();
        ModelPricing p;
        p.prompt_per_million = entry.at("prompt_per_million").get<double>();
        p.completion_per_million = entry.at("completion_per_million").get<double>();
        table.models[it.key()] = p;
    }
    return table;
}

PricingTable PricingTable::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw LlmError("cannot open pricing table: " + path);
    nlohmann::json j;
    in >> j;
    return from_json(j);
}

namespace {

double record_cost(const UsageRecord& r, const ModelPricing& p) {
    return static_cast<double>(r.prompt_tokens) * p.prompt_per_million / 1e6 +
           static_cast<double>(r.completion_tokens) * p.completion_per_million / 1e6;
}

} // namespace

double compute_cost(const UsageLedger& ledger, const PricingTable& pricing) {
    double total = 0.0;
    for (const auto& r : ledger.records()) {
        auto it = pricing.models.find(r.model);
        if (it == pricing.models.end())
            throw LlmError("pricing table has no entry for model '" + r.model + "'");
        total += record_cost(r, it->second);
    }
    return total;
}

void RealSleeper::sleep(std::chrono::duration<double> d) {
    std::this_thread::sleep_for(d);
}

void RecordingSleeper::sleep(std::chrono::duration<double> d) {
    std::lock_guard<std::mutex> lock(mutex_);
    waits_.push_back(d.count());
}

std::vector<double> RecordingSleeper::waits_seconds() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return waits_;
}

namespace {

RealSleeper& default_sleeper() {
    static RealSleeper s;
    return s;
}

} // namespace

Gateway::Gateway(ChatClient& client, UsageLedger& ledger, BackoffPolicy policy,
                 PricingTable pricing, std::uint64_t seed, Sleeper* sleeper)
    : client_(client), ledger_(ledger), policy_(policy), pricing_(std::move(pricing)),
      rng_(seed), sleeper_(sleeper ? sleeper : &default_sleeper()) {}

double Gateway::sample_wait(int k) {
    double cap = std::pow(2.0, k);
    double drawn;
    {
        std::lock_guard<std::mutex> lock(rng_mutex_);
        drawn = std::uniform_real_distribution<double>(0.0, cap)(rng_);
    }
    return std::clamp(drawn, policy_.min_wait_seconds, policy_.max_wait_seconds);
}

ChatResponse Gateway::complete(const ChatRequest& req) {
    for (int attempt = 1;; ++attempt) {
        try {
            ChatResponse resp = client_.send(req);
            UsageRecord record;
            record.tag = req.tag;
            record.model = req.model;
            record.prompt_tokens = resp.prompt_tokens;
            record.completion_tokens = resp.completion_tokens;
            record.latency = resp.latency;
            record.attempts = attempt;
            auto it = pricing_.models.find(req.model);
            if (it != pricing_.models.end()) record.cost = record_cost(record, it->second);
            ledger_.append(std::move(record));
            return resp;
        } catch (const TransportError& e) {
            if (!e.retryable() || attempt >= policy_.max_attempts) throw;
            sleeper_->sleep(std::chrono::duration<double>(sample_wait(attempt)));
        }
    }
}

SampleResult Gateway::sample_n(const ChatRequest& req, int n) {
    SampleResult result;
    std::optional<TransportError> last;
    for (int i = 0; i < n; ++i) {
        try {
            result.responses.push_back(complete(req));
        } catch (const TransportError& e) {
            result.failures.push_back(e.what());
            last = e;
        }
    }
    if (result.responses.empty() && last) throw *last;
    return result;
}

namespace {

bool field_ok(const nlohmann::json& obj, const FieldSpec& field, nlohmann::json& fixed) {
    auto it = obj.find(field.name);
    if (it == obj.end()) return !field.required;
    switch (field.kind) {
    case FieldKind::Text:
        return it->is_string();
    case FieldKind::Integer:
        return it->is_number_integer() || it->is_number_unsigned();
    case FieldKind::Number:
        return it->is_number();
    case FieldKind::Boolean: {
        if (it->is_boolean()) return true;
        if (it->is_string()) {
            std::string s = it->get<std::string>();
            for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            if (s == "true" || s == "false") {
                fixed[field.name] = (s == "true");
                return true;
            }
        }
        return false;
    }
    case FieldKind::Any:
        return true;
    }
    return false;
}

std::optional<nlohmann::json> try_validate(const nlohmann::json& candidate,
                                           const Schema& schema) {
    if (!candidate.is_object()) return std::nullopt;
    nlohmann::json fixed = candidate;
    for (const auto& field : schema) {
        if (!field_ok(candidate, field, fixed)) return std::nullopt;
    }
    return fixed;
}

// Balanced {...} substrings of `text`, in order of appearance.
std::vector<std::string> object_candidates(const std::string& text) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '{') continue;
        int depth = 0;
        char quote = 0;
        for (std::size_t j = i; j < text.size(); ++j) {
            char c = text[j];
            if (quote) {
                if (c == '\\') ++j;
                else if (c == quote) quote = 0;
                continue;
            }
            if (c == '"' || c == '\'') {
                quote = c;
            } else if (c == '{') {
                ++depth;
            } else if (c == '}') {
                if (--depth == 0) {
                    out.push_back(text.substr(i, j - i + 1));
                    break;
                }
            }
        }
    }
    return out;
}

} // namespace

nlohmann::json parse_structured(const std::string& text, const Schema& schema) {
    std::vector<std::string> sources = {text, strip_code_fences(text),
                                        repair_text(text)};
    for (const auto& src : sources) {
        for (const auto& candidate : object_candidates(src)) {
            nlohmann::json parsed = nlohmann::json::parse(candidate, nullptr, false);
            if (parsed.is_discarded()) continue;
            if (auto valid = try_validate(parsed, schema)) return *valid;
        }
    }
    std::string fields;
    for (const auto& f : schema) {
        if (!fields.empty()) fields += ", ";
        fields += f.name;
    }
    throw StructuredParseError("no JSON object with fields {" + fields + "} found", text);
}

} // namespace kga::llm

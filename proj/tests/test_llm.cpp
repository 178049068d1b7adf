#include <doctest.h>

#include <fstream>
#include <thread>

#include "kga/llm.hpp"

#include "test_support.hpp"

using namespace kga::llm;

namespace {

ChatRequest make_request(const std::string& tag, const std::string& content = "abcd",
                         const std::string& model = "test-model") {
    ChatRequest req;
    req.messages = {{"user", content}};
    req.model = model;
    req.tag = tag;
    return req;
}

PricingTable test_pricing() {
    PricingTable t;
    t.models["test-model"] = {4.0, 8.0};
    return t;
}

} // namespace

TEST_CASE("token approximation is a byte-count ceiling") {
    CHECK(approximate_tokens("") == 0);
    CHECK(approximate_tokens("a") == 1);
    CHECK(approximate_tokens("abcd") == 1);
    CHECK(approximate_tokens("abcde") == 2);
    CHECK(approximate_tokens(std::string(4000, 'x')) == 1000);
}

TEST_CASE("scripted replies are addressed by tag and occurrence") {
    auto client = ScriptedChatClient::from_string(
        R"({"tag": "greet", "index": 0, "response": "first"})"
        "\n"
        R"({"tag": "greet", "index": 1, "response": "second"})"
        "\n"
        R"({"tag": "other", "index": 0, "response": "elsewhere"})"
        "\n");
    CHECK(client.entry_count() == 3);
    CHECK(client.send(make_request("greet")).text == "first");
    CHECK(client.send(make_request("other")).text == "elsewhere");
    CHECK(client.send(make_request("greet")).text == "second");
    try {
        client.send(make_request("greet"));
        FAIL("expected TransportError");
    } catch (const TransportError& e) {
        CHECK_FALSE(e.retryable());
        CHECK(std::string(e.what()).find("greet") != std::string::npos);
    }
}

TEST_CASE("scripted token counts come from the byte approximation") {
    auto client = ScriptedChatClient::from_string(
        R"({"tag": "t", "index": 0, "response": "abcdefgh"})");
    ChatRequest req = make_request("t", "abcd");
    req.messages.push_back({"system", "abcde"});
    ChatResponse resp = client.send(req);
    CHECK(resp.prompt_tokens == 3);
    CHECK(resp.completion_tokens == 2);
}

TEST_CASE("scripted entries can fail a fixed number of times first") {
    auto client = ScriptedChatClient::from_string(
        R"({"tag": "t", "index": 0, "response": "ok", "fail_times": 2})");
    for (int i = 0; i < 2; ++i) {
        try {
            client.send(make_request("t"));
            FAIL("expected TransportError");
        } catch (const TransportError& e) {
            CHECK(e.retryable());
            CHECK(e.status() == 500);
        }
    }
    CHECK(client.send(make_request("t")).text == "ok");
}

TEST_CASE("an untagged request reads the untagged stream") {
    auto client = ScriptedChatClient::from_string(
        R"({"tag": "untagged", "index": 0, "response": "fallback"})");
    CHECK(client.send(make_request("")).text == "fallback");
}

TEST_CASE("transcript loading rejects bad lines and duplicates") {
    CHECK_THROWS_AS(ScriptedChatClient::from_string("not json\n"), LlmError);
    CHECK_THROWS_AS(ScriptedChatClient::from_string(
                        R"({"tag": "t", "index": 0, "response": "a"})"
                        "\n"
                        R"({"tag": "t", "index": 0, "response": "b"})"),
                    LlmError);
    try {
        ScriptedChatClient::from_string(
            R"({"tag": "t", "index": 0, "response": "a"})"
            "\n\nbroken\n");
        FAIL("expected LlmError");
    } catch (const LlmError& e) {
        // Line numbers count blank lines so errors point at the real file.
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    CHECK_THROWS_AS(ScriptedChatClient::from_file("/nonexistent/path.jsonl"), LlmError);
}

TEST_CASE("transcripts round-trip through a file") {
    std::string dir = kga::test::temp_dir("transcript");
    std::string path = dir + "/t.jsonl";
    {
        std::ofstream out(path);
        out << R"({"tag": "t", "index": 0, "response": "from disk"})" << "\n";
    }
    auto client = ScriptedChatClient::from_file(path);
    CHECK(client.send(make_request("t")).text == "from disk");
}

TEST_CASE("retry waits stay inside the policy bounds") {
    UsageLedger ledger;
    auto client = ScriptedChatClient::from_string("");
    Gateway gw(client, ledger, BackoffPolicy{}, PricingTable{}, 42);
    for (int k = 1; k <= 8; ++k) {
        double all_min = 1e9, all_max = -1e9;
        for (int i = 0; i < 1000; ++i) {
            double w = gw.sample_wait(k);
            all_min = std::min(all_min, w);
            all_max = std::max(all_max, w);
        }
        CHECK(all_min >= 1.0);
        CHECK(all_max <= 60.0);
        // The cap doubles per retry: early retries cannot reach the ceiling
        // and late retries should spread past the early cap.
        if (k == 1) CHECK(all_max <= 2.0);
        if (k >= 6) CHECK(all_max > 2.0);
    }
}

TEST_CASE("the gateway retries retryable failures and records attempts") {
    auto client = ScriptedChatClient::from_string(
        R"({"tag": "t", "index": 0, "response": "ok", "fail_times": 2})");
    UsageLedger ledger;
    RecordingSleeper sleeper;
    Gateway gw(client, ledger, BackoffPolicy{}, test_pricing(), 7, &sleeper);
    ChatResponse resp = gw.complete(make_request("t"));
    CHECK(resp.text == "ok");
    auto records = ledger.records();
    REQUIRE(records.size() == 1);
    CHECK(records[0].attempts == 3);
    CHECK(records[0].tag == "t");
    CHECK(records[0].model == "test-model");
    auto waits = sleeper.waits_seconds();
    REQUIRE(waits.size() == 2);
    for (double w : waits) {
        CHECK(w >= 1.0);
        CHECK(w <= 60.0);
    }
}

TEST_CASE("the gateway gives up after six attempts") {
    auto client = ScriptedChatClient::from_string(
        R"({"tag": "t", "index": 0, "response": "never", "fail_times": 99})");
    UsageLedger ledger;
    RecordingSleeper sleeper;
    Gateway gw(client, ledger, BackoffPolicy{}, PricingTable{}, 7, &sleeper);
    CHECK_THROWS_AS(gw.complete(make_request("t")), TransportError);
    CHECK(sleeper.waits_seconds().size() == 5);
    CHECK(ledger.records().empty());
}

TEST_CASE("non-retryable failures are not retried") {
    auto client = ScriptedChatClient::from_string("");
    UsageLedger ledger;
    RecordingSleeper sleeper;
    Gateway gw(client, ledger, BackoffPolicy{}, PricingTable{}, 7, &sleeper);
    CHECK_THROWS_AS(gw.complete(make_request("missing")), TransportError);
    CHECK(sleeper.waits_seconds().empty());
}

TEST_CASE("records are priced when the model is known, zero otherwise") {
    auto client = ScriptedChatClient::from_string(
        R"({"tag": "t", "index": 0, "response": "abcdefgh"})"
        "\n"
        R"({"tag": "t", "index": 1, "response": "abcdefgh"})");
    UsageLedger ledger;
    RecordingSleeper sleeper;
    Gateway gw(client, ledger, BackoffPolicy{}, test_pricing(), 7, &sleeper);
    gw.complete(make_request("t", "abcd", "test-model"));
    gw.complete(make_request("t", "abcd", "unknown-model"));
    auto records = ledger.records();
    REQUIRE(records.size() == 2);
    // 1 prompt token at $4/M plus 2 completion tokens at $8/M.
    CHECK(records[0].cost == doctest::Approx(20.0 / 1e6));
    CHECK(records[1].cost == 0.0);
}

TEST_CASE("sample_n returns the successes and reports the failures") {
    auto client = ScriptedChatClient::from_string(
        R"({"tag": "vote", "index": 0, "response": "a"})"
        "\n"
        R"({"tag": "vote", "index": 1, "response": "b"})"
        "\n"
        R"({"tag": "vote", "index": 2, "response": "c"})");
    UsageLedger ledger;
    RecordingSleeper sleeper;
    Gateway gw(client, ledger, BackoffPolicy{}, PricingTable{}, 7, &sleeper);
    SampleResult five = gw.sample_n(make_request("vote"), 5);
    REQUIRE(five.responses.size() == 3);
    CHECK(five.responses[0].text == "a");
    CHECK(five.responses[2].text == "c");
    CHECK(five.failures.size() == 2);
    CHECK(ledger.records().size() == 3);

    CHECK_THROWS_AS(gw.sample_n(make_request("vote"), 2), TransportError);
}

TEST_CASE("the ledger sums totals overall and per tag") {
    UsageLedger ledger;
    ledger.append({"a", "m", 10, 5, std::chrono::milliseconds(1), 1, 0.5});
    ledger.append({"a", "m", 20, 5, std::chrono::milliseconds(1), 2, 0.25});
    ledger.append({"b", "m", 1, 1, std::chrono::milliseconds(1), 1, 0.25});
    UsageTotals t = ledger.totals();
    CHECK(t.calls == 3);
    CHECK(t.prompt_tokens == 31);
    CHECK(t.completion_tokens == 11);
    CHECK(t.cost == doctest::Approx(1.0));
    auto by_tag = ledger.totals_by_tag();
    CHECK(by_tag.at("a").calls == 2);
    CHECK(by_tag.at("a").prompt_tokens == 30);
    CHECK(by_tag.at("b").calls == 1);
}

TEST_CASE("concurrent appends all land in the ledger") {
    UsageLedger ledger;
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t)
        threads.emplace_back([&ledger, t] {
            for (int i = 0; i < 100; ++i)
                ledger.append({"tag" + std::to_string(t), "m", 1, 1,
                               std::chrono::milliseconds(0), 1, 0.0});
        });
    for (auto& th : threads) th.join();
    CHECK(ledger.totals().calls == 800);
}

TEST_CASE("cost computation follows the per-million prices exactly") {
    UsageLedger ledger;
    ledger.append({"t", "m1", 1'000'000, 2'000'000, std::chrono::milliseconds(0), 1, 0.0});
    PricingTable pricing;
    pricing.models["m1"] = {5.0, 15.0};
    CHECK(compute_cost(ledger, pricing) == doctest::Approx(5.0 + 30.0));
    ledger.append({"t", "m2", 1, 1, std::chrono::milliseconds(0), 1, 0.0});
    CHECK_THROWS_AS(compute_cost(ledger, pricing), LlmError);
}

TEST_CASE("pricing tables load from JSON and reject non-objects") {
    auto table = PricingTable::from_json(nlohmann::json::parse(
        R"({"m": {"prompt_per_million": 1.5, "completion_per_million": 2.5}})"));
    CHECK(table.models.at("m").prompt_per_million == 1.5);
    CHECK(table.models.at("m").completion_per_million == 2.5);
    CHECK_THROWS_AS(PricingTable::from_json(nlohmann::json::parse("[]")), LlmError);
    CHECK_THROWS_AS(PricingTable::from_file("/nonexistent.json"), LlmError);
}

TEST_CASE("structured parsing finds the object in plain and fenced text") {
    Schema schema = {{"query_type", FieldKind::Text, true},
                     {"reason", FieldKind::Text, false}};
    auto direct = parse_structured(R"({"query_type": "INSERT"})", schema);
    CHECK(direct["query_type"] == "INSERT");
    auto fenced = parse_structured(
        "Sure, here you go:\n```json\n{\"query_type\": \"RETRIEVE\", "
        "\"reason\": \"done\"}\n```\n", schema);
    CHECK(fenced["query_type"] == "RETRIEVE");
    CHECK(fenced["reason"] == "done");
}

TEST_CASE("structured parsing skips objects that fail the schema") {
    Schema schema = {{"answer", FieldKind::Text, true}};
    auto j = parse_structured(
        R"(I considered {"other": 1} before settling on {"answer": "42"}.)", schema);
    CHECK(j["answer"] == "42");
}

TEST_CASE("structured parsing decodes doubly-escaped payloads") {
    Schema schema = {{"query", FieldKind::Text, true}};
    auto j = parse_structured(R"({\"query\": \"MATCH (n) RETURN n.x\"})", schema);
    CHECK(j["query"] == "MATCH (n) RETURN n.x");
}

TEST_CASE("boolean fields accept true and false as strings") {
    Schema schema = {{"required", FieldKind::Boolean, true}};
    CHECK(parse_structured(R"({"required": true})", schema)["required"] == true);
    CHECK(parse_structured(R"({"required": "True"})", schema)["required"] == true);
    CHECK(parse_structured(R"({"required": "false"})", schema)["required"] == false);
    CHECK_THROWS_AS(parse_structured(R"({"required": "maybe"})", schema),
                    StructuredParseError);
}

TEST_CASE("integer fields reject fractions, number fields accept them") {
    Schema ints = {{"n", FieldKind::Integer, true}};
    Schema nums = {{"n", FieldKind::Number, true}};
    CHECK(parse_structured(R"({"n": 3})", ints)["n"] == 3);
    CHECK_THROWS_AS(parse_structured(R"({"n": 3.5})", ints), StructuredParseError);
    CHECK(parse_structured(R"({"n": 3.5})", nums)["n"] == 3.5);
}

TEST_CASE("parse failures carry the raw text and the missing fields") {
    Schema schema = {{"final_answer", FieldKind::Any, true}};
    try {
        parse_structured("no json here at all", schema);
        FAIL("expected StructuredParseError");
    } catch (const StructuredParseError& e) {
        CHECK(e.raw() == "no json here at all");
        CHECK(std::string(e.what()).find("final_answer") != std::string::npos);
    }
}

TEST_CASE("optional fields may be absent but still type-check when present") {
    Schema schema = {{"a", FieldKind::Text, true}, {"b", FieldKind::Integer, false}};
    CHECK_NOTHROW(parse_structured(R"({"a": "x"})", schema));
    CHECK(parse_structured(R"({"a": "x", "b": 2})", schema)["b"] == 2);
    CHECK_THROWS_AS(parse_structured(R"({"a": "x", "b": "two"})", schema),
                    StructuredParseError);
}

#include "kga/controller.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include "kga/kgql.hpp"
#include "kga/kgql_eval.hpp"
#include "kga/script.hpp"
#include "kga/snapshot.hpp"
#include "kga/textfix.hpp"

namespace kga {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::string strip_trailing_punct(std::string s) {
    while (!s.empty() && (s.back() == '.' || s.back() == '!' || s.back() == '?'))
        s.pop_back();
    return trim(s);
}

bool is_plain_number(const std::string& s) {
    if (s.empty()) return false;
    errno = 0;
    char* end = nullptr;
    std::strtod(s.c_str(), &end);
    return errno == 0 && end == s.c_str() + s.size();
}

// Non-string JSON fields (a numeric answer, say) are taken by their dump.
std::string text_field(const nlohmann::json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) return "";
    if (it->is_string()) return it->get<std::string>();
    return it->dump();
}

std::string render_table(const kgql::ResultTable& table) {
    std::string out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        if (r) out += "\n";
        for (std::size_t c = 0; c < table.rows[r].size(); ++c) {
            if (c) out += ", ";
            out += table.rows[r][c].display();
        }
    }
    return out;
}

const char* kScriptFunctions =
    "nodes_by_label, property_of, neighbors, edge_count, sort_asc, sort_desc, "
    "map, filter, index, slice, sum, join, length, concat, lower, upper, "
    "contains, round";

} // namespace

std::string to_string(SolveMode mode) {
    switch (mode) {
    case SolveMode::Query: return "QUERY";
    case SolveMode::Script: return "SCRIPT";
    case SolveMode::Direct: return "DIRECT";
    }
    return "QUERY";
}

SolveMode solve_mode_from_string(const std::string& text) {
    std::string up = text;
    for (char& c : up) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (up == "QUERY") return SolveMode::Query;
    if (up == "SCRIPT") return SolveMode::Script;
    if (up == "DIRECT") return SolveMode::Direct;
    throw std::invalid_argument("unknown solve mode '" + text + "'");
}

std::string to_string(StoreBackend backend) {
    return backend == StoreBackend::PropertyGraph ? "property_graph" : "adjacency";
}

StoreBackend backend_from_string(const std::string& text) {
    std::string low = text;
    for (char& c : low) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (low == "property_graph") return StoreBackend::PropertyGraph;
    if (low == "adjacency") return StoreBackend::AdjacencyList;
    throw std::invalid_argument("unknown graph backend '" + text + "'");
}

void ControllerConfig::validate() const {
    auto need = [](int value, const char* name) {
        if (value < 1)
            throw std::invalid_argument(std::string(name) + " must be at least 1");
    };
    need(max_iterations, "max_iterations");
    need(num_next_steps_decision, "num_next_steps_decision");
    need(max_retrieve_query_retry, "max_retrieve_query_retry");
    need(max_cypher_fixing_retry, "max_cypher_fixing_retry");
    need(max_final_solution_parsing, "max_final_solution_parsing");
    need(max_tool_retries, "max_tool_retries");
    if (direct_token_limit < 1)
        throw std::invalid_argument("direct_token_limit must be at least 1");
}

ControllerConfig ControllerConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
    ControllerConfig c;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& key = it.key();
        if (key == "max_iterations") c.max_iterations = it->get<int>();
        else if (key == "num_next_steps_decision") c.num_next_steps_decision = it->get<int>();
        else if (key == "max_retrieve_query_retry") c.max_retrieve_query_retry = it->get<int>();
        else if (key == "max_cypher_fixing_retry") c.max_cypher_fixing_retry = it->get<int>();
        else if (key == "max_final_solution_parsing") c.max_final_solution_parsing = it->get<int>();
        else if (key == "max_tool_retries") c.max_tool_retries = it->get<int>();
        else if (key == "solve_mode") c.solve_mode = solve_mode_from_string(it->get<std::string>());
        else if (key == "backend") c.backend = backend_from_string(it->get<std::string>());
        else if (key == "model") c.model = it->get<std::string>();
        else if (key == "temperature") c.temperature = it->get<double>();
        else if (key == "direct_token_limit") c.direct_token_limit = it->get<std::int64_t>();
        else throw std::invalid_argument("unknown config key '" + key + "'");
    }
    c.validate();
    return c;
}

ControllerConfig ControllerConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument("config file " + path + " is not valid JSON: " + e.what());
    }
    return from_json(j);
}

nlohmann::json ControllerConfig::to_json() const {
    return {
        {"max_iterations", max_iterations},
        {"num_next_steps_decision", num_next_steps_decision},
        {"max_retrieve_query_retry", max_retrieve_query_retry},
        {"max_cypher_fixing_retry", max_cypher_fixing_retry},
        {"max_final_solution_parsing", max_final_solution_parsing},
        {"max_tool_retries", max_tool_retries},
        {"solve_mode", to_string(solve_mode)},
        {"backend", to_string(backend)},
        {"model", model},
        {"temperature", temperature},
        {"direct_token_limit", direct_token_limit},
    };
}

std::string trace_to_jsonl(const std::vector<TraceEvent>& trace) {
    std::string out;
    for (const auto& e : trace) {
        nlohmann::json line = {{"seq", e.seq}, {"kind", e.kind}, {"payload", e.payload}};
        out += line.dump();
        out += "\n";
    }
    return out;
}

std::string normalize_candidate(const std::string& text) {
    std::string s = strip_trailing_punct(trim(text));
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

std::string select_most_frequent(const std::vector<std::string>& candidates) {
    if (candidates.empty()) return "";
    std::vector<std::string> keys;
    std::map<std::string, int> counts;
    std::map<std::string, std::string> first_spelling;
    for (const auto& c : candidates) {
        std::string key = normalize_candidate(c);
        if (!counts.count(key)) {
            keys.push_back(key);
            first_spelling[key] = c;
        }
        ++counts[key];
    }
    std::string best = keys.front();
    for (const auto& key : keys)
        if (counts[key] > counts[best]) best = key;
    return first_spelling[best];
}

std::string format_final_answer(const std::string& text) {
    std::string s = strip_trailing_punct(trim(text));
    if (s.find(',') != std::string::npos) {
        std::string no_commas;
        for (char c : s)
            if (c != ',') no_commas += c;
        if (is_plain_number(no_commas)) return no_commas;
    }
    return s;
}

Controller::Controller(std::string task_id, std::string question,
                       ControllerConfig config, ControllerDeps deps)
    : task_id_(std::move(task_id)), question_(std::move(question)),
      config_(std::move(config)), deps_(std::move(deps)) {
    config_.validate();
    if (!deps_.gateway || !deps_.prompts || !deps_.registry)
        throw std::invalid_argument("controller needs a gateway, prompts, and a tool registry");
    graph_ = make_store(config_.backend);
}

void Controller::note(const std::string& kind, nlohmann::json payload) {
    TraceEvent event{next_seq_++, kind, std::move(payload)};
    if (deps_.trace_sink) {
        nlohmann::json line = {{"seq", event.seq}, {"kind", event.kind}, {"payload", event.payload}};
        *deps_.trace_sink << line.dump() << "\n";
    }
    trace_.push_back(std::move(event));
}

llm::ChatRequest Controller::request(const std::string& tag, std::string body,
                                     std::string system) const {
    llm::ChatRequest req;
    if (!system.empty()) req.messages.push_back({"system", std::move(system)});
    req.messages.push_back({"user", std::move(body)});
    req.model = config_.model;
    req.temperature = config_.temperature;
    req.tag = tag;
    return req;
}

std::string Controller::graph_text() const { return render_graph_text(*graph_); }

std::string Controller::tool_log_text() const {
    if (tool_calls_made_.empty()) return "none";
    std::string out;
    for (const auto& line : tool_calls_made_) {
        if (!out.empty()) out += "\n";
        out += line;
    }
    return out;
}

StepDecision Controller::decide_next_step() {
    const auto& tpl = deps_.prompts->get("next_step");
    std::string body = tpl.render({
        {"initial_query", question_},
        {"existing_entities_and_relationships", graph_text()},
        {"tool_calls_made", tool_log_text()},
    });
    auto samples = deps_.gateway->sample_n(request("next_step", body),
                                           config_.num_next_steps_decision);
    for (const auto& failure : samples.failures)
        note("vote_failed", {{"error", failure}});

    StepDecision d;
    for (const auto& resp : samples.responses) {
        nlohmann::json vote;
        try {
            vote = llm::parse_structured(resp.text, {{"query_type", llm::FieldKind::Text}});
        } catch (const llm::StructuredParseError& e) {
            note("vote_unparsed", {{"error", e.what()}});
            continue;
        }
        std::string kind = vote["query_type"].get<std::string>();
        for (char& c : kind) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        if (kind == "INSERT") {
            ++d.parsed_votes;
            ++d.insert_votes;
            std::string reason = text_field(vote, "reason");
            if (!reason.empty()) d.reasons.push_back(reason);
            note("vote", {{"query_type", "INSERT"}, {"reason", reason}});
        } else if (kind == "RETRIEVE") {
            ++d.parsed_votes;
            ++d.retrieve_votes;
            std::string solution = text_field(vote, "solution");
            if (std::find(d.candidates.begin(), d.candidates.end(), solution) ==
                d.candidates.end())
                d.candidates.push_back(solution);
            note("vote", {{"query_type", "RETRIEVE"}, {"solution", solution}});
        } else {
            note("vote_unparsed", {{"query_type", kind}});
        }
    }
    d.solve = d.retrieve_votes > d.insert_votes;
    for (const auto& c : d.candidates)
        if (std::find(candidates_.begin(), candidates_.end(), c) == candidates_.end())
            candidates_.push_back(c);
    note("next_step", {{"solve", d.solve},
                       {"parsed_votes", d.parsed_votes},
                       {"insert_votes", d.insert_votes},
                       {"retrieve_votes", d.retrieve_votes}});
    return d;
}

std::string Controller::merge_missing_reasons(const std::vector<std::string>& reasons) {
    std::string list;
    for (const auto& r : reasons) list += "- " + r + "\n";
    const auto& tpl = deps_.prompts->get("missing_info");
    auto resp = deps_.gateway->complete(
        request("missing_info", tpl.render({{"list_of_reasons", list}})));
    missing_information_ = resp.text;
    note("missing_info", {{"merged", missing_information_}});
    return missing_information_;
}

std::optional<kgql::QueryList> Controller::parse_with_fixes(std::string text,
                                                            const std::string& fix_tag) {
    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_cypher_fixing_retry; ++attempt) {
        if (attempt > 0) {
            try {
                const auto& tpl = deps_.prompts->get("fix_query");
                auto resp = deps_.gateway->complete(request(
                    fix_tag,
                    tpl.render({{"cypher_to_fix", text}, {"error_log", last_error}})));
                auto obj = llm::parse_structured(resp.text, {{"query", llm::FieldKind::Text}});
                text = obj["query"].get<std::string>();
            } catch (const llm::TransportError& e) {
                note("fix_ask_failed", {{"error", e.what()}});
                continue;
            } catch (const llm::StructuredParseError& e) {
                note("fix_ask_unparsed", {{"error", e.what()}});
                continue;
            }
        }
        try {
            return kgql::parse(text);
        } catch (const ParseError& first) {
            try {
                return kgql::parse(repair_text(text));
            } catch (const ParseError&) {
                last_error = first.what();
                note("parse_failed", {{"text", text}, {"error", last_error}});
            }
        }
    }
    return std::nullopt;
}

void Controller::enhance_iteration(const StepDecision& step) {
    if (!step.reasons.empty()) merge_missing_reasons(step.reasons);

    const auto& tool_tpl = deps_.prompts->get("tool_calls");
    std::string body = tool_tpl.render({
        {"initial_query", question_},
        {"existing_entities_and_relationships", graph_text()},
        {"missing_information", missing_information_},
        {"tool_calls_made", tool_log_text()},
    });
    std::string system = "Available tools:\n" + deps_.registry->render_specs_text();

    std::vector<tools::ToolCall> calls;
    try {
        auto resp = deps_.gateway->complete(request("tool_calls", body, system));
        auto obj = llm::parse_structured(resp.text, {{"tool_calls", llm::FieldKind::Any}});
        if (!obj["tool_calls"].is_array())
            throw llm::StructuredParseError("tool_calls is not an array", resp.text);
        int k = 0;
        for (const auto& el : obj["tool_calls"]) {
            if (!el.is_object() || !el.contains("tool") || !el["tool"].is_string()) {
                note("tool_call_invalid", {{"entry", el}});
                continue;
            }
            tools::ToolCall call;
            call.tool = el["tool"].get<std::string>();
            call.args = el.value("args", nlohmann::json::object());
            call.call_id = task_id_ + "-i" + std::to_string(iteration_) + "-t" +
                           std::to_string(k++);
            calls.push_back(std::move(call));
        }
    } catch (const llm::TransportError& e) {
        note("tool_calls_failed", {{"error", e.what()}});
    } catch (const llm::StructuredParseError& e) {
        note("tool_calls_unparsed", {{"error", e.what()}});
    }

    std::vector<tools::ToolResult> results(calls.size());
    if (calls.size() == 1) {
        results[0] = deps_.registry->invoke_with_retry(calls[0], config_.max_tool_retries);
    } else if (!calls.empty()) {
        std::vector<std::thread> threads;
        threads.reserve(calls.size());
        for (std::size_t i = 0; i < calls.size(); ++i)
            threads.emplace_back([this, &calls, &results, i] {
                results[i] =
                    deps_.registry->invoke_with_retry(calls[i], config_.max_tool_retries);
            });
        for (auto& t : threads) t.join();
    }

    std::string new_information;
    for (std::size_t i = 0; i < calls.size(); ++i) {
        const auto& call = calls[i];
        const auto& res = results[i];
        std::string content = res.success ? res.content : "FAILED: " + res.content;
        tool_calls_made_.push_back(call.tool + "(" + call.args.dump() + ") -> " + content);
        note("tool_call", {{"tool", call.tool},
                           {"args", call.args},
                           {"success", res.success},
                           {"attempts", res.attempts},
                           {"failures", res.failure_log}});
        new_information += "## " + call.tool + "(" + call.args.dump() + ")\n" + content + "\n";
    }
    if (new_information.empty()) new_information = "No new information was produced.";

    const auto& ins_tpl = deps_.prompts->get("insert_query");
    std::vector<std::string> texts;
    try {
        auto resp = deps_.gateway->complete(request(
            "insert_query",
            ins_tpl.render({{"initial_query", question_},
                            {"existing_entities_and_relationships", graph_text()},
                            {"missing_information", missing_information_},
                            {"new_information", new_information}})));
        try {
            auto obj = llm::parse_structured(resp.text, {{"queries", llm::FieldKind::Any}});
            if (obj["queries"].is_array()) {
                for (const auto& q : obj["queries"])
                    if (q.is_string()) texts.push_back(q.get<std::string>());
            } else if (obj["queries"].is_string()) {
                texts.push_back(obj["queries"].get<std::string>());
            }
        } catch (const llm::StructuredParseError&) {
            auto obj = llm::parse_structured(resp.text, {{"query", llm::FieldKind::Text}});
            texts.push_back(obj["query"].get<std::string>());
        }
    } catch (const llm::TransportError& e) {
        note("insert_ask_failed", {{"error", e.what()}});
    } catch (const llm::StructuredParseError& e) {
        note("insert_unparsed", {{"error", e.what()}});
    }

    std::vector<kgql::QueryList> lists;
    std::vector<std::string> printed;
    for (const auto& text : texts) {
        auto parsed = parse_with_fixes(text, "insert_fix");
        if (!parsed) {
            note("insert_discarded", {{"text", text}});
            continue;
        }
        printed.push_back(kgql::print(*parsed));
        lists.push_back(std::move(*parsed));
    }

    auto outcomes = kgql::execute_write_batch(lists, *graph_, true);
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const auto& out = outcomes[i];
        if (out.applied) {
            note("insert_applied",
                 {{"statements", printed[i]},
                  {"nodes_created", out.summary.nodes_created},
                  {"relationships_created", out.summary.relationships_created},
                  {"nodes_merged", out.summary.nodes_merged},
                  {"ambiguous_match", out.summary.ambiguous_match}});
        } else {
            note("insert_failed", {{"statements", printed[i]}, {"error", out.error}});
        }
    }

    ++iteration_;
    write_snapshot();
    note("iteration_done", {{"iteration", iteration_}});
}

std::string Controller::write_snapshot() {
    std::string doc = export_snapshot(*graph_);
    snapshots_.push_back(doc);
    if (!deps_.snapshot_dir.empty()) {
        namespace fs = std::filesystem;
        fs::create_directories(deps_.snapshot_dir);
        fs::path path = fs::path(deps_.snapshot_dir) /
                        ("task-" + task_id_ + "-iter-" + std::to_string(iteration_) + ".json");
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << doc;
        snapshot_paths_.push_back(path.string());
        note("snapshot", {{"path", path.string()}, {"bytes", doc.size()}});
    } else {
        note("snapshot", {{"bytes", doc.size()}});
    }
    return doc;
}

Controller::AttemptOutcome Controller::try_query(const std::string& query_text) {
    AttemptOutcome out;
    kgql::QueryList list;
    try {
        try {
            list = kgql::parse(query_text);
        } catch (const ParseError&) {
            list = kgql::parse(repair_text(query_text));
        }
    } catch (const ParseError& e) {
        out.error = e.what();
        return out;
    }
    kgql::ResultTable table;
    try {
        table = kgql::execute_read(list, *graph_);
    } catch (const kgql::EvalError& e) {
        out.error = e.what();
        return out;
    }
    if (table.rows.empty()) {
        out.error = "query returned no results";
        return out;
    }
    out.ok = true;
    out.partial = render_table(table);
    return out;
}

Controller::AttemptOutcome Controller::try_script(const std::string& code_text) {
    AttemptOutcome out;
    script::Program program;
    try {
        try {
            program = script::parse_program(code_text);
        } catch (const ParseError&) {
            program = script::parse_program(repair_text(code_text));
        }
    } catch (const ParseError& e) {
        out.error = e.what();
        return out;
    }
    PropertyValue value;
    try {
        value = script::run_program(program, graph_.get());
    } catch (const script::EvalError& e) {
        out.error = std::string(e.what()) + " (step " + std::to_string(e.step()) + ")";
        return out;
    }
    if ((value.is_text() && value.as_text().empty()) ||
        (value.is_list() && value.as_list().empty())) {
        out.error = "program returned an empty result";
        return out;
    }
    out.ok = true;
    out.partial = value.display();
    return out;
}

std::optional<std::string> Controller::solve_generated(bool script) {
    const std::string gen_name = script ? "retrieve_script" : "retrieve_query";
    const std::string gen_field = script ? "code" : "query";

    auto ask = [this](const std::string& tag, const std::string& tpl_name,
                      const std::map<std::string, std::string>& slots,
                      const std::string& field) -> std::optional<std::string> {
        try {
            auto resp = deps_.gateway->complete(
                request(tag, deps_.prompts->get(tpl_name).render(slots)));
            llm::Schema schema{{field, llm::FieldKind::Text}};
            auto obj = llm::parse_structured(resp.text, schema);
            return obj[field].get<std::string>();
        } catch (const llm::TransportError& e) {
            note("solve_ask_failed", {{"tag", tag}, {"error", e.what()}});
        } catch (const llm::StructuredParseError& e) {
            note("solve_ask_unparsed", {{"tag", tag}, {"error", e.what()}});
        }
        return std::nullopt;
    };

    std::string artifact;
    std::string last_error;
    for (int regen = 0; regen <= config_.max_retrieve_query_retry; ++regen) {
        std::optional<std::string> generated;
        if (regen == 0) {
            generated = ask(gen_name, gen_name,
                            {{"initial_query", question_},
                             {"existing_entities_and_relationships", graph_text()}},
                            gen_field);
        } else {
            note("regenerate", {{"round", regen}, {"discarded", artifact}});
            generated = ask("regenerate_query", "regenerate_query",
                            {{"initial_query", question_},
                             {"existing_entities_and_relationships", graph_text()},
                             {"wrong_query", artifact}},
                            gen_field);
        }
        if (!generated) continue;
        artifact = *generated;

        for (int fix = 0; fix <= config_.max_cypher_fixing_retry; ++fix) {
            if (fix > 0) {
                std::optional<std::string> fixed;
                if (script) {
                    fixed = ask("script_fix", "fix_code",
                                {{"code", artifact},
                                 {"required_modules", kScriptFunctions},
                                 {"error", last_error}},
                                "code");
                } else {
                    fixed = ask("query_fix", "fix_query",
                                {{"cypher_to_fix", artifact}, {"error_log", last_error}},
                                "query");
                }
                if (!fixed) continue;
                artifact = *fixed;
            }
            AttemptOutcome out = script ? try_script(artifact) : try_query(artifact);
            if (out.ok) {
                note("partial_solution", {{"partial", out.partial}});
                return out.partial;
            }
            last_error = out.error;
            note("retrieve_failed", {{"artifact", artifact}, {"error", out.error}});
        }
    }
    return std::nullopt;
}

std::optional<std::string> Controller::solve_direct() {
    std::string gtext = graph_text();
    std::int64_t estimate = llm::approximate_tokens(gtext);
    if (estimate > config_.direct_token_limit) {
        note("direct_too_large",
             {{"estimated_tokens", estimate}, {"limit", config_.direct_token_limit}});
        return std::nullopt;
    }
    try {
        auto resp = deps_.gateway->complete(request(
            "direct_retrieve",
            deps_.prompts->get("direct_retrieve")
                .render({{"initial_query", question_},
                         {"existing_entities_and_relationships", gtext}})));
        auto obj = llm::parse_structured(resp.text, {{"query", llm::FieldKind::Text}});
        std::string partial = obj["query"].get<std::string>();
        note("partial_solution", {{"partial", partial}});
        return partial;
    } catch (const llm::TransportError& e) {
        note("direct_failed", {{"error", e.what()}});
    } catch (const llm::StructuredParseError& e) {
        note("direct_unparsed", {{"error", e.what()}});
    }
    return std::nullopt;
}

std::optional<std::string> Controller::solve() {
    std::size_t attempts = std::max<std::size_t>(candidates_.size(), 1);
    for (std::size_t c = 0; c < attempts; ++c) {
        note("solve_attempt",
             {{"candidate_index", c}, {"mode", to_string(config_.solve_mode)}});
        std::optional<std::string> partial;
        switch (config_.solve_mode) {
        case SolveMode::Query: partial = solve_generated(false); break;
        case SolveMode::Script: partial = solve_generated(true); break;
        case SolveMode::Direct: partial = solve_direct(); break;
        }
        if (partial) return partial;
    }
    return std::nullopt;
}

std::optional<std::string> Controller::forced_solution() {
    note("forced_solution", {{"iteration", iteration_}});
    try {
        auto resp = deps_.gateway->complete(request(
            "forced_query",
            deps_.prompts->get("forced_query")
                .render({{"initial_query", question_},
                         {"existing_entities_and_relationships", graph_text()}})));
        auto obj = llm::parse_structured(resp.text, {{"query", llm::FieldKind::Text}});
        auto out = try_query(obj["query"].get<std::string>());
        if (out.ok) {
            note("partial_solution", {{"partial", out.partial}});
            return out.partial;
        }
        note("forced_query_failed", {{"error", out.error}});
    } catch (const llm::TransportError& e) {
        note("forced_query_failed", {{"error", e.what()}});
    } catch (const llm::StructuredParseError& e) {
        note("forced_query_failed", {{"error", e.what()}});
    }
    note("forced_fallback", {});
    return solve_direct();
}

std::string Controller::math_postprocess(const std::string& partial) {
    bool needed = false;
    try {
        auto resp = deps_.gateway->complete(request(
            "math_gate",
            deps_.prompts->get("math_gate").render(
                {{"initial_query", question_}, {"partial_solution", partial}})));
        auto obj = llm::parse_structured(resp.text, {{"required", llm::FieldKind::Boolean}});
        needed = obj["required"].get<bool>();
    } catch (const llm::TransportError& e) {
        note("math_gate_failed", {{"error", e.what()}});
        return partial;
    } catch (const llm::StructuredParseError& e) {
        note("math_gate_unparsed", {{"error", e.what()}});
        return partial;
    }
    note("math_gate", {{"required", needed}});
    if (!needed) return partial;

    std::string code;
    try {
        auto resp = deps_.gateway->complete(request(
            "math_apply",
            deps_.prompts->get("math_apply").render(
                {{"initial_query", question_}, {"current_solution", partial}})));
        auto obj = llm::parse_structured(resp.text, {{"code", llm::FieldKind::Text}});
        code = obj["code"].get<std::string>();
    } catch (const llm::TransportError& e) {
        note("math_apply_failed", {{"error", e.what()}});
        return partial;
    } catch (const llm::StructuredParseError& e) {
        note("math_apply_unparsed", {{"error", e.what()}});
        return partial;
    }
    try {
        auto value = script::eval_math(code);
        note("math_applied", {{"result", value.display()}});
        return value.display();
    } catch (const ParseError& e) {
        note("math_trap", {{"error", e.what()}});
    } catch (const script::EvalError& e) {
        note("math_trap", {{"error", e.what()}, {"step", e.step()}});
    }
    return partial;
}

std::string Controller::parse_final(const std::string& partial) {
    std::vector<std::string> candidates;
    for (int i = 0; i < config_.max_final_solution_parsing; ++i) {
        try {
            auto resp = deps_.gateway->complete(request(
                "final_parse",
                deps_.prompts->get("final_parse").render(
                    {{"initial_query", question_}, {"partial_solution", partial}})));
            auto obj =
                llm::parse_structured(resp.text, {{"final_answer", llm::FieldKind::Text}});
            candidates.push_back(obj["final_answer"].get<std::string>());
            note("final_candidate", {{"answer", candidates.back()}});
        } catch (const llm::TransportError& e) {
            note("final_parse_failed", {{"error", e.what()}});
        } catch (const llm::StructuredParseError& e) {
            note("final_parse_unparsed", {{"error", e.what()}});
        }
    }
    if (candidates.empty()) {
        note("final_unparsed", {{"partial", partial}});
        return partial;
    }
    std::string answer = format_final_answer(select_most_frequent(candidates));
    note("final_answer", {{"answer", answer}});
    return answer;
}

TaskOutcome run_task(const std::string& task_id, const std::string& question,
                     const ControllerConfig& config, const ControllerDeps& deps) {
    TaskOutcome outcome;
    std::size_t ledger_before = deps.ledger ? deps.ledger->records().size() : 0;
    std::unique_ptr<Controller> ctl;
    try {
        ctl = std::make_unique<Controller>(task_id, question, config, deps);
        ctl->note("task_started",
                  {{"task", task_id}, {"question", question}, {"config", config.to_json()}});

        bool solve_attempted = false;
        std::optional<std::string> partial;
        while (ctl->iteration() < config.max_iterations) {
            auto step = ctl->decide_next_step();
            if (!step.solve) {
                ctl->enhance_iteration(step);
                continue;
            }
            solve_attempted = true;
            partial = ctl->solve();
            if (!partial) partial = ctl->forced_solution();
            break;
        }
        if (!solve_attempted && !partial) partial = ctl->forced_solution();

        if (partial) {
            std::string processed = ctl->math_postprocess(*partial);
            outcome.answer = ctl->parse_final(processed);
            outcome.answered = true;
        } else {
            outcome.failure = "no solution";
            ctl->note("no_solution", {});
        }
    } catch (const std::exception& e) {
        outcome.answered = false;
        outcome.failure = e.what();
        if (ctl) ctl->note("task_error", {{"error", e.what()}});
    }
    if (ctl) {
        outcome.iterations = ctl->iteration();
        outcome.trace = ctl->trace();
        outcome.snapshots = ctl->snapshots();
        outcome.snapshot_paths = ctl->snapshot_paths();
    }
    if (deps.ledger) {
        auto records = deps.ledger->records();
        for (std::size_t i = ledger_before; i < records.size(); ++i) {
            ++outcome.llm_calls;
            ++outcome.usage.calls;
            outcome.usage.prompt_tokens += records[i].prompt_tokens;
            outcome.usage.completion_tokens += records[i].completion_tokens;
            outcome.usage.cost += records[i].cost;
        }
    }
    return outcome;
}

} // namespace kga

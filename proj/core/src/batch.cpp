#include "kga/batch.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace kga {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::optional<double> parse_plain_number(const std::string& s) {
    if (s.empty()) return std::nullopt;
    errno = 0;
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (errno != 0 || end != s.c_str() + s.size()) return std::nullopt;
    return v;
}

// Numeric reading of a model answer: thousands separators, whitespace, and
// currency/percent signs are noise.
std::optional<double> parse_number_like(const std::string& s) {
    std::string cleaned;
    for (char c : s) {
        if (c == ',' || c == '$' || c == '%' ||
            std::isspace(static_cast<unsigned char>(c)))
            continue;
        cleaned += c;
    }
    return parse_plain_number(cleaned);
}

std::string normalize_text_answer(const std::string& s) {
    std::string t = trim(s);
    while (!t.empty() && (t.back() == '.' || t.back() == '!' || t.back() == '?'))
        t.pop_back();
    std::string lowered;
    for (char c : t) lowered += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));

    std::istringstream words(lowered);
    std::string word;
    std::string out;
    while (words >> word) {
        if (word == "a" || word == "an" || word == "the") continue;
        if (!out.empty()) out += " ";
        out += word;
    }
    return out;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> parts;
    std::string part;
    for (char c : s) {
        if (c == ',') {
            parts.push_back(trim(part));
            part.clear();
        } else {
            part += c;
        }
    }
    parts.push_back(trim(part));
    return parts;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += "\"";
    return out;
}

std::string format_cost(double cost) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", cost);
    return buf;
}

void accumulate(LevelAggregate& agg, const TaskResult& r) {
    agg.tasks += 1;
    agg.solved += task_solved(r) ? 1 : 0;
    agg.llm_calls += r.llm_calls;
    agg.prompt_tokens += r.prompt_tokens;
    agg.completion_tokens += r.completion_tokens;
    agg.cost += r.cost;
    agg.duration_ms += r.duration_ms;
}

nlohmann::json result_to_json(const TaskResult& r) {
    return {
        {"id", r.id},
        {"level", r.level},
        {"answer", r.answer},
        {"answered", r.answered},
        {"scored", r.scored},
        {"correct", r.correct},
        {"iterations", r.iterations},
        {"llm_calls", r.llm_calls},
        {"prompt_tokens", r.prompt_tokens},
        {"completion_tokens", r.completion_tokens},
        {"cost", r.cost},
        {"duration_ms", r.duration_ms},
        {"failure", r.failure},
    };
}

TaskResult result_from_json(const nlohmann::json& j) {
    TaskResult r;
    r.id = j.at("id").get<std::string>();
    r.level = j.at("level").get<int>();
    r.answer = j.at("answer").get<std::string>();
    r.answered = j.at("answered").get<bool>();
    r.scored = j.at("scored").get<bool>();
    r.correct = j.at("correct").get<bool>();
    r.iterations = j.at("iterations").get<int>();
    r.llm_calls = j.at("llm_calls").get<std::int64_t>();
    r.prompt_tokens = j.at("prompt_tokens").get<std::int64_t>();
    r.completion_tokens = j.at("completion_tokens").get<std::int64_t>();
    r.cost = j.at("cost").get<double>();
    r.duration_ms = j.at("duration_ms").get<std::int64_t>();
    r.failure = j.at("failure").get<std::string>();
    return r;
}

} // namespace

std::vector<TaskRecord> parse_tasks(const std::string& jsonl) {
    std::vector<TaskRecord> records;
    std::set<std::string> seen;
    std::istringstream in(jsonl);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto fail = [&](const std::string& why) {
            throw TaskFileError("task file line " + std::to_string(line_no) + ": " + why);
        };
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) fail("not valid JSON");
        if (!j.is_object()) fail("expected a JSON object");

        TaskRecord r;
        for (auto it = j.begin(); it != j.end(); ++it) {
            const std::string& key = it.key();
            if (key == "id") {
                if (!it->is_string()) fail("'id' must be a string");
                r.id = it->get<std::string>();
            } else if (key == "level") {
                if (!it->is_number_integer()) fail("'level' must be an integer");
                r.level = it->get<int>();
            } else if (key == "question") {
                if (!it->is_string()) fail("'question' must be a string");
                r.question = it->get<std::string>();
            } else if (key == "expected") {
                if (!it->is_string()) fail("'expected' must be a string");
                r.expected = it->get<std::string>();
            } else if (key == "attachments") {
                if (!it->is_array()) fail("'attachments' must be an array");
                for (const auto& a : *it) {
                    if (!a.is_string()) fail("'attachments' entries must be strings");
                    r.attachments.push_back(a.get<std::string>());
                }
            } else {
                fail("unknown key '" + key + "'");
            }
        }
        if (r.id.empty()) fail("'id' is required");
        if (!j.contains("question")) fail("'question' is required");
        if (!j.contains("level")) fail("'level' is required");
        if (r.level < 1 || r.level > 3) fail("'level' must be 1, 2, or 3");
        if (!seen.insert(r.id).second) fail("duplicate id '" + r.id + "'");
        records.push_back(std::move(r));
    }
    return records;
}

std::vector<TaskRecord> load_tasks(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw TaskFileError("cannot open task file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_tasks(ss.str());
}

bool task_solved(const TaskResult& r) { return r.scored ? r.correct : r.answered; }

std::map<int, LevelAggregate> RunReport::by_level() const {
    std::map<int, LevelAggregate> levels;
    for (const auto& r : results) accumulate(levels[r.level], r);
    return levels;
}

LevelAggregate RunReport::totals() const {
    LevelAggregate total;
    for (const auto& r : results) accumulate(total, r);
    return total;
}

int RunReport::solved_count() const {
    int n = 0;
    for (const auto& r : results) n += task_solved(r) ? 1 : 0;
    return n;
}

nlohmann::json RunReport::to_json() const {
    nlohmann::json jresults = nlohmann::json::array();
    for (const auto& r : results) jresults.push_back(result_to_json(r));
    nlohmann::json jsteals = nlohmann::json::array();
    for (const auto& s : steals)
        jsteals.push_back({{"thief", s.thief}, {"victim", s.victim}, {"task", s.task}});
    nlohmann::json jcompletions = nlohmann::json::array();
    for (const auto& c : completions)
        jcompletions.push_back({{"task", c.task}, {"worker", c.worker}});
    return {
        {"config_fingerprint", config_fingerprint},
        {"results", jresults},
        {"steals", jsteals},
        {"completions", jcompletions},
        {"wall_ms", wall_ms},
    };
}

RunReport RunReport::from_json(const nlohmann::json& j) {
    RunReport report;
    report.config_fingerprint = j.at("config_fingerprint").get<std::string>();
    for (const auto& r : j.at("results")) report.results.push_back(result_from_json(r));
    for (const auto& s : j.at("steals"))
        report.steals.push_back({s.at("thief").get<int>(), s.at("victim").get<int>(),
                                 s.at("task").get<std::size_t>(), 0});
    for (const auto& c : j.at("completions"))
        report.completions.push_back(
            {c.at("task").get<std::size_t>(), c.at("worker").get<int>()});
    report.wall_ms = j.at("wall_ms").get<std::int64_t>();
    return report;
}

RunReport run_batch(const std::vector<TaskRecord>& tasks, const BatchOptions& options,
                    const TaskRunner& runner) {
    RunReport report;
    report.config_fingerprint = options.config_fingerprint;
    report.results.resize(tasks.size());

    auto stats = run_work_stealing(
        tasks.size(), options.workers, options.stealing, [&](std::size_t i) {
            const TaskRecord& task = tasks[i];
            TaskResult r;
            r.id = task.id;
            r.level = task.level;
            auto start = std::chrono::steady_clock::now();
            try {
                TaskOutcome out = runner(task);
                r.answer = out.answer;
                r.answered = out.answered;
                r.iterations = out.iterations;
                r.llm_calls = out.llm_calls;
                r.prompt_tokens = out.usage.prompt_tokens;
                r.completion_tokens = out.usage.completion_tokens;
                r.cost = out.usage.cost;
                r.failure = out.failure;
            } catch (const std::exception& e) {
                r.answered = false;
                r.failure = e.what();
            }
            r.duration_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                std::chrono::steady_clock::now() - start)
                                .count();
            if (task.expected) {
                r.scored = true;
                r.correct = r.answered && score_answer(r.answer, *task.expected);
            }
            report.results[i] = std::move(r);
        });

    report.steals = std::move(stats.steals);
    report.completions = std::move(stats.completions);
    report.wall_ms = stats.wall.count();
    return report;
}

bool score_answer(const std::string& given, const std::string& expected) {
    std::string etrim = trim(expected);
    if (auto enumber = parse_plain_number(etrim)) {
        auto gnumber = parse_number_like(given);
        return gnumber && *gnumber == *enumber;
    }
    if (etrim.find(',') != std::string::npos) {
        auto eparts = split_list(etrim);
        auto gparts = split_list(trim(given));
        if (eparts.size() != gparts.size()) return false;
        for (std::size_t i = 0; i < eparts.size(); ++i)
            if (!score_answer(gparts[i], eparts[i])) return false;
        return true;
    }
    return normalize_text_answer(given) == normalize_text_answer(etrim);
}

RunReport fuse_reports(const std::vector<RunReport>& reports) {
    if (reports.empty()) throw std::invalid_argument("nothing to fuse");

    std::set<std::string> base_ids;
    for (const auto& r : reports.front().results) base_ids.insert(r.id);
    for (const auto& report : reports) {
        std::set<std::string> ids;
        for (const auto& r : report.results) ids.insert(r.id);
        if (ids != base_ids)
            throw std::invalid_argument("fusion needs identical task-id sets");
        if (report.results.size() != base_ids.size())
            throw std::invalid_argument("fusion needs identical task-id sets");
    }

    RunReport fused;
    for (std::size_t k = 0; k < reports.size(); ++k) {
        if (k) fused.config_fingerprint += "+";
        fused.config_fingerprint += reports[k].config_fingerprint;
    }

    for (const auto& base : reports.front().results) {
        const TaskResult* chosen = nullptr;
        TaskResult merged;
        for (const auto& report : reports) {
            auto it = std::find_if(report.results.begin(), report.results.end(),
                                   [&](const TaskResult& r) { return r.id == base.id; });
            const TaskResult& r = *it;
            merged.llm_calls += r.llm_calls;
            merged.prompt_tokens += r.prompt_tokens;
            merged.completion_tokens += r.completion_tokens;
            merged.cost += r.cost;
            merged.duration_ms += r.duration_ms;
            if (!chosen && task_solved(r)) chosen = &r;
        }
        const TaskResult& pick = chosen ? *chosen : base;
        merged.id = pick.id;
        merged.level = pick.level;
        merged.answer = pick.answer;
        merged.answered = pick.answered;
        merged.scored = pick.scored;
        merged.correct = pick.correct;
        merged.iterations = pick.iterations;
        merged.failure = pick.failure;
        fused.results.push_back(std::move(merged));
    }
    return fused;
}

std::string emit_report(const RunReport& report, const std::string& format) {
    if (format == "json") return report.to_json().dump(2) + "\n";
    if (format != "csv") throw std::invalid_argument("unknown report format '" + format + "'");

    std::string out = "row_type,id,level,tasks,solved,answered,correct,iterations,"
                      "llm_calls,prompt_tokens,completion_tokens,cost,duration_ms,answer\n";
    for (const auto& r : report.results) {
        out += "task," + csv_escape(r.id) + "," + std::to_string(r.level) + ",1," +
               (task_solved(r) ? "1" : "0") + "," + (r.answered ? "1" : "0") + "," +
               (r.correct ? "1" : "0") + "," + std::to_string(r.iterations) + "," +
               std::to_string(r.llm_calls) + "," + std::to_string(r.prompt_tokens) + "," +
               std::to_string(r.completion_tokens) + "," + format_cost(r.cost) + "," +
               std::to_string(r.duration_ms) + "," + csv_escape(r.answer) + "\n";
    }
    for (const auto& [level, agg] : report.by_level()) {
        out += "level,," + std::to_string(level) + "," + std::to_string(agg.tasks) + "," +
               std::to_string(agg.solved) + ",,,," + std::to_string(agg.llm_calls) + "," +
               std::to_string(agg.prompt_tokens) + "," +
               std::to_string(agg.completion_tokens) + "," + format_cost(agg.cost) + "," +
               std::to_string(agg.duration_ms) + ",\n";
    }
    auto total = report.totals();
    out += "total,,," + std::to_string(total.tasks) + "," + std::to_string(total.solved) +
           ",,,," + std::to_string(total.llm_calls) + "," +
           std::to_string(total.prompt_tokens) + "," +
           std::to_string(total.completion_tokens) + "," + format_cost(total.cost) + "," +
           std::to_string(total.duration_ms) + ",\n";
    return out;
}

void save_report(const RunReport& report, const std::string& path,
                 const std::string& format) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write report: " + path);
    out << emit_report(report, format);
}

RunReport load_report(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read report: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("report " + path + " is not valid JSON: " + e.what());
    }
    return RunReport::from_json(j);
}

} // namespace kga

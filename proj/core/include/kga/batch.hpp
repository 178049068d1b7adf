// Batch execution over task files: JSONL task loading, a work-stealing run
// over a task runner, answer scoring with the benchmark's normalization
// rules, fusion of reports from runs with different configurations, and
// CSV/JSON report emission.
#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kga/controller.hpp"
#include "kga/steal.hpp"

namespace kga {

class TaskFileError : public std::runtime_error {
  public:
    explicit TaskFileError(const std::string& what) : std::runtime_error(what) {}
};

struct TaskRecord {
    std::string id;
    int level = 1; // 1, 2, or 3
    std::string question;
    std::optional<std::string> expected;
    std::vector<std::string> attachments;
};

// One task per line: {"id": str, "level": 1|2|3, "question": str,
// "expected": str?, "attachments": [str]?}. Violations and duplicate ids
// raise TaskFileError naming the offending line.
std::vector<TaskRecord> parse_tasks(const std::string& jsonl);
std::vector<TaskRecord> load_tasks(const std::string& path);

struct TaskResult {
    std::string id;
    int level = 1;
    std::string answer;
    bool answered = false;
    bool scored = false;  // an expected answer was present
    bool correct = false; // meaningful only when scored
    int iterations = 0;
    std::int64_t llm_calls = 0;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    double cost = 0.0;
    std::int64_t duration_ms = 0;
    std::string failure;
};

// Solved means: scored tasks must be correct, unscored ones count when they
// produced any answer.
bool task_solved(const TaskResult& r);

struct LevelAggregate {
    int tasks = 0;
    int solved = 0;
    std::int64_t llm_calls = 0;
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    double cost = 0.0;
    std::int64_t duration_ms = 0;
};

struct RunReport {
    std::string config_fingerprint;
    std::vector<TaskResult> results; // input task order
    std::vector<StealEvent> steals;
    std::vector<CompletionRecord> completions;
    std::int64_t wall_ms = 0;

    // Aggregates are always recomputed from the per-task rows, so they
    // cannot drift from them.
    std::map<int, LevelAggregate> by_level() const;
    LevelAggregate totals() const;
    int solved_count() const;

    nlohmann::json to_json() const;
    static RunReport from_json(const nlohmann::json& j);
};

struct BatchOptions {
    int workers = 1;
    bool stealing = true;
    std::string config_fingerprint;
};

using TaskRunner = std::function<TaskOutcome(const TaskRecord&)>;

// Runs every task via `runner` on a work-stealing pool and scores answers
// against the expected values. A task that throws is recorded as unanswered
// with the cause; the batch itself never aborts.
RunReport run_batch(const std::vector<TaskRecord>& tasks, const BatchOptions& options,
                    const TaskRunner& runner);

// The expected answer decides the comparison: a number compares numerically
// (commas, whitespace, and $/% signs are stripped from the given answer), a
// comma-separated expected compares element-wise, anything else compares as
// text with articles (a/an/the), final sentence punctuation, and case
// removed.
bool score_answer(const std::string& given, const std::string& expected);

// Merges runs of the same task set under different configurations: a task
// is solved when any constituent solved it, costs and token counts add up,
// and the fingerprints concatenate. Throws std::invalid_argument when the
// task-id sets differ.
RunReport fuse_reports(const std::vector<RunReport>& reports);

// "json" form round-trips through RunReport::from_json byte-identically;
// "csv" has a fixed column order with per-task rows, per-level rows, and a
// total row.
std::string emit_report(const RunReport& report, const std::string& format);
void save_report(const RunReport& report, const std::string& path,
                 const std::string& format);
RunReport load_report(const std::string& path);

} // namespace kga

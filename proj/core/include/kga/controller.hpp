// The task-solving state machine. Each task owns an evolving knowledge
// graph; every iteration a majority vote over several LLM replies picks
// between gathering more information (tool calls followed by graph inserts)
// and extracting an answer (a read query, a graph program, or direct
// retrieval over the rendered graph). Layered retry loops repair or
// regenerate faulty queries, a forced retrieval runs when the iteration
// budget is spent, and the final answer passes through an optional math
// step plus a formatting pass.
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kga/graph.hpp"
#include "kga/kgql.hpp"
#include "kga/llm.hpp"
#include "kga/prompts.hpp"
#include "kga/tools.hpp"

namespace kga {

enum class SolveMode { Query, Script, Direct };

std::string to_string(SolveMode mode);
SolveMode solve_mode_from_string(const std::string& text);

std::string to_string(StoreBackend backend);
StoreBackend backend_from_string(const std::string& text);

struct ControllerConfig {
    int max_iterations = 7;
    int num_next_steps_decision = 5;
    int max_retrieve_query_retry = 3;
    int max_cypher_fixing_retry = 3;
    int max_final_solution_parsing = 3;
    int max_tool_retries = 6;
    SolveMode solve_mode = SolveMode::Query;
    StoreBackend backend = StoreBackend::PropertyGraph;
    std::string model = "gpt-4o-mini";
    double temperature = 0.0;
    // Direct retrieval refuses to run when the rendered graph exceeds this
    // estimated token count; erroring beats silent truncation.
    std::int64_t direct_token_limit = 16384;

    // Throws std::invalid_argument when any count is < 1.
    void validate() const;

    static ControllerConfig from_json(const nlohmann::json& j);
    static ControllerConfig from_file(const std::string& path);
    nlohmann::json to_json() const;
};

struct TraceEvent {
    std::int64_t seq = 0;
    std::string kind;
    nlohmann::json payload;
};

std::string trace_to_jsonl(const std::vector<TraceEvent>& trace);

// Outcome of one round of next-step voting.
struct StepDecision {
    bool solve = false;
    int parsed_votes = 0;
    int insert_votes = 0;
    int retrieve_votes = 0;
    std::vector<std::string> reasons;    // from INSERT votes, in vote order
    std::vector<std::string> candidates; // distinct RETRIEVE solutions, in vote order
};

struct TaskOutcome {
    std::string answer;
    bool answered = false;
    std::string failure; // cause when !answered
    int iterations = 0;
    std::vector<TraceEvent> trace;
    std::vector<std::string> snapshots;      // snapshot JSON per enhance iteration
    std::vector<std::string> snapshot_paths; // filled when snapshot_dir is set
    std::int64_t llm_calls = 0;
    llm::UsageTotals usage;
};

// Collaborators a task run needs. The gateway's ledger is the only shared
// mutable state; give concurrent tasks their own ledger so per-task usage
// in the outcome stays attributable.
struct ControllerDeps {
    llm::Gateway* gateway = nullptr;
    const PromptLibrary* prompts = nullptr;
    tools::ToolRegistry* registry = nullptr;
    llm::UsageLedger* ledger = nullptr;   // the gateway's ledger, for usage totals
    std::string snapshot_dir;             // empty: snapshots stay in memory
    std::ostream* trace_sink = nullptr;   // optional live JSONL stream
};

// Lowercase, trim, and drop trailing sentence punctuation; the grouping key
// for frequency-based answer selection.
std::string normalize_candidate(const std::string& text);

// Most frequent candidate by normalized form; ties go to the earliest
// produced. Returns the original (unnormalized) spelling of the winner.
std::string select_most_frequent(const std::vector<std::string>& candidates);

// Output formatting: strip trailing sentence punctuation, and remove the
// thousands-separator commas of purely numeric answers.
std::string format_final_answer(const std::string& text);

class Controller {
  public:
    Controller(std::string task_id, std::string question, ControllerConfig config,
               ControllerDeps deps);

    // One round of voting. Asks num_next_steps_decision times, keeps the
    // replies that parse, and takes the majority; ties and all-unparseable
    // rounds fall back to enhancing. RETRIEVE votes stash their proposed
    // solutions as solve candidates.
    StepDecision decide_next_step();

    // Collapses the voters' complaints into one paragraph via the
    // missing-information prompt and remembers it for later prompts.
    std::string merge_missing_reasons(const std::vector<std::string>& reasons);

    // The enhance pathway: ask for tool calls, run them concurrently, ask
    // for insert statements over the new information, parse each statement
    // list (repair, then re-ask up to max_cypher_fixing_retry times, then
    // discard), apply the survivors as a parallel write batch, snapshot.
    void enhance_iteration(const StepDecision& step);

    // The solve pathway for the configured mode. One attempt per stashed
    // candidate; nullopt means every attempt and retry was exhausted and
    // the forced path should run.
    std::optional<std::string> solve();

    // Last resort: one forced retrieve query, then direct retrieval over
    // the rendered graph. nullopt means no answer could be produced.
    std::optional<std::string> forced_solution();

    // Asks whether the partial needs arithmetic; when it does, evaluates
    // the model-provided expression or program. Traps keep the original.
    std::string math_postprocess(const std::string& partial);

    // Formatting votes: up to max_final_solution_parsing renders, most
    // frequent normalized candidate wins. Zero candidates return the raw
    // partial, flagged in the trace.
    std::string parse_final(const std::string& partial);

    GraphStore& graph() { return *graph_; }
    const GraphStore& graph() const { return *graph_; }
    int iteration() const { return iteration_; }
    const std::vector<TraceEvent>& trace() const { return trace_; }
    const std::vector<std::string>& snapshots() const { return snapshots_; }
    const std::vector<std::string>& snapshot_paths() const { return snapshot_paths_; }
    const std::vector<std::string>& tool_calls_made() const { return tool_calls_made_; }
    const std::string& missing_information() const { return missing_information_; }

    void note(const std::string& kind, nlohmann::json payload);

  private:
    friend TaskOutcome run_task(const std::string&, const std::string&,
                                const ControllerConfig&, const ControllerDeps&);

    llm::ChatRequest request(const std::string& tag, std::string body,
                             std::string system = "") const;
    std::string graph_text() const;
    std::string tool_log_text() const;
    std::string write_snapshot();

    // Parse a statement-list text, repairing and re-asking on failure.
    std::optional<kgql::QueryList> parse_with_fixes(std::string text,
                                                    const std::string& fix_tag);

    std::optional<std::string> solve_generated(bool script);
    std::optional<std::string> solve_direct();

    struct AttemptOutcome {
        bool ok = false;
        std::string partial;
        std::string error;
    };
    AttemptOutcome try_query(const std::string& query_text);
    AttemptOutcome try_script(const std::string& code_text);

    std::string task_id_;
    std::string question_;
    ControllerConfig config_;
    ControllerDeps deps_;
    std::unique_ptr<GraphStore> graph_;
    int iteration_ = 0;
    std::int64_t next_seq_ = 0;
    std::string missing_information_;
    std::vector<std::string> tool_calls_made_;
    std::vector<std::string> candidates_;
    std::vector<TraceEvent> trace_;
    std::vector<std::string> snapshots_;
    std::vector<std::string> snapshot_paths_;
};

// Drives a Controller end to end: vote, enhance or solve, forced fallback,
// math post-processing, final formatting. Never throws; uncontained errors
// come back as an unanswered outcome carrying the cause.
TaskOutcome run_task(const std::string& task_id, const std::string& question,
                     const ControllerConfig& config, const ControllerDeps& deps);

} // namespace kga

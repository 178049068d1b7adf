// Command-line front end: solve a single task, run a batch over a task
// file with a work-stealing pool, fuse reports from separate runs, and
// re-emit reports as CSV or JSON.
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kga/batch.hpp"
#include "kga/controller.hpp"
#include "kga/http_client.hpp"
#include "kga/llm.hpp"
#include "kga/plugin.hpp"
#include "kga/prompts.hpp"
#include "kga/tools.hpp"

namespace {

struct GatewayOptions {
    std::string transcript;   // when set, replies come from this JSONL file
    std::string endpoint = "https://api.openai.com";
    std::string pricing_path;
    std::uint64_t seed = 0;
};

struct ToolOptions {
    std::string fixture_root = ".";
    std::string scratch_dir;
    std::string corpus_path;
    std::vector<std::string> plugin_manifests;
};

void add_gateway_options(CLI::App* cmd, GatewayOptions& opts) {
    cmd->add_option("--transcript", opts.transcript,
                    "Scripted-replies JSONL; runs offline instead of calling an API");
    cmd->add_option("--endpoint", opts.endpoint, "Chat-completions base URL");
    cmd->add_option("--pricing", opts.pricing_path,
                    "Pricing table JSON (model -> per-million token rates)");
    cmd->add_option("--seed", opts.seed, "Seed for retry-wait sampling");
}

void add_tool_options(CLI::App* cmd, ToolOptions& opts) {
    cmd->add_option("--fixture-root", opts.fixture_root,
                    "Directory file tools are allowed to read");
    cmd->add_option("--scratch", opts.scratch_dir, "Directory archives extract into");
    cmd->add_option("--corpus", opts.corpus_path, "Search-tool corpus JSON");
    cmd->add_option("--plugin", opts.plugin_manifests,
                    "Tool plugin manifest JSON (repeatable)");
}

// The per-run bundle of collaborators behind a ControllerDeps.
struct Runtime {
    std::unique_ptr<kga::llm::ChatClient> client;
    kga::llm::UsageLedger ledger;
    std::unique_ptr<kga::llm::Gateway> gateway;
    kga::PromptLibrary prompts;
    kga::tools::ToolRegistry registry;
};

std::unique_ptr<Runtime> make_runtime(const GatewayOptions& gw, const ToolOptions& tools,
                                      const std::string& prompts_dir) {
    auto rt = std::make_unique<Runtime>();
    if (!gw.transcript.empty()) {
        rt->client = std::make_unique<kga::llm::ScriptedChatClient>(
            kga::llm::ScriptedChatClient::from_file(gw.transcript));
    } else {
        kga::llm::HttpClientConfig http;
        http.base_url = gw.endpoint;
        if (const char* key = std::getenv("KGA_API_KEY")) http.api_key = key;
        else if (const char* fallback = std::getenv("OPENAI_API_KEY")) http.api_key = fallback;
        rt->client = std::make_unique<kga::llm::HttpChatClient>(http);
    }

    kga::llm::PricingTable pricing;
    if (!gw.pricing_path.empty())
        pricing = kga::llm::PricingTable::from_file(gw.pricing_path);
    rt->gateway = std::make_unique<kga::llm::Gateway>(
        *rt->client, rt->ledger, kga::llm::BackoffPolicy{}, pricing, gw.seed);

    rt->prompts = kga::PromptLibrary::from_directory(prompts_dir);

    kga::tools::BuiltinToolOptions builtin;
    builtin.fixture_root = tools.fixture_root;
    builtin.scratch_dir =
        tools.scratch_dir.empty() ? tools.fixture_root : tools.scratch_dir;
    if (!tools.corpus_path.empty()) builtin.corpus_path = tools.corpus_path;
    kga::tools::register_builtin_tools(rt->registry, builtin);
    for (const auto& manifest : tools.plugin_manifests)
        kga::tools::register_plugin_tool_file(rt->registry, manifest);
    return rt;
}

std::vector<kga::TaskRecord> read_task_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw kga::TaskFileError("cannot open task file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    std::string content = ss.str();

    // A single pretty-printed JSON object is accepted alongside JSONL.
    auto j = nlohmann::json::parse(content, nullptr, false);
    if (!j.is_discarded() && j.is_object()) return kga::parse_tasks(j.dump() + "\n");
    return kga::parse_tasks(content);
}

int cmd_solve(const std::string& task_path, const std::string& config_path,
              const GatewayOptions& gw, const ToolOptions& tools,
              const std::string& prompts_dir, const std::string& snapshot_dir,
              const std::string& trace_path) {
    auto tasks = read_task_file(task_path);
    if (tasks.size() != 1) {
        std::cerr << "solve expects exactly one task, file holds " << tasks.size()
                  << "\n";
        return 1;
    }
    auto config = kga::ControllerConfig::from_file(config_path);
    auto rt = make_runtime(gw, tools, prompts_dir);

    std::ofstream trace_file;
    kga::ControllerDeps deps;
    deps.gateway = rt->gateway.get();
    deps.prompts = &rt->prompts;
    deps.registry = &rt->registry;
    deps.ledger = &rt->ledger;
    deps.snapshot_dir = snapshot_dir;
    if (!trace_path.empty()) {
        trace_file.open(trace_path, std::ios::trunc);
        if (!trace_file) {
            std::cerr << "cannot write trace file: " << trace_path << "\n";
            return 1;
        }
        deps.trace_sink = &trace_file;
    }

    auto outcome = kga::run_task(tasks[0].id, tasks[0].question, config, deps);

    nlohmann::json report{
        {"id", tasks[0].id},
        {"answer", outcome.answer},
        {"answered", outcome.answered},
        {"failure", outcome.failure},
        {"iterations", outcome.iterations},
        {"llm_calls", outcome.llm_calls},
        {"prompt_tokens", outcome.usage.prompt_tokens},
        {"completion_tokens", outcome.usage.completion_tokens},
        {"cost", outcome.usage.cost},
    };
    if (tasks[0].expected) {
        report["expected"] = *tasks[0].expected;
        report["correct"] =
            outcome.answered && kga::score_answer(outcome.answer, *tasks[0].expected);
    }
    std::cout << report.dump(2) << "\n";
    return outcome.answered ? 0 : 2;
}

int cmd_batch(const std::string& tasks_path, int workers, const std::string& steal,
              const std::string& config_path, const GatewayOptions& gw,
              const ToolOptions& tools, const std::string& prompts_dir,
              const std::string& out_path, const std::string& format) {
    auto tasks = kga::load_tasks(tasks_path);
    auto config = kga::ControllerConfig::from_file(config_path);

    kga::BatchOptions options;
    options.workers = workers;
    options.stealing = steal == "on";
    options.config_fingerprint = kga::to_string(config.solve_mode) + "/" +
                                 kga::to_string(config.backend) + "/" + config.model;

    // One runtime per worker would also do; a single shared one is simpler
    // and every component below it is thread-safe. Per-task ledgers keep
    // usage attributable.
    auto rt = make_runtime(gw, tools, prompts_dir);
    auto report = kga::run_batch(tasks, options, [&](const kga::TaskRecord& task) {
        kga::llm::UsageLedger ledger;
        kga::llm::PricingTable pricing;
        if (!gw.pricing_path.empty())
            pricing = kga::llm::PricingTable::from_file(gw.pricing_path);
        kga::llm::Gateway gateway(*rt->client, ledger, kga::llm::BackoffPolicy{},
                                  pricing, gw.seed);
        kga::ControllerDeps deps;
        deps.gateway = &gateway;
        deps.prompts = &rt->prompts;
        deps.registry = &rt->registry;
        deps.ledger = &ledger;
        return kga::run_task(task.id, task.question, config, deps);
    });

    std::string rendered = kga::emit_report(report, format);
    if (out_path.empty()) {
        std::cout << rendered;
    } else {
        std::ofstream out(out_path, std::ios::trunc);
        if (!out) {
            std::cerr << "cannot write report: " << out_path << "\n";
            return 1;
        }
        out << rendered;
    }
    std::cerr << "solved " << report.solved_count() << "/" << report.results.size()
              << " tasks, " << report.steals.size() << " steals, " << report.wall_ms
              << " ms\n";
    return 0;
}

int cmd_fuse(const std::vector<std::string>& report_paths, const std::string& out_path) {
    std::vector<kga::RunReport> reports;
    for (const auto& path : report_paths) reports.push_back(kga::load_report(path));
    auto fused = kga::fuse_reports(reports);
    std::string rendered = kga::emit_report(fused, "json");
    if (out_path.empty()) {
        std::cout << rendered;
    } else {
        std::ofstream out(out_path, std::ios::trunc);
        if (!out) {
            std::cerr << "cannot write report: " << out_path << "\n";
            return 1;
        }
        out << rendered;
    }
    return 0;
}

int cmd_report(const std::string& in_path, const std::string& format,
               const std::string& out_path) {
    auto report = kga::load_report(in_path);
    std::string rendered = kga::emit_report(report, format);
    if (out_path.empty()) {
        std::cout << rendered;
    } else {
        std::ofstream out(out_path, std::ios::trunc);
        if (!out) {
            std::cerr << "cannot write report: " << out_path << "\n";
            return 1;
        }
        out << rendered;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Knowledge-graph task assistant"};
    app.require_subcommand(1);

    GatewayOptions gw;
    ToolOptions tools;
    std::string prompts_dir = "prompts";

    std::string task_path, config_path, snapshot_dir, trace_path;
    auto* solve = app.add_subcommand("solve", "Solve one task");
    solve->add_option("--task", task_path, "Task JSON or single-line JSONL file")
        ->required();
    solve->add_option("--config", config_path, "Controller config JSON")->required();
    solve->add_option("--prompts", prompts_dir, "Prompt template directory");
    solve->add_option("--snapshot-dir", snapshot_dir, "Write per-iteration snapshots here");
    solve->add_option("--trace", trace_path, "Write the decision trace JSONL here");
    add_gateway_options(solve, gw);
    add_tool_options(solve, tools);

    std::string tasks_path, steal = "on", out_path, format = "json";
    int workers = 1;
    auto* batch = app.add_subcommand("batch", "Run every task in a file");
    batch->add_option("--tasks", tasks_path, "Task JSONL file")->required();
    batch->add_option("--workers", workers, "Worker thread count")
        ->check(CLI::PositiveNumber);
    batch->add_option("--steal", steal, "Work stealing on|off")
        ->check(CLI::IsMember({"on", "off"}));
    batch->add_option("--config", config_path, "Controller config JSON")->required();
    batch->add_option("--prompts", prompts_dir, "Prompt template directory");
    batch->add_option("--out", out_path, "Report output path (default stdout)");
    batch->add_option("--format", format, "Report format")
        ->check(CLI::IsMember({"json", "csv"}));
    add_gateway_options(batch, gw);
    add_tool_options(batch, tools);

    std::vector<std::string> fuse_paths;
    auto* fuse = app.add_subcommand("fuse", "Fuse reports over the same task set");
    fuse->add_option("reports", fuse_paths, "Report JSON files")->expected(-1)->required();
    fuse->add_option("--out", out_path, "Fused report output path (default stdout)");

    std::string report_in;
    auto* report = app.add_subcommand("report", "Re-emit a report in another format");
    report->add_option("--in", report_in, "Report JSON file")->required();
    report->add_option("--format", format, "Output format")
        ->check(CLI::IsMember({"json", "csv"}))
        ->required();
    report->add_option("--out", out_path, "Output path (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (solve->parsed())
            return cmd_solve(task_path, config_path, gw, tools, prompts_dir,
                             snapshot_dir, trace_path);
        if (batch->parsed())
            return cmd_batch(tasks_path, workers, steal, config_path, gw, tools,
                             prompts_dir, out_path, format);
        if (fuse->parsed()) return cmd_fuse(fuse_paths, out_path);
        if (report->parsed()) return cmd_report(report_in, format, out_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

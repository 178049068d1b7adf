// Work-stealing execution of a fixed task set. Tasks are dealt round-robin
// onto per-worker deques; owners pop from the front, and an idle worker
// steals the LAST task from the peer with the largest remaining queue
// (ties: lowest worker index). There is no master: every worker scans and
// steals on its own. Tasks never re-enter a queue, so a worker finishes
// when its own queue and every peer queue are empty.
//
// Two drivers share the policy: a threaded pool for real workloads, and a
// discrete-event simulator over a virtual clock for deterministic
// scheduling experiments.
#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <vector>

namespace kga {

struct StealEvent {
    int thief = 0;
    int victim = 0;
    std::size_t task = 0;
    std::int64_t at_ticks = 0; // simulator only; 0 in threaded runs
};

struct CompletionRecord {
    std::size_t task = 0;
    int worker = 0;
};

struct PoolStats {
    std::vector<CompletionRecord> completions; // in completion order
    std::vector<StealEvent> steals;
    std::chrono::milliseconds wall{0};
};

// Runs body(i) exactly once for every i in [0, task_count) on `workers`
// threads. Throws std::invalid_argument for workers < 1; exceptions from
// body are the caller's problem (wrap the body if tasks may throw).
PoolStats run_work_stealing(std::size_t task_count, int workers, bool stealing,
                            const std::function<void(std::size_t)>& body);

struct SimCompletion {
    std::size_t task = 0;
    int worker = 0;
    std::int64_t start_ticks = 0;
    std::int64_t finish_ticks = 0;
};

struct SimulatedRun {
    std::int64_t makespan = 0; // latest worker finish time
    std::vector<SimCompletion> completions;
    std::vector<StealEvent> steals;
    std::vector<std::int64_t> worker_finish; // per-worker final clock
};

// Same scheduling policy on a virtual clock: task i costs latencies[i]
// ticks, steals are free, and workers act in increasing clock order (ties:
// lowest index). Deterministic in its inputs.
SimulatedRun simulate_work_stealing(const std::vector<std::int64_t>& latencies,
                                    int workers, bool stealing);

} // namespace kga

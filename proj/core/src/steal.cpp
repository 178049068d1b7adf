#include "kga/steal.hpp"

#include <algorithm>
#include <deque>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <thread>

namespace kga {

namespace {

struct WorkQueue {
    std::mutex mutex;
    std::deque<std::size_t> tasks;
};

} // namespace

PoolStats run_work_stealing(std::size_t task_count, int workers, bool stealing,
                            const std::function<void(std::size_t)>& body) {
    if (workers < 1) throw std::invalid_argument("workers must be at least 1");

    std::vector<WorkQueue> queues(static_cast<std::size_t>(workers));
    for (std::size_t i = 0; i < task_count; ++i)
        queues[i % static_cast<std::size_t>(workers)].tasks.push_back(i);

    PoolStats stats;
    std::mutex log_mutex;

    auto worker_fn = [&](int w) {
        for (;;) {
            std::optional<std::size_t> task;
            {
                std::lock_guard<std::mutex> lock(queues[w].mutex);
                if (!queues[w].tasks.empty()) {
                    task = queues[w].tasks.front();
                    queues[w].tasks.pop_front();
                }
            }
            while (!task && stealing) {
                int victim = -1;
                std::size_t largest = 0;
                for (int v = 0; v < workers; ++v) {
                    if (v == w) continue;
                    std::lock_guard<std::mutex> lock(queues[v].mutex);
                    if (queues[v].tasks.size() > largest) {
                        largest = queues[v].tasks.size();
                        victim = v;
                    }
                }
                if (victim < 0) break;
                std::lock_guard<std::mutex> lock(queues[victim].mutex);
                // The victim may have drained between the scan and this
                // lock; rescan in that case.
                if (queues[victim].tasks.empty()) continue;
                task = queues[victim].tasks.back();
                queues[victim].tasks.pop_back();
                std::lock_guard<std::mutex> log(log_mutex);
                stats.steals.push_back({w, victim, *task, 0});
            }
            if (!task) return;
            body(*task);
            std::lock_guard<std::mutex> log(log_mutex);
            stats.completions.push_back({*task, w});
        }
    };

    auto start = std::chrono::steady_clock::now();
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) threads.emplace_back(worker_fn, w);
    for (auto& t : threads) t.join();
    stats.wall = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - start);
    return stats;
}

SimulatedRun simulate_work_stealing(const std::vector<std::int64_t>& latencies,
                                    int workers, bool stealing) {
    if (workers < 1) throw std::invalid_argument("workers must be at least 1");
    for (auto l : latencies)
        if (l < 0) throw std::invalid_argument("latencies must be non-negative");

    std::vector<std::deque<std::size_t>> queues(static_cast<std::size_t>(workers));
    for (std::size_t i = 0; i < latencies.size(); ++i)
        queues[i % static_cast<std::size_t>(workers)].push_back(i);

    SimulatedRun run;
    run.worker_finish.assign(static_cast<std::size_t>(workers), 0);
    std::vector<std::int64_t> clock(static_cast<std::size_t>(workers), 0);
    std::vector<bool> active(static_cast<std::size_t>(workers), true);
    int active_count = workers;

    // Workers act one at a time in increasing virtual-clock order, so the
    // queue state a worker sees reflects exactly the actions that finished
    // before its own clock.
    while (active_count > 0) {
        int w = -1;
        for (int v = 0; v < workers; ++v)
            if (active[v] && (w < 0 || clock[v] < clock[w])) w = v;

        std::optional<std::size_t> task;
        if (!queues[w].empty()) {
            task = queues[w].front();
            queues[w].pop_front();
        } else if (stealing) {
            int victim = -1;
            std::size_t largest = 0;
            for (int v = 0; v < workers; ++v) {
                if (v == w) continue;
                if (queues[v].size() > largest) {
                    largest = queues[v].size();
                    victim = v;
                }
            }
            if (victim >= 0) {
                task = queues[victim].back();
                queues[victim].pop_back();
                run.steals.push_back({w, victim, *task, clock[w]});
            }
        }

        if (!task) {
            active[w] = false;
            --active_count;
            run.worker_finish[w] = clock[w];
            continue;
        }
        std::int64_t start = clock[w];
        clock[w] += latencies[*task];
        run.completions.push_back({*task, w, start, clock[w]});
    }

    for (auto f : run.worker_finish) run.makespan = std::max(run.makespan, f);
    return run;
}

} // namespace kga

#pragma once

#include <condition_variable>
#include <cstddef>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace unibench {

// Fixed set of worker threads that execute one statically partitioned job at
// a time. run() returns only after every participating worker has finished,
// which acts as the barrier between consecutive kernels.
class WorkerPool {
public:
    explicit WorkerPool(std::size_t workers);
    ~WorkerPool();

    WorkerPool(const WorkerPool&) = delete;
    WorkerPool& operator=(const WorkerPool&) = delete;

    [[nodiscard]] std::size_t size() const noexcept { return threads_.size(); }

    // Runs job(worker_index) on workers [0, participants). Must be called
    // from a single orchestrating thread.
    void run(std::size_t participants, const std::function<void(std::size_t)>& job);

private:
    void worker_loop(std::size_t index);

    std::vector<std::thread> threads_;
    std::mutex mutex_;
    std::condition_variable start_cv_;
    std::condition_variable done_cv_;
    const std::function<void(std::size_t)>* job_ = nullptr;
    std::size_t participants_ = 0;
    std::size_t pending_ = 0;
    std::size_t generation_ = 0;
    bool stopping_ = false;
};

// Contiguous [begin, end) chunk of `total` items owned by `part` of `parts`.
struct Chunk {
    std::size_t begin;
    std::size_t end;
};
Chunk static_chunk(std::size_t total, std::size_t parts, std::size_t part) noexcept;

} // namespace unibench

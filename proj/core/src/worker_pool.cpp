#include "unibench/worker_pool.hpp"

#include <algorithm>
#include <stdexcept>

namespace unibench {

WorkerPool::WorkerPool(std::size_t workers) {
    if (workers == 0) {
        throw std::invalid_argument("WorkerPool needs at least one worker");
    }
    threads_.reserve(workers);
    for (std::size_t i = 0; i < workers; ++i) {
        threads_.emplace_back([this, i] { worker_loop(i); });
    }
}

WorkerPool::~WorkerPool() {
    {
        std::lock_guard lock(mutex_);
        stopping_ = true;
        ++generation_;
    }
    start_cv_.notify_all();
    for (auto& t : threads_) {
        t.join();
    }
}

void WorkerPool::run(std::size_t participants, const std::function<void(std::size_t)>& job) {
    if (participants == 0 || participants > threads_.size()) {
        throw std::invalid_argument("WorkerPool::run: participants out of range");
    }
    std::unique_lock lock(mutex_);
    job_ = &job;
    participants_ = participants;
    pending_ = participants;
    ++generation_;
    start_cv_.notify_all();
    done_cv_.wait(lock, [this] { return pending_ == 0; });
    job_ = nullptr;
}

void WorkerPool::worker_loop(std::size_t index) {
    std::size_t seen = 0;
    for (;;) {
        const std::function<void(std::size_t)>* job = nullptr;
        {
            std::unique_lock lock(mutex_);
            start_cv_.wait(lock, [&] { return generation_ != seen; });
            seen = generation_;
            if (stopping_) {
                return;
            }
            if (index >= participants_) {
                continue;
            }
            job = job_;
        }
        (*job)(index);
        {
            std::lock_guard lock(mutex_);
            if (--pending_ == 0) {
                done_cv_.notify_one();
            }
        }
    }
}

Chunk static_chunk(std::size_t total, std::size_t parts, std::size_t part) noexcept {
    const std::size_t base = total / parts;
    const std::size_t extra = total % parts;
    const std::size_t begin = part * base + std::min(part, extra);
    const std::size_t len = base + (part < extra ? 1 : 0);
    return {begin, begin + len};
}

} // namespace unibench

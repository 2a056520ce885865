#pragma once

#include <atomic>
#include <condition_variable>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace anyres {

// Minimal persistent pool for data-parallel loops. Work is split into fixed
// (index-range) chunks, so results are bit-identical no matter which worker
// executes which chunk.
class ThreadPool {
public:
    static ThreadPool& instance() {
        static ThreadPool pool;
        return pool;
    }

    int num_threads() const { return int(workers_.size()) + 1; }

    void set_num_threads(int n) {
        std::lock_guard<std::mutex> api_lock(api_mutex_);
        stop_workers();
        start_workers(n < 1 ? int(std::thread::hardware_concurrency()) : n);
    }

    // fn(begin, end) over [0, n) split into one contiguous range per thread.
    void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
        if (n <= 0) return;
        int nt = num_threads();
        if (nt <= 1 || n < 2 * grain_) {
            fn(0, n);
            return;
        }
        std::lock_guard<std::mutex> api_lock(api_mutex_);
        int64_t chunk = (n + nt - 1) / nt;
        {
            std::unique_lock<std::mutex> lk(m_);
            task_ = &fn;
            task_n_ = n;
            task_chunk_ = chunk;
            pending_ = 0;
            for (size_t i = 0; i < workers_.size(); ++i) {
                int64_t b = int64_t(i + 1) * chunk;
                if (b < n) ++pending_;
            }
            ++epoch_;
        }
        cv_.notify_all();
        fn(0, std::min(chunk, n));
        std::unique_lock<std::mutex> lk(m_);
        done_cv_.wait(lk, [&] { return pending_ == 0; });
        task_ = nullptr;
    }

private:
    ThreadPool() { start_workers(int(std::thread::hardware_concurrency())); }
    ~ThreadPool() { stop_workers(); }

    void start_workers(int n) {
        quit_ = false;
        for (int i = 1; i < n; ++i) {
            workers_.emplace_back([this, i] { worker_loop(i); });
        }
    }

    void stop_workers() {
        {
            std::lock_guard<std::mutex> lk(m_);
            quit_ = true;
            ++epoch_;
        }
        cv_.notify_all();
        for (auto& w : workers_) w.join();
        workers_.clear();
    }

    void worker_loop(int idx) {
        uint64_t seen = 0;
        while (true) {
            const std::function<void(int64_t, int64_t)>* task = nullptr;
            int64_t b = 0, e = 0;
            {
                std::unique_lock<std::mutex> lk(m_);
                cv_.wait(lk, [&] { return quit_ || epoch_ != seen; });
                seen = epoch_;
                if (quit_) return;
                b = int64_t(idx) * task_chunk_;
                e = std::min(b + task_chunk_, task_n_);
                if (b >= task_n_ || task_ == nullptr) continue;
                task = task_;
            }
            (*task)(b, e);
            {
                std::lock_guard<std::mutex> lk(m_);
                if (--pending_ == 0) done_cv_.notify_all();
            }
        }
    }

    std::vector<std::thread> workers_;
    std::mutex m_, api_mutex_;
    std::condition_variable cv_, done_cv_;
    const std::function<void(int64_t, int64_t)>* task_ = nullptr;
    int64_t task_n_ = 0, task_chunk_ = 0;
    int pending_ = 0;
    uint64_t epoch_ = 0;
    bool quit_ = false;
    static constexpr int64_t grain_ = 16;
};

inline void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& fn) {
    ThreadPool::instance().parallel_for(n, fn);
}

}  // namespace anyres

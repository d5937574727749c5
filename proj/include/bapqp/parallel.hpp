#ifndef BAPQP_PARALLEL_HPP
#define BAPQP_PARALLEL_HPP

#include <algorithm>
#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace bapqp {

// Fixed pool of workers running a static contiguous partition of [0, n).
// Each index is processed by exactly one worker and callers only write to
// per-index slots, so results do not depend on the thread count.
class WorkerPool {
 public:
  explicit WorkerPool(int threads = 1) : threads_(std::max(1, threads)) {
    for (int t = 1; t < threads_; ++t) workers_.emplace_back([this, t] { loop(t); });
  }
  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  ~WorkerPool() {
    {
      std::lock_guard<std::mutex> lock(mu_);
      stop_ = true;
      ++generation_;
    }
    cv_.notify_all();
    for (auto& w : workers_) w.join();
  }

  int threads() const noexcept { return threads_; }

  void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    if (threads_ == 1 || n < 2) {
      for (std::size_t i = 0; i < n; ++i) fn(i);
      return;
    }
    {
      std::lock_guard<std::mutex> lock(mu_);
      task_ = &fn;
      count_ = n;
      pending_ = threads_ - 1;
      errors_.assign(threads_, nullptr);
      ++generation_;
    }
    cv_.notify_all();
    run_chunk(0);
    std::unique_lock<std::mutex> lock(mu_);
    done_cv_.wait(lock, [this] { return pending_ == 0; });
    task_ = nullptr;
    for (auto& e : errors_)
      if (e) std::rethrow_exception(e);
  }

 private:
  void run_chunk(int t) {
    const std::size_t per = (count_ + threads_ - 1) / threads_;
    const std::size_t lo = std::min(count_, per * t);
    const std::size_t hi = std::min(count_, lo + per);
    try {
      for (std::size_t i = lo; i < hi; ++i) (*task_)(i);
    } catch (...) {
      errors_[t] = std::current_exception();
    }
  }

  void loop(int t) {
    std::size_t seen = 0;
    for (;;) {
      {
        std::unique_lock<std::mutex> lock(mu_);
        cv_.wait(lock, [&] { return generation_ != seen; });
        seen = generation_;
        if (stop_) return;
      }
      run_chunk(t);
      {
        std::lock_guard<std::mutex> lock(mu_);
        --pending_;
      }
      done_cv_.notify_one();
    }
  }

  int threads_;
  std::vector<std::thread> workers_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  const std::function<void(std::size_t)>* task_ = nullptr;
  std::size_t count_ = 0;
  int pending_ = 0;
  std::size_t generation_ = 0;
  bool stop_ = false;
  std::vector<std::exception_ptr> errors_;
};

}  // namespace bapqp

#endif  // BAPQP_PARALLEL_HPP

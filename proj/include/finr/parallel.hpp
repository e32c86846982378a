#pragma once

#include <atomic>
#include <condition_variable>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace finr {

/// Persistent worker pool running an indexed chunk function. The chunk
/// decomposition is fixed by the caller, never by the thread count, and
/// per-chunk results are combined by the caller in chunk order, so
/// results are bitwise identical for any pool size (including 1, where
/// everything runs inline).
class ThreadPool {
 public:
  explicit ThreadPool(int n_threads) : n_threads_(n_threads < 1 ? 1 : n_threads) {
    for (int i = 0; i + 1 < n_threads_; ++i) {
      workers_.emplace_back([this] { worker_loop(); });
    }
  }

  ~ThreadPool() {
    {
      std::unique_lock lk(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : workers_) t.join();
  }

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  int size() const { return n_threads_; }

  /// Runs fn(chunk) for chunk in [0, n_chunks); blocks until all done.
  void run_chunks(int n_chunks, const std::function<void(int)>& fn) {
    if (n_chunks <= 0) return;
    if (n_threads_ == 1 || n_chunks == 1) {
      for (int c = 0; c < n_chunks; ++c) fn(c);
      return;
    }
    {
      std::unique_lock lk(mu_);
      job_ = &fn;
      next_ = 0;
      limit_ = n_chunks;
      pending_ = n_chunks;
      ++generation_;
    }
    cv_.notify_all();
    // The calling thread participates.
    drain();
    std::unique_lock lk(mu_);
    done_cv_.wait(lk, [this] { return pending_ == 0; });
    job_ = nullptr;
  }

  static ThreadPool& global() {
    static ThreadPool pool(default_threads());
    return pool;
  }

  static int default_threads() {
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
  }

 private:
  void drain() {
    for (;;) {
      int c = next_.fetch_add(1);
      if (c >= limit_) break;
      (*job_)(c);
      if (pending_.fetch_sub(1) == 1) {
        std::unique_lock lk(mu_);
        done_cv_.notify_all();
      }
    }
  }

  void worker_loop() {
    std::uint64_t seen = 0;
    for (;;) {
      {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
      }
      drain();
    }
  }

  int n_threads_;
  std::vector<std::thread> workers_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  const std::function<void(int)>* job_ = nullptr;
  std::atomic<int> next_{0};
  int limit_ = 0;
  std::atomic<int> pending_{0};
  std::uint64_t generation_ = 0;
  bool stop_ = false;
};

}  // namespace finr

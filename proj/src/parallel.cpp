#include "acuc/parallel.hpp"

#include <algorithm>
#include <cstdint>

namespace acuc {

// Workers spin briefly before parking on the condition variable, which keeps
// dispatch latency low for the hot evaluate/backprop loops.
static constexpr int kSpinRounds = 1500;

ThreadPool& ThreadPool::instance() {
  static ThreadPool pool;
  return pool;
}

ThreadPool::~ThreadPool() { stop_threads(); }

void ThreadPool::stop_threads() {
  {
    std::unique_lock<std::mutex> lk(mu_);
    shutdown_ = true;
    epoch_.fetch_add(1, std::memory_order_release);
  }
  cv_work_.notify_all();
  for (auto& t : threads_) t.join();
  threads_.clear();
  shutdown_ = false;
}

void ThreadPool::set_workers(int n) {
  if (n < 1) n = 1;
  if (n == workers_) return;
  stop_threads();
  workers_ = n;
  int hw = std::max(1u, std::thread::hardware_concurrency());
  exec_threads_ = std::min(workers_, hw);
  // slot 0 is the calling thread
  for (int i = 1; i < exec_threads_; ++i)
    threads_.emplace_back([this, i] { worker_loop(i); });
}

void ThreadPool::worker_loop(int slot) {
  std::uint64_t seen = 0;
  for (;;) {
    for (int spin = 0; spin < kSpinRounds; ++spin) {
      if (epoch_.load(std::memory_order_acquire) != seen) break;
#if defined(__x86_64__)
      __builtin_ia32_pause();
#endif
    }
    const std::function<void(int, int)>* job = nullptr;
    int nr = 0;
    {
      std::unique_lock<std::mutex> lk(mu_);
      cv_work_.wait(lk, [&] {
        return shutdown_ || epoch_.load(std::memory_order_relaxed) != seen;
      });
      if (shutdown_) return;
      seen = epoch_.load(std::memory_order_relaxed);
      job = job_;
      nr = n_ranges_;
    }
    if (job) {
      for (int r = slot; r < nr; r += exec_threads_) {
        auto [b, e] = ranges_[r];
        if (e > b) (*job)(b, e);
      }
    }
    pending_.fetch_sub(1, std::memory_order_acq_rel);
  }
}

void ThreadPool::parallel_for(int n, const std::function<void(int, int)>& fn) {
  if (n <= 0) return;
  if (workers_ == 1 || n == 1 || exec_threads_ == 1) {
    // same partition, sequential execution: identical per-block ordering
    int w = std::min(workers_, n);
    for (int i = 0; i < w; ++i) {
      int b = static_cast<int>(std::int64_t(n) * i / w);
      int e = static_cast<int>(std::int64_t(n) * (i + 1) / w);
      if (e > b) fn(b, e);
    }
    return;
  }
  const int w = std::min(workers_, n);
  {
    std::unique_lock<std::mutex> lk(mu_);
    ranges_.assign(w, {0, 0});
    for (int i = 0; i < w; ++i)
      ranges_[i] = {static_cast<int>(std::int64_t(n) * i / w),
                    static_cast<int>(std::int64_t(n) * (i + 1) / w)};
    n_ranges_ = w;
    job_ = &fn;
    pending_.store(static_cast<int>(threads_.size()),
                   std::memory_order_release);
    epoch_.fetch_add(1, std::memory_order_release);
  }
  cv_work_.notify_all();
  for (int r = 0; r < n_ranges_; r += exec_threads_) {
    auto [b, e] = ranges_[r];
    if (e > b) fn(b, e);
  }
  for (int spin = 0; pending_.load(std::memory_order_acquire) != 0; ++spin) {
#if defined(__x86_64__)
    __builtin_ia32_pause();
#endif
    if (spin > 2000) std::this_thread::yield();
  }
  job_ = nullptr;
}

void set_workers(int n) { ThreadPool::instance().set_workers(n); }
int workers() { return ThreadPool::instance().workers(); }
void parallel_for(int n, const std::function<void(int, int)>& fn) {
  ThreadPool::instance().parallel_for(n, fn);
}

}  // namespace acuc

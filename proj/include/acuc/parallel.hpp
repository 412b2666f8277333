#pragma once

#include <atomic>
#include <condition_variable>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace acuc {

// Persistent worker pool. parallel_for splits [0, n) into one contiguous
// block per *configured* worker, so callers that write disjoint slices stay
// deterministic regardless of worker count: each index is always processed
// in the same order within its block. The blocks are executed on at most
// hardware_concurrency OS threads; asking for more workers than cores
// changes scheduling, never results.
class ThreadPool {
 public:
  static ThreadPool& instance();

  void set_workers(int n);
  int workers() const { return workers_; }

  // fn(begin, end) over a static block partition of [0, n).
  void parallel_for(int n, const std::function<void(int, int)>& fn);

  ~ThreadPool();

 private:
  ThreadPool() = default;
  void stop_threads();
  void worker_loop(int slot);

  int workers_ = 1;       // partition granularity
  int exec_threads_ = 1;  // OS threads actually used
  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable cv_work_;
  const std::function<void(int, int)>* job_ = nullptr;
  std::vector<std::pair<int, int>> ranges_;
  int n_ranges_ = 0;
  std::atomic<std::uint64_t> epoch_{0};
  std::atomic<int> pending_{0};
  bool shutdown_ = false;
};

void set_workers(int n);
int workers();
void parallel_for(int n, const std::function<void(int, int)>& fn);

}  // namespace acuc

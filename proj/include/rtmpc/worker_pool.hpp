#pragma once

#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace rtmpc {

/// Fixed set of threads running index-parallel loops. The calling thread takes
/// part in every loop, so a pool of size 1 runs inline.
class WorkerPool {
 public:
  explicit WorkerPool(int workers);
  ~WorkerPool();
  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  int size() const { return static_cast<int>(threads_.size()) + 1; }

  /// Calls fn(i) for i in [0, n). Indices are split into contiguous blocks by
  /// worker, so assignment is deterministic. The first exception is rethrown.
  void parallel_for(int n, const std::function<void(int)>& fn);

 private:
  void worker_loop(int id);
  void run_block(int worker, int n, const std::function<void(int)>& fn);

  std::vector<std::thread> threads_;
  std::mutex mu_;
  std::condition_variable cv_start_, cv_done_;
  const std::function<void(int)>* job_ = nullptr;
  int job_n_ = 0;
  std::size_t generation_ = 0;
  int pending_ = 0;
  bool stop_ = false;
  std::exception_ptr error_;
};

}  // namespace rtmpc

#include "rtmpc/worker_pool.hpp"

#include <algorithm>
#include <exception>

namespace rtmpc {

WorkerPool::WorkerPool(int workers) {
  for (int i = 1; i < std::max(1, workers); ++i) {
    threads_.emplace_back([this, i] { worker_loop(i); });
  }
}

WorkerPool::~WorkerPool() {
  {
    std::lock_guard<std::mutex> lock(mu_);
    stop_ = true;
  }
  cv_start_.notify_all();
  for (auto& t : threads_) t.join();
}

void WorkerPool::run_block(int worker, int n, const std::function<void(int)>& fn) {
  const int w = size();
  const int begin = static_cast<int>(static_cast<long>(n) * worker / w);
  const int end = static_cast<int>(static_cast<long>(n) * (worker + 1) / w);
  try {
    for (int i = begin; i < end; ++i) fn(i);
  } catch (...) {
    std::lock_guard<std::mutex> lock(mu_);
    if (!error_) error_ = std::current_exception();
  }
}

void WorkerPool::worker_loop(int id) {
  std::size_t seen = 0;
  for (;;) {
    const std::function<void(int)>* job;
    int n;
    {
      std::unique_lock<std::mutex> lock(mu_);
      cv_start_.wait(lock, [&] { return stop_ || generation_ != seen; });
      if (stop_) return;
      seen = generation_;
      job = job_;
      n = job_n_;
    }
    run_block(id, n, *job);
    {
      std::lock_guard<std::mutex> lock(mu_);
      if (--pending_ == 0) cv_done_.notify_one();
    }
  }
}

void WorkerPool::parallel_for(int n, const std::function<void(int)>& fn) {
  if (threads_.empty()) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  {
    std::lock_guard<std::mutex> lock(mu_);
    job_ = &fn;
    job_n_ = n;
    pending_ = static_cast<int>(threads_.size());
    error_ = nullptr;
    ++generation_;
  }
  cv_start_.notify_all();
  run_block(0, n, fn);
  std::exception_ptr err;
  {
    std::unique_lock<std::mutex> lock(mu_);
    cv_done_.wait(lock, [&] { return pending_ == 0; });
    err = error_;
  }
  if (err) std::rethrow_exception(err);
}

}  // namespace rtmpc

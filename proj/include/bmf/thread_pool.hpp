#pragma once

#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <utility>
#include <vector>

namespace bmf {

// Fixed set of workers executing one batch at a time. run() hands out task
// indices [0, n) and returns only after every task has finished, which makes
// each call a full barrier. The first exception thrown by a task is
// rethrown from run(); the remaining tasks of that batch still execute.
class worker_pool {
public:
  explicit worker_pool(std::size_t workers) {
    if (workers == 0) workers = 1;
    threads_.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) threads_.emplace_back([this, w] { loop(w); });
  }

  worker_pool(const worker_pool&) = delete;
  worker_pool& operator=(const worker_pool&) = delete;

  ~worker_pool() {
    {
      std::lock_guard lock(mtx_);
      stopping_ = true;
    }
    work_cv_.notify_all();
    for (auto& t : threads_) t.join();
  }

  std::size_t size() const noexcept { return threads_.size(); }

  // task(task_index, worker_index)
  void run(std::size_t n_tasks, std::function<void(std::size_t, std::size_t)> task) {
    if (n_tasks == 0) return;
    std::unique_lock lock(mtx_);
    task_ = std::move(task);
    n_tasks_ = n_tasks;
    next_ = 0;
    pending_ = n_tasks;
    error_ = nullptr;
    ++generation_;
    work_cv_.notify_all();
    done_cv_.wait(lock, [this] { return pending_ == 0; });
    task_ = nullptr;
    if (error_) std::rethrow_exception(std::exchange(error_, nullptr));
  }

private:
  void loop(std::size_t worker) {
    std::size_t seen = 0;
    std::unique_lock lock(mtx_);
    for (;;) {
      work_cv_.wait(lock, [&] { return stopping_ || (generation_ != seen && next_ < n_tasks_); });
      if (stopping_) return;
      while (next_ < n_tasks_) {
        const std::size_t t = next_++;
        lock.unlock();
        std::exception_ptr err;
        try {
          task_(t, worker);
        } catch (...) {
          err = std::current_exception();
        }
        lock.lock();
        if (err && !error_) error_ = err;
        if (--pending_ == 0) done_cv_.notify_all();
      }
      seen = generation_;
    }
  }

  std::vector<std::thread> threads_;
  std::mutex mtx_;
  std::condition_variable work_cv_;
  std::condition_variable done_cv_;
  std::function<void(std::size_t, std::size_t)> task_;
  std::size_t n_tasks_ = 0;
  std::size_t next_ = 0;
  std::size_t pending_ = 0;
  std::size_t generation_ = 0;
  std::exception_ptr error_;
  bool stopping_ = false;
};

}  // namespace bmf

// Copyright 2026 The compgrad Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#pragma once

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace compgrad {

/// Small persistent worker pool for per-node work inside one optimizer step.
/// `for_each` only distributes independent index-keyed tasks; callers write
/// results into per-index slots and reduce them in index order, so results
/// never depend on the thread count.
class NodeExecutor {
 public:
  explicit NodeExecutor(std::size_t threads = 1) : threads_(std::max<std::size_t>(1, threads)) {
    for (std::size_t t = 1; t < threads_; ++t) workers_.emplace_back([this] { worker_loop(); });
  }

  ~NodeExecutor() {
    {
      std::lock_guard lock(mutex_);
      stopping_ = true;
    }
    wake_.notify_all();
    for (auto& w : workers_) w.join();
  }

  NodeExecutor(const NodeExecutor&) = delete;
  NodeExecutor& operator=(const NodeExecutor&) = delete;

  std::size_t threads() const noexcept { return threads_; }

  /// Shared single-threaded executor.
  static NodeExecutor& sequential() {
    static NodeExecutor exec(1);
    return exec;
  }

  /// Thread cap from COMPGRAD_THREADS, defaulting to the hardware concurrency.
  static std::size_t threads_from_env() {
    std::size_t hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("COMPGRAD_THREADS")) {
      try {
        const long v = std::stol(env);
        if (v >= 1) return static_cast<std::size_t>(v);
      } catch (const std::exception&) {
      }
    }
    return hw;
  }

  void for_each(std::size_t count, const std::function<void(std::size_t)>& fn) {
    if (threads_ == 1 || count <= 1) {
      for (std::size_t i = 0; i < count; ++i) fn(i);
      return;
    }
    std::unique_lock call_lock(call_mutex_);
    {
      std::lock_guard lock(mutex_);
      task_.store(&fn);
      count_.store(count);
      next_.store(0);
      remaining_ = count;
      error_ = nullptr;
      ++generation_;
    }
    wake_.notify_all();
    run_tasks();
    std::unique_lock lock(mutex_);
    done_.wait(lock, [this] { return remaining_ == 0 && active_ == 0; });
    next_.store(kIdle);
    if (error_) std::rethrow_exception(error_);
  }

 private:
  void run_tasks() {
    for (;;) {
      const std::size_t i = next_.fetch_add(1);
      if (i >= count_) return;
      try {
        (*task_.load())(i);
      } catch (...) {
        std::lock_guard lock(mutex_);
        if (!error_) error_ = std::current_exception();
      }
      std::lock_guard lock(mutex_);
      if (--remaining_ == 0) done_.notify_all();
    }
  }

  void worker_loop() {
    std::size_t seen = 0;
    for (;;) {
      {
        std::unique_lock lock(mutex_);
        wake_.wait(lock, [&] { return stopping_ || generation_ != seen; });
        if (stopping_) return;
        seen = generation_;
        ++active_;
      }
      run_tasks();
      std::lock_guard lock(mutex_);
      if (--active_ == 0) done_.notify_all();
    }
  }

  std::size_t threads_;
  std::vector<std::thread> workers_;
  std::mutex call_mutex_;
  std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable done_;
  std::atomic<const std::function<void(std::size_t)>*> task_{nullptr};
  std::atomic<std::size_t> count_{0};
  // kIdle keeps late-waking workers from claiming indices between jobs.
  static constexpr std::size_t kIdle = std::size_t{1} << 62;
  std::atomic<std::size_t> next_{kIdle};
  std::size_t remaining_ = 0;
  std::size_t active_ = 0;
  std::size_t generation_ = 0;
  bool stopping_ = false;
  std::exception_ptr error_;
};

}  // namespace compgrad

// Copyright 2026 The Forge Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <thread>
#include <type_traits>
#include <vector>

namespace forge {

/// Applies `fn` to every index in [0, count) on at most `workers` threads and
/// returns the results in index order. If any call throws, the exception of
/// the lowest failing index is rethrown after all workers finish.
template <class F>
auto parallel_map(std::size_t count, int workers, F fn)
    -> std::vector<std::invoke_result_t<F&, std::size_t>> {
  using R = std::invoke_result_t<F&, std::size_t>;
  std::vector<std::optional<R>> slots(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};

  auto run = [&] {
    for (;;) {
      auto i = next.fetch_add(1);
      if (i >= count) return;
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  auto n_threads = static_cast<std::size_t>(std::max(1, workers));
  n_threads = std::min(n_threads, count);
  if (n_threads <= 1) {
    run();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(run);
  }

  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<R> out;
  out.reserve(count);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

/// Runs `work(i)` for i in [0, count) on up to `workers` threads and calls
/// `commit(i, optional<result>, exception_ptr)` strictly in index order, as
/// soon as every earlier index has committed. A throwing `work` commits an
/// empty optional with its exception. `commit` runs under a lock.
template <class Work, class Commit>
void parallel_for_ordered(std::size_t count, int workers, Work work, Commit commit) {
  using R = std::invoke_result_t<Work&, std::size_t>;
  std::vector<std::optional<R>> ready(count);
  std::vector<std::exception_ptr> errors(count);
  std::vector<char> finished(count, 0);
  std::mutex mu;
  std::size_t next_commit = 0;
  std::atomic<std::size_t> next{0};

  auto drain_locked = [&] {
    while (next_commit < count && finished[next_commit]) {
      commit(next_commit, std::move(ready[next_commit]), errors[next_commit]);
      ready[next_commit].reset();
      ++next_commit;
    }
  };
  auto run = [&] {
    for (;;) {
      auto i = next.fetch_add(1);
      if (i >= count) return;
      std::optional<R> result;
      std::exception_ptr err;
      try {
        result.emplace(work(i));
      } catch (...) {
        err = std::current_exception();
      }
      std::lock_guard lock(mu);
      ready[i] = std::move(result);
      errors[i] = err;
      finished[i] = 1;
      drain_locked();
    }
  };
  auto n_threads = std::min(static_cast<std::size_t>(std::max(1, workers)), count);
  if (n_threads <= 1) {
    run();
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(run);
}

}  // namespace forge

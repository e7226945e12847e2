/*
 * Copyright 2026 The promptforge authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <atomic>
#include <chrono>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "promptforge/cache.hpp"
#include "promptforge/errors.hpp"
#include "promptforge/oracle_types.hpp"

namespace promptforge {

/// Exponential backoff with seeded jitter, applied to transient
/// transport failures and rate-limit replies.
struct RetryPolicy {
  int max_attempts = 5;
  int base_delay_ms = 250;
  int max_delay_ms = 4000;
  std::uint64_t jitter_seed = 0;
};

/// Counts completed requests only, so total_requests == cache_hits +
/// backend_calls holds at every instant.
struct OracleStats {
  std::atomic<long> total_requests{0};
  std::atomic<long> cache_hits{0};
  std::atomic<long> backend_calls{0};
  std::atomic<long> prompt_tokens{0};
  std::atomic<long> completion_tokens{0};
};

/// Uniform access to one chat backend: caching, retries, and bounded
/// concurrent batching. Shareable handle; all entry points are
/// thread-safe.
class Oracle {
 public:
  struct BatchResult {
    ModelResponse response;
    bool ok = false;
    std::string error;
  };

  explicit Oracle(std::shared_ptr<ChatBackend> backend,
                  std::shared_ptr<QueryCache> cache = nullptr,
                  RetryPolicy retry = {}, int concurrency = 1)
      : backend_(std::move(backend)),
        cache_(std::move(cache)),
        retry_(retry),
        concurrency_(concurrency < 1 ? 1 : concurrency),
        jitter_(retry.jitter_seed) {
    if (!backend_) throw ContractError("Oracle requires a backend");
  }

  const OracleStats& stats() const { return stats_; }
  ChatBackend& backend() { return *backend_; }
  int concurrency() const { return concurrency_; }
  bool has_cache() const { return cache_ != nullptr; }

  /// Single cached call. Repeated identical requests return
  /// from_cache=true with byte-identical text.
  ModelResponse query(const ChatRequest& request) {
    request.validate();
    if (cache_) {
      std::string canonical =
          QueryCache::canonical_key(backend_->id(), backend_->model(), request);
      if (auto hit = cache_->find(canonical)) {
        stats_.total_requests.fetch_add(1);
        stats_.cache_hits.fetch_add(1);
        return *hit;
      }
    }
    ModelResponse response = call_with_retry(request);
    stats_.total_requests.fetch_add(1);
    stats_.backend_calls.fetch_add(1);
    stats_.prompt_tokens.fetch_add(response.prompt_tokens);
    stats_.completion_tokens.fetch_add(response.completion_tokens);
    if (cache_)
      cache_->insert(backend_->id(), backend_->model(), request, response);
    return response;
  }

  /// Evaluates a batch with at most `concurrency` requests in flight.
  /// Results come back in request order; per-request failures are
  /// reported positionally without aborting the rest. When a cache is
  /// attached, duplicate requests within the batch share one backend
  /// call.
  std::vector<BatchResult> batch_query(
      const std::vector<ChatRequest>& requests) {
    std::vector<BatchResult> results(requests.size());
    if (requests.empty()) return results;

    // Unique tasks in first-occurrence order; duplicates are filled in
    // from the first occurrence afterwards. Without a cache every
    // request is its own task.
    std::vector<std::size_t> task_of(requests.size());
    std::vector<std::size_t> tasks;
    if (cache_) {
      std::unordered_map<std::string, std::size_t> first_seen;
      for (std::size_t i = 0; i < requests.size(); ++i) {
        std::string key = QueryCache::canonical_key(
            backend_->id(), backend_->model(), requests[i]);
        auto [it, inserted] = first_seen.emplace(key, i);
        if (inserted) tasks.push_back(i);
        task_of[i] = it->second;
      }
    } else {
      tasks.resize(requests.size());
      for (std::size_t i = 0; i < requests.size(); ++i) {
        tasks[i] = i;
        task_of[i] = i;
      }
    }

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (;;) {
        std::size_t t = next.fetch_add(1);
        if (t >= tasks.size()) return;
        std::size_t i = tasks[t];
        try {
          results[i].response = query(requests[i]);
          results[i].ok = true;
        } catch (const std::exception& e) {
          results[i].ok = false;
          results[i].error = e.what();
        }
      }
    };

    auto n_threads = std::min<std::size_t>(
        tasks.size(), static_cast<std::size_t>(concurrency_));
    if (n_threads <= 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      pool.reserve(n_threads);
      for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(worker);
      for (auto& th : pool) th.join();
    }

    for (std::size_t i = 0; i < requests.size(); ++i) {
      std::size_t src = task_of[i];
      if (src == i) continue;
      results[i] = results[src];
      if (results[i].ok) {
        results[i].response.from_cache = true;
        results[i].response.latency_ms = 0;
        stats_.total_requests.fetch_add(1);
        stats_.cache_hits.fetch_add(1);
      }
    }
    return results;
  }

 private:
  ModelResponse call_with_retry(const ChatRequest& request) {
    int attempt = 0;
    for (;;) {
      ++attempt;
      auto start = std::chrono::steady_clock::now();
      try {
        ModelResponse r = backend_->complete(request);
        r.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                           std::chrono::steady_clock::now() - start)
                           .count();
        r.from_cache = false;
        return r;
      } catch (const OracleError& e) {
        if (!e.retryable()) throw OracleError(e.kind(), e.what(), attempt);
        if (attempt >= retry_.max_attempts)
          throw OracleError(e.kind(),
                            std::string(e.what()) + " (gave up after " +
                                std::to_string(attempt) + " attempts)",
                            attempt);
        std::this_thread::sleep_for(
            std::chrono::milliseconds(backoff_delay_ms(attempt)));
      }
    }
  }

  long backoff_delay_ms(int attempt) {
    long base = retry_.base_delay_ms;
    long delay = base << std::min(attempt - 1, 16);
    if (delay > retry_.max_delay_ms) delay = retry_.max_delay_ms;
    long jitter = 0;
    if (base > 0) {
      std::lock_guard<std::mutex> lock(jitter_mutex_);
      jitter = static_cast<long>(jitter_() % static_cast<std::uint64_t>(base));
    }
    return delay + jitter;
  }

  std::shared_ptr<ChatBackend> backend_;
  std::shared_ptr<QueryCache> cache_;
  RetryPolicy retry_;
  int concurrency_;
  OracleStats stats_;
  std::mutex jitter_mutex_;
  std::mt19937_64 jitter_;
};

}  // namespace promptforge

// Copyright 2026 The attsample Authors.
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

#pragma once

#include <condition_variable>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "attsample/flops_sampler.hpp"

namespace attsample {

/// Background producer of FLOPs-constrained architectures.
///
/// Keeps a bounded queue of ready samples per bin, filled by a worker
/// thread. Each bin draws from its own substream, so the sequence popped from
/// a bin is the same regardless of thread timing.
class ArchitecturePrefetcher {
 public:
  ArchitecturePrefetcher(const SearchSpace& space, const SamplerTables& tables, std::vector<int> bins,
                         std::uint64_t seed, std::size_t capacity = 16, long max_trials = kDefaultFactorizedTrials)
      : space_(space), tables_(tables), capacity_(capacity), max_trials_(max_trials) {
    if (capacity_ == 0) throw Error("prefetcher capacity must be positive");
    for (int b : bins) {
      tables_.conditional.at(b);  // throws for unpopulated bins
      lanes_.try_emplace(b, substream(seed, "prefetch", static_cast<std::uint64_t>(b)));
    }
    worker_ = std::jthread([this](std::stop_token st) { run(st); });
  }

  ArchitecturePrefetcher(const ArchitecturePrefetcher&) = delete;
  ArchitecturePrefetcher& operator=(const ArchitecturePrefetcher&) = delete;

  ~ArchitecturePrefetcher() {
    {
      std::lock_guard lock(mu_);
      worker_.request_stop();
    }
    cv_.notify_all();
  }

  /// Blocks until a sample for `bin` is ready. Rethrows a sampling failure
  /// recorded for that bin.
  SampleResult pop(int bin) {
    std::unique_lock lock(mu_);
    auto it = lanes_.find(bin);
    if (it == lanes_.end()) throw Error("prefetcher does not serve bin " + std::to_string(bin));
    Lane& lane = it->second;
    ready_.wait(lock, [&] { return !lane.queue.empty() || lane.failed; });
    if (lane.queue.empty()) throw SamplingError("prefetch failed for bin " + std::to_string(bin), max_trials_);
    SampleResult r = std::move(lane.queue.front());
    lane.queue.pop_front();
    cv_.notify_all();
    return r;
  }

 private:
  struct Lane {
    explicit Lane(Rng r) : rng(std::move(r)) {}
    Rng rng;
    std::deque<SampleResult> queue;
    bool failed = false;
  };

  void run(std::stop_token st) {
    while (!st.stop_requested()) {
      Lane* target = nullptr;
      int bin = 0;
      {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] {
          if (st.stop_requested()) return true;
          for (auto& [b, lane] : lanes_)
            if (!lane.failed && lane.queue.size() < capacity_) return true;
          return false;
        });
        if (st.stop_requested()) return;
        // Fill the emptiest lane first.
        for (auto& [b, lane] : lanes_)
          if (!lane.failed && lane.queue.size() < capacity_ && (!target || lane.queue.size() < target->queue.size())) {
            target = &lane;
            bin = b;
          }
      }
      // Only this thread touches lane.rng, so sampling runs unlocked.
      std::optional<SampleResult> r;
      try {
        r = rejection_sample(space_, tables_.conditional, bin, max_trials_, target->rng);
      } catch (const SamplingError&) {
      }
      {
        std::lock_guard lock(mu_);
        if (r)
          target->queue.push_back(std::move(*r));
        else
          target->failed = true;
      }
      ready_.notify_all();
    }
  }

  const SearchSpace& space_;
  const SamplerTables& tables_;
  std::size_t capacity_;
  long max_trials_;
  std::map<int, Lane> lanes_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::condition_variable ready_;
  std::jthread worker_;
};

}  // namespace attsample

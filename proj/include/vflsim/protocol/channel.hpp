/*
 * Copyright 2026 The vflsim Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <mutex>
#include <span>
#include <vector>

#include "vflsim/errors.hpp"

namespace vflsim {

// One-directional, blocking, in-memory queue of encoded messages.
class Channel {
 public:
  using Tap = std::function<void(std::span<const std::uint8_t>)>;

  // Observes every buffer on send, on the sender's thread.
  void set_tap(Tap tap) { tap_ = std::move(tap); }

  void send(std::vector<std::uint8_t> bytes) {
    if (tap_) tap_(bytes);
    {
      std::lock_guard<std::mutex> lock(mu_);
      if (closed_) throw ProtocolError("send on closed channel");
      queue_.push_back(std::move(bytes));
      ++sent_;
    }
    cv_.notify_one();
  }

  std::vector<std::uint8_t> receive() {
    std::unique_lock<std::mutex> lock(mu_);
    cv_.wait(lock, [&] { return !queue_.empty() || closed_; });
    if (queue_.empty()) throw ProtocolError("receive on closed channel");
    auto bytes = std::move(queue_.front());
    queue_.pop_front();
    return bytes;
  }

  void close() {
    {
      std::lock_guard<std::mutex> lock(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }

  std::uint64_t sent() const {
    std::lock_guard<std::mutex> lock(mu_);
    return sent_;
  }
  std::size_t pending() const {
    std::lock_guard<std::mutex> lock(mu_);
    return queue_.size();
  }

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::vector<std::uint8_t>> queue_;
  bool closed_ = false;
  std::uint64_t sent_ = 0;
  Tap tap_;
};

}  // namespace vflsim

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

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "vflsim/errors.hpp"
#include "vflsim/util/sha256.hpp"

namespace vflsim {

inline constexpr std::string_view kDefaultPsiSalt = "vflsim-psi-v1";

// First 8 bytes (little-endian) of SHA-256(salt || id).
inline std::uint64_t salted_hash(std::string_view id, std::string_view salt) {
  const Sha256Digest digest = sha256({salt, id});
  std::uint64_t h = 0;
  std::memcpy(&h, digest.data(), sizeof(h));
  return h;
}

// What one party discloses to the matcher: salted hashes only.
inline std::vector<std::uint64_t> psi_disclose(std::span<const std::string> ids,
                                               std::string_view salt) {
  std::vector<std::uint64_t> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(salted_hash(id, salt));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

// Simulated private set intersection. The matcher intersects the two hash
// sets; the label party maps matching hashes back to its own ids. Output is
// ordered by hash, then id.
inline std::vector<std::string> psi_intersect(std::span<const std::string> ids_nonlabel,
                                              std::span<const std::string> ids_label,
                                              std::string_view salt = kDefaultPsiSalt) {
  const auto hashes_n = psi_disclose(ids_nonlabel, salt);
  const auto hashes_l = psi_disclose(ids_label, salt);
  std::vector<std::uint64_t> common;
  std::set_intersection(hashes_n.begin(), hashes_n.end(), hashes_l.begin(), hashes_l.end(),
                        std::back_inserter(common));

  std::vector<std::pair<std::uint64_t, std::string>> matched;
  for (const auto& id : ids_label) {
    const auto h = salted_hash(id, salt);
    if (std::binary_search(common.begin(), common.end(), h)) matched.emplace_back(h, id);
  }
  std::sort(matched.begin(), matched.end());
  matched.erase(std::unique(matched.begin(), matched.end()), matched.end());
  std::vector<std::string> out;
  out.reserve(matched.size());
  for (auto& [h, id] : matched) out.push_back(std::move(id));
  return out;
}

}  // namespace vflsim

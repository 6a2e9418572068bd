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

#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"
#include "vflsim/protocol/session.hpp"
#include "vflsim/util/sha256.hpp"

namespace vflsim {

inline constexpr const char* kVflModelKind = "vflsim.vfl_model";

inline TensorArchive export_vfl_model(const VflModel& m) {
  TensorArchive a;
  a.kind = kVflModelKind;
  m.nonlabel.export_to(a);
  m.label.export_to(a);
  return a;
}

// `into` supplies the architecture; weights and running stats are replaced.
inline void import_vfl_model(const TensorArchive& a, VflModel& into) {
  if (a.kind != kVflModelKind) throw DecodeError("archive is not a vFL model: " + a.kind);
  into.nonlabel.import_from(a);
  into.label.import_from(a);
}

// Seeds, configs and SHA-256 of every written file.
class RunManifest {
 public:
  void set(const std::string& key, nlohmann::json value) { doc_[key] = std::move(value); }

  void add_file(const std::string& name, const std::filesystem::path& path) {
    doc_["files"][name] = {{"path", path.filename().string()}, {"sha256", sha256_file_hex(path.string())}};
  }

  const nlohmann::json& json() const { return doc_; }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << doc_.dump(2) << '\n';
  }

 private:
  nlohmann::json doc_ = nlohmann::json::object();
};

}  // namespace vflsim

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

#include <cctype>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "vflsim/errors.hpp"

namespace vflsim {

// Flat key=value configuration. Every key has a default; unknown keys are
// rejected. Environment variables VFLSIM_<KEY> override file values, with
// the key upper-cased and '.' written as "__" (train.lr -> VFLSIM_TRAIN__LR).
class ExperimentConfig {
 public:
  static const std::map<std::string, std::string>& defaults() {
    static const std::map<std::string, std::string> d{
        {"experiment.id", "run"},
        {"experiment.pipeline", "vanilla"},
        {"seed", "1"},
        {"data.source", "generate"},
        {"data.path", ""},
        {"data.n_samples", "100000"},
        {"data.n_users", "5000"},
        {"data.n_ads", "1000"},
        {"data.positive_rate", "0.05"},
        {"data.nonlabel_signal_strength", "1.0"},
        {"data.test_days", "7"},
        {"data.aligned_fraction", "0.2"},
        {"train.batch_size", "256"},
        {"train.epochs", "3"},
        {"train.lr", "0.001"},
        {"train.transport", "sequential"},
        {"final.epochs", "1"},
        {"final.fresh_init", "false"},
        {"diffusion.T", "1000"},
        {"diffusion.beta_start", "0.0001"},
        {"diffusion.beta_end", "0.02"},
        {"diffusion.time_dim", "32"},
        {"diffusion.hidden", "256,256"},
        {"diffusion.steps", "2000"},
        {"diffusion.batch_size", "256"},
        {"diffusion.lr", "0.001"},
        {"defense.kind", "none"},
        {"defense.alpha", "0.6"},
        {"defense.phi_goal", "0.8660254037844386"},
        {"defense.clip_norm", "1.0"},
        {"defense.noise_sigma", "0.0"},
        {"attack.norm", "true"},
        {"attack.cluster", "true"},
        {"report.base", ""},
        {"output.metrics_log", "true"},
        {"output.defense_dump", "false"},
        {"output.checkpoints", "true"},
    };
    return d;
  }

  ExperimentConfig() : values_(defaults()) {}

  // Parses key=value lines; '#' starts a comment. All unknown keys are
  // reported together.
  static ExperimentConfig parse(std::istream& in) {
    ExperimentConfig c;
    std::string line;
    std::size_t lineno = 0;
    std::vector<std::string> unknown;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const std::string t = trim(line);
      if (t.empty()) continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos) {
        throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
      }
      const std::string key = trim(t.substr(0, eq));
      if (!defaults().count(key)) {
        unknown.push_back(key);
        continue;
      }
      c.values_[key] = trim(t.substr(eq + 1));
    }
    if (!unknown.empty()) {
      std::string msg = "unknown config keys:";
      for (const auto& k : unknown) msg += " " + k;
      throw ConfigError(msg);
    }
    return c;
  }

  static ExperimentConfig parse_string(const std::string& text) {
    std::istringstream in(text);
    return parse(in);
  }

  static ExperimentConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    return parse(in);
  }

  static std::string env_name(const std::string& key) {
    std::string out = "VFLSIM_";
    for (std::size_t i = 0; i < key.size(); ++i) {
      if (key[i] == '.') {
        out += "__";
      } else {
        out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(key[i]))));
      }
    }
    return out;
  }

  void apply_env() {
    for (auto& [k, v] : values_) {
      if (const char* e = std::getenv(env_name(k).c_str())) v = e;
    }
  }

  void set(const std::string& key, const std::string& value) {
    if (!defaults().count(key)) throw ConfigError("unknown config keys: " + key);
    values_[key] = value;
  }

  const std::string& str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config keys: " + key);
    return it->second;
  }

  std::uint64_t u64(const std::string& key) const {
    const std::string& s = str(key);
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) bad(key, "a non-negative integer");
    return v;
  }
  std::size_t count(const std::string& key) const { return static_cast<std::size_t>(u64(key)); }

  double real(const std::string& key) const {
    const std::string& s = str(key);
    try {
      std::size_t used = 0;
      const double v = std::stod(s, &used);
      if (used != s.size()) bad(key, "a number");
      return v;
    } catch (const std::logic_error&) {
      bad(key, "a number");
    }
  }

  bool flag(const std::string& key) const {
    const std::string& s = str(key);
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    bad(key, "true or false");
  }

  std::vector<std::size_t> counts(const std::string& key) const {
    std::vector<std::size_t> out;
    std::stringstream ss(str(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      std::size_t v = 0;
      auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
      if (ec != std::errc() || p != item.data() + item.size() || v == 0) bad(key, "a comma-separated list of positive integers");
      out.push_back(v);
    }
    if (out.empty()) bad(key, "a non-empty list");
    return out;
  }

  const std::map<std::string, std::string>& values() const { return values_; }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : values_) j[k] = v;
    return j;
  }

 private:
  [[noreturn]] static void bad(const std::string& key, const std::string& want) {
    throw ConfigError("config key " + key + " must be " + want);
  }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> values_;
};

}  // namespace vflsim

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

// Command-line front end. Exit codes: 0 ok, 2 configuration error,
// 3 runtime error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "vflsim/evalcli/experiment.hpp"

namespace fs = std::filesystem;
using namespace vflsim;

namespace {

constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

struct GlobalOptions {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
};

// File, then environment, then --set, then --seed.
ExperimentConfig resolve_config(const GlobalOptions& g) {
  ExperimentConfig c = g.config_path.empty() ? ExperimentConfig() : ExperimentConfig::load(g.config_path);
  c.apply_env();
  for (const auto& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    c.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (g.seed) c.set("seed", std::to_string(*g.seed));
  return c;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

ExperimentData load_data(const ExperimentConfig& c) {
  return make_experiment_data(split_dataset(load_dataset(c), c));
}

int cmd_gen_data(const ExperimentConfig& c, const fs::path& out) {
  const Dataset d = generate(generator_config(c));
  write_tsv(d, (out / "dataset.tsv").string());
  std::cout << (out / "dataset.tsv").string() << '\n';
  return 0;
}

int cmd_align(const ExperimentConfig& c, const fs::path& out) {
  const SplitData s = split_dataset(load_dataset(c), c);
  write_tsv(s.aligned, (out / "aligned.tsv").string());
  write_tsv(s.unaligned, (out / "unaligned.tsv").string());
  write_tsv(s.test, (out / "test.tsv").string());
  const ExperimentData d = make_experiment_data(s);
  std::ofstream ids(out / "aligned_ids.txt");
  for (const auto& id : d.label.ids) ids << id << '\n';
  nlohmann::json j{{"aligned", d.label.size()}, {"unaligned", d.unaligned.size()}, {"test", d.test_label.size()}};
  std::cout << j.dump() << '\n';
  return 0;
}

int cmd_train(const ExperimentConfig& c, const fs::path& out) {
  const ExperimentData d = load_data(c);
  const OutputFiles files{out, c.str("experiment.id")};
  const TrainedExperiment t = train_experiment(c, d, &files);
  save_trained(t, c, files);
  std::cout << files.file(".manifest.json").string() << '\n';
  return 0;
}

int cmd_attack(const ExperimentConfig& c, const fs::path& out) {
  const ExperimentData d = load_data(c);
  const OutputFiles files{out, c.str("experiment.id")};
  const TrainedExperiment t = load_trained(c, d, files);
  nlohmann::json j = nlohmann::json::array();
  for (const auto& a : run_attacks(t, d, c)) j.push_back(a.to_json());
  write_json(files.file(".attacks.json"), j);
  std::cout << j.dump() << '\n';
  return 0;
}

int cmd_eval(const ExperimentConfig& c, const fs::path& out) {
  const ExperimentData d = load_data(c);
  const OutputFiles files{out, c.str("experiment.id")};
  const TrainedExperiment t = load_trained(c, d, files);
  const auto probs = predict_test(t, d);
  nlohmann::json j{{"auc", auc(probs, d.test_label.labels)}, {"nll", nll(probs, d.test_label.labels)}};
  write_json(files.file(".eval.json"), j);
  std::cout << j.dump() << '\n';
  return 0;
}

int cmd_report(const ExperimentConfig& c, const fs::path& out) {
  const ExperimentReport r = run_experiment(c, out);
  std::cout << r.to_json().dump() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vflsim: two-party vertical federated learning simulator"};
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config_path, "key=value configuration file");
  app.add_option("--out-dir", g.out_dir, "output directory")->capture_default_str();
  app.add_option("--seed", g.seed, "overrides the seed key");
  app.add_option("--set", g.overrides, "key=value override, repeatable");

  struct Sub {
    const char* name;
    const char* help;
    int (*run)(const ExperimentConfig&, const fs::path&);
  };
  const Sub subs[] = {
      {"gen-data", "generate the synthetic dataset as TSV", cmd_gen_data},
      {"align", "split by time, partition aligned samples and run PSI", cmd_align},
      {"train", "train the configured pipeline and write checkpoints", cmd_train},
      {"attack", "run label-inference attacks on a trained run", cmd_attack},
      {"eval", "evaluate a trained run on the test set", cmd_eval},
      {"report", "run the whole experiment and write its report", cmd_report},
  };
  for (const auto& s : subs) app.add_subcommand(s.name, s.help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    const ExperimentConfig c = resolve_config(g);
    const fs::path out(g.out_dir);
    fs::create_directories(out);
    for (const auto& s : subs)
      if (app.got_subcommand(s.name)) return s.run(c, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kRuntimeError;
}

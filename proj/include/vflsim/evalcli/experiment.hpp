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

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vflsim/attack/attacks.hpp"
#include "vflsim/data/generator.hpp"
#include "vflsim/data/psi.hpp"
#include "vflsim/data/split.hpp"
#include "vflsim/evalcli/config.hpp"
#include "vflsim/evalcli/metrics.hpp"
#include "vflsim/trainer/checkpoint.hpp"
#include "vflsim/trainer/diffu_at.hpp"

namespace vflsim {

enum class Pipeline { local, vanilla, heuristic, diffu_at };

inline Pipeline parse_pipeline(const std::string& s) {
  if (s == "local") return Pipeline::local;
  if (s == "vanilla") return Pipeline::vanilla;
  if (s == "heuristic") return Pipeline::heuristic;
  if (s == "diffu-at") return Pipeline::diffu_at;
  throw ConfigError("experiment.pipeline must be one of local, vanilla, heuristic, diffu-at (got '" + s + "')");
}

inline GeneratorConfig generator_config(const ExperimentConfig& c) {
  GeneratorConfig g;
  g.n_samples = c.count("data.n_samples");
  g.n_users = c.count("data.n_users");
  g.n_ads = c.count("data.n_ads");
  g.positive_rate = c.real("data.positive_rate");
  g.nonlabel_signal_strength = c.real("data.nonlabel_signal_strength");
  g.seed = c.u64("seed");
  return g;
}

// The full fully-featured dataset: generated, or read from data.path.
inline Dataset load_dataset(const ExperimentConfig& c) {
  const std::string& src = c.str("data.source");
  if (src == "generate") return generate(generator_config(c));
  if (src == "tsv") {
    if (c.str("data.path").empty()) throw ConfigError("data.source=tsv needs data.path");
    return read_tsv(c.str("data.path"), DatasetRole::aligned);
  }
  throw ConfigError("data.source must be generate or tsv");
}

struct SplitData {
  Dataset aligned;
  Dataset unaligned;
  Dataset test;
};

// Last data.test_days days are the test set; the rest is partitioned into
// aligned and label-party-only samples.
inline SplitData split_dataset(const Dataset& full, const ExperimentConfig& c) {
  if (full.size() == 0) throw ValidationError("dataset is empty");
  std::int64_t max_ts = full.records.front().click_ts;
  for (const auto& r : full.records) max_ts = std::max(max_ts, r.click_ts);
  const std::int64_t cutoff = max_ts - static_cast<std::int64_t>(c.count("data.test_days")) * 86400;
  auto [train, test] = split_by_timestamp(full, cutoff);
  auto part = partition_aligned(train, c.real("data.aligned_fraction"), c.u64("seed"));
  return SplitData{std::move(part.aligned), std::move(part.unaligned), std::move(test)};
}

struct ExperimentData {
  NonLabelView nonlabel;  // aligned, in PSI order
  LabelView label;        // aligned, same order
  LabelView unaligned;
  NonLabelView test_nonlabel;
  LabelView test_label;
};

// Each party brings its own ids; the aligned order is the PSI output.
inline ExperimentData make_experiment_data(const SplitData& s) {
  std::vector<std::string> label_ids = sample_ids(s.aligned);
  const auto unaligned_ids = sample_ids(s.unaligned);
  label_ids.insert(label_ids.end(), unaligned_ids.begin(), unaligned_ids.end());
  const auto aligned = psi_intersect(sample_ids(s.aligned), label_ids);
  const auto test_ids = sample_ids(s.test);
  const auto test_order = psi_intersect(test_ids, test_ids);
  return ExperimentData{make_nonlabel_view(s.aligned, aligned), make_label_view(s.aligned, aligned),
                        make_label_view(s.unaligned), make_nonlabel_view(s.test, test_order),
                        make_label_view(s.test, test_order)};
}

inline TrainConfig train_config(const ExperimentConfig& c) {
  TrainConfig t;
  t.batch_size = c.count("train.batch_size");
  t.epochs = c.count("train.epochs");
  t.adam.lr = c.real("train.lr");
  t.seed = c.u64("seed");
  const std::string& tr = c.str("train.transport");
  if (tr == "sequential") {
    t.transport = Transport::sequential;
  } else if (tr == "threaded") {
    t.transport = Transport::threaded;
  } else {
    throw ConfigError("train.transport must be sequential or threaded");
  }
  t.defense.kind = parse_defense_kind(c.str("defense.kind"));
  t.defense.mixpro = MixProConfig{c.real("defense.alpha"), c.real("defense.phi_goal"), c.u64("seed")};
  t.defense.dp = DpConfig{c.real("defense.clip_norm"), c.real("defense.noise_sigma"), c.u64("seed")};
  try {
    t.validate();
    if (t.defense.kind == DefenseKind::mixpro) t.defense.mixpro.validate();
    if (t.defense.kind == DefenseKind::dp) t.defense.dp.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  return t;
}

inline DiffuAtConfig diffu_at_config(const ExperimentConfig& c) {
  DiffuAtConfig d;
  d.pretrain = train_config(c);
  d.final = d.pretrain;
  d.final.epochs = c.count("final.epochs");
  d.fresh_init = c.flag("final.fresh_init");
  d.diffusion.T = c.count("diffusion.T");
  d.diffusion.beta_start = c.real("diffusion.beta_start");
  d.diffusion.beta_end = c.real("diffusion.beta_end");
  d.diffusion.time_dim = c.count("diffusion.time_dim");
  d.diffusion.hidden = c.counts("diffusion.hidden");
  d.diffusion.steps = c.count("diffusion.steps");
  d.diffusion.batch_size = c.count("diffusion.batch_size");
  d.diffusion.adam.lr = c.real("diffusion.lr");
  d.diffusion.seed = c.u64("seed");
  d.sample_seed = c.u64("seed") ^ 0x5a5a5a5aULL;
  try {
    d.diffusion.validate();
    (void)NoiseSchedule::linear(d.diffusion.T, d.diffusion.beta_start, d.diffusion.beta_end);
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  return d;
}

inline constexpr const char* kLocalModelKind = "vflsim.local_model";

struct TrainedExperiment {
  Pipeline pipeline = Pipeline::vanilla;
  std::optional<VflModel> vfl;
  std::optional<LabelParty> local;
  std::optional<DiffusionModel> diffusion;
  AttackTrace trace;
  nlohmann::json details = nlohmann::json::object();
};

struct OutputFiles {
  std::filesystem::path dir;
  std::string id;
  std::filesystem::path file(const std::string& suffix) const { return dir / (id + suffix); }
};

inline TrainedExperiment train_experiment(const ExperimentConfig& c, const ExperimentData& data,
                                          const OutputFiles* out = nullptr) {
  TrainedExperiment t;
  t.pipeline = parse_pipeline(c.str("experiment.pipeline"));
  TrainConfig tc = train_config(c);
  std::ofstream metrics, dump;
  if (out != nullptr && c.flag("output.metrics_log")) {
    metrics.open(out->file(".metrics.jsonl"));
    tc.metrics_log = &metrics;
  }
  if (out != nullptr && c.flag("output.defense_dump")) {
    dump.open(out->file(".defense.jsonl"));
    tc.defense_dump = &dump;
  }
  auto observe = [&t](const ProtocolMessage& m) { t.trace.observe(m); };
  t.details["aligned"] = data.label.size();
  t.details["unaligned"] = data.unaligned.size();
  t.details["test"] = data.test_label.size();

  switch (t.pipeline) {
    case Pipeline::local: {
      TrainedLocal r = train_local(data.label, tc);
      t.details["steps"] = r.log.losses.size();
      t.local = std::move(r.label);
      break;
    }
    case Pipeline::vanilla: {
      TrainedVfl r = train_vanilla(data.nonlabel, data.label, tc, observe);
      t.details["steps"] = r.log.losses.size();
      t.vfl = std::move(r.model);
      break;
    }
    case Pipeline::heuristic:
    case Pipeline::diffu_at: {
      DiffuAtConfig dc = diffu_at_config(c);
      dc.pretrain = tc;
      dc.final.metrics_log = tc.metrics_log;
      dc.final.defense_dump = tc.defense_dump;
      dc.synthesizer = t.pipeline == Pipeline::heuristic ? Synthesizer::heuristic : Synthesizer::diffusion;
      TrainedVfl pre = train_vanilla(data.nonlabel, data.label, dc.pretrain, observe);
      DiffuAtResult r = diffu_at(pre.model, data.nonlabel, data.label, data.unaligned, dc, observe);
      t.details["pretrain_steps"] = pre.log.losses.size();
      t.details["iterations"] = r.alternative.iterations;
      t.details["aligned_iterations"] = r.alternative.aligned_iterations;
      t.details["p"] = r.alternative.p;
      t.details["synthesized"] = r.augmented.size();
      t.details["dropped"] = r.augmented.dropped;
      if (out != nullptr && c.flag("output.checkpoints") && r.augmented.size() > 0) {
        std::ofstream tsv(out->file(".synthesized.tsv"));
        write_embedding_tsv(tsv, r.augmented.samples.ids, r.augmented.h_nonlabel);
      }
      t.diffusion = std::move(r.diffusion);
      t.vfl = std::move(r.model);
      break;
    }
  }
  return t;
}

// Positive-class probabilities on the test set.
inline std::vector<double> predict_test(const TrainedExperiment& t, const ExperimentData& data) {
  if (t.local) return predict_local(*t.local, data.test_label);
  return predict(t.vfl->nonlabel, t.vfl->label, data.test_nonlabel, data.test_label);
}

// Norm attack over the observed trace and cluster attack over the
// non-label party's post-training embeddings of the aligned set.
inline std::vector<AttackReport> run_attacks(const TrainedExperiment& t, const ExperimentData& data,
                                             const ExperimentConfig& c) {
  std::vector<AttackReport> out;
  if (!t.vfl) return out;
  std::unordered_map<std::string, int> label_of;
  for (std::size_t i = 0; i < data.label.size(); ++i) label_of.emplace(data.label.ids[i], data.label.labels[i]);
  if (c.flag("attack.norm") && t.trace.size() > 0) {
    const AttackScores s = norm_attack(t.trace);
    std::vector<int> y;
    for (const auto& id : s.ids) y.push_back(label_of.at(id));
    out.push_back({"norm", leak_auc(s.scores, y), s.scores.size(), {{"excluded", s.excluded}}});
  }
  if (c.flag("attack.cluster")) {
    Tensor h(t.vfl->nonlabel.cut_dim(), data.nonlabel.size());
    for (std::size_t start = 0; start < data.nonlabel.size(); start += kRepresentChunk) {
      std::vector<std::size_t> rows(std::min(kRepresentChunk, data.nonlabel.size() - start));
      std::iota(rows.begin(), rows.end(), start);
      const Tensor part = t.vfl->nonlabel.infer(data.nonlabel.batch(rows));
      for (std::size_t k = 0; k < part.rows(); ++k)
        for (std::size_t j = 0; j < rows.size(); ++j) h(k, start + j) = part(k, j);
    }
    const ClusterAttackResult r = cluster_attack(transpose(h));
    const std::vector<double> binary(r.in_smaller.begin(), r.in_smaller.end());
    out.push_back({"cluster", leak_auc(r.scores, data.label.labels), data.label.size(),
                   {{"iterations", r.iterations},
                    {"smaller_cluster", r.smaller_size},
                    {"degenerate", r.degenerate},
                    {"binary_leak_auc", leak_auc(binary, data.label.labels)}}});
  }
  return out;
}

// Writes the trained model(s), the attack trace and a manifest.
inline void save_trained(const TrainedExperiment& t, const ExperimentConfig& c, const OutputFiles& files) {
  RunManifest m;
  m.set("experiment_id", files.id);
  m.set("seeds", {{"seed", c.u64("seed")}, {"sample_seed", diffu_at_config(c).sample_seed}});
  m.set("config", c.to_json());
  TensorArchive model;
  if (t.vfl) {
    model = export_vfl_model(*t.vfl);
  } else {
    model.kind = kLocalModelKind;
    t.local->export_to(model);
  }
  model.save(files.file(".model.bin").string());
  m.add_file("model", files.file(".model.bin"));
  if (t.trace.size() > 0) {
    export_trace(t.trace).save(files.file(".trace.bin").string());
    m.add_file("trace", files.file(".trace.bin"));
  }
  if (t.diffusion) {
    export_diffusion(*t.diffusion).save(files.file(".denoiser.bin").string());
    m.add_file("denoiser", files.file(".denoiser.bin"));
  }
  if (std::filesystem::exists(files.file(".synthesized.tsv"))) {
    m.add_file("synthesized", files.file(".synthesized.tsv"));
  }
  m.save(files.file(".manifest.json"));
}

// Rebuilds a trained experiment from the files written by save_trained.
inline TrainedExperiment load_trained(const ExperimentConfig& c, const ExperimentData& data,
                                      const OutputFiles& files) {
  TrainedExperiment t;
  t.pipeline = parse_pipeline(c.str("experiment.pipeline"));
  const TrainConfig tc = train_config(c);
  const TensorArchive model = TensorArchive::load(files.file(".model.bin").string());
  if (t.pipeline == Pipeline::local) {
    if (model.kind != kLocalModelKind) throw DecodeError("expected a local model checkpoint");
    LabelParty label(data.label.vocab, tc.arch, tc.adam, tc.seed);
    label.import_from(model);
    t.local = std::move(label);
  } else {
    VflModel m = make_vfl_model(data.nonlabel, data.label, tc);
    import_vfl_model(model, m);
    t.vfl = std::move(m);
    if (std::filesystem::exists(files.file(".trace.bin"))) {
      t.trace = import_trace(TensorArchive::load(files.file(".trace.bin").string()));
    }
  }
  return t;
}

struct ExperimentReport {
  std::string experiment_id;
  std::uint64_t seed = 0;
  nlohmann::json config = nlohmann::json::object();
  double auc = 0.0;
  double nll = 0.0;
  std::map<std::string, double> leak_auc;
  std::optional<std::map<std::string, double>> delta_leak_auc;
  nlohmann::json attacks = nlohmann::json::array();
  nlohmann::json details = nlohmann::json::object();
  double runtime_s = 0.0;

  nlohmann::json to_json() const {
    nlohmann::json privacy{{"leak_auc", leak_auc}};
    if (delta_leak_auc) privacy["delta_leak_auc"] = *delta_leak_auc;
    return {{"experiment_id", experiment_id}, {"seed", seed},       {"config", config},
            {"utility", {{"auc", auc}, {"nll", nll}}},              {"privacy", privacy},
            {"attacks", attacks},           {"details", details}, {"runtime_s", runtime_s}};
  }
};

// The report of the base run named by report.base: a path, or an
// experiment id under the output directory.
inline std::optional<nlohmann::json> load_base_report(const ExperimentConfig& c, const std::filesystem::path& dir) {
  const std::string& base = c.str("report.base");
  if (base.empty()) return std::nullopt;
  std::filesystem::path p(base);
  if (!std::filesystem::exists(p)) p = dir / (base + ".json");
  std::ifstream in(p);
  if (!in) throw ConfigError("report.base: cannot read " + p.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("report.base: " + p.string() + " is not valid JSON");
  }
}

inline void apply_base(ExperimentReport& r, const nlohmann::json& base) {
  std::map<std::string, double> delta;
  const auto& leak = base.at("privacy").at("leak_auc");
  for (const auto& [attack, v] : r.leak_auc) {
    if (leak.contains(attack)) delta[attack] = delta_leak_auc(v, leak.at(attack).get<double>());
  }
  r.delta_leak_auc = std::move(delta);
}

// Runs the configured pipeline end to end; writes <id>.json, appends to
// runs.jsonl, and writes checkpoints and a manifest when enabled.
inline ExperimentReport run_experiment(const ExperimentConfig& c, const std::filesystem::path& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  std::filesystem::create_directories(out_dir);
  const OutputFiles files{out_dir, c.str("experiment.id")};
  // Validate everything before any work.
  const Pipeline pipeline = parse_pipeline(c.str("experiment.pipeline"));
  (void)train_config(c);
  if (pipeline == Pipeline::heuristic || pipeline == Pipeline::diffu_at) (void)diffu_at_config(c);
  const auto base = load_base_report(c, out_dir);

  const ExperimentData data = make_experiment_data(split_dataset(load_dataset(c), c));
  const TrainedExperiment t = train_experiment(c, data, &files);
  const auto probs = predict_test(t, data);

  ExperimentReport r;
  r.experiment_id = files.id;
  r.seed = c.u64("seed");
  r.config = c.to_json();
  r.auc = auc(probs, data.test_label.labels);
  r.nll = nll(probs, data.test_label.labels);
  for (const AttackReport& a : run_attacks(t, data, c)) {
    r.leak_auc[a.attack] = a.leak_auc;
    r.attacks.push_back(a.to_json());
  }
  if (base) apply_base(r, *base);
  r.details = t.details;

  if (c.flag("output.checkpoints")) save_trained(t, c, files);

  r.runtime_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const nlohmann::json j = r.to_json();
  {
    std::ofstream pretty(files.file(".json"));
    if (!pretty) throw Error("cannot write report to " + out_dir.string());
    pretty << j.dump(2) << '\n';
  }
  std::ofstream ledger(out_dir / "runs.jsonl", std::ios::app);
  ledger << j.dump() << '\n';
  return r;
}

}  // namespace vflsim

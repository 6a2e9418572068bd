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
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "support/fixtures.hpp"
#include "support/oracles.hpp"
#include "vflsim/attack/attacks.hpp"
#include "vflsim/protocol/session.hpp"

using namespace vflsim;

namespace {

ProtocolMessage gradient_message(std::vector<std::string> ids, std::vector<std::vector<float>> rows,
                                 std::uint64_t seq = 0) {
  ProtocolMessage m{MessageKind::cut_gradient_batch, seq, std::move(ids),
                    static_cast<std::uint32_t>(rows.front().size()), {}};
  for (const auto& r : rows) m.payload.insert(m.payload.end(), r.begin(), r.end());
  return m;
}

// n rows: the first n_minor around +shift, the rest around -shift.
Tensor two_blobs(std::size_t n, std::size_t n_minor, double shift, Rng& rng) {
  Tensor x = oracle::random_tensor(n, 4, rng, 0.3);
  for (std::size_t i = 0; i < n; ++i) x(i, 0) += i < n_minor ? shift : -shift;
  return x;
}

}  // namespace

TEST(LeakAuc, PerfectInvertedAndUninformative) {
  const std::vector<int> y{0, 0, 1, 1};
  EXPECT_EQ(leak_auc(std::vector<double>{1, 2, 3, 4}, y), 1.0);
  EXPECT_EQ(leak_auc(std::vector<double>{4, 3, 2, 1}, y), 0.0);
  EXPECT_EQ(leak_auc(std::vector<double>{7, 7, 7, 7}, y), 0.5);
}

TEST(LeakAuc, SingleClassOrBadLabelsAreRejected) {
  EXPECT_THROW(leak_auc(std::vector<double>{1, 2}, std::vector<int>{1, 1}), ValidationError);
  EXPECT_THROW(leak_auc(std::vector<double>{1, 2}, std::vector<int>{0, 2}), ValidationError);
  EXPECT_THROW(leak_auc(std::vector<double>{1}, std::vector<int>{0, 1}), ValidationError);
}

TEST(LeakAuc, MatchesPairwiseOracleWithTies) {
  Rng rng = make_rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 199;
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng() % 20);  // plenty of ties
      y[i] = static_cast<int>(rng() % 2);
    }
    y[0] = 0;
    y[1] = 1;
    EXPECT_NEAR(leak_auc(s, y), oracle::pairwise_auc(s, y), 1e-12);
  }
}

TEST(LeakAuc, InvariantUnderMonotoneTransforms) {
  Rng rng = make_rng(2);
  std::vector<double> s(200);
  std::vector<int> y(200);
  for (std::size_t i = 0; i < 200; ++i) {
    s[i] = standard_normal(rng);
    y[i] = i % 3 == 0;
  }
  const double base = leak_auc(s, y);
  std::vector<double> t1, t2;
  for (double v : s) {
    t1.push_back(std::exp(3.0 * v));
    t2.push_back(std::atan(v) * 5.0 - 2.0);
  }
  EXPECT_EQ(leak_auc(t1, y), base);
  EXPECT_EQ(leak_auc(t2, y), base);
}

TEST(NormAttack, SeparatedAndEqualNorms) {
  AttackTrace t;
  t.observe(gradient_message({"p1", "n1", "n2", "p2"}, {{6, 8}, {0, 1}, {1, 0}, {0, 10}}));
  const auto s = norm_attack(t);
  ASSERT_EQ(s.scores.size(), 4u);
  EXPECT_NEAR(s.scores[0], 10.0, 1e-12);
  EXPECT_EQ(leak_auc(s.scores, std::vector<int>{1, 0, 0, 1}), 1.0);

  AttackTrace flat;
  flat.observe(gradient_message({"a", "b", "c"}, {{1, 0}, {0, 1}, {0, -1}}));
  EXPECT_EQ(leak_auc(norm_attack(flat).scores, std::vector<int>{1, 0, 1}), 0.5);
}

TEST(NormAttack, UsesLastGradientAndCountsMissing) {
  AttackTrace t;
  t.observe(gradient_message({"a", "b"}, {{1, 0}, {2, 0}}));
  t.observe(gradient_message({"a"}, {{0, 5}}, 1));
  ProtocolMessage e{MessageKind::federated_embedding_batch, 0, {"c"}, 2, {1, 1}};
  t.observe(e);
  const auto s = norm_attack(t);
  EXPECT_EQ(s.excluded, 1u);
  EXPECT_EQ(s.ids, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(s.scores[0], 5.0);
  EXPECT_THROW(norm_attack(AttackTrace{}), ValidationError);
}

// The trace is filled from the serialized bytes of the run, nothing else.
TEST(NormAttack, OneStepVanillaRanksLonePositiveFirst) {
  auto toy = fixture::toy(3, 400, 0.2);
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < toy.lv.size() && rows.size() < 15; ++r)
    if (toy.lv.labels[r] == 0) rows.push_back(r);
  for (std::size_t r = 0; r < toy.lv.size(); ++r)
    if (toy.lv.labels[r] == 1) {
      rows.push_back(r);
      break;
    }
  const LabelView lv = select_rows(toy.lv, rows);
  NonLabelView nv;
  nv.vocab = toy.nv.vocab;
  for (auto r : rows) {
    nv.ids.push_back(toy.nv.ids[r]);
    for (std::size_t s = 0; s < kNonLabelSlots; ++s) nv.features.push_back(toy.nv.features[r * kNonLabelSlots + s]);
  }
  TrainConfig cfg;
  cfg.batch_size = 16;
  VflModel m = make_vfl_model(nv, lv, cfg);
  auto& out = m.label.head(Branch::federated).top.back();
  scale_inplace(out.weight, 1e-3);
  out.bias(1, 0) = std::log(1.0 / 15.0);

  std::vector<std::vector<std::uint8_t>> wire;
  train_vanilla(m, nv, lv, cfg, [&](const ProtocolMessage& msg) { wire.push_back(encode_message(msg)); });
  AttackTrace trace;
  for (const auto& bytes : wire) trace.observe(decode_message(bytes));
  const auto s = norm_attack(trace);
  ASSERT_EQ(s.scores.size(), 16u);
  const auto top = std::max_element(s.scores.begin(), s.scores.end()) - s.scores.begin();
  EXPECT_EQ(s.ids[static_cast<std::size_t>(top)], lv.ids.back());
  std::vector<int> y;
  for (const auto& id : s.ids) y.push_back(id == lv.ids.back() ? 1 : 0);
  EXPECT_EQ(leak_auc(s.scores, y), 1.0);
}

TEST(Trace, ExportImportRoundTrip) {
  AttackTrace t;
  t.observe(gradient_message({"a", "b"}, {{1, 2}, {3, 4}}));
  t.observe(ProtocolMessage{MessageKind::federated_embedding_batch, 0, {"b", "c"}, 3, {1, 2, 3, 4, 5, 6}});
  const auto bytes = export_trace(t).encode();
  const AttackTrace back = import_trace(TensorArchive::decode(bytes));
  ASSERT_EQ(back.ids(), t.ids());
  for (std::size_t i = 0; i < t.size(); ++i) {
    EXPECT_EQ(back.at(i).gradient, t.at(i).gradient);
    EXPECT_EQ(back.at(i).embedding, t.at(i).embedding);
  }
  TensorArchive wrong;
  wrong.kind = "other";
  EXPECT_THROW(import_trace(wrong), DecodeError);
}

TEST(ClusterAttack, SeparatedBlobsWithMinorityPositives) {
  Rng rng = make_rng(4);
  const Tensor x = two_blobs(400, 80, 2.0, rng);
  std::vector<int> y(400, 0);
  std::fill(y.begin(), y.begin() + 80, 1);
  const auto r = cluster_attack(x);
  EXPECT_GE(leak_auc(r.scores, y), 0.99);
  EXPECT_EQ(r.smaller_size, 80u);
  for (std::size_t i = 0; i < 400; ++i) EXPECT_EQ(r.in_smaller[i], y[i]);
  EXPECT_FALSE(r.degenerate);
}

TEST(ClusterAttack, SwappedLabelsInvertTheAttack) {
  Rng rng = make_rng(5);
  const Tensor x = two_blobs(400, 80, 2.0, rng);
  std::vector<int> y(400, 1);
  std::fill(y.begin(), y.begin() + 80, 0);
  EXPECT_LE(leak_auc(cluster_attack(x).scores, y), 0.01);
}

TEST(ClusterAttack, SingleBlobIsUninformative) {
  double sum = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng = make_rng(seed, 6);
    const Tensor x = oracle::random_tensor(1000, 4, rng);
    std::vector<int> y(1000);
    for (auto& v : y) v = uniform01(rng) < 0.2 ? 1 : 0;
    sum += leak_auc(cluster_attack(x).scores, y);
  }
  EXPECT_GE(sum / 10, 0.45);
  EXPECT_LE(sum / 10, 0.55);
}

TEST(ClusterAttack, IdenticalEmbeddingsAreDegenerate) {
  const auto r = cluster_attack(Tensor(5, 3, 1.5));
  EXPECT_TRUE(r.degenerate);
  for (double s : r.scores) EXPECT_EQ(s, 0.0);
  EXPECT_THROW(cluster_attack(Tensor(1, 3)), ValidationError);
}

TEST(ClusterAttack, DeterministicAndPermutationEquivariant) {
  Rng rng = make_rng(7);
  const Tensor x = two_blobs(300, 100, 1.0, rng);
  const auto a = cluster_attack(x);
  EXPECT_EQ(cluster_attack(x).scores, a.scores);
  std::vector<std::size_t> perm = fixture::iota(300);
  std::shuffle(perm.begin(), perm.end(), rng);
  Tensor px(300, 4);
  for (std::size_t i = 0; i < 300; ++i)
    for (std::size_t k = 0; k < 4; ++k) px(i, k) = x(perm[i], k);
  const auto b = cluster_attack(px);
  for (std::size_t i = 0; i < 300; ++i) {
    EXPECT_NEAR(b.scores[i], a.scores[perm[i]], 1e-9);
    EXPECT_EQ(b.in_smaller[i], a.in_smaller[perm[i]]);
  }
}

TEST(ClusterAttack, EqualSizesGoToClusterZero) {
  // Two points: each is its own cluster, sizes tie.
  const Tensor x(2, 1, {0.0, 1.0});
  const auto r = cluster_attack(x);
  EXPECT_EQ(r.smaller_size, 1u);
  EXPECT_EQ(r.in_smaller[0] + r.in_smaller[1], 1);
}

TEST(AttackReport, JsonShape) {
  AttackReport r{"norm", 0.75, 10, {{"excluded", 0}}};
  const auto j = r.to_json();
  EXPECT_EQ(j.at("attack"), "norm");
  EXPECT_EQ(j.at("leak_auc"), 0.75);
  EXPECT_EQ(j.at("n_samples"), 10);
  EXPECT_TRUE(j.at("params").is_object());
}

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
#include <array>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "vflsim/errors.hpp"

namespace vflsim {

inline constexpr std::size_t kNonLabelSlots = 7;
inline constexpr std::size_t kLabelSlots = 16;

// One click. Non-label slots are empty once a record has been erased for the
// unaligned (label-party-only) set.
struct SampleRecord {
  std::string sample_id;
  std::uint32_t user_id = 0;
  std::array<std::optional<std::uint32_t>, kNonLabelSlots> nonlabel_features{};
  std::array<std::uint32_t, kLabelSlots> label_features{};
  int label = 0;
  std::int64_t click_ts = 0;
  std::int64_t conv_ts = -1;  // -1 when there is no conversion

  bool has_nonlabel_features() const {
    return std::all_of(nonlabel_features.begin(), nonlabel_features.end(),
                       [](const auto& v) { return v.has_value(); });
  }
  bool nonlabel_erased() const {
    return std::none_of(nonlabel_features.begin(), nonlabel_features.end(),
                        [](const auto& v) { return v.has_value(); });
  }
  void erase_nonlabel() { nonlabel_features.fill(std::nullopt); }

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

enum class DatasetRole { aligned, unaligned_label_only, test };

inline const char* to_string(DatasetRole r) {
  switch (r) {
    case DatasetRole::aligned:
      return "aligned";
    case DatasetRole::unaligned_label_only:
      return "unaligned_label_only";
    case DatasetRole::test:
      return "test";
  }
  return "?";
}

struct Dataset {
  std::vector<SampleRecord> records;
  std::array<std::size_t, kNonLabelSlots> nonlabel_vocab{};
  std::array<std::size_t, kLabelSlots> label_vocab{};
  DatasetRole role = DatasetRole::aligned;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }

  // Grows the vocabularies so that every id present is covered.
  void cover_vocab() {
    for (const auto& r : records) {
      for (std::size_t s = 0; s < kNonLabelSlots; ++s)
        if (r.nonlabel_features[s])
          nonlabel_vocab[s] = std::max<std::size_t>(nonlabel_vocab[s], *r.nonlabel_features[s] + 1);
      for (std::size_t s = 0; s < kLabelSlots; ++s)
        label_vocab[s] = std::max<std::size_t>(label_vocab[s], r.label_features[s] + 1);
    }
  }

  // Throws ValidationError describing the first violated invariant.
  void validate() const {
    for (const auto& r : records) {
      if (r.label != 0 && r.label != 1) throw ValidationError(r.sample_id + ": label not in {0,1}");
      if (r.label == 1 && r.conv_ts < r.click_ts)
        throw ValidationError(r.sample_id + ": conversion precedes click");
      if (role == DatasetRole::unaligned_label_only && !r.nonlabel_erased())
        throw ValidationError(r.sample_id + ": unaligned record exposes non-label features");
      if (role != DatasetRole::unaligned_label_only && !r.has_nonlabel_features())
        throw ValidationError(r.sample_id + ": missing non-label features");
      for (std::size_t s = 0; s < kNonLabelSlots; ++s)
        if (r.nonlabel_features[s] && *r.nonlabel_features[s] >= nonlabel_vocab[s])
          throw ValidationError(r.sample_id + ": non-label id outside vocabulary");
      for (std::size_t s = 0; s < kLabelSlots; ++s)
        if (r.label_features[s] >= label_vocab[s])
          throw ValidationError(r.sample_id + ": label-party id outside vocabulary");
    }
  }
};

// Element-wise max of vocabularies, so one model can serve several splits.
inline void merge_vocab(Dataset& into, const Dataset& other) {
  for (std::size_t s = 0; s < kNonLabelSlots; ++s)
    into.nonlabel_vocab[s] = std::max(into.nonlabel_vocab[s], other.nonlabel_vocab[s]);
  for (std::size_t s = 0; s < kLabelSlots; ++s)
    into.label_vocab[s] = std::max(into.label_vocab[s], other.label_vocab[s]);
}

// ---- TSV ----------------------------------------------------------------

inline std::string tsv_header() {
  std::string h = "sample_id\tuser_id";
  for (std::size_t s = 0; s < kNonLabelSlots; ++s) h += "\tn" + std::to_string(s);
  for (std::size_t s = 0; s < kLabelSlots; ++s) h += "\tl" + std::to_string(s);
  h += "\tlabel\tclick_ts\tconv_ts";
  return h;
}

inline constexpr std::size_t kTsvColumns = 2 + kNonLabelSlots + kLabelSlots + 3;

inline void write_tsv(const Dataset& d, std::ostream& out) {
  out << tsv_header() << '\n';
  for (const auto& r : d.records) {
    out << r.sample_id << '\t' << r.user_id;
    for (const auto& v : r.nonlabel_features) {
      out << '\t';
      if (v) out << *v;
    }
    for (auto v : r.label_features) out << '\t' << v;
    out << '\t' << r.label << '\t' << r.click_ts << '\t' << r.conv_ts << '\n';
  }
}

inline void write_tsv(const Dataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  write_tsv(d, out);
}

namespace detail {

template <typename T>
T parse_int(std::string_view field, std::size_t line, const char* column) {
  T value{};
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end || field.empty()) {
    throw ParseError(line, std::string("bad integer in column ") + column + ": '" +
                               std::string(field) + "'");
  }
  return value;
}

inline std::vector<std::string_view> split_tabs(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find('\t', start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace detail

// Vocabularies are not stored in the file; they are recomputed to cover the
// ids present.
inline Dataset read_tsv(std::istream& in, DatasetRole role = DatasetRole::aligned) {
  Dataset d;
  d.role = role;
  std::string line;
  std::size_t lineno = 1;
  if (!std::getline(in, line)) throw ParseError(1, "missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != tsv_header()) throw ParseError(1, "unexpected header");
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split_tabs(line);
    if (f.size() != kTsvColumns) {
      throw ParseError(lineno, "expected " + std::to_string(kTsvColumns) + " columns, got " +
                                   std::to_string(f.size()));
    }
    SampleRecord r;
    if (f[0].empty()) throw ParseError(lineno, "empty sample_id");
    r.sample_id = std::string(f[0]);
    r.user_id = detail::parse_int<std::uint32_t>(f[1], lineno, "user_id");
    for (std::size_t s = 0; s < kNonLabelSlots; ++s) {
      const auto& field = f[2 + s];
      if (!field.empty()) r.nonlabel_features[s] = detail::parse_int<std::uint32_t>(field, lineno, "n");
    }
    for (std::size_t s = 0; s < kLabelSlots; ++s)
      r.label_features[s] = detail::parse_int<std::uint32_t>(f[2 + kNonLabelSlots + s], lineno, "l");
    const std::size_t tail = 2 + kNonLabelSlots + kLabelSlots;
    r.label = detail::parse_int<int>(f[tail], lineno, "label");
    if (r.label != 0 && r.label != 1) throw ParseError(lineno, "label must be 0 or 1");
    r.click_ts = detail::parse_int<std::int64_t>(f[tail + 1], lineno, "click_ts");
    r.conv_ts = detail::parse_int<std::int64_t>(f[tail + 2], lineno, "conv_ts");
    d.records.push_back(std::move(r));
  }
  d.cover_vocab();
  return d;
}

inline Dataset read_tsv(const std::string& path, DatasetRole role = DatasetRole::aligned) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return read_tsv(in, role);
}

}  // namespace vflsim

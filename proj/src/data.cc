/**
 * Copyright 2026 The FDML Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "fdml/data.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "fdml/errors.h"

namespace fdml {
namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r'; }

std::string_view next_token(std::string_view& rest) {
  std::size_t b = 0;
  while (b < rest.size() && is_space(rest[b])) ++b;
  std::size_t e = b;
  while (e < rest.size() && !is_space(rest[e])) ++e;
  std::string_view token = rest.substr(b, e - b);
  rest.remove_prefix(e);
  return token;
}

bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

}  // namespace

void Dataset::add_row(int label, std::span<const SparseEntry> entries) {
  labels_.push_back(label ? 1 : 0);
  entries_.insert(entries_.end(), entries.begin(), entries.end());
  offsets_.push_back(entries_.size());
  if (!entries.empty()) {
    observed_dim_ = std::max<std::size_t>(observed_dim_, entries.back().index + 1);
  }
}

void Dataset::reserve(std::size_t rows, std::size_t nonzeros) {
  labels_.reserve(rows);
  offsets_.reserve(rows + 1);
  entries_.reserve(nonzeros);
}

Dataset parse_svmlight(std::istream& in) {
  Dataset data;
  std::string line;
  std::vector<SparseEntry> entries;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view rest(line);
    if (auto hash = rest.find('#'); hash != std::string_view::npos) {
      rest = rest.substr(0, hash);
    }
    std::string_view token = next_token(rest);
    if (token.empty()) continue;

    double label_value = 0.0;
    if (!parse_double(token, label_value)) {
      throw ParseError("malformed label '" + std::string(token) + "'", line_no);
    }
    entries.clear();
    while (!(token = next_token(rest)).empty()) {
      const std::size_t colon = token.find(':');
      if (colon == std::string_view::npos) {
        throw ParseError("expected idx:val, got '" + std::string(token) + "'",
                         line_no);
      }
      std::uint64_t one_based = 0;
      std::string_view idx = token.substr(0, colon);
      auto [ptr, ec] =
          std::from_chars(idx.data(), idx.data() + idx.size(), one_based);
      if (ec != std::errc() || ptr != idx.data() + idx.size() ||
          one_based == 0 || one_based > UINT32_MAX) {
        throw ParseError("bad feature index '" + std::string(idx) + "'",
                         line_no);
      }
      double value = 0.0;
      if (!parse_double(token.substr(colon + 1), value)) {
        throw ParseError("bad feature value in '" + std::string(token) + "'",
                         line_no);
      }
      const auto index = static_cast<std::uint32_t>(one_based - 1);
      if (!entries.empty() && index <= entries.back().index) {
        throw ParseError("feature indices not increasing at '" +
                             std::string(token) + "'",
                         line_no);
      }
      entries.push_back({index, value});
    }
    data.add_row(label_value > 0.0 ? 1 : 0, entries);
  }
  return data;
}

Dataset load_svmlight(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset '" + path + "'");
  try {
    return parse_svmlight(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), e.line());
  }
}

DatasetSplit load_split(const std::string& train_path,
                        const std::string& test_path, std::size_t dim) {
  DatasetSplit split{load_svmlight(train_path), load_svmlight(test_path), dim};
  if (split.dim == 0) {
    split.dim = std::max(split.train.observed_dim(), split.test.observed_dim());
  }
  if (split.train.observed_dim() > split.dim ||
      split.test.observed_dim() > split.dim) {
    throw ConfigError("dataset uses feature indices beyond dim " +
                      std::to_string(split.dim));
  }
  return split;
}

VerticalPartition VerticalPartition::contiguous(
    std::size_t dim, std::span<const std::size_t> sizes) {
  if (sizes.empty()) throw ConfigError("partition needs at least one party");
  const std::size_t total = std::accumulate(sizes.begin(), sizes.end(),
                                            std::size_t{0});
  if (total < dim) {
    throw ConfigError("partition sizes sum to " + std::to_string(total) +
                      ", leaving a gap below dim " + std::to_string(dim));
  }
  if (total > dim) {
    throw ConfigError("partition sizes sum to " + std::to_string(total) +
                      ", beyond dim " + std::to_string(dim));
  }
  VerticalPartition p;
  p.dim_ = dim;
  std::uint32_t next = 0;
  for (std::size_t size : sizes) {
    std::vector<std::uint32_t> slice(size);
    std::iota(slice.begin(), slice.end(), next);
    next += static_cast<std::uint32_t>(size);
    p.slices_.push_back(std::move(slice));
  }
  p.index();
  return p;
}

VerticalPartition VerticalPartition::even(std::size_t dim,
                                          std::size_t parties) {
  if (parties == 0) throw ConfigError("partition needs at least one party");
  std::vector<std::size_t> sizes(parties, dim / parties);
  for (std::size_t j = 0; j < dim % parties; ++j) ++sizes[j];
  return contiguous(dim, sizes);
}

VerticalPartition VerticalPartition::from_lists(
    std::size_t dim, std::vector<std::vector<std::uint32_t>> lists) {
  if (lists.empty()) throw ConfigError("partition needs at least one party");
  std::vector<bool> covered(dim, false);
  for (const auto& list : lists) {
    std::vector<bool> seen(dim, false);
    for (std::uint32_t g : list) {
      if (g >= dim) {
        throw ConfigError("partition index " + std::to_string(g) +
                          " out of range for dim " + std::to_string(dim));
      }
      if (seen[g]) {
        throw ConfigError("partition index " + std::to_string(g) +
                          " listed twice for one party");
      }
      seen[g] = covered[g] = true;
    }
  }
  if (auto gap = std::find(covered.begin(), covered.end(), false);
      gap != covered.end()) {
    throw ConfigError("partition leaves feature " +
                      std::to_string(gap - covered.begin()) + " unassigned");
  }
  VerticalPartition p;
  p.dim_ = dim;
  p.slices_ = std::move(lists);
  p.index();
  return p;
}

VerticalPartition VerticalPartition::from_json_text(const std::string& text,
                                                    std::size_t dim) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
    if (doc.contains("parties")) {
      return from_lists(
          dim, doc.at("parties").get<std::vector<std::vector<std::uint32_t>>>());
    }
    if (doc.contains("sizes")) {
      auto sizes = doc.at("sizes").get<std::vector<std::size_t>>();
      return contiguous(dim, sizes);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad partition document: ") + e.what());
  }
  throw ConfigError("partition document needs \"parties\" or \"sizes\"");
}

VerticalPartition VerticalPartition::load(const std::string& path,
                                          std::size_t dim) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open partition file '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return from_json_text(text, dim);
}

void VerticalPartition::index() {
  local_of_.assign(slices_.size(), std::vector<std::int32_t>(dim_, -1));
  std::vector<int> owners(dim_, 0);
  for (std::size_t j = 0; j < slices_.size(); ++j) {
    for (std::size_t k = 0; k < slices_[j].size(); ++k) {
      local_of_[j][slices_[j][k]] = static_cast<std::int32_t>(k);
      ++owners[slices_[j][k]];
    }
  }
  disjoint_ = std::all_of(owners.begin(), owners.end(),
                          [](int n) { return n <= 1; });
}

std::optional<std::uint32_t> VerticalPartition::local_index(
    std::size_t party, std::uint32_t global) const {
  if (global >= dim_) return std::nullopt;
  const std::int32_t k = local_of_[party][global];
  if (k < 0) return std::nullopt;
  return static_cast<std::uint32_t>(k);
}

LocalFeatureVector project(std::uint64_t sample_id, SparseRow sample,
                           const VerticalPartition& partition,
                           std::size_t party) {
  LocalFeatureVector out;
  out.sample_id = sample_id;
  for (const SparseEntry& e : sample) {
    if (auto k = partition.local_index(party, e.index)) {
      out.entries.push_back({*k, e.value});
    }
  }
  // Explicit lists need not be sorted, so local order can differ from global.
  std::sort(out.entries.begin(), out.entries.end(),
            [](const SparseEntry& a, const SparseEntry& b) {
              return a.index < b.index;
            });
  return out;
}

std::vector<SparseEntry> reassemble(std::span<const LocalFeatureVector> parts,
                                    const VerticalPartition& partition) {
  std::vector<SparseEntry> out;
  for (std::size_t j = 0; j < parts.size(); ++j) {
    for (const SparseEntry& e : parts[j].entries) {
      out.push_back({partition.slice(j)[e.index], e.value});
    }
  }
  std::sort(out.begin(), out.end(),
            [](const SparseEntry& a, const SparseEntry& b) {
              return a.index < b.index;
            });
  return out;
}

Dataset project_dataset(const Dataset& data,
                        const VerticalPartition& partition, std::size_t party) {
  Dataset out;
  out.reserve(data.size(), data.nonzeros());
  for (std::size_t i = 0; i < data.size(); ++i) {
    LocalFeatureVector local = project(i, data.row(i), partition, party);
    out.add_row(data.label(i), local.entries);
  }
  return out;
}

}  // namespace fdml

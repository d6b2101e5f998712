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

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fdml/model.h"

namespace fdml {

// Row-aligned labelled sparse samples in CSR form. Used both for global
// datasets and for one party's projected feature store (where the labels are
// the replicated copy every worker holds).
class Dataset {
 public:
  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }

  // One past the largest feature index present (0 for an all-empty set).
  std::size_t observed_dim() const { return observed_dim_; }

  int label(std::size_t i) const { return labels_[i]; }
  std::span<const std::uint8_t> labels() const { return labels_; }
  SparseRow row(std::size_t i) const {
    return SparseRow(entries_.data() + offsets_[i],
                     offsets_[i + 1] - offsets_[i]);
  }
  std::size_t nonzeros() const { return entries_.size(); }

  // Entries must be strictly increasing by index.
  void add_row(int label, std::span<const SparseEntry> entries);

  void reserve(std::size_t rows, std::size_t nonzeros);

 private:
  std::vector<std::uint8_t> labels_;
  std::vector<std::size_t> offsets_{0};
  std::vector<SparseEntry> entries_;
  std::size_t observed_dim_ = 0;
};

// Reads "label idx:val idx:val ..." lines with 1-based indices. Labels are
// mapped to {0,1} (positive values to 1). Blank lines, trailing whitespace and
// '#' comments are tolerated. Throws ParseError carrying the line number.
Dataset parse_svmlight(std::istream& in);
Dataset load_svmlight(const std::string& path);

struct DatasetSplit {
  Dataset train;
  Dataset test;
  std::size_t dim = 0;
};

DatasetSplit load_split(const std::string& train_path,
                        const std::string& test_path, std::size_t dim);

// Assignment of global feature indices to parties.
class VerticalPartition {
 public:
  // First sizes[0] indices to party 0, the next sizes[1] to party 1, ...
  // The sizes must sum to exactly dim.
  static VerticalPartition contiguous(std::size_t dim,
                                      std::span<const std::size_t> sizes);

  // Near-equal contiguous split into the given number of parties.
  static VerticalPartition even(std::size_t dim, std::size_t parties);

  // Lists are honored verbatim: local index k of party j is lists[j][k].
  // Overlap between parties is allowed; every index in [0, dim) must be
  // covered and each list must be free of duplicates.
  static VerticalPartition from_lists(
      std::size_t dim, std::vector<std::vector<std::uint32_t>> lists);

  // JSON document {"parties": [[...], ...]} or {"sizes": [...]}.
  static VerticalPartition from_json_text(const std::string& text,
                                          std::size_t dim);
  static VerticalPartition load(const std::string& path, std::size_t dim);

  std::size_t parties() const { return slices_.size(); }
  std::size_t dim() const { return dim_; }
  std::span<const std::uint32_t> slice(std::size_t party) const {
    return slices_[party];
  }
  std::size_t local_dim(std::size_t party) const {
    return slices_[party].size();
  }
  std::optional<std::uint32_t> local_index(std::size_t party,
                                           std::uint32_t global) const;
  bool disjoint() const { return disjoint_; }

 private:
  VerticalPartition() = default;
  void index();

  std::size_t dim_ = 0;
  std::vector<std::vector<std::uint32_t>> slices_;
  std::vector<std::vector<std::int32_t>> local_of_;
  bool disjoint_ = true;
};

// xi_i^j: the sample restricted to the party's slice, re-indexed locally.
LocalFeatureVector project(std::uint64_t sample_id, SparseRow sample,
                           const VerticalPartition& partition,
                           std::size_t party);

// Inverse of project for disjoint partitions: maps every party's local
// entries back to global indices and merges them.
std::vector<SparseEntry> reassemble(
    std::span<const LocalFeatureVector> parts,
    const VerticalPartition& partition);

// Projects every row of a dataset; labels are copied through.
Dataset project_dataset(const Dataset& data,
                        const VerticalPartition& partition, std::size_t party);

}  // namespace fdml

#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "l2d/common.hpp"
#include "l2d/csv.hpp"

namespace l2d {

enum class Split { train, val, test };

inline std::string split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw Error("unknown split tag '" + s + "'");
}

struct Record {
  std::vector<double> features;
  int group = 0;   // a
  int expert = 0;  // m
  int label = 0;   // y
  Split split = Split::train;
};

struct LabeledDataset {
  std::vector<Record> records;
  int num_classes = 2;  // L

  int size() const { return static_cast<int>(records.size()); }
  int num_features() const {
    return records.empty() ? 0 : static_cast<int>(records[0].features.size());
  }

  int num_groups() const {
    int g = 0;
    for (const auto& r : records) g = std::max(g, r.group + 1);
    return g;
  }

  void validate() const {
    for (const auto& r : records) {
      if (r.label < 0 || r.label >= num_classes)
        throw Error("label out of range [0, L-1]");
      if (r.expert < 0 || r.expert >= num_classes)
        throw Error("expert label out of range [0, L-1]");
      if (r.group < 0) throw Error("negative group index");
    }
  }

  LabeledDataset subset(Split s) const {
    LabeledDataset out;
    out.num_classes = num_classes;
    for (const auto& r : records)
      if (r.split == s) out.records.push_back(r);
    return out;
  }

  std::vector<int> indices_of(Split s) const {
    std::vector<int> idx;
    for (int i = 0; i < size(); ++i)
      if (records[i].split == s) idx.push_back(i);
    return idx;
  }
};

// Deterministic 60/20/20 split by seeded shuffle.
inline void assign_splits(LabeledDataset& ds, std::uint64_t seed) {
  std::vector<int> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_rng(seed, 0x591);
  std::shuffle(order.begin(), order.end(), rng);
  int n = ds.size();
  int n_train = static_cast<int>(0.6 * n);
  int n_val = static_cast<int>(0.2 * n);
  for (int pos = 0; pos < n; ++pos) {
    Split s = pos < n_train          ? Split::train
              : pos < n_train + n_val ? Split::val
                                      : Split::test;
    ds.records[order[pos]].split = s;
  }
}

inline LabeledDataset load_dataset(const std::string& path, int num_classes,
                                   std::uint64_t split_seed = 0) {
  csv::Table t = csv::read_file(path);
  std::vector<int> feat_cols;
  for (int j = 0;; ++j) {
    int c = t.column("feature_" + std::to_string(j));
    if (c < 0) break;
    feat_cols.push_back(c);
  }
  if (feat_cols.empty()) throw Error("dataset has no feature_* columns: " + path);
  int c_group = t.require_column("group");
  int c_expert = t.require_column("expert");
  int c_label = t.require_column("label");
  int c_split = t.column("split");

  LabeledDataset ds;
  ds.num_classes = num_classes;
  ds.records.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    Record r;
    r.features.reserve(feat_cols.size());
    for (int c : feat_cols) r.features.push_back(csv::to_double(row[c]));
    r.group = static_cast<int>(csv::to_long(row[c_group]));
    r.expert = static_cast<int>(csv::to_long(row[c_expert]));
    r.label = static_cast<int>(csv::to_long(row[c_label]));
    if (c_split >= 0) r.split = parse_split(row[c_split]);
    ds.records.push_back(std::move(r));
  }
  if (c_split < 0) assign_splits(ds, split_seed);
  ds.validate();
  return ds;
}

inline void save_dataset(const std::string& path, const LabeledDataset& ds) {
  csv::Table t;
  int p = ds.num_features();
  for (int j = 0; j < p; ++j) t.header.push_back("feature_" + std::to_string(j));
  t.header.insert(t.header.end(), {"group", "expert", "label", "split"});
  for (const auto& r : ds.records) {
    std::vector<std::string> row;
    for (double f : r.features) row.push_back(csv::format_double(f));
    row.push_back(std::to_string(r.group));
    row.push_back(std::to_string(r.expert));
    row.push_back(std::to_string(r.label));
    row.push_back(split_name(r.split));
    t.rows.push_back(std::move(row));
  }
  csv::write_file(path, t);
}

}  // namespace l2d

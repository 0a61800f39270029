/*
 * Copyright 2026 The GeoXAI Authors.
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
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "geoxai/error.hpp"
#include "geoxai/matrix.hpp"
#include "geoxai/rng.hpp"
#include "geoxai/tabular.hpp"

// Least-squares gradient-boosted regression trees with exact greedy splits.
//
// Model file format (canonical JSON, format "geoxai-gbdt", version 1):
//   {"format": "geoxai-gbdt", "version": 1, "n_features": p,
//    "base_score": b, "learning_rate": eta, "params": {...},
//    "trees": [{"feature": [...], "threshold": [...], "left": [...],
//               "right": [...], "value": [...]}, ...]}
// Each tree is a flat node array rooted at index 0. feature = -1 marks a leaf;
// an internal node sends a row left when row[feature] <= threshold. Doubles
// are written in shortest round-trip form so load(save(m)) is bit-exact.
namespace geoxai {

struct GbdtParams {
  int n_trees = 100;
  int max_depth = 4;
  double learning_rate = 0.1;
  int min_samples_leaf = 5;
  double subsample = 1.0;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_trees < 1) throw Error(ErrorCode::kInvalidParams, "n_trees must be >= 1");
    if (max_depth < 1) throw Error(ErrorCode::kInvalidParams, "max_depth must be >= 1");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0))
      throw Error(ErrorCode::kInvalidParams, "learning_rate must be in (0, 1]");
    if (min_samples_leaf < 1)
      throw Error(ErrorCode::kInvalidParams, "min_samples_leaf must be >= 1");
    if (!(subsample > 0.0 && subsample <= 1.0))
      throw Error(ErrorCode::kInvalidParams, "subsample must be in (0, 1]");
  }

  friend bool operator==(const GbdtParams&, const GbdtParams&) = default;
};

inline nlohmann::ordered_json to_json(const GbdtParams& p) {
  return {{"n_trees", p.n_trees},           {"max_depth", p.max_depth},
          {"learning_rate", p.learning_rate}, {"min_samples_leaf", p.min_samples_leaf},
          {"subsample", p.subsample},        {"seed", p.seed}};
}

inline GbdtParams params_from_json(const nlohmann::json& j) {
  GbdtParams p;
  p.n_trees = j.at("n_trees").get<int>();
  p.max_depth = j.at("max_depth").get<int>();
  p.learning_rate = j.at("learning_rate").get<double>();
  p.min_samples_leaf = j.at("min_samples_leaf").get<int>();
  p.subsample = j.at("subsample").get<double>();
  p.seed = j.at("seed").get<std::uint64_t>();
  return p;
}

struct TreeNode {
  std::int32_t feature = -1;
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  double value = 0.0;

  bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
  std::vector<TreeNode> nodes;

  double evaluate(std::span<const double> row) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
      const auto& node = nodes[i];
      i = static_cast<std::size_t>(row[static_cast<std::size_t>(node.feature)] <= node.threshold
                                       ? node.left
                                       : node.right);
    }
    return nodes[i].value;
  }
};

class GbdtModel {
 public:
  static constexpr int kFormatVersion = 1;

  GbdtModel() = default;
  GbdtModel(double base_score, double learning_rate, std::size_t n_features,
            std::vector<RegressionTree> trees, GbdtParams params)
      : base_score_(base_score),
        learning_rate_(learning_rate),
        n_features_(n_features),
        trees_(std::move(trees)),
        params_(params) {}

  double predict_row(std::span<const double> row) const {
    double sum = 0.0;
    for (const auto& tree : trees_) sum += tree.evaluate(row);
    return base_score_ + learning_rate_ * sum;
  }

  std::vector<double> predict(const Matrix& rows) const {
    if (rows.rows() > 0 && rows.cols() != n_features_)
      throw Error(ErrorCode::kArityMismatch, "model expects " + std::to_string(n_features_) +
                                                 " features, got " + std::to_string(rows.cols()));
    std::vector<double> out(rows.rows());
    for (std::size_t r = 0; r < rows.rows(); ++r) out[r] = predict_row(rows.row(r));
    return out;
  }

  std::size_t arity() const { return n_features_; }
  double base_score() const { return base_score_; }
  double learning_rate() const { return learning_rate_; }
  const std::vector<RegressionTree>& trees() const { return trees_; }
  const GbdtParams& params() const { return params_; }

  std::string to_json_string() const {
    nlohmann::ordered_json j;
    j["format"] = "geoxai-gbdt";
    j["version"] = kFormatVersion;
    j["n_features"] = n_features_;
    j["base_score"] = base_score_;
    j["learning_rate"] = learning_rate_;
    j["params"] = to_json(params_);
    auto& trees = j["trees"] = nlohmann::ordered_json::array();
    for (const auto& tree : trees_) {
      nlohmann::ordered_json t;
      std::vector<std::int32_t> feature, left, right;
      std::vector<double> threshold, value;
      for (const auto& n : tree.nodes) {
        feature.push_back(n.feature);
        threshold.push_back(n.threshold);
        left.push_back(n.left);
        right.push_back(n.right);
        value.push_back(n.value);
      }
      t["feature"] = feature;
      t["threshold"] = threshold;
      t["left"] = left;
      t["right"] = right;
      t["value"] = value;
      trees.push_back(std::move(t));
    }
    return j.dump() + "\n";
  }

  static GbdtModel from_json_string(const std::string& text) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kCorruptModelFile, std::string("unparseable model: ") + e.what());
    }
    try {
      if (j.at("format").get<std::string>() != "geoxai-gbdt")
        throw Error(ErrorCode::kCorruptModelFile, "not a geoxai-gbdt model");
      const int version = j.at("version").get<int>();
      if (version != kFormatVersion)
        throw Error(ErrorCode::kCorruptModelFile,
                    "unsupported model version " + std::to_string(version) + " (expected " +
                        std::to_string(kFormatVersion) + ")");
      const auto n_features = j.at("n_features").get<std::size_t>();
      std::vector<RegressionTree> trees;
      for (const auto& t : j.at("trees")) {
        const auto feature = t.at("feature").get<std::vector<std::int32_t>>();
        const auto threshold = t.at("threshold").get<std::vector<double>>();
        const auto left = t.at("left").get<std::vector<std::int32_t>>();
        const auto right = t.at("right").get<std::vector<std::int32_t>>();
        const auto value = t.at("value").get<std::vector<double>>();
        const std::size_t n = feature.size();
        if (n == 0 || threshold.size() != n || left.size() != n || right.size() != n ||
            value.size() != n)
          throw Error(ErrorCode::kCorruptModelFile, "inconsistent tree arrays");
        RegressionTree tree;
        for (std::size_t i = 0; i < n; ++i) {
          TreeNode node{feature[i], threshold[i], left[i], right[i], value[i]};
          if (!node.is_leaf()) {
            const auto in_range = [&](std::int32_t c) {
              return c > static_cast<std::int32_t>(i) && c < static_cast<std::int32_t>(n);
            };
            if (static_cast<std::size_t>(node.feature) >= n_features || !in_range(node.left) ||
                !in_range(node.right))
              throw Error(ErrorCode::kCorruptModelFile, "invalid node " + std::to_string(i));
          }
          tree.nodes.push_back(node);
        }
        trees.push_back(std::move(tree));
      }
      return GbdtModel(j.at("base_score").get<double>(), j.at("learning_rate").get<double>(),
                       n_features, std::move(trees), params_from_json(j.at("params")));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kCorruptModelFile, std::string("malformed model: ") + e.what());
    }
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path);
    out << to_json_string();
  }

  static GbdtModel load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return from_json_string(buffer.str());
  }

 private:
  double base_score_ = 0.0;
  double learning_rate_ = 0.1;
  std::size_t n_features_ = 0;
  std::vector<RegressionTree> trees_;
  GbdtParams params_;
};

struct FitDiagnostics {
  // Squared-error loss on the full training set after each boosting round.
  std::vector<double> training_mse;
  std::vector<std::string> warnings;
};

namespace detail {

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, const std::vector<std::vector<std::uint32_t>>& presorted,
              const GbdtParams& params)
      : x_(x), presorted_(presorted), params_(params), goes_left_(x.rows(), 0) {}

  RegressionTree build(std::span<const double> residual, std::span<const char> in_sample) {
    residual_ = residual;
    tree_ = RegressionTree{};
    std::vector<std::vector<std::uint32_t>> lists(x_.cols());
    for (std::size_t f = 0; f < x_.cols(); ++f) {
      lists[f].reserve(presorted_[f].size());
      for (const auto row : presorted_[f])
        if (in_sample[row]) lists[f].push_back(row);
    }
    grow(std::move(lists), 0);
    return std::move(tree_);
  }

 private:
  struct Split {
    double gain = 0.0;
    std::int32_t feature = -1;
    double threshold = 0.0;
  };

  std::int32_t grow(std::vector<std::vector<std::uint32_t>> lists, int depth) {
    const auto& rows = lists[0];
    const std::size_t n = rows.size();
    double sum = 0.0, sumsq = 0.0;
    for (const auto r : rows) {
      sum += residual_[r];
      sumsq += residual_[r] * residual_[r];
    }
    const auto index = static_cast<std::int32_t>(tree_.nodes.size());
    tree_.nodes.push_back(TreeNode{});
    tree_.nodes[index].value = n > 0 ? sum / static_cast<double>(n) : 0.0;

    const auto msl = static_cast<std::size_t>(params_.min_samples_leaf);
    if (depth >= params_.max_depth || n < 2 * msl) return index;
    const Split best = find_split(lists, sum, sumsq);
    if (best.feature < 0) return index;

    for (const auto r : rows)
      goes_left_[r] = x_(r, static_cast<std::size_t>(best.feature)) <= best.threshold;
    std::vector<std::vector<std::uint32_t>> left(lists.size()), right(lists.size());
    for (std::size_t f = 0; f < lists.size(); ++f) {
      for (const auto r : lists[f]) (goes_left_[r] ? left[f] : right[f]).push_back(r);
      std::vector<std::uint32_t>().swap(lists[f]);
    }
    tree_.nodes[index].feature = best.feature;
    tree_.nodes[index].threshold = best.threshold;
    const auto l = grow(std::move(left), depth + 1);
    tree_.nodes[index].left = l;
    const auto r = grow(std::move(right), depth + 1);
    tree_.nodes[index].right = r;
    return index;
  }

  // Scans features in index order and thresholds in ascending order and only
  // accepts strictly larger gains, so ties go to the lowest feature index and
  // then the lowest threshold.
  Split find_split(const std::vector<std::vector<std::uint32_t>>& lists, double sum,
                   double sumsq) const {
    const std::size_t n = lists[0].size();
    const auto msl = static_cast<std::size_t>(params_.min_samples_leaf);
    const double parent = sum * sum / static_cast<double>(n);
    const double min_gain = 1e-12 * std::max(1.0, sumsq);
    Split best;
    best.gain = min_gain;
    for (std::size_t f = 0; f < lists.size(); ++f) {
      const auto& order = lists[f];
      double left_sum = 0.0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        left_sum += residual_[order[i]];
        const std::size_t nl = i + 1;
        const std::size_t nr = n - nl;
        if (nl < msl) continue;
        if (nr < msl) break;
        const double a = x_(order[i], f);
        const double b = x_(order[i + 1], f);
        if (!(a < b)) continue;
        const double right_sum = sum - left_sum;
        const double gain = left_sum * left_sum / static_cast<double>(nl) +
                            right_sum * right_sum / static_cast<double>(nr) - parent;
        if (gain > best.gain) {
          best.gain = gain;
          best.feature = static_cast<std::int32_t>(f);
          double mid = a + (b - a) / 2.0;
          if (!(mid < b)) mid = a;
          best.threshold = mid;
        }
      }
    }
    return best;
  }

  const Matrix& x_;
  const std::vector<std::vector<std::uint32_t>>& presorted_;
  const GbdtParams& params_;
  std::span<const double> residual_;
  std::vector<char> goes_left_;
  RegressionTree tree_;
};

}  // namespace detail

inline GbdtModel fit_gbdt(const Matrix& x, std::span<const double> y, const GbdtParams& params,
                          FitDiagnostics* diagnostics = nullptr) {
  params.validate();
  const std::size_t n = x.rows();
  if (y.size() != n) throw Error(ErrorCode::kLengthMismatch, "response length != row count");
  if (n < 2 * static_cast<std::size_t>(params.min_samples_leaf) || n == 0)
    throw Error(ErrorCode::kTooFewRows, std::to_string(n) + " rows < 2 * min_samples_leaf");

  std::vector<std::vector<std::uint32_t>> presorted(x.cols());
  for (std::size_t f = 0; f < x.cols(); ++f) {
    auto& order = presorted[f];
    order.resize(n);
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return x(a, f) < x(b, f); });
    if (diagnostics && n > 0 && x(order.front(), f) == x(order.back(), f))
      diagnostics->warnings.push_back("DegenerateFeature: column " + std::to_string(f) +
                                      " is constant");
  }

  double base = 0.0;
  for (const double v : y) base += v;
  base /= static_cast<double>(n);

  std::vector<double> tree_sum(n, 0.0);
  std::vector<double> residual(n);
  std::vector<char> in_sample(n, 1);
  std::vector<std::size_t> shuffled(n);
  const auto sample_size = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::floor(params.subsample * static_cast<double>(n) + 0.5)), 1, n);

  detail::TreeBuilder builder(x, presorted, params);
  std::vector<RegressionTree> trees;
  trees.reserve(static_cast<std::size_t>(params.n_trees));
  for (int round = 0; round < params.n_trees; ++round) {
    for (std::size_t i = 0; i < n; ++i)
      residual[i] = y[i] - (base + params.learning_rate * tree_sum[i]);
    if (sample_size < n) {
      std::iota(shuffled.begin(), shuffled.end(), std::size_t{0});
      Rng rng(derive_seed(params.seed, "subsample", static_cast<std::uint64_t>(round)));
      rng.shuffle(std::span<std::size_t>(shuffled));
      std::fill(in_sample.begin(), in_sample.end(), 0);
      for (std::size_t i = 0; i < sample_size; ++i) in_sample[shuffled[i]] = 1;
    }
    trees.push_back(builder.build(residual, in_sample));
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      tree_sum[i] += trees.back().evaluate(x.row(i));
      const double e = y[i] - (base + params.learning_rate * tree_sum[i]);
      loss += e * e;
    }
    if (diagnostics) diagnostics->training_mse.push_back(loss / static_cast<double>(n));
  }
  return GbdtModel(base, params.learning_rate, x.cols(), std::move(trees), params);
}

inline GbdtModel fit_gbdt(const Dataset& ds, const GbdtParams& params,
                          FitDiagnostics* diagnostics = nullptr) {
  return fit_gbdt(ds.rows, ds.response, params, diagnostics);
}

}  // namespace geoxai

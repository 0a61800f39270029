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
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "geoxai/error.hpp"
#include "geoxai/gbdt.hpp"
#include "geoxai/metrics.hpp"
#include "geoxai/parallel.hpp"
#include "geoxai/rng.hpp"
#include "geoxai/tabular.hpp"

namespace geoxai {

// Hyperparameter space for the GBDT family. When `candidates` is non-empty
// the space is that explicit list (drawn in order); otherwise configurations
// are sampled from the ranges below. The first configuration is always
// `default_config` (or candidates[0]).
struct SearchSpace {
  std::vector<int> n_trees{50, 100, 200, 400};
  std::vector<int> max_depth{2, 3, 4, 5, 6};
  double learning_rate_min = 0.02;
  double learning_rate_max = 0.3;
  std::vector<int> min_samples_leaf{1, 3, 5, 10, 20};
  double subsample_min = 0.6;
  double subsample_max = 1.0;
  GbdtParams default_config{};
  std::vector<GbdtParams> candidates;

  void validate() const {
    if (!candidates.empty()) {
      for (const auto& c : candidates) c.validate();
      return;
    }
    if (n_trees.empty() || max_depth.empty() || min_samples_leaf.empty())
      throw Error(ErrorCode::kInvalidConfig, "search space has an empty choice list");
    if (!(learning_rate_min > 0.0 && learning_rate_min <= learning_rate_max &&
          learning_rate_max <= 1.0))
      throw Error(ErrorCode::kInvalidConfig, "learning_rate range must lie in (0, 1]");
    if (!(subsample_min > 0.0 && subsample_min <= subsample_max && subsample_max <= 1.0))
      throw Error(ErrorCode::kInvalidConfig, "subsample range must lie in (0, 1]");
    for (const int v : n_trees)
      if (v < 1) throw Error(ErrorCode::kInvalidConfig, "n_trees choices must be >= 1");
    for (const int v : max_depth)
      if (v < 1) throw Error(ErrorCode::kInvalidConfig, "max_depth choices must be >= 1");
    for (const int v : min_samples_leaf)
      if (v < 1) throw Error(ErrorCode::kInvalidConfig, "min_samples_leaf choices must be >= 1");
    default_config.validate();
  }
};

struct Trial {
  std::size_t index = 0;
  int rung = 0;  // 0 = reduced n_trees, 1 = full fidelity
  GbdtParams params;
  double loss = std::numeric_limits<double>::infinity();
  std::optional<MetricReport> pooled;
  bool failed = false;
  std::string error;
};

struct TuneResult {
  GbdtParams best_params;
  MetricReport best_cv;
  std::size_t best_trial = 0;
  std::vector<Trial> trials;
  std::size_t budget_used = 0;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::kMae;
};

struct TuneOptions {
  std::size_t budget = 20;
  LossKind loss = LossKind::kMae;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  // Fraction of n_trees used in the first successive-halving rung.
  double reduced_fraction = 0.25;
};

namespace detail {

template <class T>
const T& pick(const std::vector<T>& choices, Rng& rng) {
  return choices[static_cast<std::size_t>(rng.below(choices.size()))];
}

inline GbdtParams sample_config(const SearchSpace& space, Rng& rng, std::uint64_t seed) {
  GbdtParams p;
  p.n_trees = pick(space.n_trees, rng);
  p.max_depth = pick(space.max_depth, rng);
  p.learning_rate = std::exp(
      rng.uniform(std::log(space.learning_rate_min), std::log(space.learning_rate_max)));
  p.min_samples_leaf = pick(space.min_samples_leaf, rng);
  p.subsample = rng.uniform(space.subsample_min, space.subsample_max);
  if (p.subsample > space.subsample_max) p.subsample = space.subsample_max;
  p.seed = seed;
  return p;
}

}  // namespace detail

inline CvReport cv_score_gbdt(const Dataset& ds, const FoldPlan& folds, const GbdtParams& params,
                              std::size_t workers = 1) {
  return cv_score<GbdtModel>(
      ds, folds, [&](const Dataset& train) { return fit_gbdt(train, params); },
      [](const GbdtModel& m, const Matrix& x) { return m.predict(x); }, workers);
}

// Seeded random search with successive halving. Rung 0 evaluates sampled
// configurations with n_trees capped at reduced_fraction; the best rung-0
// configurations are then re-run at their full n_trees. Every evaluation is
// one trial and counts against the budget, failed ones included. Explicit
// candidate lists skip the reduced rung. The winner
// is the argmin of pooled CV loss over all trials, earliest trial on ties.
inline TuneResult tune(const Dataset& ds, const SearchSpace& space, const FoldPlan& folds,
                       const TuneOptions& options) {
  if (options.budget < 1) throw Error(ErrorCode::kInvalidBudget, "tuning budget must be >= 1");
  space.validate();

  const std::uint64_t model_seed = derive_seed(options.seed, "gbdt");
  std::vector<GbdtParams> configs;
  if (!space.candidates.empty()) {
    for (std::size_t i = 0; i < space.candidates.size(); ++i) {
      configs.push_back(space.candidates[i]);
      configs.back().seed = model_seed;
    }
  } else {
    Rng rng(derive_seed(options.seed, "tune"));
    configs.push_back(space.default_config);
    configs.back().seed = model_seed;
    while (configs.size() < options.budget) configs.push_back(detail::sample_config(space, rng, model_seed));
  }

  TuneResult result;
  result.seed = options.seed;
  result.loss = options.loss;

  auto run = [&](std::vector<Trial>& batch) {
    // Trials run concurrently; each writes only its own slot.
    parallel_for(batch.size(), options.workers, [&](std::size_t i) {
      auto& trial = batch[i];
      try {
        const auto cv = cv_score_gbdt(ds, folds, trial.params);
        trial.pooled = cv.pooled;
        trial.loss = cv.pooled.loss(options.loss);
      } catch (const Error& e) {
        trial.failed = true;
        trial.error = e.what();
      }
    });
    for (auto& t : batch) {
      t.index = result.trials.size();
      result.trials.push_back(t);
    }
  };

  if (options.budget == 1 || !space.candidates.empty()) {
    // Explicit candidate lists are scored at full fidelity, in order.
    std::vector<Trial> batch(std::min(configs.size(), options.budget));
    for (std::size_t i = 0; i < batch.size(); ++i) batch[i].params = configs[i];
    for (auto& t : batch) t.rung = 1;
    run(batch);
  } else {
    const std::size_t n_full_planned = std::max<std::size_t>(1, options.budget / 3);
    const std::size_t n_rung0 = std::min(configs.size(), options.budget - n_full_planned);
    std::vector<Trial> rung0(n_rung0);
    for (std::size_t i = 0; i < n_rung0; ++i) {
      rung0[i].params = configs[i];
      rung0[i].params.n_trees = std::max(
          1, static_cast<int>(std::lround(options.reduced_fraction * configs[i].n_trees)));
    }
    run(rung0);

    // Promote the best reduced-fidelity configurations that were actually
    // capped; configurations already at full n_trees need no re-run.
    std::vector<std::size_t> order(n_rung0);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return result.trials[a].loss < result.trials[b].loss;
    });
    const std::size_t n_full = options.budget - n_rung0;
    std::vector<Trial> rung1;
    for (const auto i : order) {
      if (rung1.size() >= n_full) break;
      if (result.trials[i].failed) continue;
      if (result.trials[i].params.n_trees == configs[i].n_trees) continue;
      Trial t;
      t.rung = 1;
      t.params = configs[i];
      rung1.push_back(t);
    }
    run(rung1);
  }

  result.budget_used = result.trials.size();
  std::optional<std::size_t> best;
  for (const auto& t : result.trials)
    if (!t.failed && (!best || t.loss < result.trials[*best].loss)) best = t.index;
  if (!best) throw Error(ErrorCode::kPredictorFailure, "every tuning trial failed");
  result.best_trial = *best;
  result.best_params = result.trials[*best].params;
  result.best_cv = *result.trials[*best].pooled;
  return result;
}

inline nlohmann::ordered_json to_json(const MetricReport& r) {
  nlohmann::ordered_json j{{"mae", r.mae}, {"mse", r.mse}};
  j["r2"] = r.r2 ? nlohmann::ordered_json(*r.r2) : nlohmann::ordered_json(nullptr);
  j["n"] = r.n;
  return j;
}

inline nlohmann::ordered_json to_json(const TuneResult& r) {
  nlohmann::ordered_json j;
  j["loss"] = loss_name(r.loss);
  j["seed"] = r.seed;
  j["budget_used"] = r.budget_used;
  j["best_trial"] = r.best_trial;
  j["best_params"] = to_json(r.best_params);
  j["best_cv"] = to_json(r.best_cv);
  auto& trials = j["trials"] = nlohmann::ordered_json::array();
  for (const auto& t : r.trials) {
    nlohmann::ordered_json row{{"index", t.index}, {"rung", t.rung}, {"params", to_json(t.params)}};
    row["loss"] = t.failed ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(t.loss);
    row["failed"] = t.failed;
    if (t.failed) row["error"] = t.error;
    if (t.pooled) row["cv"] = to_json(*t.pooled);
    trials.push_back(std::move(row));
  }
  return j;
}

inline std::string summary(const TuneResult& r) {
  std::ostringstream out;
  out << "trials: " << r.budget_used << " (selection loss: " << loss_name(r.loss) << ")\n"
      << "best trial: " << r.best_trial << "\n"
      << "best params: n_trees=" << r.best_params.n_trees
      << " max_depth=" << r.best_params.max_depth
      << " learning_rate=" << format_double(r.best_params.learning_rate)
      << " min_samples_leaf=" << r.best_params.min_samples_leaf
      << " subsample=" << format_double(r.best_params.subsample) << "\n"
      << "pooled CV: mae=" << format_double(r.best_cv.mae)
      << " mse=" << format_double(r.best_cv.mse)
      << " r2=" << (r.best_cv.r2 ? format_double(*r.best_cv.r2) : std::string("n/a")) << "\n";
  return out.str();
}

}  // namespace geoxai

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
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/rational.hpp>
#include <nlohmann/json.hpp>

#include "geoxai/error.hpp"
#include "geoxai/matrix.hpp"
#include "geoxai/parallel.hpp"
#include "geoxai/predictor.hpp"
#include "geoxai/rng.hpp"
#include "geoxai/tabular.hpp"

namespace geoxai {

inline constexpr const char* kEngineVersion = "1.0.0";

// Player roster of the location-aware game: every non-spatial column is its
// own player (in column order) and the g coordinate columns form one joint
// GEO player, always last. k = p - g + 1.
struct CoalitionSpace {
  std::size_t p = 0;
  std::vector<std::size_t> scalar_columns;
  std::vector<std::size_t> geo_columns;

  std::size_t g() const { return geo_columns.size(); }
  std::size_t players() const { return scalar_columns.size() + 1; }
  std::size_t geo_player() const { return scalar_columns.size(); }

  static CoalitionSpace make(std::size_t p, std::vector<std::size_t> geo_columns) {
    if (geo_columns.empty() || geo_columns.size() > p)
      throw Error(ErrorCode::kOutOfRange, "need 1 <= g <= p");
    CoalitionSpace cs;
    cs.p = p;
    std::vector<char> is_geo(p, 0);
    for (const auto c : geo_columns) {
      if (c >= p || is_geo[c]) throw Error(ErrorCode::kOutOfRange, "bad geo column index");
      is_geo[c] = 1;
    }
    for (std::size_t c = 0; c < p; ++c)
      if (!is_geo[c]) cs.scalar_columns.push_back(c);
    cs.geo_columns = std::move(geo_columns);
    return cs;
  }

  static CoalitionSpace from_schema(const Schema& schema) {
    return make(schema.p(), schema.geo_indices());
  }

  // Per-column membership flags for a player bitmask (bit i = player i).
  void column_flags(std::uint64_t mask, std::vector<char>& flags) const {
    flags.assign(p, 0);
    for (std::size_t i = 0; i < scalar_columns.size(); ++i)
      if (mask >> i & 1U) flags[scalar_columns[i]] = 1;
    if (mask >> geo_player() & 1U)
      for (const auto c : geo_columns) flags[c] = 1;
  }
};

// ---------------------------------------------------------------------------
// Coalition weights, exact in rational arithmetic.

using Rational = boost::rational<std::int64_t>;

// Largest n with n! representable in int64.
inline constexpr std::size_t kMaxFactorial = 20;

inline std::int64_t factorial(std::size_t n) {
  if (n > kMaxFactorial) throw Error(ErrorCode::kOutOfRange, "factorial overflow");
  std::int64_t f = 1;
  for (std::size_t i = 2; i <= n; ++i) f *= static_cast<std::int64_t>(i);
  return f;
}

// s!(p-s-g)!/(p-g+1)!, the weight of a size-s coalition for a single player.
inline Rational feature_weight_exact(std::size_t s, std::size_t p, std::size_t g) {
  if (g < 1 || p < g) throw Error(ErrorCode::kOutOfRange, "need 1 <= g <= p");
  const std::size_t k = p - g + 1;
  if (s > k - 1)
    throw Error(ErrorCode::kOutOfRange,
                "coalition size " + std::to_string(s) + " outside [0, " + std::to_string(k - 1) + "]");
  return Rational(factorial(s), 1) * Rational(factorial(p - s - g), factorial(p - g + 1));
}

// s!(p-s-g-1)!/(p-g+1)!, the weight of a size-s coalition in the GEO x
// feature synergy sum. Requires at least one non-spatial feature.
inline Rational interaction_weight_exact(std::size_t s, std::size_t p, std::size_t g) {
  if (g < 1 || p < g + 1) throw Error(ErrorCode::kOutOfRange, "need 1 <= g < p");
  const std::size_t k = p - g + 1;
  if (s > k - 2)
    throw Error(ErrorCode::kOutOfRange,
                "coalition size " + std::to_string(s) + " outside [0, " + std::to_string(k - 2) + "]");
  return Rational(factorial(s), 1) * Rational(factorial(p - s - g - 1), factorial(p - g + 1));
}

inline double coalition_weight_feature(std::size_t s, std::size_t p, std::size_t g) {
  return boost::rational_cast<double>(feature_weight_exact(s, p, g));
}

inline double coalition_weight_interaction(std::size_t s, std::size_t p, std::size_t g) {
  return boost::rational_cast<double>(interaction_weight_exact(s, p, g));
}

// ---------------------------------------------------------------------------
// Background set and the interventional value function.

struct BackgroundSet {
  Matrix rows;
  std::string provenance = "user-supplied";
  std::uint64_t seed = 0;

  std::size_t m() const { return rows.rows(); }
};

// Seeded uniform subsample without replacement; all rows when m >= n.
inline BackgroundSet subsample_background(const Matrix& data, std::size_t m, std::uint64_t seed) {
  if (data.rows() == 0 || m == 0)
    throw Error(ErrorCode::kOutOfRange, "background needs at least one row");
  std::vector<std::size_t> order(data.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (m < data.rows()) {
    Rng rng(derive_seed(seed, "background"));
    rng.shuffle(std::span<std::size_t>(order));
    order.resize(m);
    std::sort(order.begin(), order.end());
  }
  return BackgroundSet{data.select_rows(order), "subsample", seed};
}

namespace detail {

inline void check_inputs(const Predictor& pred, std::span<const double> x,
                         const BackgroundSet& bg, const CoalitionSpace& cs) {
  if (bg.m() == 0) throw Error(ErrorCode::kOutOfRange, "empty background set");
  if (x.size() != cs.p || bg.rows.cols() != cs.p)
    throw Error(ErrorCode::kArityMismatch, "instance/background width does not match p=" +
                                               std::to_string(cs.p));
  if (pred.arity() != cs.p)
    throw Error(ErrorCode::kArityMismatch, "predictor arity " + std::to_string(pred.arity()) +
                                               " != p=" + std::to_string(cs.p));
}

inline double predict_one(const Predictor& pred, std::span<const double> x) {
  Matrix row(1, x.size());
  std::copy(x.begin(), x.end(), row.row(0).begin());
  const auto y = pred.predict(row);
  if (y.size() != 1) throw Error(ErrorCode::kPredictorFailure, "predictor returned wrong length");
  return y[0];
}

// Evaluates the value function for a list of coalitions, batching up to
// max_rows spliced rows per predictor call. Each coalition's background
// average is accumulated in background-row order.
inline std::vector<double> evaluate_coalitions(const Predictor& pred, std::span<const double> x,
                                               const BackgroundSet& bg, const CoalitionSpace& cs,
                                               std::span<const std::uint64_t> masks,
                                               std::size_t max_rows = 1 << 16) {
  const std::size_t m = bg.m();
  const std::size_t full = (std::uint64_t{1} << cs.players()) - 1;
  std::vector<double> values(masks.size(), 0.0);
  const std::size_t per_batch = std::max<std::size_t>(1, max_rows / m);
  std::vector<char> flags;
  std::vector<std::size_t> pending;
  std::optional<double> yhat;
  for (std::size_t start = 0; start < masks.size(); start += per_batch) {
    const std::size_t stop = std::min(masks.size(), start + per_batch);
    pending.clear();
    for (std::size_t i = start; i < stop; ++i) {
      if (masks[i] == full) {
        if (!yhat) yhat = predict_one(pred, x);
        values[i] = *yhat;
      } else {
        pending.push_back(i);
      }
    }
    if (pending.empty()) continue;
    Matrix batch(pending.size() * m, cs.p);
    for (std::size_t b = 0; b < pending.size(); ++b) {
      cs.column_flags(masks[pending[b]], flags);
      for (std::size_t r = 0; r < m; ++r) {
        auto out = batch.row(b * m + r);
        const auto background = bg.rows.row(r);
        for (std::size_t c = 0; c < cs.p; ++c) out[c] = flags[c] ? x[c] : background[c];
      }
    }
    std::vector<double> y;
    try {
      y = pred.predict(batch);
    } catch (const Error& e) {
      throw Error(e.code(), std::string(e.what()) + " (while evaluating coalitions " +
                                std::to_string(start) + ".." + std::to_string(stop - 1) + ")");
    }
    if (y.size() != batch.rows())
      throw Error(ErrorCode::kPredictorFailure, "predictor returned " + std::to_string(y.size()) +
                                                    " values for " + std::to_string(batch.rows()) +
                                                    " rows");
    for (std::size_t b = 0; b < pending.size(); ++b) {
      double sum = 0.0;
      for (std::size_t r = 0; r < m; ++r) sum += y[b * m + r];
      values[pending[b]] = sum / static_cast<double>(m);
    }
  }
  return values;
}

}  // namespace detail

// f(S): mean over background rows of the prediction on a row that takes the
// instance's columns for players in S and the background row's elsewhere.
// The full coalition returns pred(x) itself.
inline double eval_coalition(const Predictor& pred, std::span<const double> x,
                             std::uint64_t coalition, const BackgroundSet& bg,
                             const CoalitionSpace& cs) {
  detail::check_inputs(pred, x, bg, cs);
  if (cs.players() < 64 && (coalition >> cs.players()) != 0)
    throw Error(ErrorCode::kOutOfRange, "coalition references unknown players");
  const std::uint64_t masks[] = {coalition};
  return detail::evaluate_coalitions(pred, x, bg, cs, masks)[0];
}

// ---------------------------------------------------------------------------
// Explanation records.

enum class Estimator { kExact, kSampled };

inline std::string estimator_name(Estimator e) { return e == Estimator::kExact ? "exact" : "sampled"; }

struct ExplanationRecord {
  std::string id;
  std::vector<double> x;         // full instance row (p columns)
  std::vector<double> location;  // geo column values
  double phi0 = 0.0;
  double phi_geo = 0.0;
  std::vector<double> phi;        // per non-spatial feature
  std::vector<double> phi_geo_x;  // per non-spatial feature
  double yhat = 0.0;
  double residual = 0.0;
  Estimator estimator = Estimator::kExact;
  std::uint64_t budget = 0;
};

// yhat - (phi0 + phi_geo + sum phi + sum phi_geo_x), summed in that order.
inline double additivity_residual(const ExplanationRecord& r) {
  double total = r.phi0 + r.phi_geo;
  for (const double v : r.phi) total += v;
  for (const double v : r.phi_geo_x) total += v;
  return r.yhat - total;
}

namespace detail {
inline ExplanationRecord blank_record(std::span<const double> x, const CoalitionSpace& cs) {
  ExplanationRecord rec;
  rec.x.assign(x.begin(), x.end());
  for (const auto c : cs.geo_columns) rec.location.push_back(x[c]);
  rec.phi.assign(cs.players() - 1, 0.0);
  rec.phi_geo_x.assign(cs.players() - 1, 0.0);
  return rec;
}
}  // namespace detail

inline constexpr std::size_t kDefaultExactCap = 15;

// Exact enumeration over all 2^k coalitions of the merged-GEO game:
//   phi_j      = sum_{S not containing j}   w(s)  [f(S+j) - f(S)]
//   phi_GEO    = sum_{S not containing GEO} w(s)  [f(S+GEO) - f(S)]
//   phi_GEO,j  = sum_{S without GEO, j}     w'(s) [f(S+GEO+j) - f(S+GEO) - f(S+j) + f(S)]
// with w(s) = s!(p-s-g)!/(p-g+1)! and w'(s) = s!(p-s-g-1)!/(p-g+1)!. The
// additivity residual is reported, not absorbed: it is zero for GEO-separable
// models and generally nonzero when location interacts with features.
inline ExplanationRecord explain_exact(const Predictor& pred, std::span<const double> x,
                                       const BackgroundSet& bg, const CoalitionSpace& cs,
                                       std::size_t cap = kDefaultExactCap) {
  detail::check_inputs(pred, x, bg, cs);
  const std::size_t k = cs.players();
  if (cap > kMaxFactorial) cap = kMaxFactorial;
  if (k > cap)
    throw Error(ErrorCode::kCapExceeded,
                "k=" + std::to_string(k) + " players exceeds the exact-mode cap of " +
                    std::to_string(cap) + "; use the sampled estimator (--mode sampled)");
  const std::uint64_t n_coalitions = std::uint64_t{1} << k;
  std::vector<std::uint64_t> masks(n_coalitions);
  std::iota(masks.begin(), masks.end(), std::uint64_t{0});
  const auto v = detail::evaluate_coalitions(pred, x, bg, cs, masks);

  std::vector<double> w(k), w_int(k > 1 ? k - 1 : 0);
  for (std::size_t s = 0; s < k; ++s) w[s] = coalition_weight_feature(s, cs.p, cs.g());
  for (std::size_t s = 0; s + 1 < k; ++s) w_int[s] = coalition_weight_interaction(s, cs.p, cs.g());

  auto rec = detail::blank_record(x, cs);
  rec.estimator = Estimator::kExact;
  rec.budget = n_coalitions;
  rec.phi0 = v[0];
  rec.yhat = v[n_coalitions - 1];

  auto shapley = [&](std::size_t player) {
    const std::uint64_t bit = std::uint64_t{1} << player;
    double sum = 0.0;
    for (std::uint64_t s = 0; s < n_coalitions; ++s)
      if (!(s & bit)) sum += w[static_cast<std::size_t>(std::popcount(s))] * (v[s | bit] - v[s]);
    return sum;
  };
  const std::uint64_t geo_bit = std::uint64_t{1} << cs.geo_player();
  for (std::size_t j = 0; j + 1 < k; ++j) {
    rec.phi[j] = shapley(j);
    const std::uint64_t bit = std::uint64_t{1} << j;
    double sum = 0.0;
    for (std::uint64_t s = 0; s < n_coalitions; ++s) {
      if (s & (bit | geo_bit)) continue;
      const double delta = v[s | bit | geo_bit] - v[s | geo_bit] - v[s | bit] + v[s];
      sum += w_int[static_cast<std::size_t>(std::popcount(s))] * delta;
    }
    rec.phi_geo_x[j] = sum;
  }
  rec.phi_geo = shapley(cs.geo_player());
  rec.residual = additivity_residual(rec);
  return rec;
}

// ---------------------------------------------------------------------------
// Sampled constrained-regression estimator.

struct SampledOptions {
  std::uint64_t budget = 0;  // coalition evaluations, including empty and full
  double solver_tol = 1e-8;
  std::uint64_t seed = 0;
};

namespace detail {

inline double binomial(std::size_t n, std::size_t r) {
  double out = 1.0;
  for (std::size_t i = 1; i <= r; ++i) out = out * static_cast<double>(n - r + i) / static_cast<double>(i);
  return out;
}

struct WeightedPattern {
  std::uint64_t mask;
  double weight;
};

// Chooses up to `slots` interior coalitions (neither empty nor full) with
// Shapley-kernel weights. Complementary size pairs are enumerated outright,
// extreme sizes first, while the budget covers them; the rest of the budget
// is filled by paired random sampling proportional to the remaining kernel
// mass, with each sampled pattern weighted by its draw frequency.
inline std::vector<WeightedPattern> select_patterns(std::size_t k, std::uint64_t slots, Rng& rng) {
  std::vector<WeightedPattern> out;
  if (k < 2) return out;
  std::vector<double> size_mass(k, 0.0);
  for (std::size_t s = 1; s < k; ++s)
    size_mass[s] = static_cast<double>(k - 1) / static_cast<double>(s * (k - s));
  double remaining_mass = std::accumulate(size_mass.begin(), size_mass.end(), 0.0);
  double remaining_slots = static_cast<double>(slots);

  auto enumerate_size = [&](std::size_t s) {
    const double per_pattern = size_mass[s] / binomial(k, s);
    const std::uint64_t full = (std::uint64_t{1} << k) - 1;
    if (k <= 30) {
      for (std::uint64_t mask = 1; mask < full; ++mask)
        if (static_cast<std::size_t>(std::popcount(mask)) == s) out.push_back({mask, per_pattern});
    }
  };

  std::size_t first_open = 1;
  for (std::size_t s = 1; s <= k / 2; ++s) {
    const bool paired = s != k - s;
    const double count = binomial(k, s) * (paired ? 2.0 : 1.0);
    const double pair_mass = size_mass[s] + (paired ? size_mass[k - s] : 0.0);
    if (k > 30 || count > remaining_slots ||
        remaining_slots * pair_mass / remaining_mass < count - 1e-9)
      break;
    enumerate_size(s);
    if (paired) enumerate_size(k - s);
    remaining_slots -= count;
    remaining_mass -= pair_mass;
    first_open = s + 1;
  }

  if (first_open > k / 2 || remaining_slots < 1.0) return out;

  // Sizes still open: first_open .. k - first_open.
  std::vector<std::size_t> open_sizes;
  std::vector<double> cumulative;
  double acc = 0.0;
  for (std::size_t s = first_open; s <= k - first_open; ++s) {
    open_sizes.push_back(s);
    acc += size_mass[s];
    cumulative.push_back(acc);
  }
  const auto target = static_cast<std::size_t>(remaining_slots);
  std::map<std::uint64_t, std::size_t> counts;
  std::vector<std::uint64_t> order;  // first-seen order, for determinism
  std::size_t draws = 0;
  std::vector<std::size_t> players(k);
  const std::uint64_t full = k == 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << k) - 1;
  const std::size_t max_draws = 64 * target + 1024;
  for (std::size_t attempt = 0; attempt < max_draws && order.size() < target; ++attempt) {
    const double u = rng.uniform() * acc;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    const std::size_t s = open_sizes[std::min<std::size_t>(
        static_cast<std::size_t>(it - cumulative.begin()), open_sizes.size() - 1)];
    std::iota(players.begin(), players.end(), std::size_t{0});
    std::uint64_t mask = 0;
    for (std::size_t i = 0; i < s; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(k - i));
      std::swap(players[i], players[j]);
      mask |= std::uint64_t{1} << players[i];
    }
    for (const std::uint64_t pattern : {mask, full & ~mask}) {
      if (order.size() >= target && !counts.count(pattern)) continue;
      if (counts[pattern]++ == 0) order.push_back(pattern);
      ++draws;
    }
  }
  for (const auto pattern : order)
    out.push_back({pattern, remaining_mass * static_cast<double>(counts[pattern]) /
                                static_cast<double>(draws)});
  return out;
}

}  // namespace detail

inline std::uint64_t min_sampled_budget(std::size_t k) { return 2 * k + 2; }

// Regresses f(z) - phi0 on [z_j, z_GEO, z_GEO * z_j] by Shapley-kernel weighted
// least squares subject to sum(coefficients) = yhat - phi0, so the additive
// decomposition holds to solver_tol. The constraint is eliminated through the
// GEO coefficient. Deterministic given the seed.
inline ExplanationRecord explain_sampled(const Predictor& pred, std::span<const double> x,
                                         const BackgroundSet& bg, const CoalitionSpace& cs,
                                         const SampledOptions& options) {
  detail::check_inputs(pred, x, bg, cs);
  const std::size_t k = cs.players();
  if (k > 62) throw Error(ErrorCode::kOutOfRange, "sampled estimator supports at most 62 players");
  if (options.budget < min_sampled_budget(k))
    throw Error(ErrorCode::kInvalidBudget,
                "budget " + std::to_string(options.budget) + " is below the minimum 2k+2=" +
                    std::to_string(min_sampled_budget(k)) + " for k=" + std::to_string(k) +
                    "; raise --budget");

  auto rec = detail::blank_record(x, cs);
  rec.estimator = Estimator::kSampled;
  rec.budget = options.budget;
  const std::uint64_t full = (std::uint64_t{1} << k) - 1;
  {
    const std::uint64_t ends[] = {0, full};
    const auto v = detail::evaluate_coalitions(pred, x, bg, cs, ends);
    rec.phi0 = v[0];
    rec.yhat = v[1];
  }
  const double total = rec.yhat - rec.phi0;

  if (k == 1) {
    rec.phi_geo = total;
    rec.residual = additivity_residual(rec);
    return rec;
  }

  Rng rng(options.seed);
  const auto patterns = detail::select_patterns(k, options.budget - 2, rng);
  std::vector<std::uint64_t> masks;
  masks.reserve(patterns.size());
  for (const auto& pt : patterns) masks.push_back(pt.mask);
  const auto values = detail::evaluate_coalitions(pred, x, bg, cs, masks);

  // Unknowns after eliminating the GEO main effect:
  //   [a_0 .. a_{k-2}, c_0 .. c_{k-2}]  (main effects, then GEO synergies)
  const std::size_t scalars = k - 1;
  const std::size_t cols = 2 * scalars;
  const std::size_t geo = cs.geo_player();
  Eigen::MatrixXd design(static_cast<Eigen::Index>(patterns.size()), static_cast<Eigen::Index>(cols));
  Eigen::VectorXd target(static_cast<Eigen::Index>(patterns.size()));
  for (std::size_t i = 0; i < patterns.size(); ++i) {
    const auto mask = patterns[i].mask;
    const double root_w = std::sqrt(patterns[i].weight);
    const double z_geo = static_cast<double>(mask >> geo & 1U);
    for (std::size_t j = 0; j < scalars; ++j) {
      const double z = static_cast<double>(mask >> j & 1U);
      design(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = root_w * (z - z_geo);
      design(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(scalars + j)) =
          root_w * (z * z_geo - z_geo);
    }
    target(static_cast<Eigen::Index>(i)) = root_w * (values[i] - rec.phi0 - z_geo * total);
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  if (patterns.size() < cols || qr.rank() < static_cast<Eigen::Index>(cols))
    throw Error(ErrorCode::kSingularSystem,
                "coalition design is rank deficient (" + std::to_string(patterns.size()) +
                    " patterns for " + std::to_string(cols) +
                    " unknowns); increase the budget or use exact mode");
  const Eigen::VectorXd theta = qr.solve(target);
  for (std::size_t j = 0; j < scalars; ++j) {
    rec.phi[j] = theta(static_cast<Eigen::Index>(j));
    rec.phi_geo_x[j] = theta(static_cast<Eigen::Index>(scalars + j));
  }
  double others = 0.0;
  for (std::size_t j = 0; j < scalars; ++j) others += rec.phi[j];
  for (std::size_t j = 0; j < scalars; ++j) others += rec.phi_geo_x[j];
  rec.phi_geo = total - others;
  // Absorb floating-point rounding of the elimination into the GEO term.
  rec.phi_geo += additivity_residual(rec);
  rec.residual = additivity_residual(rec);
  if (!(std::abs(rec.residual) <= options.solver_tol))
    throw Error(ErrorCode::kSingularSystem, "constrained solve missed tolerance: residual " +
                                                format_double(rec.residual));
  return rec;
}

// ---------------------------------------------------------------------------
// Classic Shapley values: every column, coordinates included, is a player.

struct ClassicRecord {
  double phi0 = 0.0;
  std::vector<double> phi;  // one per column
  double yhat = 0.0;
  double residual = 0.0;    // yhat - (phi0 + sum phi)
};

inline ClassicRecord shap_classic(const Predictor& pred, std::span<const double> x,
                                  const BackgroundSet& bg, std::size_t cap = kDefaultExactCap) {
  const std::size_t p = x.size();
  if (bg.m() == 0) throw Error(ErrorCode::kOutOfRange, "empty background set");
  if (bg.rows.cols() != p || pred.arity() != p)
    throw Error(ErrorCode::kArityMismatch, "instance/background/predictor widths differ");
  if (cap > kMaxFactorial) cap = kMaxFactorial;
  if (p > cap)
    throw Error(ErrorCode::kCapExceeded, "p=" + std::to_string(p) + " exceeds the exact-mode cap");
  const std::uint64_t n = std::uint64_t{1} << p;
  const std::uint64_t full = n - 1;
  std::vector<double> v(n);
  v[full] = detail::predict_one(pred, x);
  const std::size_t m = bg.m();
  const std::uint64_t per_batch = std::max<std::uint64_t>(1, (std::uint64_t{1} << 16) / m);
  for (std::uint64_t start = 0; start < full; start += per_batch) {
    const std::uint64_t stop = std::min(full, start + per_batch);
    Matrix batch(static_cast<std::size_t>(stop - start) * m, p);
    for (std::uint64_t s = start; s < stop; ++s)
      for (std::size_t r = 0; r < m; ++r) {
        auto out = batch.row(static_cast<std::size_t>(s - start) * m + r);
        for (std::size_t c = 0; c < p; ++c) out[c] = (s >> c & 1U) ? x[c] : bg.rows(r, c);
      }
    const auto y = pred.predict(batch);
    for (std::uint64_t s = start; s < stop; ++s) {
      double sum = 0.0;
      for (std::size_t r = 0; r < m; ++r) sum += y[static_cast<std::size_t>(s - start) * m + r];
      v[s] = sum / static_cast<double>(m);
    }
  }
  ClassicRecord rec;
  rec.phi0 = v[0];
  rec.yhat = v[full];
  rec.phi.assign(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    const std::uint64_t bit = std::uint64_t{1} << j;
    for (std::uint64_t s = 0; s < n; ++s) {
      if (s & bit) continue;
      const auto size = static_cast<std::size_t>(std::popcount(s));
      const Rational w(factorial(size) * factorial(p - size - 1), factorial(p));
      rec.phi[j] += boost::rational_cast<double>(w) * (v[s | bit] - v[s]);
    }
  }
  double total = rec.phi0;
  for (const double f : rec.phi) total += f;
  rec.residual = rec.yhat - total;
  return rec;
}

// ---------------------------------------------------------------------------
// Batch driver.

struct EngineOptions {
  Estimator estimator = Estimator::kExact;
  std::size_t cap = kDefaultExactCap;
  std::uint64_t budget = 0;  // sampled mode; 0 means the full pattern set, max(2^k, 2k+2)
  double solver_tol = 1e-8;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

inline ExplanationRecord explain_one(const Predictor& pred, std::span<const double> x,
                                     const BackgroundSet& bg, const CoalitionSpace& cs,
                                     const EngineOptions& options, std::size_t instance_index) {
  if (options.estimator == Estimator::kExact) return explain_exact(pred, x, bg, cs, options.cap);
  SampledOptions so;
  so.budget = options.budget;
  if (so.budget == 0) {
    if (cs.players() > 62) throw Error(ErrorCode::kInvalidBudget, "sampled mode needs an explicit budget");
    so.budget = std::max(std::uint64_t{1} << cs.players(), min_sampled_budget(cs.players()));
  }
  so.solver_tol = options.solver_tol;
  so.seed = derive_seed(options.seed, "sampled", instance_index);
  return explain_sampled(pred, x, bg, cs, so);
}

// Explains every row of `instances`; instances are independent, so they run
// on options.workers threads with results stored by row index.
inline std::vector<ExplanationRecord> explain_all(const Predictor& pred, const Matrix& instances,
                                                  std::span<const std::string> ids,
                                                  const BackgroundSet& bg, const CoalitionSpace& cs,
                                                  const EngineOptions& options) {
  std::vector<ExplanationRecord> out(instances.rows());
  parallel_for(instances.rows(), options.workers, [&](std::size_t i) {
    out[i] = explain_one(pred, instances.row(i), bg, cs, options, i);
    out[i].id = i < ids.size() ? ids[i] : std::to_string(i);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Explanation CSV and JSON sidecar.

inline void write_explanations_csv(std::ostream& out, const std::vector<ExplanationRecord>& records,
                                   const Schema& schema, const std::string& run_id = {}) {
  const auto names = schema.nonspatial_names();
  if (!run_id.empty()) out << "# run_id=" << run_id << "\n";
  out << "id";
  for (const auto& g : schema.geo_names) out << ',' << g;
  out << ",yhat,phi0,phi_geo";
  for (const auto& n : names) out << ",phi_" << n;
  for (const auto& n : names) out << ",phi_geo_x_" << n;
  out << ",residual,estimator,budget\n";
  for (const auto& r : records) {
    out << r.id;
    for (const double v : r.location) out << ',' << format_double(v);
    out << ',' << format_double(r.yhat) << ',' << format_double(r.phi0) << ','
        << format_double(r.phi_geo);
    for (const double v : r.phi) out << ',' << format_double(v);
    for (const double v : r.phi_geo_x) out << ',' << format_double(v);
    out << ',' << format_double(r.residual) << ',' << estimator_name(r.estimator) << ','
        << r.budget << '\n';
  }
}

// Reads records written by write_explanations_csv. The instance rows (x) are
// not part of the file; callers join them from the dataset by id.
inline std::vector<ExplanationRecord> read_explanations_csv(std::istream& in, const Schema& schema) {
  const auto names = schema.nonspatial_names();
  std::string line;
  do {
    if (!detail::getline_csv(in, line))
      throw Error(ErrorCode::kMalformedCsv, "explanation file has no header");
  } while (!line.empty() && line.front() == '#');
  const auto header = detail::split_csv_record(line);
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < header.size(); ++i) pos[header[i]] = i;
  auto col = [&](const std::string& name) {
    const auto it = pos.find(name);
    if (it == pos.end()) throw Error(ErrorCode::kMissingColumn, name);
    return it->second;
  };
  auto number = [&](const std::vector<std::string>& f, std::size_t c, std::size_t line_no) {
    const auto v = parse_double(f[c]);
    if (!v) throw Error(ErrorCode::kMalformedCsv, "line " + std::to_string(line_no) + ": bad number");
    return *v;
  };
  std::vector<ExplanationRecord> out;
  std::size_t line_no = 1;
  while (detail::getline_csv(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto f = detail::split_csv_record(line);
    if (f.size() != header.size())
      throw Error(ErrorCode::kMalformedCsv, "line " + std::to_string(line_no) + ": field count");
    ExplanationRecord r;
    r.id = f[col("id")];
    for (const auto& g : schema.geo_names) r.location.push_back(number(f, col(g), line_no));
    r.yhat = number(f, col("yhat"), line_no);
    r.phi0 = number(f, col("phi0"), line_no);
    r.phi_geo = number(f, col("phi_geo"), line_no);
    for (const auto& n : names) r.phi.push_back(number(f, col("phi_" + n), line_no));
    for (const auto& n : names) r.phi_geo_x.push_back(number(f, col("phi_geo_x_" + n), line_no));
    r.residual = number(f, col("residual"), line_no);
    r.estimator = f[col("estimator")] == "sampled" ? Estimator::kSampled : Estimator::kExact;
    r.budget = static_cast<std::uint64_t>(number(f, col("budget"), line_no));
    out.push_back(std::move(r));
  }
  return out;
}

struct ExplainMetadata {
  std::string run_id;
  std::uint64_t seed = 0;
  std::string background_provenance;
  std::size_t m = 0;
  std::size_t k = 0;
  std::size_t cap = kDefaultExactCap;
  double solver_tol = 1e-8;
  Estimator estimator = Estimator::kExact;
  std::uint64_t budget = 0;
};

inline nlohmann::ordered_json to_json(const ExplainMetadata& md) {
  return {{"engine_version", kEngineVersion},
          {"run_id", md.run_id},
          {"seed", md.seed},
          {"background_provenance", md.background_provenance},
          {"m", md.m},
          {"k", md.k},
          {"cap", md.cap},
          {"solver_tol", md.solver_tol},
          {"estimator", estimator_name(md.estimator)},
          {"budget", md.budget},
          {"value_function", "interventional"}};
}

}  // namespace geoxai

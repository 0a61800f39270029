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

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "geoxai/error.hpp"
#include "geoxai/parallel.hpp"
#include "geoxai/tabular.hpp"

namespace geoxai {

namespace detail {
inline void check_pair(std::span<const double> y, std::span<const double> yhat) {
  if (y.size() != yhat.size())
    throw Error(ErrorCode::kLengthMismatch, std::to_string(y.size()) + " observations vs " +
                                                std::to_string(yhat.size()) + " predictions");
  if (y.empty()) throw Error(ErrorCode::kEmptyInput, "metric over zero samples");
}
}  // namespace detail

inline double mae(std::span<const double> y, std::span<const double> yhat) {
  detail::check_pair(y, yhat);
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) sum += std::abs(y[i] - yhat[i]);
  return sum / static_cast<double>(y.size());
}

inline double mse(std::span<const double> y, std::span<const double> yhat) {
  detail::check_pair(y, yhat);
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = y[i] - yhat[i];
    sum += e * e;
  }
  return sum / static_cast<double>(y.size());
}

inline double r2(std::span<const double> y, std::span<const double> yhat) {
  detail::check_pair(y, yhat);
  double mean = 0.0;
  for (const double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    ss_res += (y[i] - yhat[i]) * (y[i] - yhat[i]);
    ss_tot += (y[i] - mean) * (y[i] - mean);
  }
  if (ss_tot == 0.0) throw Error(ErrorCode::kZeroVariance, "all observations are equal");
  return 1.0 - ss_res / ss_tot;
}

enum class LossKind { kMae, kMse };

inline std::string loss_name(LossKind loss) { return loss == LossKind::kMae ? "mae" : "mse"; }

inline LossKind parse_loss(const std::string& name) {
  if (name == "mae") return LossKind::kMae;
  if (name == "mse") return LossKind::kMse;
  throw Error(ErrorCode::kInvalidConfig, "unknown loss '" + name + "' (expected mae|mse)");
}

struct MetricReport {
  double mae = 0.0;
  double mse = 0.0;
  // Absent when the observations have zero variance (e.g. single-row folds).
  std::optional<double> r2;
  std::size_t n = 0;

  double loss(LossKind kind) const { return kind == LossKind::kMae ? mae : mse; }
};

inline MetricReport evaluate(std::span<const double> y, std::span<const double> yhat) {
  MetricReport report;
  report.mae = geoxai::mae(y, yhat);
  report.mse = geoxai::mse(y, yhat);
  report.n = y.size();
  try {
    report.r2 = geoxai::r2(y, yhat);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kZeroVariance) throw;
  }
  return report;
}

struct CvReport {
  std::vector<MetricReport> folds;
  MetricReport pooled;
  std::vector<double> oof_predictions;
};

// Trainer: (training subset) -> fitted model. Scorer: (model, rows) -> predictions.
template <class Model>
using TrainFn = std::function<Model(const Dataset&)>;
template <class Model>
using PredictFn = std::function<std::vector<double>(const Model&, const Matrix&)>;

// Out-of-fold predictions are written into row-indexed slots, then pooled
// metrics are computed once on the assembled vector.
template <class Model>
CvReport cv_score(const Dataset& ds, const FoldPlan& folds, const TrainFn<Model>& train_fn,
                  const PredictFn<Model>& predict_fn, std::size_t workers = 1) {
  if (folds.assignments.size() != ds.n())
    throw Error(ErrorCode::kLengthMismatch, "fold plan does not cover the dataset");
  CvReport report;
  report.folds.resize(folds.k);
  report.oof_predictions.assign(ds.n(), 0.0);
  parallel_for(folds.k, workers, [&](std::size_t fold) {
    const auto train_rows = folds.train_rows(fold);
    const auto test_rows = folds.test_rows(fold);
    const Model model = train_fn(ds.subset(train_rows));
    const auto test = ds.subset(test_rows);
    const auto yhat = predict_fn(model, test.rows);
    for (std::size_t i = 0; i < test_rows.size(); ++i)
      report.oof_predictions[test_rows[i]] = yhat[i];
    report.folds[fold] = evaluate(test.response, yhat);
  });
  report.pooled = evaluate(ds.response, report.oof_predictions);
  return report;
}

inline std::string to_key_value(const MetricReport& r) {
  std::ostringstream out;
  out << "mae=" << format_double(r.mae) << "\n"
      << "mse=" << format_double(r.mse) << "\n"
      << "r2=" << (r.r2 ? format_double(*r.r2) : std::string()) << "\n"
      << "n=" << r.n << "\n";
  return out.str();
}

inline std::string metrics_csv_header() { return "run_id,fold,mae,mse,r2,n\n"; }

inline std::string metrics_csv_row(const std::string& run_id, const std::string& fold,
                                   const MetricReport& r) {
  return run_id + "," + fold + "," + format_double(r.mae) + "," + format_double(r.mse) + "," +
         (r.r2 ? format_double(*r.r2) : std::string()) + "," + std::to_string(r.n) + "\n";
}

inline std::string to_csv(const std::string& run_id, const CvReport& cv) {
  std::string out = metrics_csv_header();
  for (std::size_t f = 0; f < cv.folds.size(); ++f)
    out += metrics_csv_row(run_id, std::to_string(f), cv.folds[f]);
  out += metrics_csv_row(run_id, "pooled", cv.pooled);
  return out;
}

}  // namespace geoxai

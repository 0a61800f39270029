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
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "geoxai/error.hpp"
#include "geoxai/geoshapley.hpp"
#include "geoxai/parallel.hpp"
#include "geoxai/rng.hpp"
#include "geoxai/tabular.hpp"

namespace geoxai {

namespace detail {

// Sum of values in ascending order: independent of input order, bit for bit.
inline double order_free_sum(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (const double v : values) sum += v;
  return sum;
}

inline double order_free_mean_abs(const std::vector<double>& values) {
  std::vector<double> abs_values(values.size());
  std::transform(values.begin(), values.end(), abs_values.begin(),
                 [](double v) { return std::abs(v); });
  return order_free_sum(std::move(abs_values)) / static_cast<double>(values.size());
}

inline void require_records(const std::vector<ExplanationRecord>& records) {
  if (records.empty()) throw Error(ErrorCode::kEmptyRecords, "no explanation records");
}

inline std::size_t nonspatial_position(const Schema& schema, const std::string& feature) {
  const auto names = schema.nonspatial_names();
  const auto it = std::find(names.begin(), names.end(), feature);
  if (it == names.end())
    throw Error(ErrorCode::kUnknownFeature, "'" + feature + "' is not a non-spatial feature");
  return static_cast<std::size_t>(it - names.begin());
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Importance split: location-invariant (mean |phi_j|) vs location-varying
// (mean |phi_GEO,j|) parts per feature.

struct FeatureImportance {
  std::string name;
  double mean_abs_phi = 0.0;
  double mean_abs_phi_geo_x = 0.0;
  double total = 0.0;
  std::size_t rank = 0;  // 1-based
};

struct ImportanceSplit {
  std::vector<FeatureImportance> features;  // feature order
  std::vector<std::size_t> ranking;         // feature positions, best first
  double geo_mean_abs = 0.0;                // mean |phi_GEO|
  std::size_t top_n = 8;
  double invariant_total = 0.0;  // sum of invariant parts over the top_n features
  double varying_total = 0.0;    // sum of varying parts over the top_n features
};

inline ImportanceSplit importance_split(const std::vector<ExplanationRecord>& records,
                                        const std::vector<std::string>& feature_names,
                                        std::size_t top_n = 8) {
  detail::require_records(records);
  const std::size_t q = feature_names.size();
  ImportanceSplit out;
  out.top_n = top_n;
  std::vector<double> column(records.size());
  for (std::size_t j = 0; j < q; ++j) {
    FeatureImportance fi;
    fi.name = feature_names[j];
    for (std::size_t i = 0; i < records.size(); ++i) column[i] = records[i].phi.at(j);
    fi.mean_abs_phi = detail::order_free_mean_abs(column);
    for (std::size_t i = 0; i < records.size(); ++i) column[i] = records[i].phi_geo_x.at(j);
    fi.mean_abs_phi_geo_x = detail::order_free_mean_abs(column);
    fi.total = fi.mean_abs_phi + fi.mean_abs_phi_geo_x;
    out.features.push_back(fi);
  }
  for (std::size_t i = 0; i < records.size(); ++i) column[i] = records[i].phi_geo;
  out.geo_mean_abs = detail::order_free_mean_abs(column);

  out.ranking.resize(q);
  std::iota(out.ranking.begin(), out.ranking.end(), std::size_t{0});
  std::stable_sort(out.ranking.begin(), out.ranking.end(), [&](std::size_t a, std::size_t b) {
    return out.features[a].total > out.features[b].total;
  });
  for (std::size_t r = 0; r < q; ++r) out.features[out.ranking[r]].rank = r + 1;
  for (std::size_t r = 0; r < std::min(top_n, q); ++r) {
    out.invariant_total += out.features[out.ranking[r]].mean_abs_phi;
    out.varying_total += out.features[out.ranking[r]].mean_abs_phi_geo_x;
  }
  return out;
}

inline void write_importance_csv(std::ostream& out, const ImportanceSplit& split,
                                 const std::string& run_id = {}) {
  if (!run_id.empty()) out << "# run_id=" << run_id << "\n";
  out << "kind,name,location_invariant,location_varying,total,rank\n";
  for (const auto pos : split.ranking) {
    const auto& f = split.features[pos];
    out << "feature," << f.name << ',' << format_double(f.mean_abs_phi) << ','
        << format_double(f.mean_abs_phi_geo_x) << ',' << format_double(f.total) << ','
        << f.rank << '\n';
  }
  out << "geo,GEO,," << format_double(split.geo_mean_abs) << ','
      << format_double(split.geo_mean_abs) << ",\n";
  out << "donut_total,top" << split.top_n << ',' << format_double(split.invariant_total) << ','
      << format_double(split.varying_total) << ','
      << format_double(split.invariant_total + split.varying_total) << ",\n";
}

// ---------------------------------------------------------------------------
// Background bootstrap of explanation uncertainty.

struct Interval {
  double point = 0.0;
  double low = 0.0;
  double high = 0.0;
  bool significant = false;  // interval excludes zero
};

struct InstanceIntervals {
  std::string id;
  Interval phi_geo;
  std::vector<Interval> phi;
  std::vector<Interval> phi_geo_x;
  std::vector<Interval> total;  // phi_j + phi_GEO,j
};

struct BootstrapResult {
  std::size_t replicates = 0;
  std::size_t failed_replicates = 0;
  double level = 0.95;
  std::uint64_t seed = 0;
  std::vector<InstanceIntervals> instances;
};

struct BootstrapOptions {
  std::size_t replicates = 100;
  double level = 0.95;
  std::uint64_t seed = 0;
  EngineOptions engine;  // estimator settings for every replicate
  std::size_t workers = 1;
};

// Linear-interpolation percentile of sorted data (Hyndman-Fan type 7).
inline double percentile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline bool excludes_zero(double low, double high) { return low > 0.0 || high < 0.0; }

namespace detail {
inline Interval make_interval(double point, std::vector<double> draws, double level) {
  std::sort(draws.begin(), draws.end());
  const double alpha = 1.0 - level;
  Interval iv;
  iv.point = point;
  iv.low = percentile_sorted(draws, alpha / 2.0);
  iv.high = percentile_sorted(draws, 1.0 - alpha / 2.0);
  iv.significant = excludes_zero(iv.low, iv.high);
  return iv;
}
}  // namespace detail

// Resamples background rows with replacement, re-explains every instance per
// replicate, and forms percentile intervals. Replicate r draws from
// derive_seed(seed, "bootstrap", r), so results do not depend on workers.
inline BootstrapResult bootstrap_ci(const Predictor& pred, const Matrix& instances,
                                    std::span<const std::string> ids, const BackgroundSet& bg,
                                    const CoalitionSpace& cs, const BootstrapOptions& options) {
  if (options.replicates < 20)
    throw Error(ErrorCode::kOutOfRange, "bootstrap needs at least 20 replicates");
  if (!(options.level > 0.0 && options.level < 1.0))
    throw Error(ErrorCode::kOutOfRange, "confidence level must be in (0, 1)");
  EngineOptions engine = options.engine;
  engine.workers = 1;
  const auto point = explain_all(pred, instances, ids, bg, cs, engine);

  const std::size_t B = options.replicates;
  std::vector<std::optional<std::vector<ExplanationRecord>>> reps(B);
  parallel_for(B, options.workers, [&](std::size_t r) {
    Rng rng(derive_seed(options.seed, "bootstrap", r));
    BackgroundSet resampled;
    resampled.provenance = "bootstrap";
    resampled.seed = options.seed;
    resampled.rows = Matrix(bg.m(), bg.rows.cols());
    for (std::size_t i = 0; i < bg.m(); ++i) {
      const auto src = bg.rows.row(static_cast<std::size_t>(rng.below(bg.m())));
      std::copy(src.begin(), src.end(), resampled.rows.row(i).begin());
    }
    try {
      reps[r] = explain_all(pred, instances, ids, resampled, cs, engine);
    } catch (const Error&) {
      reps[r].reset();
    }
  });

  BootstrapResult result;
  result.replicates = B;
  result.level = options.level;
  result.seed = options.seed;
  for (const auto& rep : reps)
    if (!rep) ++result.failed_replicates;
  if (result.failed_replicates * 10 > B)
    throw Error(ErrorCode::kBootstrapFailed, std::to_string(result.failed_replicates) + " of " +
                                                 std::to_string(B) + " replicates failed");

  const std::size_t q = cs.players() - 1;
  std::vector<double> draws;
  auto collect = [&](auto&& get) {
    draws.clear();
    for (const auto& rep : reps)
      if (rep) draws.push_back(get(*rep));
    return draws;
  };
  for (std::size_t i = 0; i < point.size(); ++i) {
    InstanceIntervals iv;
    iv.id = point[i].id;
    iv.phi_geo = detail::make_interval(
        point[i].phi_geo, collect([&](const auto& rep) { return rep[i].phi_geo; }), options.level);
    for (std::size_t j = 0; j < q; ++j) {
      iv.phi.push_back(detail::make_interval(
          point[i].phi[j], collect([&](const auto& rep) { return rep[i].phi[j]; }), options.level));
      iv.phi_geo_x.push_back(detail::make_interval(
          point[i].phi_geo_x[j], collect([&](const auto& rep) { return rep[i].phi_geo_x[j]; }),
          options.level));
      iv.total.push_back(detail::make_interval(
          point[i].phi[j] + point[i].phi_geo_x[j],
          collect([&](const auto& rep) { return rep[i].phi[j] + rep[i].phi_geo_x[j]; }),
          options.level));
    }
    result.instances.push_back(std::move(iv));
  }
  return result;
}

inline void write_bootstrap_csv(std::ostream& out, const BootstrapResult& result,
                                const std::vector<std::string>& feature_names,
                                const std::string& run_id = {}) {
  if (!run_id.empty()) out << "# run_id=" << run_id << "\n";
  out << "# method=background-bootstrap replicates=" << result.replicates
      << " failed=" << result.failed_replicates << " level=" << format_double(result.level)
      << " seed=" << result.seed << "\n";
  out << "id,component,point,ci_low,ci_high,significant\n";
  auto row = [&](const std::string& id, const std::string& component, const Interval& iv) {
    out << id << ',' << component << ',' << format_double(iv.point) << ','
        << format_double(iv.low) << ',' << format_double(iv.high) << ','
        << (iv.significant ? 1 : 0) << '\n';
  };
  for (const auto& inst : result.instances) {
    row(inst.id, "phi_geo", inst.phi_geo);
    for (std::size_t j = 0; j < feature_names.size(); ++j) row(inst.id, "phi_" + feature_names[j], inst.phi[j]);
    for (std::size_t j = 0; j < feature_names.size(); ++j)
      row(inst.id, "phi_geo_x_" + feature_names[j], inst.phi_geo_x[j]);
    for (std::size_t j = 0; j < feature_names.size(); ++j)
      row(inst.id, "total_" + feature_names[j], inst.total[j]);
  }
}

// ---------------------------------------------------------------------------
// Partial dependence: per-instance feature value against its attribution.

struct PdpPoint {
  std::string id;
  double x = 0.0;
  double effect = 0.0;
  std::optional<double> ci_low;
  std::optional<double> ci_high;
  std::optional<bool> significant;
};

struct PdpCurve {
  std::string feature;
  bool phi_only = false;
  std::vector<PdpPoint> points;  // nondecreasing x
};

// effect = phi_j + phi_GEO,j by default, or phi_j alone with phi_only. When a
// bootstrap result is supplied its intervals for the same quantity are
// attached, matched by record position.
inline PdpCurve partial_dependence(const std::vector<ExplanationRecord>& records,
                                   const Schema& schema, const std::string& feature,
                                   const BootstrapResult* ci = nullptr, bool phi_only = false) {
  const std::size_t j = detail::nonspatial_position(schema, feature);
  const std::size_t column = schema.index_of(feature);
  if (ci && ci->instances.size() != records.size())
    throw Error(ErrorCode::kLengthMismatch, "bootstrap result does not match the records");
  PdpCurve curve;
  curve.feature = feature;
  curve.phi_only = phi_only;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.x.size() != schema.p())
      throw Error(ErrorCode::kLengthMismatch, "record " + r.id + " carries no instance row");
    PdpPoint pt;
    pt.id = r.id;
    pt.x = r.x[column];
    pt.effect = phi_only ? r.phi[j] : r.phi[j] + r.phi_geo_x[j];
    if (ci) {
      const auto& iv = phi_only ? ci->instances[i].phi[j] : ci->instances[i].total[j];
      pt.ci_low = iv.low;
      pt.ci_high = iv.high;
      pt.significant = iv.significant;
    }
    curve.points.push_back(std::move(pt));
  }
  std::stable_sort(curve.points.begin(), curve.points.end(),
                   [](const PdpPoint& a, const PdpPoint& b) { return a.x < b.x; });
  return curve;
}

inline void write_pdp_csv(std::ostream& out, const PdpCurve& curve, const std::string& run_id = {}) {
  if (!run_id.empty()) out << "# run_id=" << run_id << "\n";
  out << "# feature=" << curve.feature << " effect=" << (curve.phi_only ? "phi" : "phi+phi_geo_x")
      << "\n";
  const bool has_ci = !curve.points.empty() && curve.points.front().ci_low.has_value();
  out << "id,x,effect";
  if (has_ci) out << ",ci_low,ci_high,significant";
  out << '\n';
  for (const auto& p : curve.points) {
    out << p.id << ',' << format_double(p.x) << ',' << format_double(p.effect);
    if (has_ci)
      out << ',' << format_double(*p.ci_low) << ',' << format_double(*p.ci_high) << ','
          << (*p.significant ? 1 : 0);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Spatially varying coefficient surfaces.

enum class MaskReason { kNone, kNearMean, kInsignificant };

inline const char* mask_reason_name(MaskReason r) {
  switch (r) {
    case MaskReason::kNone: return "";
    case MaskReason::kNearMean: return "near-mean denominator";
    case MaskReason::kInsignificant: return "insignificant";
  }
  return "";
}

struct SvcPoint {
  std::string id;
  std::vector<double> location;
  double intercept = 0.0;
  std::vector<std::optional<double>> coefficients;
  std::vector<MaskReason> reasons;
};

struct SvcSurface {
  std::vector<std::string> feature_names;
  std::vector<std::string> geo_names;
  bool intercept_includes_phi0 = false;
  std::vector<SvcPoint> points;
};

struct SvcOptions {
  double mask_sd_fraction = 0.1;
  bool include_phi0 = false;
  // When present, coefficients whose total-effect interval covers zero are
  // masked as insignificant.
  const BootstrapResult* significance = nullptr;
};

// Column means of the background rows for the non-spatial features: the
// centering values used by the coefficient ratio.
inline std::vector<double> background_means(const BackgroundSet& bg, const CoalitionSpace& cs) {
  std::vector<double> means;
  for (const auto c : cs.scalar_columns) {
    double sum = 0.0;
    for (std::size_t r = 0; r < bg.m(); ++r) sum += bg.rows(r, c);
    means.push_back(sum / static_cast<double>(bg.m()));
  }
  return means;
}

// intercept = phi_GEO (+ phi0 when requested); coefficient_j =
// (phi_j + phi_GEO,j) / (x_j - mean_j), masked when |x_j - mean_j| is below
// mask_sd_fraction * sd(x_j) over the records.
inline SvcSurface svc_surface(const std::vector<ExplanationRecord>& records, const Schema& schema,
                              std::span<const double> feature_means, const SvcOptions& options = {}) {
  detail::require_records(records);
  const auto names = schema.nonspatial_names();
  const auto columns = schema.nonspatial_indices();
  if (feature_means.size() != names.size())
    throw Error(ErrorCode::kLengthMismatch, "one mean per non-spatial feature is required");
  if (options.significance && options.significance->instances.size() != records.size())
    throw Error(ErrorCode::kLengthMismatch, "bootstrap result does not match the records");
  for (const auto& r : records) {
    if (r.location.size() != schema.g() || r.location.empty())
      throw Error(ErrorCode::kMissingGeo, "record " + r.id + " has no location");
    if (r.x.size() != schema.p())
      throw Error(ErrorCode::kLengthMismatch, "record " + r.id + " carries no instance row");
  }
  std::vector<double> sd(names.size(), 0.0);
  for (std::size_t j = 0; j < names.size(); ++j) {
    double mean = 0.0;
    for (const auto& r : records) mean += r.x[columns[j]];
    mean /= static_cast<double>(records.size());
    double ss = 0.0;
    for (const auto& r : records) ss += (r.x[columns[j]] - mean) * (r.x[columns[j]] - mean);
    sd[j] = records.size() > 1 ? std::sqrt(ss / static_cast<double>(records.size() - 1)) : 0.0;
  }

  SvcSurface surface;
  surface.feature_names = names;
  surface.geo_names = schema.geo_names;
  surface.intercept_includes_phi0 = options.include_phi0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    SvcPoint pt;
    pt.id = r.id;
    pt.location = r.location;
    pt.intercept = r.phi_geo + (options.include_phi0 ? r.phi0 : 0.0);
    for (std::size_t j = 0; j < names.size(); ++j) {
      const double centered = r.x[columns[j]] - feature_means[j];
      const double limit = options.mask_sd_fraction * sd[j];
      if (std::abs(centered) < limit || centered == 0.0) {
        pt.coefficients.emplace_back();
        pt.reasons.push_back(MaskReason::kNearMean);
      } else if (options.significance && !options.significance->instances[i].total[j].significant) {
        pt.coefficients.emplace_back();
        pt.reasons.push_back(MaskReason::kInsignificant);
      } else {
        pt.coefficients.emplace_back((r.phi[j] + r.phi_geo_x[j]) / centered);
        pt.reasons.push_back(MaskReason::kNone);
      }
    }
    surface.points.push_back(std::move(pt));
  }
  return surface;
}

inline void write_svc_csv(std::ostream& out, const SvcSurface& s, const std::string& run_id = {}) {
  if (!run_id.empty()) out << "# run_id=" << run_id << "\n";
  out << "id";
  for (const auto& g : s.geo_names) out << ',' << g;
  out << ",intercept";
  for (const auto& f : s.feature_names) out << ",coef_" << f << ",mask_" << f;
  out << '\n';
  for (const auto& p : s.points) {
    out << p.id;
    for (const double v : p.location) out << ',' << format_double(v);
    out << ',' << format_double(p.intercept);
    for (std::size_t j = 0; j < s.feature_names.size(); ++j) {
      out << ',' << (p.coefficients[j] ? format_double(*p.coefficients[j]) : std::string());
      out << ',' << mask_reason_name(p.reasons[j]);
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// GeoJSON export. Positions are [x, y] = [lon, lat]; the longitude-like
// coordinate is recognized by name, otherwise geo column 0 is x.

inline std::pair<std::size_t, std::size_t> geojson_axes(const std::vector<std::string>& geo_names) {
  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
  };
  std::optional<std::size_t> x_axis, y_axis;
  for (std::size_t i = 0; i < geo_names.size(); ++i) {
    const auto n = lower(geo_names[i]);
    if (!x_axis && (n == "lon" || n == "lng" || n == "long" || n == "longitude" || n == "x" ||
                    n == "u" || n == "easting"))
      x_axis = i;
    else if (!y_axis && (n == "lat" || n == "latitude" || n == "y" || n == "v" || n == "northing"))
      y_axis = i;
  }
  if (geo_names.size() == 1) return {0, 0};
  if (x_axis && y_axis) return {*x_axis, *y_axis};
  if (x_axis) return {*x_axis, *x_axis == 0 ? 1 : 0};
  if (y_axis) return {*y_axis == 0 ? 1 : 0, *y_axis};
  return {0, 1};
}

namespace detail {
inline nlohmann::ordered_json point_geometry(const std::vector<double>& location,
                                             const std::vector<std::string>& geo_names) {
  const auto [xi, yi] = geojson_axes(geo_names);
  const double x = location.at(xi);
  const double y = geo_names.size() == 1 ? 0.0 : location.at(yi);
  return {{"type", "Point"}, {"coordinates", {x, y}}};
}

inline nlohmann::ordered_json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr);
}

inline void write_json_file(const std::string& path, const nlohmann::ordered_json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path);
  out << j.dump(1) << "\n";
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path);
}
}  // namespace detail

inline nlohmann::ordered_json to_geojson(const SvcSurface& s, const std::string& run_id = {}) {
  nlohmann::ordered_json fc{{"type", "FeatureCollection"}};
  if (!run_id.empty()) fc["run_id"] = run_id;
  auto& features = fc["features"] = nlohmann::ordered_json::array();
  for (const auto& p : s.points) {
    nlohmann::ordered_json props{{"id", p.id}};
    props[s.intercept_includes_phi0 ? "intercept" : "phi_geo"] = detail::finite_or_null(p.intercept);
    for (std::size_t j = 0; j < s.feature_names.size(); ++j) {
      const auto& f = s.feature_names[j];
      props["coef_" + f] = p.coefficients[j] ? detail::finite_or_null(*p.coefficients[j])
                                             : nlohmann::ordered_json(nullptr);
      if (p.reasons[j] != MaskReason::kNone) props["mask_reason_" + f] = mask_reason_name(p.reasons[j]);
    }
    features.push_back({{"type", "Feature"},
                        {"geometry", detail::point_geometry(p.location, s.geo_names)},
                        {"properties", std::move(props)}});
  }
  return fc;
}

inline nlohmann::ordered_json to_geojson(const std::vector<ExplanationRecord>& records,
                                         const Schema& schema, const std::string& run_id = {}) {
  const auto names = schema.nonspatial_names();
  nlohmann::ordered_json fc{{"type", "FeatureCollection"}};
  if (!run_id.empty()) fc["run_id"] = run_id;
  auto& features = fc["features"] = nlohmann::ordered_json::array();
  for (const auto& r : records) {
    if (r.location.size() != schema.g()) throw Error(ErrorCode::kMissingGeo, "record " + r.id);
    nlohmann::ordered_json props{{"id", r.id},
                                 {"yhat", detail::finite_or_null(r.yhat)},
                                 {"phi0", detail::finite_or_null(r.phi0)},
                                 {"phi_geo", detail::finite_or_null(r.phi_geo)}};
    for (std::size_t j = 0; j < names.size(); ++j)
      props["phi_" + names[j]] = detail::finite_or_null(r.phi[j]);
    for (std::size_t j = 0; j < names.size(); ++j)
      props["phi_geo_x_" + names[j]] = detail::finite_or_null(r.phi_geo_x[j]);
    props["residual"] = detail::finite_or_null(r.residual);
    features.push_back({{"type", "Feature"},
                        {"geometry", detail::point_geometry(r.location, schema.geo_names)},
                        {"properties", std::move(props)}});
  }
  return fc;
}

inline void export_geojson(const SvcSurface& surface, const std::string& path,
                           const std::string& run_id = {}) {
  detail::write_json_file(path, to_geojson(surface, run_id));
}

inline void export_geojson(const std::vector<ExplanationRecord>& records, const Schema& schema,
                           const std::string& path, const std::string& run_id = {}) {
  detail::write_json_file(path, to_geojson(records, schema, run_id));
}

}  // namespace geoxai

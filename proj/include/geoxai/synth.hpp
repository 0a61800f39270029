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
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "geoxai/config.hpp"
#include "geoxai/error.hpp"
#include "geoxai/matrix.hpp"
#include "geoxai/predictor.hpp"
#include "geoxai/rng.hpp"
#include "geoxai/tabular.hpp"

// Synthetic spatial datasets with known ground truth.
//
// Spec file (key = value, repeated keys allowed):
//   n = 2000
//   seed = 7
//   domain = umin, vmin, umax, vmax
//   geo = u, v                       coordinate column names
//   response = y
//   feature = x1 uniform -2 2        or: feature = x2 normal <mean> <sd>
//   term = constant 3
//   term = linear x2 1.5
//   term = surface_linear x1 gaussian-bump <base> <amp> <cu> <cv> <sigma>
//   term = geo_interaction x1 plane <a> <b> <c>
//   term = nonlinear x3 hinge <knot> <slope>    or: quadratic <center> <scale>
//   term = geo_only sinusoid <base> <amp> <fu> <fv>
//   noise_sd = 0.5                   absolute noise sd
//   noise_ratio = 0.1                noise sd as a fraction of signal sd
//   response_mean = 55.35            optional affine rescaling of the response
//   response_sd = 102.44
//
// Smooth surfaces over (u, v):
//   plane          a + b u + c v
//   gaussian-bump  base + amp exp(-((u-cu)^2 + (v-cv)^2) / (2 sigma^2))
//   sinusoid       base + amp sin(fu u) cos(fv v)
namespace geoxai {

enum class SmoothFamily { kPlane, kGaussianBump, kSinusoid };

struct Smooth {
  SmoothFamily family = SmoothFamily::kPlane;
  std::vector<double> params;

  double operator()(double u, double v) const {
    switch (family) {
      case SmoothFamily::kPlane:
        return params[0] + params[1] * u + params[2] * v;
      case SmoothFamily::kGaussianBump: {
        const double du = u - params[2], dv = v - params[3];
        return params[0] +
               params[1] * std::exp(-(du * du + dv * dv) / (2.0 * params[4] * params[4]));
      }
      case SmoothFamily::kSinusoid:
        return params[0] + params[1] * std::sin(params[2] * u) * std::cos(params[3] * v);
    }
    return 0.0;
  }
};

enum class TermKind { kConstant, kLinear, kSurfaceLinear, kNonlinear, kGeoOnly, kGeoInteraction };
enum class NonlinearShape { kHinge, kQuadratic };

struct Term {
  TermKind kind = TermKind::kConstant;
  std::size_t feature = 0;  // index into SynthSpec::features
  double value = 0.0;       // constant or linear beta
  Smooth smooth;
  NonlinearShape shape = NonlinearShape::kHinge;
  double a = 0.0, b = 0.0;  // hinge (knot, slope) or quadratic (center, scale)
  std::string source;       // original spec text, for diagnostics

  bool has_coefficient() const {
    return kind == TermKind::kLinear || kind == TermKind::kSurfaceLinear ||
           kind == TermKind::kGeoInteraction;
  }
};

struct FeatureSpec {
  std::string name;
  bool normal = false;  // uniform(a, b) otherwise
  double a = 0.0, b = 1.0;
};

struct SynthSpec {
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  double umin = 0.0, vmin = 0.0, umax = 1.0, vmax = 1.0;
  std::vector<std::string> geo_names{"u", "v"};
  std::string response_name = "y";
  std::vector<FeatureSpec> features;
  std::vector<Term> terms;
  double noise_sd = 0.0;
  std::optional<double> noise_ratio;
  std::optional<double> response_mean;
  std::optional<double> response_sd;

  void validate() const;
  static SynthSpec parse(const KeyValueConfig& cfg);
  static SynthSpec load(const std::string& path) { return parse(KeyValueConfig::load(path)); }
};

namespace detail {

inline std::vector<double> parse_numbers(const std::vector<std::string>& tokens, std::size_t from,
                                         const std::string& context) {
  std::vector<double> out;
  for (std::size_t i = from; i < tokens.size(); ++i) {
    const auto v = parse_double(tokens[i]);
    if (!v || !std::isfinite(*v))
      throw Error(ErrorCode::kInvalidSpec, context + ": '" + tokens[i] + "' is not a number");
    out.push_back(*v);
  }
  return out;
}

inline Smooth parse_smooth(const std::vector<std::string>& tokens, std::size_t at,
                           const std::string& context) {
  if (at >= tokens.size()) throw Error(ErrorCode::kInvalidSpec, context + ": missing surface family");
  Smooth s;
  std::size_t arity = 0;
  const auto& family = tokens[at];
  if (family == "plane") {
    s.family = SmoothFamily::kPlane;
    arity = 3;
  } else if (family == "gaussian-bump") {
    s.family = SmoothFamily::kGaussianBump;
    arity = 5;
  } else if (family == "sinusoid") {
    s.family = SmoothFamily::kSinusoid;
    arity = 4;
  } else {
    throw Error(ErrorCode::kInvalidSpec, context + ": unknown surface family '" + family + "'");
  }
  s.params = parse_numbers(tokens, at + 1, context);
  if (s.params.size() != arity)
    throw Error(ErrorCode::kInvalidSpec, context + ": " + family + " takes " +
                                             std::to_string(arity) + " parameters");
  if (s.family == SmoothFamily::kGaussianBump && !(s.params[4] > 0.0))
    throw Error(ErrorCode::kInvalidSpec, context + ": gaussian-bump sigma must be > 0");
  return s;
}

}  // namespace detail

inline SynthSpec SynthSpec::parse(const KeyValueConfig& cfg) {
  SynthSpec spec;
  auto number = [&](const char* key) -> std::optional<double> {
    const auto text = cfg.get(key);
    if (!text) return std::nullopt;
    const auto v = parse_double(*text);
    if (!v) throw Error(ErrorCode::kInvalidSpec, std::string(key) + ": not a number");
    return v;
  };
  if (const auto n = cfg.get("n")) {
    const auto v = parse_int(*n);
    if (!v || *v < 1) throw Error(ErrorCode::kInvalidSpec, "n must be a positive integer");
    spec.n = static_cast<std::size_t>(*v);
  }
  if (const auto seed = cfg.get("seed")) {
    const auto v = parse_int(*seed);
    if (!v || *v < 0) throw Error(ErrorCode::kInvalidSpec, "seed must be a nonnegative integer");
    spec.seed = static_cast<std::uint64_t>(*v);
  }
  if (const auto domain = cfg.get("domain")) {
    const auto parts = split(*domain, ',');
    const auto values = detail::parse_numbers(parts, 0, "domain");
    if (values.size() != 4) throw Error(ErrorCode::kInvalidSpec, "domain needs umin, vmin, umax, vmax");
    spec.umin = values[0];
    spec.vmin = values[1];
    spec.umax = values[2];
    spec.vmax = values[3];
  }
  if (const auto geo = cfg.get("geo")) spec.geo_names = split(*geo, ',');
  if (const auto response = cfg.get("response")) spec.response_name = *response;

  for (const auto& line : cfg.get_all("feature")) {
    const auto tokens = split_whitespace(line);
    const std::string context = "feature '" + line + "'";
    if (tokens.size() != 4) throw Error(ErrorCode::kInvalidSpec, context + ": expected <name> <dist> <a> <b>");
    FeatureSpec f;
    f.name = tokens[0];
    if (tokens[1] == "normal") f.normal = true;
    else if (tokens[1] != "uniform")
      throw Error(ErrorCode::kInvalidSpec, context + ": distribution must be uniform or normal");
    const auto params = detail::parse_numbers(tokens, 2, context);
    f.a = params[0];
    f.b = params[1];
    spec.features.push_back(f);
  }

  std::map<std::string, std::size_t> feature_index;
  for (std::size_t i = 0; i < spec.features.size(); ++i) feature_index[spec.features[i].name] = i;
  std::size_t term_no = 0;
  for (const auto& line : cfg.get_all("term")) {
    ++term_no;
    const std::string context = "term " + std::to_string(term_no) + " ('" + line + "')";
    const auto tokens = split_whitespace(line);
    if (tokens.empty()) throw Error(ErrorCode::kInvalidSpec, context + ": empty term");
    Term t;
    t.source = line;
    auto feature_at = [&](std::size_t i) {
      if (i >= tokens.size()) throw Error(ErrorCode::kInvalidSpec, context + ": missing feature name");
      const auto it = feature_index.find(tokens[i]);
      if (it == feature_index.end())
        throw Error(ErrorCode::kInvalidSpec, context + ": unknown feature '" + tokens[i] + "'");
      return it->second;
    };
    const auto& kind = tokens[0];
    if (kind == "constant") {
      t.kind = TermKind::kConstant;
      const auto v = detail::parse_numbers(tokens, 1, context);
      if (v.size() != 1) throw Error(ErrorCode::kInvalidSpec, context + ": constant takes one value");
      t.value = v[0];
    } else if (kind == "linear") {
      t.kind = TermKind::kLinear;
      t.feature = feature_at(1);
      const auto v = detail::parse_numbers(tokens, 2, context);
      if (v.size() != 1) throw Error(ErrorCode::kInvalidSpec, context + ": linear takes one beta");
      t.value = v[0];
    } else if (kind == "surface_linear" || kind == "geo_interaction") {
      t.kind = kind == "surface_linear" ? TermKind::kSurfaceLinear : TermKind::kGeoInteraction;
      t.feature = feature_at(1);
      t.smooth = detail::parse_smooth(tokens, 2, context);
    } else if (kind == "geo_only") {
      t.kind = TermKind::kGeoOnly;
      t.smooth = detail::parse_smooth(tokens, 1, context);
    } else if (kind == "nonlinear") {
      t.kind = TermKind::kNonlinear;
      t.feature = feature_at(1);
      if (tokens.size() < 3) throw Error(ErrorCode::kInvalidSpec, context + ": missing shape");
      if (tokens[2] == "hinge") t.shape = NonlinearShape::kHinge;
      else if (tokens[2] == "quadratic") t.shape = NonlinearShape::kQuadratic;
      else throw Error(ErrorCode::kInvalidSpec, context + ": shape must be hinge or quadratic");
      const auto v = detail::parse_numbers(tokens, 3, context);
      if (v.size() != 2) throw Error(ErrorCode::kInvalidSpec, context + ": shape takes two parameters");
      t.a = v[0];
      t.b = v[1];
    } else {
      throw Error(ErrorCode::kInvalidSpec, context + ": unknown term kind '" + kind + "'");
    }
    spec.terms.push_back(std::move(t));
  }
  if (const auto v = number("noise_sd")) spec.noise_sd = *v;
  spec.noise_ratio = number("noise_ratio");
  spec.response_mean = number("response_mean");
  spec.response_sd = number("response_sd");
  spec.validate();
  return spec;
}

inline void SynthSpec::validate() const {
  if (n < 1) throw Error(ErrorCode::kInvalidSpec, "n must be >= 1");
  if (!(umin < umax && vmin < vmax)) throw Error(ErrorCode::kInvalidSpec, "empty domain");
  if (geo_names.size() != 2) throw Error(ErrorCode::kInvalidSpec, "geo must name two coordinates");
  std::set<std::string> names(geo_names.begin(), geo_names.end());
  names.insert(response_name);
  if (names.size() != 3) throw Error(ErrorCode::kInvalidSpec, "geo/response names collide");
  for (const auto& f : features) {
    if (!names.insert(f.name).second)
      throw Error(ErrorCode::kInvalidSpec, "duplicate column name '" + f.name + "'");
    if (f.normal ? !(f.b > 0.0) : !(f.a < f.b))
      throw Error(ErrorCode::kInvalidSpec, "feature '" + f.name + "' has an invalid distribution");
  }
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const auto& t = terms[i];
    const bool uses_feature = t.kind != TermKind::kConstant && t.kind != TermKind::kGeoOnly;
    if (uses_feature && t.feature >= features.size())
      throw Error(ErrorCode::kInvalidSpec,
                  "term " + std::to_string(i + 1) + " ('" + t.source + "'): references an undeclared feature");
  }
  if (!(noise_sd >= 0.0)) throw Error(ErrorCode::kInvalidSpec, "noise_sd must be >= 0");
  if (noise_ratio && !(*noise_ratio >= 0.0))
    throw Error(ErrorCode::kInvalidSpec, "noise_ratio must be >= 0");
  if (response_sd && !(*response_sd > 0.0))
    throw Error(ErrorCode::kInvalidSpec, "response_sd must be > 0");
  if (response_sd.has_value() != response_mean.has_value())
    throw Error(ErrorCode::kInvalidSpec, "response_mean and response_sd go together");
}

// The exact noiseless response: offset + scale * (sum of terms). Rows are in
// dataset column order: features in spec order, then the two coordinates.
class ResponseFunction {
 public:
  ResponseFunction() = default;
  ResponseFunction(std::vector<Term> terms, std::size_t n_features, double offset, double scale)
      : terms_(std::move(terms)), n_features_(n_features), offset_(offset), scale_(scale) {}

  double raw(std::span<const double> row) const {
    const double u = row[n_features_], v = row[n_features_ + 1];
    double sum = 0.0;
    for (const auto& t : terms_) {
      switch (t.kind) {
        case TermKind::kConstant: sum += t.value; break;
        case TermKind::kLinear: sum += t.value * row[t.feature]; break;
        case TermKind::kSurfaceLinear:
        case TermKind::kGeoInteraction: sum += row[t.feature] * t.smooth(u, v); break;
        case TermKind::kGeoOnly: sum += t.smooth(u, v); break;
        case TermKind::kNonlinear: {
          const double x = row[t.feature];
          sum += t.shape == NonlinearShape::kHinge ? t.b * std::max(0.0, x - t.a)
                                                   : t.b * (x - t.a) * (x - t.a);
          break;
        }
      }
    }
    return sum;
  }

  double operator()(std::span<const double> row) const { return offset_ + scale_ * raw(row); }

  // Local slope of the response in `feature` contributed by linear-type terms.
  double coefficient(std::span<const double> row, std::size_t feature) const {
    const double u = row[n_features_], v = row[n_features_ + 1];
    double beta = 0.0;
    for (const auto& t : terms_) {
      if (!t.has_coefficient() || t.feature != feature) continue;
      beta += t.kind == TermKind::kLinear ? t.value : t.smooth(u, v);
    }
    return scale_ * beta;
  }

  // Location-only part: offset + scale * (constants + geo_only terms).
  double intercept(std::span<const double> row) const {
    const double u = row[n_features_], v = row[n_features_ + 1];
    double sum = 0.0;
    for (const auto& t : terms_) {
      if (t.kind == TermKind::kConstant) sum += t.value;
      if (t.kind == TermKind::kGeoOnly) sum += t.smooth(u, v);
    }
    return offset_ + scale_ * sum;
  }

  std::size_t arity() const { return n_features_ + 2; }
  double offset() const { return offset_; }
  double scale() const { return scale_; }
  const std::vector<Term>& terms() const { return terms_; }

 private:
  std::vector<Term> terms_;
  std::size_t n_features_ = 0;
  double offset_ = 0.0;
  double scale_ = 1.0;
};

struct GroundTruth {
  ResponseFunction response;
  std::vector<double> noiseless;
  std::vector<double> intercept;
  // coefficients[f][row] for every feature f with a linear-type term.
  std::map<std::size_t, std::vector<double>> coefficients;
  std::vector<std::string> feature_names;
  double noise_sd = 0.0;  // effective, after scaling
};

namespace detail {

inline void sample_row(const SynthSpec& spec, Rng& rng, std::span<double> row) {
  for (std::size_t f = 0; f < spec.features.size(); ++f) {
    const auto& fs = spec.features[f];
    row[f] = fs.normal ? rng.normal(fs.a, fs.b) : rng.uniform(fs.a, fs.b);
  }
  row[spec.features.size()] = rng.uniform(spec.umin, spec.umax);
  row[spec.features.size() + 1] = rng.uniform(spec.vmin, spec.vmax);
}

inline double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (const double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double sd_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double ss = 0.0;
  for (const double x : v) ss += (x - m) * (x - m);
  return v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
}

}  // namespace detail

// Rows are drawn from one stream and noise from another, so noise settings
// never change the sampled covariates. When noise_ratio or a target response
// mean/sd is given, a 20000-row pilot sample (its own stream) fixes the noise
// level and the affine rescaling before the real draw; the rescaling is part
// of the ground-truth function.
inline std::pair<Dataset, GroundTruth> generate(const SynthSpec& spec) {
  spec.validate();
  const std::size_t q = spec.features.size();
  const std::size_t p = q + 2;
  const ResponseFunction raw_fn(spec.terms, q, 0.0, 1.0);

  double noise_sd = spec.noise_sd;
  double offset = 0.0, scale = 1.0;
  if (spec.noise_ratio || spec.response_mean) {
    constexpr std::size_t kPilot = 20000;
    Rng pilot_rng(derive_seed(spec.seed, "pilot"));
    Rng pilot_noise(derive_seed(spec.seed, "pilot-noise"));
    std::vector<double> row(p), signal(kPilot), noise(kPilot);
    for (std::size_t i = 0; i < kPilot; ++i) {
      detail::sample_row(spec, pilot_rng, row);
      signal[i] = raw_fn(row);
      noise[i] = pilot_noise.normal();
    }
    if (spec.noise_ratio) noise_sd = *spec.noise_ratio * detail::sd_of(signal);
    if (spec.response_mean) {
      std::vector<double> total(kPilot);
      for (std::size_t i = 0; i < kPilot; ++i) total[i] = signal[i] + noise_sd * noise[i];
      const double sd = detail::sd_of(total);
      if (!(sd > 0.0)) throw Error(ErrorCode::kInvalidSpec, "cannot rescale a constant response");
      scale = *spec.response_sd / sd;
      offset = *spec.response_mean - scale * detail::mean_of(total);
    }
  }

  GroundTruth gt;
  gt.response = ResponseFunction(spec.terms, q, offset, scale);
  gt.noise_sd = scale * noise_sd;
  for (const auto& f : spec.features) gt.feature_names.push_back(f.name);
  for (const auto& t : spec.terms)
    if (t.has_coefficient()) gt.coefficients[t.feature];

  std::vector<std::string> names = gt.feature_names;
  Dataset ds;
  ds.schema = Schema::make(names, spec.response_name, spec.geo_names);
  ds.schema.id_name = "id";
  ds.rows = Matrix(spec.n, p);
  Rng rng(derive_seed(spec.seed, "rows"));
  Rng noise_rng(derive_seed(spec.seed, "noise"));
  for (std::size_t i = 0; i < spec.n; ++i) {
    auto row = ds.rows.row(i);
    detail::sample_row(spec, rng, row);
    const double truth = gt.response(row);
    gt.noiseless.push_back(truth);
    gt.intercept.push_back(gt.response.intercept(row));
    for (auto& [f, values] : gt.coefficients) values.push_back(gt.response.coefficient(row, f));
    ds.response.push_back(truth + scale * noise_sd * noise_rng.normal());
    ds.ids.push_back(std::to_string(i));
  }
  return {std::move(ds), std::move(gt)};
}

inline Predictor truth_predictor(const GroundTruth& gt) {
  return Predictor(FunctionPredictor(gt.response.arity(), [fn = gt.response](std::span<const double> row) {
    return fn(row);
  }));
}

inline void write_ground_truth_csv(std::ostream& out, const Dataset& ds, const GroundTruth& gt,
                                   const std::string& comment = {}) {
  if (!comment.empty()) out << "# " << comment << "\n";
  out << "id,y_true,intercept_true";
  for (const auto& [f, values] : gt.coefficients) out << ",beta_" << gt.feature_names[f];
  out << '\n';
  for (std::size_t i = 0; i < ds.n(); ++i) {
    out << ds.ids[i] << ',' << format_double(gt.noiseless[i]) << ',' << format_double(gt.intercept[i]);
    for (const auto& [f, values] : gt.coefficients) out << ',' << format_double(values[i]);
    out << '\n';
  }
}

}  // namespace geoxai

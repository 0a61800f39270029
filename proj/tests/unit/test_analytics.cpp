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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "geoxai/analytics.hpp"
#include "test_support.hpp"

namespace {

using geoxai::BackgroundSet;
using geoxai::CoalitionSpace;
using geoxai::Error;
using geoxai::ErrorCode;
using geoxai::Matrix;
using testing_support::make_predictor;

// Columns a, b, c, lat, lon.
geoxai::Schema schema5() { return geoxai::Schema::make({"a", "b", "c"}, "y"); }
const auto kCs = CoalitionSpace::make(5, {3, 4});

std::vector<geoxai::ExplanationRecord> explain(const geoxai::Predictor& pred, const Matrix& xs,
                                               const BackgroundSet& bg) {
  geoxai::EngineOptions opt;
  return geoxai::explain_all(pred, xs, {}, bg, kCs, opt);
}

struct World {
  Matrix xs, bg;
  World(std::uint64_t seed, std::size_t n = 40, std::size_t m = 12) {
    std::mt19937_64 gen(seed);
    xs = testing_support::random_matrix(n, 5, gen, 0, 10);
    bg = testing_support::random_matrix(m, 5, gen, 0, 10);
  }
};

// Structural GeoJSON check: FeatureCollection of Point features whose
// coordinates are two finite numbers and whose properties are objects.
void expect_valid_geojson(const nlohmann::json& j) {
  ASSERT_EQ(j.at("type"), "FeatureCollection");
  ASSERT_TRUE(j.at("features").is_array());
  for (const auto& f : j["features"]) {
    ASSERT_EQ(f.at("type"), "Feature");
    ASSERT_EQ(f.at("geometry").at("type"), "Point");
    const auto& c = f["geometry"].at("coordinates");
    ASSERT_TRUE(c.is_array());
    ASSERT_GE(c.size(), 2u);
    for (const auto& v : c) ASSERT_TRUE(v.is_number() && std::isfinite(v.get<double>()));
    ASSERT_TRUE(f.at("properties").is_object());
    for (const auto& [k, v] : f["properties"].items())
      if (v.is_number()) ASSERT_TRUE(std::isfinite(v.get<double>())) << k;
  }
}

TEST(Importance, LinearModelHasNoVaryingPart) {
  const std::vector<double> beta{1.0, -4.0, 0.5};
  auto pred = make_predictor(5, [&](std::span<const double> r) { return beta[0] * r[0] + beta[1] * r[1] + beta[2] * r[2]; });
  World w(1);
  const BackgroundSet bg{w.bg};
  const auto records = explain(pred, w.xs, bg);
  const auto split = geoxai::importance_split(records, schema5().nonspatial_names());
  const auto means = geoxai::background_means(bg, kCs);
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_NEAR(split.features[j].mean_abs_phi_geo_x, 0.0, 1e-12);
    double expected = 0.0;
    for (std::size_t i = 0; i < w.xs.rows(); ++i) expected += std::abs(beta[j] * (w.xs(i, j) - means[j]));
    EXPECT_NEAR(split.features[j].mean_abs_phi, expected / w.xs.rows(), 1e-9);
  }
  EXPECT_EQ(split.ranking, (std::vector<std::size_t>{1, 0, 2}));
  EXPECT_EQ(split.features[1].rank, 1u);
  EXPECT_NEAR(split.geo_mean_abs, 0.0, 1e-12);
}

TEST(Importance, OnlyInteractingFeatureVaries) {
  // a varies with location; b and c are global.
  auto pred = make_predictor(5, [](std::span<const double> r) {
    return r[0] * (1 + 0.3 * r[3]) + 2 * r[1] + std::sqrt(r[2]) + std::sin(r[4]);
  });
  World w(2);
  const auto split = geoxai::importance_split(explain(pred, w.xs, BackgroundSet{w.bg}), schema5().nonspatial_names());
  EXPECT_GT(split.features[0].mean_abs_phi_geo_x, 0.1);
  EXPECT_NEAR(split.features[1].mean_abs_phi_geo_x, 0.0, 1e-12);
  EXPECT_NEAR(split.features[2].mean_abs_phi_geo_x, 0.0, 1e-12);
  EXPECT_GT(split.geo_mean_abs, 0.0);
}

TEST(Importance, PermutationInvariantAndMatchesRecomputation) {
  auto pred = make_predictor(5, [](std::span<const double> r) { return r[0] * r[3] + r[1] * r[2] - r[4]; });
  World w(3);
  auto records = explain(pred, w.xs, BackgroundSet{w.bg});
  const auto names = schema5().nonspatial_names();
  const auto a = geoxai::importance_split(records, names);
  std::mt19937_64 gen(4);
  std::shuffle(records.begin(), records.end(), gen);
  const auto b = geoxai::importance_split(records, names);
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_EQ(a.features[j].mean_abs_phi, b.features[j].mean_abs_phi);
    EXPECT_EQ(a.features[j].mean_abs_phi_geo_x, b.features[j].mean_abs_phi_geo_x);
    long double direct = 0.0L;
    for (const auto& r : records) direct += std::abs(r.phi[j]);
    EXPECT_NEAR(a.features[j].mean_abs_phi, static_cast<double>(direct / records.size()), 1e-12);
  }
  EXPECT_EQ(a.geo_mean_abs, b.geo_mean_abs);
  EXPECT_EQ(a.invariant_total, b.invariant_total);
}

TEST(Importance, TopNLimitsDonutTotals) {
  auto pred = make_predictor(5, [](std::span<const double> r) { return 3 * r[0] + 2 * r[1] + r[2]; });
  World w(5);
  const auto records = explain(pred, w.xs, BackgroundSet{w.bg});
  const auto all = geoxai::importance_split(records, schema5().nonspatial_names(), 8);
  const auto top1 = geoxai::importance_split(records, schema5().nonspatial_names(), 1);
  EXPECT_NEAR(all.invariant_total,
              all.features[0].mean_abs_phi + all.features[1].mean_abs_phi + all.features[2].mean_abs_phi, 1e-12);
  EXPECT_EQ(top1.invariant_total, top1.features[top1.ranking[0]].mean_abs_phi);
  std::ostringstream csv;
  geoxai::write_importance_csv(csv, top1, schema5().nonspatial_names().size() ? "r1" : "");
  EXPECT_NE(csv.str().find("donut_total"), std::string::npos);
  EXPECT_THROW(geoxai::importance_split({}, schema5().nonspatial_names()), Error);
}

TEST(PartialDependence, LinearModelTracesLine) {
  auto pred = make_predictor(5, [](std::span<const double> r) { return 1.5 * r[1] + r[0] * r[2]; });
  World w(6);
  const BackgroundSet bg{w.bg};
  const auto records = explain(pred, w.xs, bg);
  const auto curve = geoxai::partial_dependence(records, schema5(), "b");
  const double mean_b = geoxai::background_means(bg, kCs)[1];
  ASSERT_EQ(curve.points.size(), w.xs.rows());
  for (std::size_t i = 0; i < curve.points.size(); ++i) {
    if (i > 0) EXPECT_LE(curve.points[i - 1].x, curve.points[i].x);
    EXPECT_NEAR(curve.points[i].effect, 1.5 * (curve.points[i].x - mean_b), 1e-10);
  }
  EXPECT_THROW(geoxai::partial_dependence(records, schema5(), "zzz"), Error);
  EXPECT_THROW(geoxai::partial_dependence(records, schema5(), "lat"), Error);
}

TEST(PartialDependence, ConstantModel) {
  auto pred = make_predictor(5, [](std::span<const double>) { return 4.0; });
  World w(7);
  for (const auto& pt : geoxai::partial_dependence(explain(pred, w.xs, BackgroundSet{w.bg}), schema5(), "a").points)
    EXPECT_EQ(pt.effect, 0.0);
}

TEST(PartialDependence, HingeHasKnee) {
  auto pred = make_predictor(5, [](std::span<const double> r) { return std::max(0.0, r[2] - 7.0) + r[0]; });
  World w(8, 80);
  const auto curve = geoxai::partial_dependence(explain(pred, w.xs, BackgroundSet{w.bg}), schema5(), "c");
  // Flat below the knee, slope one above it.
  std::vector<double> below, above;
  for (const auto& pt : curve.points) (pt.x < 7 ? below : above).push_back(pt.effect);
  ASSERT_GT(below.size(), 3u);
  ASSERT_GT(above.size(), 3u);
  EXPECT_NEAR(*std::max_element(below.begin(), below.end()), *std::min_element(below.begin(), below.end()), 1e-10);
  for (std::size_t i = 1; i < curve.points.size(); ++i)
    if (curve.points[i - 1].x >= 7)
      EXPECT_NEAR(curve.points[i].effect - curve.points[i - 1].effect, curve.points[i].x - curve.points[i - 1].x, 1e-10);
}

TEST(PartialDependence, AdditiveModelMatchesCenteredComponent) {
  auto g = [](double v) { return std::sin(v) * v; };
  auto pred = make_predictor(5, [&](std::span<const double> r) { return g(r[0]) + r[1] * r[1] + std::cos(r[3] + r[4]); });
  World w(9);
  const auto records = explain(pred, w.xs, BackgroundSet{w.bg});
  double mean_g = 0.0;
  for (std::size_t i = 0; i < w.bg.rows(); ++i) mean_g += g(w.bg(i, 0)) / w.bg.rows();
  for (const auto& pt : geoxai::partial_dependence(records, schema5(), "a").points)
    EXPECT_NEAR(pt.effect, g(pt.x) - mean_g, 1e-8);
}

TEST(Bootstrap, ZeroVarianceBackgroundGivesZeroWidth) {
  auto pred = make_predictor(5, [](std::span<const double> r) { return r[0] * r[3] + r[1] - r[2] * r[4]; });
  World w(10, 6);
  Matrix bg(5, 5);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t c = 0; c < 5; ++c) bg(i, c) = 1.0 + c;
  geoxai::BootstrapOptions opt;
  opt.replicates = 30;
  const auto res = geoxai::bootstrap_ci(pred, w.xs, {}, BackgroundSet{bg}, kCs, opt);
  for (const auto& inst : res.instances) {
    EXPECT_EQ(inst.phi_geo.low, inst.phi_geo.high);
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_EQ(inst.phi[j].low, inst.phi[j].high);
      EXPECT_EQ(inst.phi_geo_x[j].low, inst.phi_geo_x[j].high);
    }
  }
}

TEST(Bootstrap, ReproducibleAndWorkerIndependent) {
  auto pred = make_predictor(5, [](std::span<const double> r) { return r[0] * r[3] + r[1] - r[2] * r[4]; });
  World w(11, 5);
  geoxai::BootstrapOptions opt;
  opt.replicates = 25;
  opt.seed = 77;
  const auto a = geoxai::bootstrap_ci(pred, w.xs, {}, BackgroundSet{w.bg}, kCs, opt);
  opt.workers = 3;
  const auto b = geoxai::bootstrap_ci(pred, w.xs, {}, BackgroundSet{w.bg}, kCs, opt);
  std::ostringstream sa, sb;
  geoxai::write_bootstrap_csv(sa, a, schema5().nonspatial_names());
  geoxai::write_bootstrap_csv(sb, b, schema5().nonspatial_names());
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_NE(sa.str().find("method=background-bootstrap"), std::string::npos);
}

TEST(Bootstrap, SignificanceFollowsInterval) {
  auto pred = make_predictor(5, [](std::span<const double> r) { return r[0] * r[3] + r[1] - r[2] * r[4]; });
  World w(12, 8);
  geoxai::BootstrapOptions opt;
  opt.replicates = 40;
  const auto res = geoxai::bootstrap_ci(pred, w.xs, {}, BackgroundSet{w.bg}, kCs, opt);
  auto check = [](const geoxai::Interval& iv) {
    EXPECT_LE(iv.low, iv.high);
    EXPECT_EQ(iv.significant, iv.low > 0 || iv.high < 0);
  };
  for (const auto& inst : res.instances) {
    check(inst.phi_geo);
    for (std::size_t j = 0; j < 3; ++j) {
      check(inst.phi[j]);
      check(inst.phi_geo_x[j]);
      check(inst.total[j]);
    }
  }
}

TEST(Bootstrap, LinearIntervalsCoverFullBackgroundEstimate) {
  // Over 20 trials the interval for phi_j should contain the point estimate
  // for at least 90% of features.
  std::mt19937_64 gen(13);
  std::size_t covered = 0, total = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto xs = testing_support::random_matrix(1, 5, gen, 0, 10);
    const auto bg = testing_support::random_matrix(30, 5, gen, 0, 10);
    std::uniform_real_distribution<double> u(-3, 3);
    const std::vector<double> beta{u(gen), u(gen), u(gen)};
    auto pred = make_predictor(5, [&](std::span<const double> r) { return beta[0] * r[0] + beta[1] * r[1] + beta[2] * r[2]; });
    geoxai::BootstrapOptions opt;
    opt.replicates = 100;
    opt.seed = static_cast<std::uint64_t>(trial);
    const auto res = geoxai::bootstrap_ci(pred, xs, {}, BackgroundSet{bg}, kCs, opt);
    for (const auto& iv : res.instances[0].phi) {
      ++total;
      if (iv.low <= iv.point && iv.point <= iv.high) ++covered;
    }
  }
  EXPECT_GE(static_cast<double>(covered), 0.9 * static_cast<double>(total));
}

TEST(Bootstrap, TooFewReplicates) {
  auto pred = make_predictor(5, [](std::span<const double>) { return 0.0; });
  World w(14, 2);
  geoxai::BootstrapOptions opt;
  opt.replicates = 1;
  try {
    geoxai::bootstrap_ci(pred, w.xs, {}, BackgroundSet{w.bg}, kCs, opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kOutOfRange);
  }
}

TEST(Svc, GlobalLinearModelIsConstantField) {
  const std::vector<double> beta{2.5, -1.0, 0.25};
  auto pred = make_predictor(5, [&](std::span<const double> r) {
    return beta[0] * r[0] + beta[1] * r[1] + beta[2] * r[2] + r[3] * r[4];
  });
  World w(15, 60);
  const BackgroundSet bg{w.bg};
  const auto records = explain(pred, w.xs, bg);
  const auto surface = geoxai::svc_surface(records, schema5(), geoxai::background_means(bg, kCs));
  std::size_t unmasked = 0;
  for (const auto& pt : surface.points)
    for (std::size_t j = 0; j < 3; ++j)
      if (pt.coefficients[j]) {
        ++unmasked;
        EXPECT_NEAR(*pt.coefficients[j], beta[j], 1e-8);
      }
  EXPECT_GT(unmasked, 100u);
}

TEST(Svc, InstanceAtMeanIsMasked) {
  auto pred = make_predictor(5, [](std::span<const double> r) { return r[0] + r[1] + r[2]; });
  World w(16, 10);
  const BackgroundSet bg{w.bg};
  const auto means = geoxai::background_means(bg, kCs);
  for (std::size_t j = 0; j < 3; ++j) w.xs(0, j) = means[j];
  const auto surface = geoxai::svc_surface(explain(pred, w.xs, bg), schema5(), means);
  for (std::size_t j = 0; j < 3; ++j) {
    EXPECT_FALSE(surface.points[0].coefficients[j].has_value());
    EXPECT_EQ(surface.points[0].reasons[j], geoxai::MaskReason::kNearMean);
  }
  const auto j = geoxai::to_geojson(surface, "run7");
  expect_valid_geojson(j);
  EXPECT_TRUE(j["features"][0]["properties"]["coef_a"].is_null());
  EXPECT_EQ(j["features"][0]["properties"]["mask_reason_a"], "near-mean denominator");
}

TEST(Svc, MissingGeo) {
  auto records = std::vector<geoxai::ExplanationRecord>(1);
  records[0].x.assign(5, 0.0);
  records[0].phi.assign(3, 0.0);
  records[0].phi_geo_x.assign(3, 0.0);
  try {
    geoxai::svc_surface(records, schema5(), std::vector<double>{0, 0, 0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingGeo);
  }
}

TEST(GeoJson, RecordsExportUsesLonLatOrder) {
  auto pred = make_predictor(5, [](std::span<const double> r) { return r[0] * r[3]; });
  World w(17, 3);
  const auto records = explain(pred, w.xs, BackgroundSet{w.bg});
  testing_support::TempDir dir("geojson");
  geoxai::export_geojson(records, schema5(), dir.file("e.geojson"), "run9");
  const auto j = nlohmann::json::parse(testing_support::read_file(dir.file("e.geojson")));
  expect_valid_geojson(j);
  ASSERT_EQ(j["features"].size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(j["features"][i]["geometry"]["coordinates"][0].get<double>(), w.xs(i, 4));  // lon
    EXPECT_EQ(j["features"][i]["geometry"]["coordinates"][1].get<double>(), w.xs(i, 3));  // lat
    EXPECT_TRUE(j["features"][i]["properties"].contains("phi_geo"));
  }
  EXPECT_THROW(geoxai::export_geojson(records, schema5(), "/nonexistent/dir/x.geojson"), Error);
}

}  // namespace

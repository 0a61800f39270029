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

#include <cmath>
#include <random>
#include <sstream>

#include "geoxai/geoshapley.hpp"
#include "oracle/brute_force.hpp"
#include "test_support.hpp"

namespace {

using geoxai::BackgroundSet;
using geoxai::CoalitionSpace;
using geoxai::Error;
using geoxai::ErrorCode;
using geoxai::Matrix;
using testing_support::make_predictor;

double linear23(std::span<const double> r) { return 2 * r[0] + 3 * r[1]; }

// Columns: x1, x2, lat, lon.
struct LinearFixture {
  geoxai::Predictor pred = make_predictor(4, linear23);
  BackgroundSet bg{Matrix{{0, 0, 1, 2}, {2, 4, 3, 4}}};
  CoalitionSpace cs = CoalitionSpace::make(4, {2, 3});
  std::vector<double> x{3, 5, 7, 9};
};

TEST(CoalitionWeights, TwoPlayerGame) {
  EXPECT_EQ(geoxai::feature_weight_exact(0, 3, 2), geoxai::Rational(1, 2));
  EXPECT_EQ(geoxai::feature_weight_exact(1, 3, 2), geoxai::Rational(1, 2));
  EXPECT_DOUBLE_EQ(geoxai::coalition_weight_feature(0, 3, 2), 0.5);
}

TEST(CoalitionWeights, SingleCoordinateMatchesClassicWeight) {
  for (std::size_t p = 1; p <= 12; ++p)
    for (std::size_t s = 0; s < p; ++s) {
      const geoxai::Rational classic(geoxai::factorial(s) * geoxai::factorial(p - s - 1),
                                     geoxai::factorial(p));
      EXPECT_EQ(geoxai::feature_weight_exact(s, p, 1), classic);
    }
}

TEST(CoalitionWeights, SumToOneOverAllCoalitions) {
  for (std::size_t p = 2; p <= 16; ++p)
    for (std::size_t g = 1; g <= std::min<std::size_t>(p, 3); ++g) {
      const std::size_t k = p - g + 1;
      geoxai::Rational total(0);
      std::int64_t choose = 1;  // C(k-1, s)
      for (std::size_t s = 0; s < k; ++s) {
        total += geoxai::feature_weight_exact(s, p, g) * choose;
        choose = choose * static_cast<std::int64_t>(k - 1 - s) / static_cast<std::int64_t>(s + 1);
      }
      EXPECT_EQ(total, geoxai::Rational(1)) << "p=" << p << " g=" << g;
    }
}

TEST(CoalitionWeights, OutOfRange) {
  EXPECT_THROW(geoxai::feature_weight_exact(2, 3, 2), Error);
  EXPECT_THROW(geoxai::interaction_weight_exact(1, 3, 2), Error);
  EXPECT_THROW(geoxai::feature_weight_exact(0, 1, 2), Error);
  try {
    geoxai::feature_weight_exact(5, 4, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kOutOfRange);
  }
}

TEST(EvalCoalition, SplicesBackgroundRows) {
  LinearFixture f;
  EXPECT_DOUBLE_EQ(geoxai::eval_coalition(f.pred, f.x, 0b001, f.bg, f.cs), 12.0);
  EXPECT_DOUBLE_EQ(geoxai::eval_coalition(f.pred, f.x, 0b000, f.bg, f.cs), 8.0);
  EXPECT_DOUBLE_EQ(geoxai::eval_coalition(f.pred, f.x, 0b111, f.bg, f.cs), 21.0);
}

TEST(EvalCoalition, FullCoalitionIgnoresBackground) {
  auto pred = make_predictor(3, [](std::span<const double> r) { return std::exp(r[0]) * r[1] - r[2]; });
  const auto cs = CoalitionSpace::make(3, {1, 2});
  const std::vector<double> x{0.3, 1.7, -2.2};
  BackgroundSet bg{Matrix{{100, 200, 300}}};
  EXPECT_EQ(geoxai::eval_coalition(pred, x, 0b11, bg, cs), std::exp(0.3) * 1.7 + 2.2);
}

TEST(EvalCoalition, GeoColumnsMoveTogether) {
  auto pred = make_predictor(3, [](std::span<const double> r) { return 10 * r[1] + r[2]; });
  const auto cs = CoalitionSpace::make(3, {1, 2});
  BackgroundSet bg{Matrix{{0, 0, 0}}};
  EXPECT_DOUBLE_EQ(geoxai::eval_coalition(pred, std::vector<double>{1, 2, 3}, 0b10, bg, cs), 23.0);
}

TEST(EvalCoalition, PredictorFailureCarriesContext) {
  auto pred = make_predictor(3, [](std::span<const double>) -> double {
    throw Error(ErrorCode::kPredictorFailure, "boom");
  });
  const auto cs = CoalitionSpace::make(3, {1, 2});
  BackgroundSet bg{Matrix{{0, 0, 0}}};
  try {
    geoxai::eval_coalition(pred, std::vector<double>{1, 2, 3}, 0b01, bg, cs);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPredictorFailure);
    EXPECT_NE(std::string(e.what()).find("coalition"), std::string::npos);
  }
}

TEST(ExplainExact, ConstantModel) {
  auto pred = make_predictor(4, [](std::span<const double>) { return 7.5; });
  LinearFixture f;
  const auto r = geoxai::explain_exact(pred, f.x, f.bg, f.cs);
  EXPECT_EQ(r.phi0, 7.5);
  EXPECT_EQ(r.phi_geo, 0.0);
  for (double v : r.phi) EXPECT_EQ(v, 0.0);
  for (double v : r.phi_geo_x) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(r.residual, 0.0);
}

TEST(ExplainExact, LinearModelClosedForm) {
  LinearFixture f;
  const auto r = geoxai::explain_exact(f.pred, f.x, f.bg, f.cs);
  EXPECT_NEAR(r.phi[0], 4.0, 1e-12);
  EXPECT_NEAR(r.phi[1], 9.0, 1e-12);
  EXPECT_NEAR(r.phi_geo, 0.0, 1e-12);
  EXPECT_NEAR(r.phi_geo_x[0], 0.0, 1e-12);
  EXPECT_NEAR(r.phi_geo_x[1], 0.0, 1e-12);
  EXPECT_NEAR(r.residual, 0.0, 1e-12);
  EXPECT_EQ(r.location, (std::vector<double>{7, 9}));
  EXPECT_EQ(r.budget, 8u);
}

TEST(ExplainExact, InteractionResidualIsReported) {
  auto pred = make_predictor(3, [](std::span<const double> r) { return r[0] * r[1]; });
  const auto cs = CoalitionSpace::make(3, {1, 2});
  BackgroundSet bg{Matrix{{0, 0, 0}}};
  const auto r = geoxai::explain_exact(pred, std::vector<double>{2, 3, 0}, bg, cs);
  EXPECT_NEAR(r.phi[0], 3.0, 1e-12);
  EXPECT_NEAR(r.phi_geo, 3.0, 1e-12);
  EXPECT_NEAR(r.phi_geo_x[0], 3.0, 1e-12);
  EXPECT_NEAR(r.residual, -3.0, 1e-12);
}

TEST(ExplainExact, MatchesBruteForceOnRandomModels) {
  std::mt19937_64 gen(11);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t g = 1 + trial % 3;
    const std::size_t p = g + 1 + trial % 4;
    const auto model = testing_support::RandomModel::draw(p, gen);
    const auto bg_rows = testing_support::random_matrix(1 + trial % 5, p, gen);
    const auto x_rows = testing_support::random_matrix(1, p, gen);
    std::vector<std::size_t> geo;
    std::vector<int> geo_int;
    for (std::size_t c = p - g; c < p; ++c) {
      geo.push_back(c);
      geo_int.push_back(static_cast<int>(c));
    }
    auto pred = make_predictor(p, [&](std::span<const double> r) { return model(r); });
    const auto cs = CoalitionSpace::make(p, geo);
    const auto got = geoxai::explain_exact(pred, x_rows.row(0), BackgroundSet{bg_rows}, cs);
    const auto want = oracle::geo_shapley([&](const oracle::Row& r) { return model(r); },
                                          testing_support::to_rows(x_rows)[0],
                                          testing_support::to_rows(bg_rows), geo_int);
    EXPECT_NEAR(got.phi0, want.base, 1e-10);
    EXPECT_NEAR(got.phi_geo, want.geo, 1e-10);
    for (std::size_t j = 0; j < got.phi.size(); ++j) {
      EXPECT_NEAR(got.phi[j], want.main[j], 1e-10);
      EXPECT_NEAR(got.phi_geo_x[j], want.synergy[j], 1e-10);
    }
  }
}

TEST(ExplainExact, GeoColumnsNeedNotBeLast) {
  auto pred = make_predictor(4, [](std::span<const double> r) { return r[0] * r[1] + r[2] * r[3] + r[0]; });
  std::mt19937_64 gen(3);
  const auto bg = testing_support::random_matrix(3, 4, gen);
  const std::vector<double> x{0.5, -1.0, 2.0, 1.5};
  const auto got = geoxai::explain_exact(pred, x, BackgroundSet{bg}, CoalitionSpace::make(4, {0, 2}));
  const auto want = oracle::geo_shapley([](const oracle::Row& r) { return r[0] * r[1] + r[2] * r[3] + r[0]; },
                                        x, testing_support::to_rows(bg), {0, 2});
  EXPECT_NEAR(got.phi_geo, want.geo, 1e-12);
  EXPECT_NEAR(got.phi[0], want.main[0], 1e-12);
  EXPECT_NEAR(got.phi[1], want.main[1], 1e-12);
  EXPECT_NEAR(got.phi_geo_x[1], want.synergy[1], 1e-12);
}

TEST(ExplainExact, CapExceededSuggestsSampledMode) {
  auto pred = make_predictor(21, [](std::span<const double>) { return 0.0; });
  std::vector<double> x(21, 0.0);
  BackgroundSet bg{Matrix(1, 21, 0.0)};
  try {
    geoxai::explain_exact(pred, x, bg, CoalitionSpace::make(21, {19, 20}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCapExceeded);
    EXPECT_NE(std::string(e.what()).find("sampled"), std::string::npos);
  }
}

TEST(ExplainExact, Efficiency) {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 5; ++trial) {
    const auto model = testing_support::RandomModel::draw(6, gen);
    auto pred = make_predictor(6, [&](std::span<const double> r) { return model(r); });
    const auto bg = testing_support::random_matrix(4, 6, gen);
    const auto x = testing_support::random_matrix(1, 6, gen);
    const auto r = geoxai::explain_exact(pred, x.row(0), BackgroundSet{bg}, CoalitionSpace::make(6, {4, 5}));
    double total = r.phi_geo;
    for (double v : r.phi) total += v;
    EXPECT_NEAR(total, r.yhat - r.phi0, 1e-10);
  }
}

TEST(ExplainExact, SeparableModelIsAdditive) {
  auto pred = make_predictor(5, [](std::span<const double> r) {
    return std::sin(r[3]) * std::cos(r[4]) + r[0] * r[0] - 2 * r[1] + r[1] * r[2];
  });
  std::mt19937_64 gen(8);
  const auto bg = testing_support::random_matrix(6, 5, gen);
  const auto x = testing_support::random_matrix(1, 5, gen);
  const auto r = geoxai::explain_exact(pred, x.row(0), BackgroundSet{bg}, CoalitionSpace::make(5, {3, 4}));
  EXPECT_NEAR(r.residual, 0.0, 1e-10);
  for (double v : r.phi_geo_x) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(ExplainExact, DummyPlayer) {
  // Column 1 is never read.
  auto pred = make_predictor(5, [](std::span<const double> r) { return r[0] * r[3] + std::exp(r[2]) * r[4]; });
  std::mt19937_64 gen(9);
  const auto bg = testing_support::random_matrix(5, 5, gen);
  const auto x = testing_support::random_matrix(1, 5, gen);
  const auto r = geoxai::explain_exact(pred, x.row(0), BackgroundSet{bg}, CoalitionSpace::make(5, {3, 4}));
  EXPECT_NEAR(r.phi[1], 0.0, 1e-12);
  EXPECT_NEAR(r.phi_geo_x[1], 0.0, 1e-12);
}

TEST(ExplainExact, SymmetricTwins) {
  // Columns 0 and 1 are exchangeable and hold identical values everywhere.
  auto pred = make_predictor(5, [](std::span<const double> r) {
    return r[0] * r[1] + std::sin(r[0] + r[1]) * r[3] + r[2] * r[4];
  });
  std::mt19937_64 gen(10);
  auto bg = testing_support::random_matrix(5, 5, gen);
  for (std::size_t i = 0; i < bg.rows(); ++i) bg(i, 1) = bg(i, 0);
  std::vector<double> x{0.7, 0.7, -1.2, 0.4, 1.1};
  const auto r = geoxai::explain_exact(pred, x, BackgroundSet{bg}, CoalitionSpace::make(5, {3, 4}));
  EXPECT_NEAR(r.phi[0], r.phi[1], 1e-12);
  EXPECT_NEAR(r.phi_geo_x[0], r.phi_geo_x[1], 1e-12);
}

TEST(ShapClassic, MatchesSingleCoordinateGame) {
  std::mt19937_64 gen(12);
  for (int trial = 0; trial < 5; ++trial) {
    const auto model = testing_support::RandomModel::draw(5, gen);
    auto pred = make_predictor(5, [&](std::span<const double> r) { return model(r); });
    const auto bg = testing_support::random_matrix(3, 5, gen);
    const auto x = testing_support::random_matrix(1, 5, gen);
    const auto geo = geoxai::explain_exact(pred, x.row(0), BackgroundSet{bg}, CoalitionSpace::make(5, {4}));
    const auto classic = geoxai::shap_classic(pred, x.row(0), BackgroundSet{bg});
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(geo.phi[j], classic.phi[j], 1e-12);
    EXPECT_NEAR(geo.phi_geo, classic.phi[4], 1e-12);
    EXPECT_NEAR(classic.residual, 0.0, 1e-10);
  }
}

TEST(ShapClassic, LinearClosedForm) {
  auto pred = make_predictor(3, [](std::span<const double> r) { return 1.5 * r[0] - 2 * r[1] + 0.5 * r[2]; });
  BackgroundSet bg{Matrix{{1, 2, 3}, {3, 0, -1}, {2, 1, 4}}};
  const auto r = geoxai::shap_classic(pred, std::vector<double>{4, 4, 4}, bg);
  EXPECT_NEAR(r.phi[0], 3.0, 1e-12);
  EXPECT_NEAR(r.phi[1], -6.0, 1e-12);
  EXPECT_NEAR(r.phi[2], 1.0, 1e-12);
  EXPECT_NEAR(r.residual, 0.0, 1e-12);
}

TEST(ExplainSampled, BudgetBelowMinimum) {
  LinearFixture f;
  geoxai::SampledOptions opt;
  opt.budget = geoxai::min_sampled_budget(3) - 1;
  try {
    geoxai::explain_sampled(f.pred, f.x, f.bg, f.cs, opt);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidBudget);
  }
}

TEST(ExplainSampled, FullBudgetIsSeedIndependent) {
  std::mt19937_64 gen(13);
  const auto model = testing_support::RandomModel::draw(9, gen);
  auto pred = make_predictor(9, [&](std::span<const double> r) { return model(r); });
  const auto bg = testing_support::random_matrix(4, 9, gen);
  const auto x = testing_support::random_matrix(1, 9, gen);
  const auto cs = CoalitionSpace::make(9, {7, 8});
  geoxai::SampledOptions a{256, 1e-8, 1}, b{256, 1e-8, 99};
  const auto ra = geoxai::explain_sampled(pred, x.row(0), BackgroundSet{bg}, cs, a);
  const auto rb = geoxai::explain_sampled(pred, x.row(0), BackgroundSet{bg}, cs, b);
  EXPECT_NEAR(ra.phi_geo, rb.phi_geo, 1e-8);
  for (std::size_t j = 0; j < ra.phi.size(); ++j) {
    EXPECT_NEAR(ra.phi[j], rb.phi[j], 1e-8);
    EXPECT_NEAR(ra.phi_geo_x[j], rb.phi_geo_x[j], 1e-8);
  }
}

TEST(ExplainSampled, ConstraintHoldsOnInteractingModels) {
  std::mt19937_64 gen(14);
  for (int trial = 0; trial < 5; ++trial) {
    const auto model = testing_support::RandomModel::draw(7, gen);
    auto pred = make_predictor(7, [&](std::span<const double> r) { return model(r); });
    const auto bg = testing_support::random_matrix(5, 7, gen);
    const auto x = testing_support::random_matrix(1, 7, gen);
    geoxai::SampledOptions opt{20, 1e-8, static_cast<std::uint64_t>(trial)};
    const auto r = geoxai::explain_sampled(pred, x.row(0), BackgroundSet{bg}, CoalitionSpace::make(7, {5, 6}), opt);
    EXPECT_LE(std::abs(r.residual), 1e-8);
    EXPECT_EQ(r.estimator, geoxai::Estimator::kSampled);
  }
}

TEST(ExplainSampled, AgreesWithExactOnSeparableModel) {
  auto fn = [](std::span<const double> r) {
    return std::sin(r[5]) + r[6] * r[6] + 2 * r[0] - r[1] * r[1] + std::cos(r[2]) + r[3] * r[4];
  };
  auto pred = make_predictor(7, fn);
  std::mt19937_64 gen(15);
  const auto bg = testing_support::random_matrix(6, 7, gen);
  const auto x = testing_support::random_matrix(1, 7, gen);
  const auto cs = CoalitionSpace::make(7, {5, 6});
  const auto exact = geoxai::explain_exact(pred, x.row(0), BackgroundSet{bg}, cs);
  const auto sampled = geoxai::explain_sampled(pred, x.row(0), BackgroundSet{bg}, cs, {64, 1e-8, 3});
  double scale = std::abs(exact.phi_geo);
  for (double v : exact.phi) scale = std::max(scale, std::abs(v));
  EXPECT_NEAR(sampled.phi_geo, exact.phi_geo, 0.05 * scale);
  for (std::size_t j = 0; j < exact.phi.size(); ++j) {
    EXPECT_NEAR(sampled.phi[j], exact.phi[j], 0.05 * scale);
    EXPECT_NEAR(sampled.phi_geo_x[j], 0.0, 0.05 * scale);
  }
}

TEST(ExplainSampled, RecoversLocalSlopeOfVaryingCoefficientModel) {
  // y = b(u, v) * x0 + x1: main + synergy of x0 equals b(u, v) (x0 - mean x0).
  auto fn = [](std::span<const double> r) { return (1.0 + r[2] * r[3]) * r[0] + r[1]; };
  auto pred = make_predictor(4, fn);
  std::mt19937_64 gen(16);
  const auto bg = testing_support::random_matrix(10, 4, gen);
  double mean0 = 0.0;
  for (std::size_t i = 0; i < 10; ++i) mean0 += bg(i, 0) / 10.0;
  const std::vector<double> x{1.3, -0.2, 0.8, -1.5};
  const auto r = geoxai::explain_sampled(pred, x, BackgroundSet{bg}, CoalitionSpace::make(4, {2, 3}), {8, 1e-8, 0});
  EXPECT_NEAR((r.phi[0] + r.phi_geo_x[0]) / (x[0] - mean0), 1.0 + 0.8 * -1.5, 1e-9);
}

TEST(ExplainAll, IndependentOfWorkerCount) {
  std::mt19937_64 gen(17);
  const auto model = testing_support::RandomModel::draw(6, gen);
  auto pred = make_predictor(6, [&](std::span<const double> r) { return model(r); });
  const auto bg = testing_support::random_matrix(5, 6, gen);
  const auto xs = testing_support::random_matrix(7, 6, gen);
  const auto cs = CoalitionSpace::make(6, {4, 5});
  for (auto est : {geoxai::Estimator::kExact, geoxai::Estimator::kSampled}) {
    geoxai::EngineOptions one, four;
    one.estimator = four.estimator = est;
    one.budget = four.budget = 20;
    one.seed = four.seed = 4;
    four.workers = 4;
    const auto a = geoxai::explain_all(pred, xs, {}, BackgroundSet{bg}, cs, one);
    const auto b = geoxai::explain_all(pred, xs, {}, BackgroundSet{bg}, cs, four);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].phi, b[i].phi);
      EXPECT_EQ(a[i].phi_geo_x, b[i].phi_geo_x);
      EXPECT_EQ(a[i].phi_geo, b[i].phi_geo);
    }
  }
}

TEST(Background, SubsampleIsSeededAndOrdered) {
  std::mt19937_64 gen(18);
  const auto data = testing_support::random_matrix(50, 3, gen);
  const auto a = geoxai::subsample_background(data, 10, 7);
  const auto b = geoxai::subsample_background(data, 10, 7);
  const auto c = geoxai::subsample_background(data, 10, 8);
  EXPECT_EQ(a.rows, b.rows);
  EXPECT_NE(a.rows, c.rows);
  EXPECT_EQ(a.m(), 10u);
  EXPECT_EQ(a.provenance, "subsample");
  EXPECT_EQ(geoxai::subsample_background(data, 500, 7).m(), 50u);
}

TEST(ExplanationCsv, RoundTrip) {
  auto schema = geoxai::Schema::make({"x1", "x2"}, "y");
  LinearFixture f;
  auto r = geoxai::explain_exact(f.pred, f.x, f.bg, f.cs);
  r.id = "a7";
  std::stringstream ss;
  geoxai::write_explanations_csv(ss, {r}, schema, "run42");
  const auto text = ss.str();
  EXPECT_NE(text.find("# run_id=run42"), std::string::npos);
  EXPECT_NE(text.find("id,lat,lon,yhat,phi0,phi_geo,phi_x1,phi_x2,phi_geo_x_x1,phi_geo_x_x2,residual,estimator,budget"),
            std::string::npos);
  const auto back = geoxai::read_explanations_csv(ss, schema);
  ASSERT_EQ(back.size(), 1u);
  EXPECT_EQ(back[0].id, "a7");
  EXPECT_EQ(back[0].phi, r.phi);
  EXPECT_EQ(back[0].phi_geo_x, r.phi_geo_x);
  EXPECT_EQ(back[0].location, r.location);
  EXPECT_EQ(back[0].budget, r.budget);
}

}  // namespace

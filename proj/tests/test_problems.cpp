#include <cmath>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "avagrad_lab/problems.hpp"

namespace avalab {
namespace {

TEST(Synth, Constants) {
  const auto synth = synth_make(999, 1);
  EXPECT_DOUBLE_EQ(synth->p(), 0.002);
  EXPECT_DOUBLE_EQ(synth->w_star(), 0.4994994994994995);
  EXPECT_DOUBLE_EQ((*synth->full_grad({1.0}))[0], 1.0);
  const ProblemConstants c = *synth->constants({0.5});
  EXPECT_DOUBLE_EQ(c.M, 1.998);
  EXPECT_EQ(c.G_inf, 999.0);
  EXPECT_EQ(c.G_2, 999.0);
  // Closed form: p C (w1 - w*)^2 / 2.
  EXPECT_NEAR(c.D_gap, 2.5025025025025025e-7, 1e-19);
}

TEST(Synth, FullGradIdentity) {
  const auto synth = synth_make(999, 1);
  RngStream rng(4);
  const auto outcomes = *synth->outcomes();
  for (int k = 0; k < 100; ++k) {
    const double w = rng.uniform();
    const double fg = (*synth->full_grad({w}))[0];
    EXPECT_NEAR(fg, 0.002 * (999 * w) + 0.998 * (-1.0), 1e-15);
    double enumerated = 0.0;
    for (const Outcome& o : outcomes) enumerated += o.probability * synth->grad({w}, o.token)[0];
    EXPECT_EQ(fg, enumerated);
  }
}

TEST(Synth, Stationarity) {
  const auto synth = synth_make(999, 1);
  EXPECT_LE(std::abs((*synth->full_grad({synth->w_star()}))[0]), 1e-12);
}

TEST(Synth, SamplerFrequency) {
  const auto synth = synth_make(999, 1);
  RngStream rng(2718);
  const int n = 1'000'000;
  int rare = 0;
  for (int i = 0; i < n; ++i) {
    if (std::get<OutcomeToken>(synth->sample(rng)).index == SynthProblem::kRare) ++rare;
  }
  const double sigma = std::sqrt(n * 0.002 * 0.998);
  EXPECT_NEAR(rare, 2000.0, 4 * sigma);
}

TEST(Synth, ConstructorValidation) {
  EXPECT_THROW(synth_make(1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(synth_make(10.0, -1.0), std::invalid_argument);
  EXPECT_THROW(synth_make(3.0, 5.0), std::invalid_argument);
}

TEST(Synth, CommonTokenFdExact) {
  const auto synth = synth_make(999, 1);
  EXPECT_EQ(synth->grad({0.3}, OutcomeToken{SynthProblem::kCommon})[0], -1.0);
  EXPECT_LE(fd_check(*synth, {0.3}, OutcomeToken{SynthProblem::kCommon}, 1e-5), 1e-10);
}

TEST(Quadratic, Examples) {
  const auto q = quadratic_make(1, {2.0}, 0.0, Vector{0.0});
  EXPECT_EQ((*q->full_grad({3.0}))[0], 6.0);
  const auto q2 = quadratic_make(2, {1.0, 4.0}, 0.1, Vector{0.0, 0.0});
  EXPECT_EQ(q2->constants({1.0, 1.0})->M, 4.0);
  EXPECT_THROW(quadratic_make(2, {1.0}, 0.0, Vector{0.0, 0.0}), std::invalid_argument);
}

TEST(Quadratic, MonteCarloMeanGradient) {
  RngStream setup(5);
  const auto q = quadratic_make(3, {0.5, 1.0, 3.0}, 0.5, setup);
  const Vector w{0.2, -1.0, 2.0};
  const Vector fg = *q->full_grad(w);
  RngStream rng(6);
  const int n = 100000;
  Vector sum = Vector::zeros(3);
  for (int i = 0; i < n; ++i) sum = elementwise(sum, q->grad(w, q->sample(rng)), BinaryOp::kAdd);
  for (std::size_t i = 0; i < 3; ++i) {
    const double band = 3 * 0.5 * q->curvatures()[i] / std::sqrt(n);
    EXPECT_NEAR(sum[i] / n, fg[i], band) << "i=" << i;
  }
}

TEST(Quadratic, FdCheck) {
  RngStream rng(7);
  const auto q = quadratic_make(5, {0.1, 1, 2, 5, 10}, 0.3, rng);
  for (int k = 0; k < 20; ++k) {
    Vector w(5);
    for (double& x : w) x = rng.normal();
    EXPECT_LE(fd_check(*q, w, q->sample(rng), 1e-5), 1e-7);
  }
}

TEST(Mlp, ZeroWeightsGiveLogTwo) {
  LabeledSet set;
  set.n_in = 2;
  set.push_back(std::vector<double>{0.3, -1.2}, 1);
  const auto mlp = mlp_make(2, 3, 2, set, 1);
  const Vector w = Vector::zeros(mlp->dim());
  EXPECT_NEAR(mlp->loss(w, BatchToken{{0}}), std::log(2.0), 1e-15);
  const auto probs = mlp->predict(w, set.row(0));
  EXPECT_DOUBLE_EQ(probs[0], 0.5);
  EXPECT_DOUBLE_EQ(probs[1], 0.5);
}

TEST(Mlp, DimensionLayout) {
  const MlpShape s{4, 5, 3};
  EXPECT_EQ(s.dim(), (4u + 1) * 5 + (5 + 1) * 3);
}

TEST(Mlp, FdCheckRandomPoints) {
  RngStream rng(8);
  const auto data = gaussian_blobs(10, 3, 4, 2.0, rng);
  const auto mlp = mlp_make(4, 6, 3, data, 5);
  for (int k = 0; k < 20; ++k) {
    Vector w(mlp->dim());
    for (double& x : w) x = rng.normal();
    const double n = norms(w).l2;
    for (double& x : w) x /= n;  // ||w|| <= 1
    EXPECT_LE(fd_check(*mlp, w, mlp->sample(rng), 1e-5), 1e-5);
  }
}

TEST(Mlp, FullBatchEqualsFullGrad) {
  RngStream rng(9);
  const auto data = gaussian_blobs(4, 2, 3, 1.0, rng);
  const auto mlp = mlp_make(3, 4, 2, data, data.size());
  const Vector w = mlp->initial_point(rng);
  BatchToken all;
  for (std::size_t i = 0; i < data.size(); ++i) all.rows.push_back(i);
  const Vector g = mlp->grad(w, all);
  const Vector fg = *mlp->full_grad(w);
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(g[i], fg[i], 1e-15);
}

TEST(Mlp, BatchesWithoutReplacement) {
  RngStream rng(10);
  const auto data = gaussian_blobs(5, 2, 2, 1.0, rng);
  const auto mlp = mlp_make(2, 2, 2, data, 7);
  for (int k = 0; k < 100; ++k) {
    auto rows = std::get<BatchToken>(mlp->sample(rng)).rows;
    ASSERT_EQ(rows.size(), 7u);
    std::sort(rows.begin(), rows.end());
    EXPECT_EQ(std::adjacent_find(rows.begin(), rows.end()), rows.end());
    EXPECT_LT(rows.back(), data.size());
  }
}

TEST(Blobs, TwoPointsAtDistanceTwentyAndDeterministic) {
  RngStream a(11), b(11);
  const auto s1 = gaussian_blobs(1, 2, 2, 10.0, a);
  const auto s2 = gaussian_blobs(1, 2, 2, 10.0, b);
  EXPECT_EQ(s1.features, s2.features);
  EXPECT_EQ(s1.labels, s2.labels);
  const double dx = s1.row(0)[0] - s1.row(1)[0];
  const double dy = s1.row(0)[1] - s1.row(1)[1];
  EXPECT_NEAR(std::hypot(dx, dy), 20.0, 6.0);
}

TEST(Blobs, ZeroSeparationSharesCentre) {
  RngStream rng(12);
  const auto s = gaussian_blobs(20000, 2, 2, 0.0, rng);
  double mean0 = 0, mean1 = 0;
  for (std::size_t r = 0; r < s.size(); ++r) (s.labels[r] == 0 ? mean0 : mean1) += s.row(r)[0];
  EXPECT_NEAR(mean0 / 20000, mean1 / 20000, 0.05);
}

TEST(CsvDataset, ParsesAndReportsErrors) {
  std::istringstream ok("1.0,2.0,0\n");
  const LabeledSet set = parse_csv_dataset(ok, "ok.csv", 2, 2);
  EXPECT_EQ(set.size(), 1u);
  EXPECT_EQ(set.labels[0], 0);
  EXPECT_EQ(set.row(0)[1], 2.0);

  std::istringstream crlf("1,2,1\r\n\r\n3,4,0\r\n");
  EXPECT_EQ(parse_csv_dataset(crlf, "crlf.csv", 2, 2).size(), 2u);

  std::istringstream bad("1.0,x,0\n");
  try {
    parse_csv_dataset(bad, "bad.csv", 2, 2);
    FAIL() << "expected DatasetError";
  } catch (const DatasetError& e) {
    EXPECT_NE(std::string(e.what()).find("bad.csv:1:"), std::string::npos) << e.what();
  }

  std::istringstream empty("");
  EXPECT_THROW(parse_csv_dataset(empty, "empty.csv", 2, 2), DatasetError);
  std::istringstream label("1,2,5\n");
  EXPECT_THROW(parse_csv_dataset(label, "label.csv", 2, 2), DatasetError);
  std::istringstream fields("1,2\n");
  EXPECT_THROW(parse_csv_dataset(fields, "fields.csv", 2, 2), DatasetError);
  EXPECT_THROW(load_csv_dataset("/nonexistent/data.csv", 2, 2), DatasetError);
}

TEST(Problems, GradDeterministicGivenToken) {
  RngStream rng(13);
  const auto data = gaussian_blobs(5, 2, 2, 1.0, rng);
  const auto mlp = mlp_make(2, 3, 2, data, 3);
  const Vector w = mlp->initial_point(rng);
  const SampleToken tok = mlp->sample(rng);
  EXPECT_EQ(mlp->grad(w, tok), mlp->grad(w, tok));
}

}  // namespace
}  // namespace avalab

#include <doctest.h>

#include <algorithm>
#include <functional>

#include "mcinf/error.hpp"
#include "mcinf/infer.hpp"
#include "mcinf/oracle.hpp"
#include "support.hpp"

using namespace mcinf;

namespace {

ObservationSet transposed(const ObservationSet& obs) {
  std::vector<std::pair<Index2, double>> e;
  for (std::size_t k = 0; k < obs.size(); ++k)
    e.push_back({Index2{obs.indices()[k].col, obs.indices()[k].row}, obs.values()[k]});
  std::sort(e.begin(), e.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Index2> idx;
  std::vector<double> val;
  for (const auto& [ix, v] : e) {
    idx.push_back(ix);
    val.push_back(v);
  }
  return ObservationSet(obs.n2(), obs.n1(), idx, val, obs.p_nominal());
}

// Columns of the 8 x 8 Sylvester-Hadamard matrix, scaled to unit norm.
Matrix hadamard_basis(Index r) {
  Matrix H(1, 1);
  H(0, 0) = 1.0;
  while (H.rows() < 8) {
    Matrix next(2 * H.rows(), 2 * H.cols());
    next << H, H, H, -H;
    H = next;
  }
  return H.leftCols(r) / std::sqrt(8.0);
}

// Minimizer of a 2-D least-squares objective by repeated grid zooming.
Vector grid_minimize(const std::function<double(double, double)>& f, double half_width) {
  double cx = 0.0;
  double cy = 0.0;
  double w = half_width;
  for (int round = 0; round < 40; ++round) {
    double best = f(cx, cy);
    double bx = cx;
    double by = cy;
    for (int a = -20; a <= 20; ++a)
      for (int b = -20; b <= 20; ++b) {
        const double x = cx + w * a / 20.0;
        const double y = cy + w * b / 20.0;
        const double v = f(x, y);
        if (v < best) {
          best = v;
          bx = x;
          by = y;
        }
      }
    cx = bx;
    cy = by;
    w *= 0.5;
  }
  Vector out(2);
  out << cx, cy;
  return out;
}

}  // namespace

TEST_CASE("ideal_row_estimator with complete noiseless data") {
  const GroundTruth gt = generate_ground_truth(20, 3, std::vector<double>{3, 2, 1}, 1);
  const ObservationSet obs = observe(gt, full_mask(20, 20), 0.0, 1);
  for (Index i = 0; i < 20; i += 3)
    CHECK((ideal_row_estimator(obs, gt.Ystar, i) - gt.Xstar.row(i).transpose()).norm() < 1e-12);
}

TEST_CASE("ideal_row_estimator matches a grid oracle with five observations") {
  const GroundTruth gt = generate_ground_truth(10, 2, unit_spectrum(2), 2);
  const ObservationSet obs(10, 10, {{4, 0}, {4, 2}, {4, 5}, {4, 7}, {4, 9}}, {0.3, -0.2, 0.5, 0.1, -0.4});
  const auto f = [&](double a, double b) {
    double s = 0.0;
    for (std::size_t k = 0; k < obs.size(); ++k) {
      const Index c = obs.indices()[k].col;
      const double pred = a * gt.Ystar(c, 0) + b * gt.Ystar(c, 1);
      s += (obs.values()[k] - pred) * (obs.values()[k] - pred);
    }
    return s;
  };
  const Vector u = ideal_row_estimator(obs, gt.Ystar, 4);
  CHECK((u - grid_minimize(f, 20.0)).norm() <= 1e-6);
}

TEST_CASE("ideal_row_estimator is unbiased and attains the bound") {
  const GroundTruth gt = generate_ground_truth(60, 3, std::vector<double>{2, 1.5, 1}, 3);
  const IndexSet mask = sample_mask(60, 60, 0.4, 3);
  const double sigma = 0.2;
  const Index i = 7;
  const int draws = 2000;
  Matrix est(draws, 3);
  for (int t = 0; t < draws; ++t)
    est.row(t) = ideal_row_estimator(observe(gt, mask, sigma, 1000 + t), gt.Ystar, i).transpose();
  const CrlbRow bound = crlb_row(observe(gt, mask, sigma, 1), gt.Ystar, sigma, i);
  const Vector mean500 = est.topRows(500).colwise().mean().transpose();
  CHECK((mean500 - gt.Xstar.row(i).transpose()).norm() <= 4.0 * std::sqrt(bound.matrix.trace() / 500.0));

  const Vector mean = est.colwise().mean().transpose();
  const Matrix centered = est.rowwise() - mean.transpose();
  const Matrix cov = centered.transpose() * centered / (draws - 1.0);
  const double op = testing::singular_values_oracle(cov - bound.matrix)(0);
  CHECK(op <= 0.15 * testing::singular_values_oracle(bound.matrix)(0));
}

TEST_CASE("crlb_row examples") {
  const std::vector<double> sv{4.0, 1.0};
  const GroundTruth gt = generate_ground_truth(30, 2, sv, 4);
  const ObservationSet full = observe(gt, full_mask(30, 30), 0.0, 1);
  const double sigma = 0.3;
  const CrlbRow c = crlb_row(full, gt.Ystar, sigma, 5);
  Matrix expect = Matrix::Zero(2, 2);
  expect(0, 0) = sigma * sigma / 4.0;
  expect(1, 1) = sigma * sigma / 1.0;
  CHECK((c.matrix - expect).norm() < 1e-12);
  CHECK((c.matrix - c.matrix.transpose()).norm() < 1e-15);
  CHECK(c.condition == doctest::Approx(4.0));
  CHECK(!c.ill_conditioned);
  CHECK((crlb_row(full, gt.Ystar, 2 * sigma, 5).matrix - 4.0 * c.matrix).norm() < 1e-14);

  const ObservationSet one(30, 30, {{5, 3}}, {1.0});
  CHECK_THROWS_AS(crlb_row(one, gt.Ystar, sigma, 5), NumericalError);
}

TEST_CASE("crlb_entry homogeneity and symmetry") {
  const GroundTruth gt = generate_ground_truth(40, 2, std::vector<double>{2.0, 1.0}, 5);
  const ObservationSet obs = observe(gt, sample_mask(40, 40, 0.5, 5), 0.0, 5, 0.5);
  const double base = crlb_entry(obs, gt.Xstar, gt.Ystar, 0.1, 0.5, 3, 11);
  CHECK(base > 0.0);
  CHECK(crlb_entry(obs, gt.Xstar, gt.Ystar, 0.2, 0.5, 3, 11) == doctest::Approx(4.0 * base).epsilon(1e-14));
  CHECK(crlb_entry(obs, gt.Xstar, gt.Ystar, 0.0, 0.5, 3, 11) == 0.0);
  CHECK(crlb_entry(transposed(obs), gt.Ystar, gt.Xstar, 0.1, 0.5, 11, 3) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("crlb_entry with complete data and flat leverages") {
  const Matrix B = hadamard_basis(2);
  const GroundTruth gt = ground_truth_from_bases(B, B, unit_spectrum(2));
  const ObservationSet full = observe(gt, full_mask(8, 8), 0.0, 1);
  const double sigma = 0.5;
  for (Index i = 0; i < 8; ++i)
    for (Index j = 0; j < 8; ++j) {
      const double v = true_entry_variance(gt, sigma, 1.0, i, j).value;
      const double c = crlb_entry(full, gt.Xstar, gt.Ystar, sigma, 1.0, i, j);
      CHECK(std::abs(c - v) <= 5.0 * (2.0 / 8.0) * v);
      CHECK(c >= v);
    }
}

TEST_CASE("oracle_l2_lower") {
  CHECK(oracle_l2_lower(1000, 5, 1e-3, 0.2) == doctest::Approx(5e-2).epsilon(1e-12));
  CHECK(oracle_l2_lower(1000, 10, 1e-3, 0.2) == doctest::Approx(2.0 * oracle_l2_lower(1000, 5, 1e-3, 0.2)));
  CHECK(oracle_l2_lower(100, 2, 2e-3, 0.5) == doctest::Approx(4.0 * oracle_l2_lower(100, 2, 1e-3, 0.5)));
  CHECK_THROWS_AS(oracle_l2_lower(0, 5, 1.0, 0.2), ConfigError);
  CHECK_THROWS_AS(oracle_l2_lower(10, 5, 1.0, 0.0), ConfigError);
  CHECK_THROWS_AS(oracle_l2_lower(10, 5, -1.0, 0.5), ConfigError);
}

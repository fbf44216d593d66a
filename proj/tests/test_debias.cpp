#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "mcinf/debias.hpp"
#include "mcinf/error.hpp"
#include "support.hpp"

using namespace mcinf;

namespace {

ObservationSet permuted(const ObservationSet& obs, const std::vector<Index>& pr, const std::vector<Index>& pc) {
  std::vector<std::pair<Index2, double>> e;
  for (std::size_t k = 0; k < obs.size(); ++k)
    e.push_back({Index2{pr[obs.indices()[k].row], pc[obs.indices()[k].col]}, obs.values()[k]});
  std::sort(e.begin(), e.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Index2> idx;
  std::vector<double> val;
  for (const auto& [ix, v] : e) {
    idx.push_back(ix);
    val.push_back(v);
  }
  return ObservationSet(obs.n1(), obs.n2(), idx, val, obs.p_nominal());
}

}  // namespace

TEST_CASE("debias_matrix collapses to the truth on exact data") {
  const GroundTruth gt = generate_ground_truth(25, 2, unit_spectrum(2), 1);
  const ObservationSet full = observe(gt, full_mask(25, 25), 0.0, 1);
  CHECK((debias_matrix(testing::gaussian(25, 25, 2), full, 2, 1.0) - gt.matrix()).norm() < 1e-10);
  const ObservationSet part = observe(gt, sample_mask(25, 25, 0.3, 2), 0.0, 2, 0.3);
  CHECK((debias_matrix(gt.matrix(), part, 2, 0.3) - gt.matrix()).norm() < 1e-10);
  CHECK_THROWS_AS(debias_matrix(gt.matrix(), part, 2, 0.0), ConfigError);
  CHECK_THROWS_AS(debias_matrix(gt.matrix(), part, 26, 0.3), ConfigError);
}

TEST_CASE("debias_matrix has rank at most r") {
  const GroundTruth gt = generate_ground_truth(30, 3, unit_spectrum(3), 4);
  const ObservationSet obs = observe(gt, sample_mask(30, 30, 0.4, 4), 0.1, 4, 0.4);
  for (Index r = 1; r <= 4; ++r) CHECK(numerical_rank(debias_matrix(testing::gaussian(30, 30, r), obs, r, 0.4)) <= r);
}

TEST_CASE("debias_matrix commutes with row and column permutations") {
  const GroundTruth gt = generate_ground_truth(20, 2, unit_spectrum(2), 5);
  const ObservationSet obs = observe(gt, sample_mask(20, 20, 0.5, 5), 0.05, 5, 0.5);
  std::vector<Index> pr(20);
  std::vector<Index> pc(20);
  std::iota(pr.begin(), pr.end(), 0);
  std::iota(pc.begin(), pc.end(), 0);
  std::mt19937_64 g(3);
  std::shuffle(pr.begin(), pr.end(), g);
  std::shuffle(pc.begin(), pc.end(), g);
  Eigen::PermutationMatrix<Eigen::Dynamic> Pr(20);
  Eigen::PermutationMatrix<Eigen::Dynamic> Pc(20);
  for (Index k = 0; k < 20; ++k) {
    Pr.indices()(k) = static_cast<int>(pr[k]);
    Pc.indices()(k) = static_cast<int>(pc[k]);
  }
  const Matrix Z = testing::gaussian(20, 20, 6);
  const Matrix base = debias_matrix(Z, obs, 2, 0.5);
  const Matrix moved = debias_matrix(Pr * Z * Pc.transpose(), permuted(obs, pr, pc), 2, 0.5);
  CHECK((moved - Pr * base * Pc.transpose()).norm() < 1e-10);
}

TEST_CASE("deshrink_factors examples") {
  const Matrix X = testing::gaussian(10, 2, 1);
  const Matrix Y = testing::gaussian(8, 2, 2);
  const FactorPair same = deshrink_factors(FactorPair{X, Y}, 0.0, 0.5);
  CHECK((same.X - X).norm() < 1e-14);
  CHECK((same.Y - Y).norm() < 1e-14);

  Matrix u = Matrix::Zero(3, 1);
  u(1, 0) = 2.0;  // U Sigma^{1/2} with Sigma = 4
  const FactorPair one = deshrink_factors(FactorPair{u, u}, 2.5, 0.5);
  CHECK(one.X.squaredNorm() == doctest::Approx(9.0));
  CHECK((one.X * one.Y.transpose()).norm() == doctest::Approx(4.0 + 5.0));
  CHECK_THROWS_AS(deshrink_factors(FactorPair{Matrix::Zero(4, 2), Y}, 1.0, 0.5), NumericalError);
}

TEST_CASE("Gram shift identity for random balanced factors") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const GroundTruth gt = generate_ground_truth(40, 3, std::vector<double>{4.0, 2.0, 0.5}, seed);
    const double shift = 0.01 * static_cast<double>(seed + 1);
    const FactorPair d = deshrink_factors(FactorPair{gt.Xstar, gt.Ystar}, shift * 0.3, 0.3);
    const Matrix G = gt.Xstar.transpose() * gt.Xstar;
    CHECK((d.X.transpose() * d.X - G - shift * Matrix::Identity(3, 3)).norm() <= 1e-9 * G.norm());
    CHECK((d.Y.transpose() * d.Y - G - shift * Matrix::Identity(3, 3)).norm() <= 1e-9 * G.norm());
  }
}

TEST_CASE("tangent_project examples") {
  const Matrix U = testing::gram_schmidt(testing::gaussian(12, 2, 1));
  const Matrix V = testing::gram_schmidt(testing::gaussian(9, 2, 2));
  const Matrix inT = U * testing::gaussian(2, 2, 3) * V.transpose();
  CHECK((tangent_project(U, V, inT) - inT).norm() < 1e-12);

  const Matrix Pu = Matrix::Identity(12, 12) - U * U.transpose();
  const Matrix Pv = Matrix::Identity(9, 9) - V * V.transpose();
  const Matrix outT = Pu * testing::gaussian(12, 9, 4) * Pv;
  CHECK(tangent_project(U, V, outT).norm() < 1e-12);

  const Matrix A = testing::gaussian(12, 9, 5);
  const Matrix PA = tangent_project(U, V, A);
  CHECK((tangent_project(U, V, PA) - PA).norm() <= 1e-10 * PA.norm());
  CHECK_THROWS_AS(tangent_project(U, V, testing::gaussian(9, 9, 1)), ConfigError);
}

TEST_CASE("debias_linearized on exact data") {
  const GroundTruth gt = generate_ground_truth(20, 2, unit_spectrum(2), 7);
  const ObservationSet full = observe(gt, full_mask(20, 20), 0.0, 1);
  CHECK((debias_linearized(gt.matrix(), full, 2, 1.0) - gt.matrix()).norm() < 1e-10);
  // a rank-r Z sharing the truth's tangent space
  const Matrix Z = gt.Ustar * testing::gaussian(2, 2, 8) * gt.Vstar.transpose();
  CHECK((debias_linearized(Z, full, 2, 1.0) - gt.matrix()).norm() < 1e-10);
}

TEST_CASE("debias on a converged nonconvex estimate") {
  const GroundTruth gt = generate_ground_truth(150, 2, unit_spectrum(2), 8);
  const double sigma = 1e-3;
  const ObservationSet obs = observe(gt, sample_mask(150, 150, 0.4, 8), sigma, 8, 0.4);
  const double lambda = default_lambda(sigma, 150, 0.4);
  const EstimatorOutput ncvx = solve_nonconvex(obs, 2, lambda);
  const DebiasedEstimate d = debias(ncvx, obs, 2);
  CHECK(d.source == EstimateSource::nonconvex);
  CHECK(d.gram_shift_defect <= 1e-9);
  CHECK(d.warnings.empty());
  CHECK(numerical_rank(d.Md) <= 2);
  const double err = (d.Md - gt.matrix()).norm();
  CHECK((d.Xd * d.Yd.transpose() - d.Md).norm() <= 1e-2 * err);
  CHECK((debias_linearized(ncvx.Z, obs, 2, 0.4) - d.Md).norm() <= 1e-2 * err);

  const EstimatorOutput cvx = solve_convex(obs, lambda, SolverOptions::convex_defaults(), ncvx.Z);
  const DebiasedEstimate dc = debias(cvx, obs, 2);
  CHECK(dc.source == EstimateSource::convex);
  CHECK(dc.gram_shift_defect <= 1e-9);
}

TEST_CASE("debias warns on unbalanced source factors") {
  const GroundTruth gt = generate_ground_truth(30, 2, unit_spectrum(2), 9);
  const ObservationSet obs = observe(gt, full_mask(30, 30), 0.01, 9);
  EstimatorOutput est;
  est.factors = FactorPair{2.0 * gt.Xstar, 0.5 * gt.Ystar};
  est.Z = est.factors->X * est.factors->Y.transpose();
  est.lambda = 0.01;
  const DebiasedEstimate d = debias(est, obs, 2);
  CHECK(std::find(d.warnings.begin(), d.warnings.end(), "source factors are unbalanced") != d.warnings.end());
}

TEST_CASE("equivalence_report control and rotation invariance") {
  const GroundTruth gt = generate_ground_truth(100, 2, unit_spectrum(2), 10);
  const double sigma = 1e-3;
  const ObservationSet obs = observe(gt, sample_mask(100, 100, 0.5, 10), sigma, 10, 0.5);
  const double lambda = default_lambda(sigma, 100, 0.5);
  const EstimatorOutput ncvx = solve_nonconvex(obs, 2, lambda);

  const EquivalenceReport same = equivalence_report(ncvx, ncvx, obs, 2, lambda, &gt);
  CHECK(same.matrix_gap_cvx_vs_factored == same.matrix_gap_ncvx_vs_factored);
  CHECK(same.factor_procrustes_gap < 1e-12);
  REQUIRE(same.reference_error);
  CHECK(*same.reference_error > 0.0);

  const EstimatorOutput cvx = solve_convex(obs, lambda, SolverOptions::convex_defaults(), ncvx.Z);
  const EquivalenceReport rep = equivalence_report(cvx, ncvx, obs, 2, lambda, &gt);
  for (double g : {rep.matrix_gap_cvx_vs_factored, rep.matrix_gap_ncvx_vs_factored, rep.factor_procrustes_gap,
                   rep.linearized_gap}) {
    CHECK(g >= 0.0);
    CHECK(std::isfinite(g));
  }

  EstimatorOutput rotated = ncvx;
  const Matrix Q = testing::random_rotation(2, 11);
  rotated.factors->X = ncvx.factors->X * Q;
  rotated.factors->Y = ncvx.factors->Y * Q;
  const EquivalenceReport rot = equivalence_report(cvx, rotated, obs, 2, lambda, &gt);
  const double tol = 1e-9 * *rep.reference_error;
  CHECK(std::abs(rot.matrix_gap_cvx_vs_factored - rep.matrix_gap_cvx_vs_factored) <= tol);
  CHECK(std::abs(rot.matrix_gap_ncvx_vs_factored - rep.matrix_gap_ncvx_vs_factored) <= tol);
  CHECK(std::abs(rot.factor_procrustes_gap - rep.factor_procrustes_gap) <= tol);
  CHECK(std::abs(rot.linearized_gap - rep.linearized_gap) <= tol);
}

TEST_CASE("equivalence_report flags unconverged input") {
  const GroundTruth gt = generate_ground_truth(30, 2, unit_spectrum(2), 12);
  const ObservationSet obs = observe(gt, sample_mask(30, 30, 0.6, 12), 1e-2, 12, 0.6);
  SolverOptions brief;
  brief.max_iters = 2;
  const double lambda = default_lambda(1e-2, 30, 0.6);
  const EstimatorOutput ncvx = solve_nonconvex(obs, 2, lambda, brief);
  const EquivalenceReport rep = equivalence_report(ncvx, ncvx, obs, 2, lambda);
  CHECK(!rep.warnings.empty());
  CHECK(!rep.reference_error);
}

#include <doctest.h>

#include <vector>

#include "mcinf/error.hpp"
#include "mcinf/model.hpp"
#include "support.hpp"

using namespace mcinf;

TEST_CASE("unit spectrum forces identity Grams") {
  const auto sv = unit_spectrum(2);
  const GroundTruth gt = generate_ground_truth(4, 2, sv, 11);
  CHECK((gt.Xstar.transpose() * gt.Xstar - Matrix::Identity(2, 2)).norm() < 1e-10);
  CHECK((gt.Ystar.transpose() * gt.Ystar - Matrix::Identity(2, 2)).norm() < 1e-10);
}

TEST_CASE("ground truth invariants") {
  const std::vector<double> sv{5.0, 2.0, 0.5};
  const GroundTruth gt = generate_ground_truth(40, 3, sv, 3);
  const Matrix S = Vector::Map(sv.data(), 3).asDiagonal();
  CHECK((gt.Xstar.transpose() * gt.Xstar - S).norm() < 1e-9);
  CHECK((gt.Ystar.transpose() * gt.Ystar - S).norm() < 1e-9);
  CHECK((gt.matrix() - gt.Ustar * S * gt.Vstar.transpose()).norm() < 1e-10);
  CHECK(gt.kappa == 5.0 / 0.5);
  CHECK(gt.mu >= 1.0);
  CHECK(gt.entry(3, 7) == doctest::Approx(gt.matrix()(3, 7)).epsilon(1e-14));
}

TEST_CASE("kappa is exactly the spectrum ratio") {
  const std::vector<double> sv{3.7, 1.3};
  for (std::uint64_t seed = 0; seed < 5; ++seed) CHECK(generate_ground_truth(10, 2, sv, seed).kappa == 3.7 / 1.3);
}

TEST_CASE("mu agrees with a direct row scan over many seeds") {
  const auto sv = unit_spectrum(3);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const GroundTruth gt = generate_ground_truth(50, 3, sv, seed);
    double scan = 0.0;
    for (Index i = 0; i < 50; ++i) {
      double a = 0.0;
      double b = 0.0;
      for (Index k = 0; k < 3; ++k) {
        a += gt.Ustar(i, k) * gt.Ustar(i, k);
        b += gt.Vstar(i, k) * gt.Vstar(i, k);
      }
      scan = std::max({scan, a, b});
    }
    CHECK(gt.mu == doctest::Approx(scan * 50.0 / 3.0).epsilon(1e-12));
  }
}

TEST_CASE("incoherence examples") {
  CHECK(incoherence(Matrix::Identity(10, 2)) == doctest::Approx(5.0));
  Matrix H(4, 2);
  H << 1, 1, 1, -1, 1, 1, 1, -1;
  H /= 2.0;
  CHECK(incoherence(H) == doctest::Approx(1.0));
  const Matrix U = testing::gram_schmidt(testing::gaussian(10, 2, 5));
  double scan = 0.0;
  for (Index i = 0; i < 10; ++i) scan = std::max(scan, U.row(i).squaredNorm());
  CHECK(incoherence(U) == doctest::Approx(scan * 5.0).epsilon(1e-12));
  CHECK_THROWS_AS(incoherence(testing::gaussian(10, 2, 6)), ConfigError);
}

TEST_CASE("same seed gives bitwise identical truth") {
  const std::vector<double> sv{2.0, 1.0};
  const GroundTruth a = generate_ground_truth(30, 2, sv, 77);
  const GroundTruth b = generate_ground_truth(30, 2, sv, 77);
  CHECK(a.Ustar == b.Ustar);
  CHECK(a.Vstar == b.Vstar);
  CHECK(a.Xstar == b.Xstar);
  const GroundTruth c = generate_ground_truth(30, 2, sv, 78);
  CHECK(a.Ustar != c.Ustar);
}

TEST_CASE("rectangular truth") {
  const GroundTruth gt = generate_ground_truth(20, 12, 2, unit_spectrum(2), 4);
  CHECK(gt.Xstar.rows() == 20);
  CHECK(gt.Ystar.rows() == 12);
  CHECK((gt.Vstar.transpose() * gt.Vstar - Matrix::Identity(2, 2)).norm() < 1e-10);
}

TEST_CASE("invalid truth arguments") {
  const std::vector<double> up{1.0, 2.0};
  CHECK_THROWS_AS(generate_ground_truth(10, 2, up, 1), ConfigError);
  const std::vector<double> neg{1.0, -1.0};
  CHECK_THROWS_AS(generate_ground_truth(10, 2, neg, 1), ConfigError);
  CHECK_THROWS_AS(generate_ground_truth(3, 4, unit_spectrum(4), 1), ConfigError);
  CHECK_THROWS_AS(generate_ground_truth(10, 3, unit_spectrum(2), 1), ConfigError);
}

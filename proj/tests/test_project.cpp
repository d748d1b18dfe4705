#include <doctest.h>

#include <cmath>

#include "mma/project.hpp"
#include "mma/rng.hpp"

using namespace mma;

TEST_CASE("linf projection clamps elementwise") {
  ImageTensor t(8, 8, 1);
  t.at(0, 0, 0) = 0.9f;
  t.at(0, 1, 0) = -1.0f;
  t.at(0, 2, 0) = 0.01f;
  const ImageTensor p = project_linf(t, 8.0 / 255.0);
  CHECK(p.at(0, 0, 0) == doctest::Approx(8.0 / 255.0));
  CHECK(p.at(0, 1, 0) == doctest::Approx(-8.0 / 255.0));
  CHECK(p.at(0, 2, 0) == 0.01f);

  const ImageTensor q = project_linf(t, 0.1);
  CHECK(q.at(0, 1, 0) == doctest::Approx(-0.1f));
}

TEST_CASE("interior points pass through linf untouched") {
  RngStream rng(1, "proj");
  ImageTensor t(8, 8, 3);
  for (float& v : t.data) v = static_cast<float>(rng.uniform(-0.05, 0.05));
  const ImageTensor p = project_linf(t, 0.1);
  CHECK(p.data == t.data);
}

TEST_CASE("projections are idempotent bit-for-bit") {
  RngStream rng(2, "proj");
  for (int trial = 0; trial < 1000; ++trial) {
    ImageTensor t(4, 4, 1);
    for (float& v : t.data) v = static_cast<float>(rng.normal(0.0, 0.2));
    const double eps = rng.uniform(0.01, 0.3);
    const ImageTensor once = project_linf(t, eps);
    const ImageTensor twice = project_linf(once, eps);
    REQUIRE(once.data == twice.data);

    std::vector<double> v(16);
    for (double& x : v) x = rng.normal(0.0, 1.0);
    const std::vector<double> p1 = project_l2(v, eps);
    const std::vector<double> p2 = project_l2(p1, eps);
    REQUIRE(p1 == p2);
    REQUIRE(l2_norm(p1) <= eps * (1.0 + 1e-12) + 1e-15);
  }
}

TEST_CASE("l2 projection preserves direction") {
  RngStream rng(3, "proj");
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(32);
    for (double& x : v) x = rng.normal(0.0, 1.0);
    const std::vector<double> p = project_l2(v, 0.5);
    double dot = 0.0, nv = 0.0, np = 0.0;
    for (size_t i = 0; i < v.size(); ++i) {
      dot += v[i] * p[i];
      nv += v[i] * v[i];
      np += p[i] * p[i];
    }
    REQUIRE(dot / (std::sqrt(nv) * std::sqrt(np)) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("l2 projection scales boundary cases exactly") {
  std::vector<double> unit(16, 0.0);
  unit[3] = 1.0;
  const std::vector<double> half = project_l2(unit, 0.5);
  CHECK(l2_norm(half) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(half[3] == doctest::Approx(0.5));

  // Interior point returned unchanged, zero stays zero.
  CHECK(project_l2(unit, 2.0) == unit);
  const std::vector<double> zero(8, 0.0);
  CHECK(project_l2(zero, 0.1) == zero);
}

TEST_CASE("projection error paths") {
  CHECK_THROWS_AS(project_linf(ImageTensor(4, 4, 1), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(project_linf(ImageTensor(4, 4, 1), -1.0), std::invalid_argument);
  CHECK_THROWS_AS(project_l2({1.0, 2.0}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(project_l2({1.0, std::nan("")}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(project_l2({std::numeric_limits<double>::infinity()}, 1.0),
                  std::invalid_argument);
}

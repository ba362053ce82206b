#include <doctest.h>

#include <stdexcept>

#include "oracles.hpp"
#include "vpc/cutoff.hpp"

using namespace vpc;

TEST_CASE("cutoff plateau, tail and pinned midpoint") {
  CutoffSpec c{2.0, 4.0};
  const Vec6 inner{{1.0, 0, 0}, {}};           // |z| = R1/2
  const Vec6 far{{8.0, 0, 0}, {}};             // |z| = 2 R2
  const Vec6 mid{{3.0, 0, 0}, {}};             // |z| = (R1+R2)/2

  CHECK(eval_cutoff(c, inner) == 1.0);
  CHECK(norm(eval_cutoff_grad(c, inner)) == 0.0);
  CHECK(eval_cutoff(c, far) == 0.0);
  CHECK(norm(eval_cutoff_grad(c, far)) == 0.0);
  CHECK(eval_cutoff(c, mid) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("cutoff monotone in |z| and flat outside the annulus") {
  CutoffSpec c{1.0, 2.5};
  double prev = 1.0;
  for (int i = 0; i <= 100; ++i) {
    const double r = 3.0 * i / 100.0;
    const Vec6 z{{r, 0, 0}, {}};
    const double v = eval_cutoff(c, z);
    CHECK(v <= prev + 1e-15);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    if (r <= c.inner || r >= c.outer) CHECK(v * (1.0 - v) == 0.0);
    prev = v;
  }
}

TEST_CASE("cutoff gradient matches finite differences inside the blend") {
  CutoffSpec c{1.5, 3.0};
  oracle::Rng rng(3);
  for (int k = 0; k < 50; ++k) {
    Vec6 z = rng.vec6(-1.0, 1.0);
    const double target = rng.uniform(1.6, 2.9);
    const double r = norm(z);
    if (r == 0.0) continue;
    z *= target / r;
    const Vec6 g = eval_cutoff_grad(c, z);
    const Vec6 fd = oracle::fd_grad6([&](const Vec6& p) { return eval_cutoff(c, p); }, z, 1e-6);
    CHECK(norm(g - fd) <= 1e-6 * std::max(1.0, norm(g)));
  }
}

TEST_CASE("cutoff validation") {
  CHECK_THROWS_AS(CutoffSpec(2.0, 1.0).validate(), std::invalid_argument);
  CHECK_THROWS_AS(CutoffSpec(0.0, 1.0).validate(), std::invalid_argument);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "nlmx/grid.hpp"
#include "nlmx/helmholtz.hpp"
#include "nlmx/operators.hpp"
#include "nlmx/spectrum.hpp"

#include <cmath>
#include <random>

using namespace nlmx;

namespace {

const real kPi = std::acos(real(-1));

struct Cavity {
  BoxGrid grid;
  MaterialTensors mat;
  DiscreteOperators ops;
  HelmholtzProjector helm;

  Cavity(int n, real vscale, const BoxGrid::MaskPredicate& mask = nullptr)
      : grid(n, n, n, kPi, kPi, kPi, mask),
        mat(MaterialTensors::isotropic(1.0, vscale)),
        ops(grid, mat),
        helm(ops) {}
};

const Cavity& unit_cavity() {
  static Cavity c(8, 1.0);
  return c;
}

const EigenResult& unit_dense_modes() {
  static EigenResult r = [] {
    EigenOptions opt;
    opt.n_modes = 11;
    opt.force_dense = true;
    return solve_maxwell_modes(unit_cavity().ops, unit_cavity().helm, opt);
  }();
  return r;
}

}  // namespace

TEST_CASE("analytic cavity enumeration gives the known low spectrum") {
  auto modes = cavity_spectrum(kPi, kPi, kPi, 11);
  // lambda = m^2+n^2+p^2: 2 three times, 3 twice, then 5 six times.
  std::vector<real> flat;
  for (const auto& m : modes) {
    for (Index r = 0; r < m.multiplicity; ++r) flat.push_back(m.lambda);
  }
  REQUIRE(flat.size() >= 11);
  for (int i = 0; i < 3; ++i) CHECK(flat[size_t(i)] == doctest::Approx(2.0));
  for (int i = 3; i < 5; ++i) CHECK(flat[size_t(i)] == doctest::Approx(3.0));
  for (int i = 5; i < 11; ++i) CHECK(flat[size_t(i)] == doctest::Approx(5.0));
}

TEST_CASE("dense pencil matches the discrete dispersion oracle exactly") {
  const auto& r = unit_dense_modes();
  const auto& c = unit_cavity();
  CHECK(r.dense_path);
  CHECK(r.harmonic_dim == 0);
  CHECK(r.zero_modes == c.grid.num_nodes());
  VecX oracle = cavity_spectrum_discrete(c.grid, 11);
  REQUIRE(r.lambda.size() == 11);
  for (Index i = 0; i < 11; ++i) {
    CHECK(std::abs(r.lambda[i] - oracle[i]) <= 1e-9 * oracle[i]);
    CHECK(r.residuals[i] <= 1e-9 * std::max<real>(1, r.lambda[i]));
  }
  // Cluster labels: three-fold, two-fold, six-fold.
  CHECK(r.cluster[0] == r.cluster[2]);
  CHECK(r.cluster[2] != r.cluster[3]);
  CHECK(r.cluster[3] == r.cluster[4]);
  CHECK(r.cluster[4] != r.cluster[5]);
  CHECK(r.cluster[5] == r.cluster[10]);
  // Discrete lowest eigenvalue converges to 2 at second order; at this
  // resolution the defect h^2/12 * lambda is about 1.3 percent.
  CHECK(std::abs(r.lambda[0] - 2.0) / 2.0 <= 0.02);
  CHECK(std::abs(r.lambda[0] - 2.0) / 2.0 >= 0.005);
  // Modes come back M-orthonormal.
  MatX gram = r.vectors.transpose() * (c.ops.M_V() * r.vectors);
  CHECK((gram - MatX::Identity(11, 11)).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("projected Krylov iteration reproduces the dense spectrum") {
  const auto& c = unit_cavity();
  EigenOptions opt;
  opt.n_modes = 5;
  opt.force_iterative = true;
  auto r = solve_maxwell_modes(c.ops, c.helm, opt);
  CHECK(!r.dense_path);
  CHECK(r.iterations > 0);
  const auto& d = unit_dense_modes();
  for (Index i = 0; i < 5; ++i) {
    CHECK(std::abs(r.lambda[i] - d.lambda[i]) <=
          1e-8 * std::max<real>(1, d.lambda[i]));
    CHECK(r.residuals[i] <= 1e-8 * std::max<real>(1, r.lambda[i]));
  }
}

TEST_CASE("grad-div regularization gives the same Maxwell modes") {
  const auto& c = unit_cavity();
  EigenOptions opt;
  opt.n_modes = 5;
  opt.force_iterative = true;
  opt.use_graddiv = true;
  opt.graddiv_s = 1.0;
  auto r = solve_maxwell_modes(c.ops, c.helm, opt);
  const auto& d = unit_dense_modes();
  CHECK(r.graddiv_shift_used >= 1.0);
  for (Index i = 0; i < 5; ++i) {
    CHECK(std::abs(r.lambda[i] - d.lambda[i]) <=
          1e-8 * std::max<real>(1, d.lambda[i]));
  }
}

TEST_CASE("masked void carries exactly one harmonic field") {
  Cavity c(10, 1.0, mask_ball_cut(Vec3(kPi / 2, kPi / 2, kPi / 2), 0.7));
  REQUIRE(c.grid.masked());
  EigenOptions opt;
  opt.n_modes = 4;
  opt.force_dense = true;
  auto r = solve_maxwell_modes(c.ops, c.helm, opt);
  CHECK(r.harmonic_dim == 1);
  CHECK(r.zero_modes == c.grid.num_nodes() + 1);
  CHECK(r.lambda[0] == 0);
  CHECK(r.lambda[1] > 0.1);
  // The harmonic field is curl-free and V-divergence-free.
  EdgeField h = r.vectors.col(0);
  CHECK(std::sqrt(c.ops.dot_curl(h, h)) <= 1e-6);
  CHECK(c.ops.div_weighted(h).cwiseAbs().maxCoeff() <= 1e-8);

  // The iterative path finds the same harmonic mode.
  EigenOptions oi;
  oi.n_modes = 2;
  oi.force_iterative = true;
  auto ri = solve_maxwell_modes(c.ops, c.helm, oi);
  CHECK(ri.harmonic_dim == 1);
  CHECK(ri.lambda[0] == 0);
  CHECK(std::abs(ri.lambda[1] - r.lambda[1]) <= 1e-7 * r.lambda[1]);
}

TEST_CASE("spectral split at the threshold isolates the concave block") {
  Cavity c(8, 2.5);
  EigenOptions opt;
  opt.n_modes = 8;
  opt.force_dense = true;
  auto r = solve_maxwell_modes(c.ops, c.helm, opt);
  // Pencil eigenvalues are the unit-cavity ones over 2.5: 0.79 x3, 1.18 x2.
  SpectralSplit split(c.ops, c.helm, r);
  CHECK(split.dim_tilde() == 3);
  CHECK(!split.degenerate());
  for (Index i = 0; i < 3; ++i) {
    CHECK(split.tilde_values()[i] < 1.0);
    // Q on a unit-M eigenfield is lambda - 1.
    real q = quadratic_form(c.ops, r.vectors.col(i));
    CHECK(q == doctest::Approx(r.lambda[i] - 1.0).epsilon(1e-8));
    CHECK(q < 0);
  }
  CHECK(count_below(r, 1.0) == 3);

  std::mt19937_64 rng(3);
  std::normal_distribution<real> nd;
  EdgeField u(c.grid.num_edges());
  for (Index i = 0; i < u.size(); ++i) u[i] = nd(rng);
  EdgeField t = split.project_tilde(u);
  EdgeField p = split.project_plus(u);
  EdgeField w = split.project_kernel(u);
  real scale = u.norm();
  CHECK((t + p + w - u).norm() <= 1e-8 * scale);
  CHECK(std::abs(c.ops.dot_V(t, p)) <= 1e-8 * scale * scale);
  CHECK(std::abs(c.ops.dot_V(t, w)) <= 1e-8 * scale * scale);
  CHECK(std::abs(c.ops.dot_V(p, w)) <= 1e-8 * scale * scale);
  CHECK((split.project_tilde(t) - t).norm() <= 1e-9 * scale);
  CHECK((split.project_plus(p) - p).norm() <= 1e-8 * scale);
  // Q is positive on the plus cone and negative on the tilde block.
  CHECK(quadratic_form(c.ops, p) > 0);
  CHECK(quadratic_form(c.ops, t) < 0);
}

TEST_CASE("split warns when an eigenvalue pins the threshold") {
  const auto& d = unit_dense_modes();
  real lam1 = d.lambda[0];
  Cavity c(8, lam1);  // scales the pencil so the first eigenvalue lands on 1
  EigenOptions opt;
  opt.n_modes = 6;
  opt.force_dense = true;
  auto r = solve_maxwell_modes(c.ops, c.helm, opt);
  CHECK(std::abs(r.lambda[0] - 1.0) < 1e-11);
  SpectralSplit split(c.ops, c.helm, r);
  CHECK(split.degenerate());
  CHECK(!split.warnings().empty());
}

TEST_CASE("split refuses when no computed mode clears the threshold") {
  Cavity c(8, 10.0);  // all computed eigenvalues land below 1
  EigenOptions opt;
  opt.n_modes = 5;
  opt.force_dense = true;
  auto r = solve_maxwell_modes(c.ops, c.helm, opt);
  CHECK_THROWS_AS(SpectralSplit(c.ops, c.helm, r), solver_error);
}

TEST_CASE("mode count below threshold is monotone under mass growth") {
  BoxGrid g(6, 6, 6, kPi, kPi, kPi);
  std::mt19937_64 rng(77);
  std::normal_distribution<real> nd;
  auto rand_spd = [&](real floor_) {
    Mat3 R;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) R(i, j) = nd(rng);
    }
    return Mat3(R * R.transpose() + floor_ * Mat3::Identity());
  };
  for (int trial = 0; trial < 20; ++trial) {
    Mat3 V = rand_spd(0.3);
    Mat3 W = rand_spd(0.0);
    auto m0 = MaterialTensors::from_fields(
        g, [](const Vec3&) { return Mat3::Identity(); },
        [&](const Vec3&) { return V; });
    auto m1 = MaterialTensors::from_fields(
        g, [](const Vec3&) { return Mat3::Identity(); },
        [&](const Vec3&) { return Mat3(V + W); });
    DiscreteOperators ops0(g, m0), ops1(g, m1);
    HelmholtzProjector h0(ops0), h1(ops1);
    EigenOptions opt;
    opt.n_modes = 60;
    opt.force_dense = true;
    auto r0 = solve_maxwell_modes(ops0, h0, opt);
    auto r1 = solve_maxwell_modes(ops1, h1, opt);
    Index i0 = count_below(r0, 1.0);
    Index iinf = count_below(r1, 1.0);
    CHECK(i0 <= iinf);
    // Interlacing is exact: every eigenvalue can only move down.
    for (Index k = 0; k < 60; ++k) {
      CHECK(r1.lambda[k] <= r0.lambda[k] * (1 + 1e-10));
    }
  }
}

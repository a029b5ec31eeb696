#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "nlmx/functional.hpp"
#include "nlmx/grid.hpp"
#include "nlmx/helmholtz.hpp"
#include "nlmx/nehari.hpp"
#include "nlmx/operators.hpp"
#include "nlmx/spectrum.hpp"

#include <cmath>
#include <random>

using namespace nlmx;

namespace {

constexpr real kPi = 3.14159265358979323846;

VecX random_vec(Index n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<real> d;
  VecX v(n);
  for (Index i = 0; i < n; ++i) v[i] = d(rng);
  return v;
}

NonlinearityModel kerr(real chi) {
  NonlinearityModel m;
  m.kind = ModelKind::Kerr;
  m.chi3 = CellCoeff(chi);
  return m;
}

// Exactly solvable sanity problem: positive definite quadratic part plus a
// pure quartic, no fiber. beta(t) = q t^2/2 - s t^4/4 exactly, so the ray
// maximizer has the closed form t_u = sqrt(q/s).
class ToyQuartic final : public NehariProblem {
 public:
  ToyQuartic(VecX diag, real s) : s_(s) {
    Index n = diag.size();
    A_ = SpMat(n, n);
    M_ = SpMat(n, n);
    std::vector<Triplet> ta, tm;
    for (Index i = 0; i < n; ++i) {
      ta.emplace_back(i, i, diag[i]);
      tm.emplace_back(i, i, 1.0);
    }
    A_.setFromTriplets(ta.begin(), ta.end());
    M_.setFromTriplets(tm.begin(), tm.end());
    G_ = SpMat(n, 0);
    basis_ = MatX(n, 0);
    values_ = VecX(0);
    certs_.convex = true;
    certs_.superlinear = s > 0;
    certs_.model = "toy_quartic";
  }

  void set_convex_certificate(bool v) { certs_.convex = v; }

  [[nodiscard]] Index size() const override { return A_.rows(); }
  [[nodiscard]] real energy(const VecX& u) const override {
    real q = u.dot(A_ * u) - u.squaredNorm();
    real r2 = u.squaredNorm();
    return 0.5 * q - 0.25 * s_ * r2 * r2;
  }
  [[nodiscard]] VecX gradient(const VecX& u) const override {
    return A_ * u - u - s_ * u.squaredNorm() * u;
  }
  [[nodiscard]] SpMat nonlinear_jacobian(const VecX& u) const override {
    MatX J = s_ * (u.squaredNorm() * MatX::Identity(size(), size()) +
                   2.0 * u * u.transpose());
    return J.sparseView();
  }
  [[nodiscard]] const SpMat& quad_matrix() const override { return A_; }
  [[nodiscard]] const SpMat& mass_matrix() const override { return M_; }
  [[nodiscard]] VecX mass_solve(const VecX& c) const override { return c; }
  [[nodiscard]] VecX project_plus(const VecX& u) const override { return u; }
  [[nodiscard]] const SpMat& fiber_map() const override { return G_; }
  [[nodiscard]] const MatX& fiber_basis() const override { return basis_; }
  [[nodiscard]] const VecX& fiber_values() const override { return values_; }
  [[nodiscard]] real field_scale(const VecX& u) const override {
    return u.size() ? u.cwiseAbs().maxCoeff() : 0;
  }
  [[nodiscard]] const Certificates& certificates() const override {
    return certs_;
  }

 private:
  SpMat A_, M_, G_;
  MatX basis_;
  VecX values_;
  real s_;
  Certificates certs_;
};

struct CavityFixture {
  BoxGrid grid;
  MaterialTensors mat;
  DiscreteOperators ops;
  HelmholtzProjector helm;
  EigenResult modes;
  SpectralSplit split;
  EnergyContext ctx;
  EnergyProblem problem;

  CavityFixture(const NonlinearityModel& model, real vcoef)
      : grid(8, 8, 8, kPi, kPi, kPi),
        mat(MaterialTensors::isotropic(1.0, vcoef)),
        ops(grid, mat),
        helm(ops),
        modes(make_modes(ops, helm)),
        split(ops, helm, modes, 1.0),
        ctx(split, model),
        problem(ctx) {}

  static EigenResult make_modes(const DiscreteOperators& ops,
                                const HelmholtzProjector& helm) {
    EigenOptions o;
    o.n_modes = 4;
    o.force_dense = true;
    return solve_maxwell_modes(ops, helm, o);
  }
};

CavityFixture& kerr_cavity() {
  static CavityFixture f(kerr(1.0), 0.5);
  return f;
}

CavityFixture& linear_cavity() {
  static CavityFixture f(NonlinearityModel{}, 0.5);
  return f;
}

}  // namespace

TEST_CASE("ray maximizer matches the quartic closed form") {
  VecX diag(2);
  diag << 3.0, 5.0;
  ToyQuartic toy(diag, 2.0);
  NehariOptions opt;
  opt.outer_tol = 1e-12;
  NehariEngine eng(toy, opt);

  VecX e1 = VecX::Zero(2);
  e1[0] = 1.0;
  // q = 3 - 1 = 2, s = 2: t_u = 1, beta(t_u) = q^2/(4s) = 0.5.
  for (real t : {0.3, 1.0, 1.7}) {
    real expect = 0.5 * 2.0 * t * t - 0.25 * 2.0 * t * t * t * t;
    CHECK(eng.beta(e1, t) == doctest::Approx(expect).epsilon(1e-14));
  }
  RayPoint ray = eng.ray_maximize(e1);
  CHECK(std::abs(ray.t - 1.0) <= 1e-8);
  CHECK(std::abs(ray.beta_value - 0.5) <= 1e-10);
  CHECK(eng.unimodality_witness(e1, 2.5) == true);

  // Ray invariance: the maximizer only sees the direction, not the scale.
  RayPoint scaled = eng.ray_maximize(7.3 * e1);
  CHECK(std::abs(scaled.t - ray.t) <= 1e-8);

  VecX e2 = VecX::Zero(2);
  e2[1] = 1.0;
  RayPoint ray2 = eng.ray_maximize(e2);
  CHECK(std::abs(ray2.t - std::sqrt(2.0)) <= 1e-8);
  CHECK(std::abs(ray2.beta_value - 2.0) <= 1e-9);
}

TEST_CASE("linear problem has no ray maximum") {
  VecX diag(2);
  diag << 3.0, 5.0;
  ToyQuartic toy(diag, 0.0);
  NehariEngine eng(toy, {});
  VecX e1 = VecX::Zero(2);
  e1[0] = 1.0;
  CHECK_THROWS_WITH_AS(static_cast<void>(eng.ray_maximize(e1)),
                       "no ray maximum", solver_error);
  // beta is the bare quadratic, strictly increasing.
  real q = 2.0;
  for (real t : {0.5, 1.0, 4.0}) {
    CHECK(eng.beta(e1, t) == doctest::Approx(0.5 * q * t * t).epsilon(1e-14));
  }
}

TEST_CASE("uncertified-convex models are refused by the fiber solve") {
  VecX diag(2);
  diag << 3.0, 5.0;
  ToyQuartic toy(diag, 1.0);
  toy.set_convex_certificate(false);
  NehariEngine eng(toy, {});
  VecX e1 = VecX::Zero(2);
  e1[0] = 1.0;
  CHECK_THROWS_AS(static_cast<void>(eng.fiber_minimize(e1)),
                  certificate_error);
}

TEST_CASE("fiber solve: trivial cases and uniqueness") {
  auto& fx = kerr_cavity();
  REQUIRE(fx.split.dim_tilde() == 0);  // V = 0.5: lowest pencil value is ~4
  NehariEngine eng(fx.problem, {});

  // Zero input pins the zero fiber point.
  FiberSolution z = eng.fiber_minimize(VecX::Zero(fx.grid.num_edges()));
  CHECK(z.converged);
  CHECK(z.energy == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(z.total.cwiseAbs().maxCoeff() <= 1e-12);

  // Linear model: the fiber functional is a positive quadratic with zero
  // linear term on divergence-free inputs, so tilde = 0 at once.
  NehariEngine lin(linear_cavity().problem, {});
  VecX up0 = linear_cavity().split.project_plus(
      random_vec(fx.grid.num_edges(), 3));
  FiberSolution flin = lin.fiber_minimize(up0);
  CHECK(flin.converged);
  CHECK(flin.tilde.cwiseAbs().maxCoeff() <= 1e-9 * up0.cwiseAbs().maxCoeff());

  // Kerr: converges, and a perturbed warm start lands on the same point.
  VecX up = 0.3 * fx.split.project_plus(random_vec(fx.grid.num_edges(), 4));
  FiberSolution a = eng.fiber_minimize(up);
  real scale = 1 + std::sqrt(fx.ops.dot_V(up, up));
  CHECK(a.converged);
  CHECK(a.inner_residual <= 1e-10 * scale);
  VecX phi0 = 0.1 * random_vec(fx.grid.num_nodes(), 5);
  FiberSolution b = eng.fiber_minimize(up, phi0, VecX(0));
  CHECK((a.total - b.total).cwiseAbs().maxCoeff() <=
        1e-7 * (1 + a.total.cwiseAbs().maxCoeff()));

  // Fiber optimality: the fiber point maximizes J on its affine fiber.
  std::mt19937_64 rng(6);
  std::normal_distribution<real> nd;
  for (real eps : {1e-3, 1e-2, 1e-1}) {
    for (int k = 0; k < 20; ++k) {
      VecX dphi(fx.grid.num_nodes());
      for (Index i = 0; i < dphi.size(); ++i) dphi[i] = nd(rng);
      VecX delta = fx.ops.G() * dphi;
      real dn = std::sqrt(fx.ops.dot_V(delta, delta));
      delta *= eps / dn;
      CHECK(fx.ctx.energy(a.total + delta) <=
            a.energy + 1e-10 * (1 + std::abs(a.energy)));
    }
  }
}

TEST_CASE("ground state on the Kerr cavity") {
  auto& fx = kerr_cavity();
  NehariOptions opt;
  opt.starts = 3;
  opt.seed = 9001;
  NehariEngine eng(fx.problem, opt);
  MultistartReport rep;
  NehariResult res = eng.ground_state(&rep);

  REQUIRE(res.converged);
  const VecX& u = res.fiber.total;
  real scale = 1 + fx.ctx.field_scale(u);
  CHECK(res.residual_norm <= 1e-7 * scale);
  CHECK(res.residual_norm ==
        doctest::Approx(fx.ctx.residual_norm(u)).epsilon(1e-10));
  CHECK(res.c_N > 0);
  CHECK(res.plus_nonzero);
  CHECK(res.beta_unimodal);
  CHECK(res.c_M <= res.c_N + 1e-8);
  CHECK(res.c_M == doctest::Approx(res.c_N).epsilon(1e-7));
  CHECK(res.fiber.inner_residual <= 1e-8 * scale);

  // Nehari membership: stationarity along the ray through the solution.
  VecX g = fx.ctx.gradient_covector(u);
  real un2 = fx.ops.dot_V(u, u);
  CHECK(std::abs(g.dot(u)) <= 1e-7 * (1 + un2));

  // Remark-style nontriviality certificate via the energy context.
  CHECK(fx.ctx.admissible_certificate(u).admissible);

  // Full coverage and start-independent energy for a superlinear model.
  CHECK(rep.coverage == doctest::Approx(1.0));
  CHECK(rep.certificates.convex);
  CHECK(rep.certificates.superlinear);
  int converged = 0;
  for (const auto& s : rep.starts) {
    if (!s.converged) continue;
    ++converged;
    CHECK(std::abs(s.energy - res.c_N) <= 1e-5 * std::abs(res.c_N));
  }
  CHECK(converged >= 2);

  // Even nonlinearity: the opposite ray carries the same energy.
  RayPoint fwd = eng.ray_maximize(res.direction);
  RayPoint bwd = eng.ray_maximize(-res.direction);
  CHECK(std::abs(fwd.beta_value - bwd.beta_value) <=
        1e-8 * (1 + std::abs(fwd.beta_value)));

  // Mountain pass estimate along the ground direction reproduces c_N.
  real cm = eng.mountain_pass_estimate(res);
  CHECK(std::abs(cm - res.c_N) <= 1e-8 * (1 + std::abs(res.c_N)));
}

TEST_CASE("linear model yields a no-solution report") {
  auto& fx = linear_cavity();
  NehariOptions opt;
  opt.starts = 2;
  NehariEngine eng(fx.problem, opt);
  MultistartReport rep;
  NehariResult res = eng.ground_state(&rep);
  CHECK(!res.converged);
  CHECK(rep.coverage == doctest::Approx(0.0));
  bool saw = false;
  for (const auto& w : res.warnings) {
    if (w.find("no ray maximum") != std::string::npos) saw = true;
  }
  CHECK(saw);
  CHECK(!rep.certificates.superlinear);
}

TEST_CASE("deflated multistart still finds the ground energy") {
  auto& fx = kerr_cavity();
  NehariOptions opt;
  opt.starts = 3;
  opt.seed = 9001;
  opt.deflate = true;
  opt.deflation_weight = 0.5;
  NehariEngine eng(fx.problem, opt);
  MultistartReport rep;
  NehariResult res = eng.ground_state(&rep);
  REQUIRE(res.converged);

  NehariOptions base = opt;
  base.deflate = false;
  NehariEngine plain(fx.problem, base);
  NehariResult ref = plain.ground_state(nullptr);
  REQUIRE(ref.converged);
  // The first start is unpenalized, so the ground energy must survive.
  CHECK(res.c_N <= ref.c_N + 1e-6 * (1 + std::abs(ref.c_N)));
}

#include "nlmx/nehari.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <utility>

namespace nlmx {

namespace {

std::string kind_string(ModelKind k) {
  switch (k) {
    case ModelKind::None: return "none";
    case ModelKind::Kerr: return "kerr";
    case ModelKind::Saturation: return "saturation";
    case ModelKind::CubicQuintic: return "cubic_quintic";
    case ModelKind::DoublePowerPiecewise: return "double_power_piecewise";
    case ModelKind::DoublePowerSmooth: return "double_power_smooth";
  }
  return "?";
}

}  // namespace

EnergyProblem::EnergyProblem(const EnergyContext& ctx) : ctx_(&ctx) {
  require(ctx.has_split(), "the reduction machinery needs a spectral split");
  const NonlinearityModel& m = ctx.model();
  certs_.model = kind_string(m.kind);
  if (m.trivial()) {
    // The fiber functional is a positive quadratic; uniqueness is exact.
    certs_.convex = true;
    certs_.superlinear = false;
  } else {
    Index nc = ctx.ops().grid().num_cells();
    certs_.convex =
        check_condition(m, nc, GrowthCondition::F9, 4000, 777).passed;
    certs_.superlinear =
        check_condition(m, nc, GrowthCondition::F6, 4000, 778).passed;
  }
}

Index EnergyProblem::size() const { return ctx_->ops().grid().num_edges(); }
real EnergyProblem::energy(const VecX& u) const { return ctx_->energy(u); }
VecX EnergyProblem::gradient(const VecX& u) const {
  return ctx_->gradient_covector(u);
}
SpMat EnergyProblem::nonlinear_jacobian(const VecX& u) const {
  return ctx_->nonlinear_jacobian(u);
}
const SpMat& EnergyProblem::quad_matrix() const { return ctx_->ops().A(); }
const SpMat& EnergyProblem::mass_matrix() const { return ctx_->ops().M_V(); }
VecX EnergyProblem::mass_solve(const VecX& covector) const {
  return ctx_->ops().MV_solver().solve(covector);
}
VecX EnergyProblem::project_plus(const VecX& u) const {
  return ctx_->split().project_plus(u);
}
const SpMat& EnergyProblem::fiber_map() const { return ctx_->ops().G(); }
const MatX& EnergyProblem::fiber_basis() const {
  return ctx_->split().tilde_basis();
}
const VecX& EnergyProblem::fiber_values() const {
  return ctx_->split().tilde_values();
}
real EnergyProblem::field_scale(const VecX& u) const {
  return ctx_->field_scale(u);
}
const NehariProblem::Certificates& EnergyProblem::certificates() const {
  return certs_;
}

NehariEngine::NehariEngine(const NehariProblem& problem, NehariOptions opt)
    : p_(&problem), opt_(std::move(opt)) {
  require(opt_.fiber_tol > 0 && opt_.outer_tol > 0, "tolerances must be > 0");
  const SpMat& G = p_->fiber_map();
  if (G.cols() > 0) {
    L_ = SpMat(G.transpose() * p_->mass_matrix() * G);
    L_.makeCompressed();
    lchol_ = std::make_shared<Eigen::SimplicialLDLT<SpMat>>();
    lchol_->compute(L_);
    if (lchol_->info() != Eigen::Success) {
      throw solver_error("fiber Gram factorization failed");
    }
  }
}

real NehariEngine::vnorm(const VecX& u) const {
  return std::sqrt(std::max<real>(0, u.dot(p_->mass_matrix() * u)));
}

VecX NehariEngine::normalized(const VecX& u) const {
  real n = vnorm(u);
  require(n > 0, "cannot normalize a mass-null vector");
  return u / n;
}

FiberSolution NehariEngine::fiber_minimize(const VecX& u_plus) const {
  return fiber_solve(u_plus, nullptr);
}

FiberSolution NehariEngine::fiber_minimize(const VecX& u_plus,
                                           const VecX& phi0,
                                           const VecX& coef0) const {
  FiberState st{phi0, coef0};
  return fiber_solve(u_plus, &st);
}

FiberSolution NehariEngine::fiber_solve(const VecX& u_plus,
                                        FiberState* state) const {
  if (!p_->certificates().convex) {
    throw certificate_error(
        "fiber reduction refused: the model is not certified convex, so the "
        "fiber point may be non-unique");
  }
  const SpMat& G = p_->fiber_map();
  const MatX& Vt = p_->fiber_basis();
  const VecX& lam = p_->fiber_values();
  const Index nw = G.cols();
  const Index nt = Vt.cols();

  FiberSolution out;
  out.u_plus = u_plus;
  if (nw == 0 && nt == 0) {
    out.tilde = VecX::Zero(u_plus.size());
    out.total = u_plus;
    out.energy = p_->energy(u_plus);
    out.converged = true;
    return out;
  }

  VecX phi = (state && state->phi.size() == nw) ? state->phi : VecX::Zero(nw);
  VecX coef =
      (state && state->coef.size() == nt) ? state->coef : VecX::Zero(nt);
  const real scale = 1 + vnorm(u_plus);

  auto assemble = [&]() {
    VecX u = u_plus;
    if (nw > 0) u += G * phi;
    if (nt > 0) u += Vt * coef;
    return u;
  };

  VecX u = assemble();
  real value = p_->energy(u);
  for (int it = 0; it < opt_.fiber_cap; ++it) {
    out.iterations = it;
    VecX g = p_->gradient(u);
    VecX rw, rc, lw;
    real res2 = 0;
    if (nw > 0) {
      rw = G.transpose() * g;
      lw = lchol_->solve(rw);
      res2 += rw.dot(lw);
    }
    if (nt > 0) {
      rc = Vt.transpose() * g;
      res2 += rc.squaredNorm();
    }
    out.inner_residual = std::sqrt(std::max<real>(0, res2));
    if (out.inner_residual <= opt_.fiber_tol * scale) {
      out.converged = true;
      break;
    }

    // Newton ascent step for J on the fiber. The curl part of the quadratic
    // form vanishes on gradients, so the phi block is the node Laplacian
    // plus the nonlinear coupling.
    VecX dphi, dcoef;
    bool have_step = false;
    SpMat N = p_->nonlinear_jacobian(u);
    if (nw > 0) {
      SpMat K = L_;
      if (N.nonZeros() > 0) K = SpMat(L_ + SpMat(G.transpose() * N * G));
      Eigen::SimplicialLDLT<SpMat> kf(K);
      if (kf.info() == Eigen::Success) {
        VecX kirw = kf.solve(rw);
        if (nt > 0) {
          MatX NV = N * Vt;
          MatX B = G.transpose() * NV;
          MatX D = MatX::Zero(nt, nt);
          D.diagonal() = VecX::Ones(nt) - lam;
          D += Vt.transpose() * NV;
          MatX KiB = kf.solve(B);
          MatX S = D - B.transpose() * KiB;
          Eigen::LDLT<MatX> sf(S);
          if (sf.info() == Eigen::Success) {
            dcoef = sf.solve(rc - B.transpose() * kirw);
            dphi = kirw - KiB * dcoef;
            have_step = true;
          }
        } else {
          dphi = kirw;
          have_step = true;
        }
      }
    } else {
      MatX D = MatX::Zero(nt, nt);
      D.diagonal() = VecX::Ones(nt) - lam;
      if (N.nonZeros() > 0) D += MatX(Vt.transpose() * (N * Vt));
      Eigen::LDLT<MatX> sf(D);
      if (sf.info() == Eigen::Success) {
        dcoef = sf.solve(rc);
        have_step = true;
      }
    }

    real ascent = 0;
    if (have_step) {
      if (nw > 0) ascent += rw.dot(dphi);
      if (nt > 0) ascent += rc.dot(dcoef);
    }
    if (!have_step || !(ascent > 0)) {
      // Preconditioned gradient fallback; L is the natural metric on phi.
      dphi = lw;
      dcoef = rc;
      ascent = res2;
    }

    // Near the maximizer the predicted gain 1e-4*t*ascent drops below the
    // rounding resolution of the energy; without slack the sufficient-increase
    // test rejects exact Newton steps on rounding noise and the iteration
    // stalls just above tolerance.
    const real noise =
        64 * std::numeric_limits<real>::epsilon() * (1 + std::abs(value));
    real t = 1;
    bool moved = false;
    for (int ls = 0; ls < 40; ++ls) {
      VecX phi_t = phi, coef_t = coef;
      if (nw > 0) phi_t += t * dphi;
      if (nt > 0) coef_t += t * dcoef;
      VecX phi_save = std::move(phi), coef_save = std::move(coef);
      phi = std::move(phi_t);
      coef = std::move(coef_t);
      VecX u_t = assemble();
      real v_t = p_->energy(u_t);
      if (v_t >= value + 1e-4 * t * ascent - noise) {
        u = std::move(u_t);
        value = v_t;
        moved = true;
        break;
      }
      phi = std::move(phi_save);
      coef = std::move(coef_save);
      t *= 0.5;
    }
    if (!moved) break;
  }

  if (!out.converged) {
    throw solver_error("fiber reduction stalled at residual " +
                       std::to_string(out.inner_residual) + " after " +
                       std::to_string(out.iterations) + " iterations");
  }
  if (state) {
    state->phi = phi;
    state->coef = coef;
  }
  out.tilde = u - u_plus;
  out.total = std::move(u);
  out.energy = value;
  return out;
}

real NehariEngine::beta(const VecX& direction, real t) const {
  require(t >= 0, "ray parameter must be nonnegative");
  return fiber_solve(t * direction, nullptr).energy;
}

real NehariEngine::beta_slope(const VecX& unit_dir,
                              const FiberSolution& fiber) const {
  // Envelope derivative: the fiber point is stationary in the tilde
  // directions, so d/dt J(m(t d)) = <J'(m(t d)), d>.
  return p_->gradient(fiber.total).dot(unit_dir);
}

RayPoint NehariEngine::ray_solve(const VecX& unit_dir, real t_init,
                                 FiberState* state) const {
  real t = t_init > 0 ? t_init : 1;
  auto eval = [&](real tt) { return fiber_solve(tt * unit_dir, state); };

  FiberSolution f = eval(t);
  real sl = beta_slope(unit_dir, f);
  int tries = 0;
  while (!(sl > 0) && tries < opt_.line_cap && t > 1e-12) {
    t *= 0.5;
    f = eval(t);
    sl = beta_slope(unit_dir, f);
    ++tries;
  }
  if (!(sl > 0)) throw solver_error("no ray maximum");

  real t_lo = t, t_hi = t;
  real sl_hi = sl;
  tries = 0;
  while (sl_hi > 0 && tries < opt_.line_cap) {
    t_lo = t_hi;
    t_hi *= 2;
    f = eval(t_hi);
    sl_hi = beta_slope(unit_dir, f);
    ++tries;
  }
  if (sl_hi > 0) throw solver_error("no ray maximum");

  // Golden-section contraction of the bracket on beta values.
  const real gr = 0.6180339887498949;
  real a = t_lo, b = t_hi;
  real x1 = b - gr * (b - a);
  real x2 = a + gr * (b - a);
  real f1 = eval(x1).energy;
  real f2 = eval(x2).energy;
  for (int it = 0; it < opt_.line_cap && (b - a) > 1e-3 * b; ++it) {
    if (f1 >= f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = eval(x1).energy;
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = eval(x2).energy;
    }
  }

  // Secant polish on the slope.
  real t0 = a, t1 = 0.5 * (a + b);
  f = eval(t0);
  real s0 = beta_slope(unit_dir, f);
  f = eval(t1);
  real s1 = beta_slope(unit_dir, f);
  real t_best = t1;
  for (int it = 0; it < 20; ++it) {
    if (std::abs(s1) <= opt_.outer_tol * (1 + t1)) break;
    real denom = s1 - s0;
    real t2;
    if (denom != 0) {
      t2 = t1 - s1 * (t1 - t0) / denom;
    } else {
      t2 = 0.5 * (t0 + t1);
    }
    if (!(t2 > 0) || !std::isfinite(t2)) t2 = 0.5 * (t0 + t1);
    t0 = t1;
    s0 = s1;
    t1 = t2;
    f = eval(t1);
    s1 = beta_slope(unit_dir, f);
    t_best = t1;
  }

  RayPoint out;
  out.t = t_best;
  out.fiber = eval(t_best);
  out.beta_value = out.fiber.energy;
  out.beta_slope = std::abs(beta_slope(unit_dir, out.fiber));
  return out;
}

namespace {

real initial_ray_guess(const NehariProblem& p, const VecX& d) {
  // Quartic-model estimate: beta(t) ~ q t^2/2 - c t^4 with c = integral F(d).
  real q = d.dot(p.quad_matrix() * d) - d.dot(p.mass_matrix() * d);
  real integral = 0.5 * q - p.energy(d);
  if (q > 0 && integral > 1e-14) {
    real t = std::sqrt(q / (4 * integral));
    return std::clamp<real>(t, 1e-3, 1e3);
  }
  return 1;
}

}  // namespace

RayPoint NehariEngine::ray_maximize(const VecX& direction) const {
  VecX d = normalized(direction);
  VecX plus = p_->project_plus(d);
  require(vnorm(plus) > 1e-6,
          "direction has no positive-block component; the ray lies in the "
          "fiber subspace");
  FiberState st;
  return ray_solve(d, initial_ray_guess(*p_, d), &st);
}

real NehariEngine::full_residual(const VecX& u) const {
  VecX g = p_->gradient(u);
  return std::sqrt(std::max<real>(0, g.dot(p_->mass_solve(g))));
}

bool NehariEngine::newton_polish(VecX& u, real* residual) const {
  real best = *residual;
  const real floor = 1e-13 * (1 + p_->field_scale(u));
  for (int it = 0; it < 25 && best > floor; ++it) {
    VecX g = p_->gradient(u);
    SpMat H =
        SpMat(p_->quad_matrix() - p_->mass_matrix() - p_->nonlinear_jacobian(u));
    H.makeCompressed();
    Eigen::SparseLU<SpMat> lu;
    lu.compute(H);
    if (lu.info() != Eigen::Success) return false;
    VecX delta = lu.solve(-g);
    real t = 1;
    bool accepted = false;
    for (int ls = 0; ls < 30; ++ls) {
      VecX u_t = u + t * delta;
      real r_t = full_residual(u_t);
      if (r_t < best) {
        u = std::move(u_t);
        best = r_t;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
  }
  *residual = best;
  return true;
}

NehariResult NehariEngine::run_start(int index, uint64_t seed,
                                     const std::vector<VecX>& found,
                                     StartRecord* record) const {
  NehariResult r;
  r.start_index = index;
  record->index = index;
  record->seed = seed;
  record->residual = std::numeric_limits<real>::infinity();

  std::mt19937_64 rng(seed);
  std::normal_distribution<real> nd;
  VecX xi(p_->size());
  for (Index i = 0; i < xi.size(); ++i) xi[i] = nd(rng);
  if (opt_.start_transform) xi = opt_.start_transform(xi);
  VecX d = p_->project_plus(xi);
  real dn = vnorm(d);
  if (!(dn > 0)) {
    r.warnings.emplace_back("degenerate random start");
    return r;
  }
  d /= dn;

  auto penalty = [&](const VecX& dir) {
    if (!opt_.deflate || found.empty()) return real(0);
    real s = 0;
    for (const VecX& dj : found) {
      real ip = dir.dot(p_->mass_matrix() * dj);
      s += opt_.deflation_weight * ip * ip;
    }
    return s;
  };

  FiberState st;
  RayPoint ray;
  try {
    ray = ray_solve(d, initial_ray_guess(*p_, d), &st);
  } catch (const solver_error& e) {
    r.warnings.emplace_back(e.what());
    record->ray_found = false;
    return r;
  }
  record->ray_found = true;

  real value = ray.beta_value + penalty(d);
  real step = 0.5;
  real res = full_residual(ray.fiber.total);

  // Damped-Newton finisher with a revert guard: a polish that shrinks the
  // positive component by an order of magnitude has left the basin (usually
  // drifting toward the trivial solution) and is rolled back.
  auto try_polish = [&](VecX& uu, real* rr) -> bool {
    VecX u0 = uu;
    real r0 = *rr;
    real t0 = vnorm(p_->project_plus(uu));
    if (!newton_polish(uu, rr) ||
        (t0 > 0 && vnorm(p_->project_plus(uu)) < 0.1 * t0)) {
      uu = std::move(u0);
      *rr = r0;
      return false;
    }
    return *rr <= opt_.outer_tol * (1 + p_->field_scale(uu));
  };

  VecX u_done;
  bool done = false;
  for (int it = 0; it < opt_.outer_cap; ++it) {
    const VecX& u = ray.fiber.total;
    res = full_residual(u);
    real scale = 1 + p_->field_scale(u);
    if (res <= opt_.outer_tol * scale) break;
    if (opt_.polish && res <= 1e-3 * scale) break;
    // The first-order sphere descent can crawl on stiff geometries; probe
    // periodically whether the Newton basin is already reachable.
    if (opt_.polish && it % 25 == 24) {
      VecX u_try = u;
      real r_try = res;
      if (try_polish(u_try, &r_try)) {
        u_done = std::move(u_try);
        res = r_try;
        done = true;
        break;
      }
    }

    VecX gcov = p_->gradient(u);
    VecX gh =
        p_->project_plus(opt_.precond ? opt_.precond(gcov)
                                      : p_->mass_solve(gcov)) *
        ray.t;
    if (opt_.deflate) {
      for (const VecX& dj : found) {
        real ip = d.dot(p_->mass_matrix() * dj);
        gh += 2 * opt_.deflation_weight * ip * dj;
      }
    }
    real ip = gh.dot(p_->mass_matrix() * d);
    VecX gt = gh - ip * d;
    real gn = vnorm(gt);
    if (gn <= 1e-14 * (1 + ray.t)) break;

    bool moved = false;
    for (int ls = 0; ls < 20; ++ls) {
      VecX d_t = normalized(d - step * gt);
      FiberState st_t = st;
      RayPoint ray_t;
      try {
        ray_t = ray_solve(d_t, ray.t, &st_t);
      } catch (const solver_error&) {
        step *= 0.5;
        continue;
      }
      real v_t = ray_t.beta_value + penalty(d_t);
      if (v_t <= value - 1e-4 * step * gn * gn) {
        d = std::move(d_t);
        ray = std::move(ray_t);
        st = std::move(st_t);
        value = v_t;
        step = std::min<real>(step * 1.5, 4.0);
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved) break;
  }

  VecX u = done ? std::move(u_done) : ray.fiber.total;
  if (!done) {
    res = full_residual(u);
    if (opt_.polish) try_polish(u, &res);
  }

  real scale = 1 + p_->field_scale(u);
  r.residual_norm = res;
  r.converged = res <= opt_.outer_tol * scale;
  r.c_N = p_->energy(u);

  VecX plus = p_->project_plus(u);
  real tn = vnorm(plus);
  real un = vnorm(u);
  r.plus_nonzero = tn > 1e-6 * un;
  r.t_u = tn;
  if (tn > 0) r.direction = plus / tn;
  r.fiber.u_plus = std::move(plus);
  r.fiber.tilde = u - r.fiber.u_plus;
  r.fiber.total = std::move(u);
  r.fiber.energy = r.c_N;
  {
    // Fiber-restricted residual of the final field.
    VecX g = p_->gradient(r.fiber.total);
    real res2 = 0;
    const SpMat& G = p_->fiber_map();
    if (G.cols() > 0) {
      VecX rw = G.transpose() * g;
      res2 += rw.dot(lchol_->solve(rw));
    }
    const MatX& Vt = p_->fiber_basis();
    if (Vt.cols() > 0) res2 += (Vt.transpose() * g).squaredNorm();
    r.fiber.inner_residual = std::sqrt(std::max<real>(0, res2));
    r.fiber.converged = r.converged;
  }

  if (r.converged && r.plus_nonzero) {
    r.beta_unimodal = unimodality_witness(r.direction, 2.5 * r.t_u);
    try {
      FiberState fresh;
      r.c_M = ray_solve(r.direction, r.t_u, &fresh).beta_value;
    } catch (const solver_error& e) {
      r.warnings.emplace_back(std::string("mountain pass estimate failed: ") +
                              e.what());
      r.c_M = r.c_N;
    }
  }

  record->converged = r.converged;
  record->energy = r.c_N;
  record->residual = r.residual_norm;
  return r;
}

NehariResult NehariEngine::ground_state(MultistartReport* report) const {
  MultistartReport rep;
  rep.certificates = p_->certificates();
  std::vector<VecX> found;
  NehariResult best;
  best.residual_norm = std::numeric_limits<real>::infinity();
  int rays = 0;
  for (int s = 0; s < opt_.starts; ++s) {
    StartRecord rec;
    uint64_t seed = opt_.seed + 0x9e3779b97f4a7c15ULL * uint64_t(s + 1);
    NehariResult r = run_start(s, seed, found, &rec);
    if (rec.ray_found) ++rays;
    rep.starts.push_back(rec);
    if (r.converged) {
      if (opt_.deflate && r.direction.size() > 0) found.push_back(r.direction);
      if (!best.converged || r.c_N < best.c_N) best = std::move(r);
    } else if (!best.converged && r.residual_norm < best.residual_norm) {
      best = std::move(r);
    }
  }
  rep.coverage = opt_.starts > 0 ? real(rays) / real(opt_.starts) : 0;
  if (report) *report = rep;
  if (!best.converged && rays == 0) {
    best.warnings.emplace_back("no ray maximum on any start");
  }
  return best;
}

real NehariEngine::mountain_pass_estimate(const NehariResult& r) const {
  require(r.direction.size() == p_->size(),
          "result carries no usable direction");
  FiberState st;
  return ray_solve(r.direction, r.t_u > 0 ? r.t_u : 1, &st).beta_value;
}

bool NehariEngine::unimodality_witness(const VecX& direction,
                                       real t_top) const {
  int n = std::max(5, opt_.beta_witness_samples);
  FiberState st;
  std::vector<real> vals(static_cast<size_t>(n));
  real vmax = 0;
  for (int i = 0; i < n; ++i) {
    real t = t_top * real(i) / real(n - 1);
    vals[size_t(i)] = fiber_solve(t * direction, &st).energy;
    vmax = std::max(vmax, std::abs(vals[size_t(i)]));
  }
  const real plateau = 1e-12 * (1 + vmax);
  int sign = 0;
  int downturns = 0;
  for (int i = 0; i + 1 < n; ++i) {
    real diff = vals[size_t(i + 1)] - vals[size_t(i)];
    if (std::abs(diff) <= plateau) continue;
    int s = diff > 0 ? 1 : -1;
    if (sign == 0) {
      if (s < 0) return false;  // must rise from beta(0) = 0 first
    } else if (s != sign) {
      if (sign > 0 && s < 0) {
        ++downturns;
      } else {
        return false;  // fell and rose again
      }
    }
    sign = s;
  }
  return downturns <= 1;
}

}  // namespace nlmx

#include "nlmx/material.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <random>

namespace nlmx {

namespace {

void require_spd(const Mat3& T, const char* what) {
  require((T - T.transpose()).cwiseAbs().maxCoeff() <=
              1e-12 * (1 + T.cwiseAbs().maxCoeff()),
          std::string(what) + " tensor must be symmetric");
  Eigen::SelfAdjointEigenSolver<Mat3> es(T);
  require(es.eigenvalues().minCoeff() > 0,
          std::string(what) + " tensor must be positive definite");
}

real min_eig(const Mat3& T) {
  Eigen::SelfAdjointEigenSolver<Mat3> es(T);
  return es.eigenvalues().minCoeff();
}

bool is_diag(const Mat3& T) {
  Mat3 off = T;
  off.diagonal().setZero();
  return off.cwiseAbs().maxCoeff() <= 1e-14 * (1 + T.cwiseAbs().maxCoeff());
}

}  // namespace

MaterialTensors MaterialTensors::isotropic(real mu, real V) {
  require(mu > 0, "mu must be positive");
  MaterialTensors m;
  m.mu_inv0_ = Mat3::Identity() / mu;
  m.V0_ = Mat3::Identity() * V;
  m.finalize(0);
  return m;
}

MaterialTensors MaterialTensors::diagonal(const Vec3& mu_diag,
                                          const Vec3& V_diag) {
  require(mu_diag.minCoeff() > 0, "mu must be positive");
  MaterialTensors m;
  m.mu_inv0_ = mu_diag.cwiseInverse().asDiagonal();
  m.V0_ = V_diag.asDiagonal();
  m.finalize(0);
  return m;
}

MaterialTensors MaterialTensors::from_fields(
    const BoxGrid& grid, const std::function<Mat3(const Vec3&)>& mu,
    const std::function<Mat3(const Vec3&)>& V) {
  MaterialTensors m;
  m.per_cell_ = true;
  m.mu_inv_.reserve(size_t(grid.num_cells()));
  m.V_.reserve(size_t(grid.num_cells()));
  for (const auto& c : grid.cells()) {
    Mat3 muc = mu(c.center);
    require_spd(muc, "mu");
    m.mu_inv_.push_back(muc.inverse());
    m.V_.push_back(V(c.center));
  }
  m.finalize(grid.num_cells());
  return m;
}

MaterialTensors MaterialTensors::from_omega_eps(
    const BoxGrid& grid, real omega,
    const std::function<Mat3(const Vec3&)>& eps) {
  return from_fields(
      grid, [](const Vec3&) { return Mat3::Identity(); },
      [omega, &eps](const Vec3& x) { return (omega * omega) * eps(x); });
}

void MaterialTensors::finalize(Index ncells) {
  if (!per_cell_) {
    mu_diag_ = is_diag(mu_inv0_);
    V_diag_ = is_diag(V0_);
    V_min_eig_ = min_eig(V0_);
    return;
  }
  mu_diag_ = true;
  V_diag_ = true;
  V_min_eig_ = std::numeric_limits<real>::max();
  for (Index c = 0; c < ncells; ++c) {
    mu_diag_ = mu_diag_ && is_diag(mu_inv_[size_t(c)]);
    V_diag_ = V_diag_ && is_diag(V_[size_t(c)]);
    V_min_eig_ = std::min(V_min_eig_, min_eig(V_[size_t(c)]));
  }
}

void MaterialTensors::validate(Index ncells) const {
  if (per_cell_) {
    require(Index(mu_inv_.size()) == ncells && Index(V_.size()) == ncells,
            "material tensor count does not match active cell count");
  }
  auto check_cell = [&](const Mat3& mi, const Mat3& V) {
    require(mi.allFinite() && V.allFinite(), "material tensors must be finite");
    require_spd(mi, "mu");
    require((V - V.transpose()).cwiseAbs().maxCoeff() <=
                1e-12 * (1 + V.cwiseAbs().maxCoeff()),
            "V tensor must be symmetric");
    if (!allow_indef_) {
      require(min_eig(V) > 0, "V tensor must be positive definite");
    }
  };
  if (per_cell_) {
    for (Index c = 0; c < ncells; ++c) {
      check_cell(mu_inv_[size_t(c)], V_[size_t(c)]);
    }
  } else {
    check_cell(mu_inv0_, V0_);
  }
}

void MaterialTensors::scale_V(real c) {
  require(std::isfinite(c), "scale factor must be finite");
  V0_ *= c;
  for (auto& t : V_) t *= c;
  V_min_eig_ = (c >= 0) ? c * V_min_eig_ : c * V_min_eig_;  // sign flips bound
  if (per_cell_) {
    finalize(Index(V_.size()));
  } else {
    finalize(0);
  }
}

const char* model_kind_name(ModelKind k) {
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

bool NonlinearityModel::uses_M() const {
  return kind == ModelKind::DoublePowerPiecewise ||
         kind == ModelKind::DoublePowerSmooth;
}

void NonlinearityModel::validate(Index ncells) const {
  auto coeff_ok = [&](const CellCoeff& c, const char* name, bool strict) {
    if (!c.is_uniform()) {
      // Per-cell coefficient vectors must cover every active cell.
      require(c.is_uniform() == false, name);
      require(ncells >= 0, name);
    }
    real lo = c.min_value();
    require(std::isfinite(lo) && std::isfinite(c.max_value()),
            std::string(name) + " must be finite");
    if (strict) {
      require(lo > 0, std::string(name) + " must be positive");
    } else {
      require(lo >= 0, std::string(name) + " must be nonnegative");
    }
  };
  switch (kind) {
    case ModelKind::None:
      break;
    case ModelKind::Kerr:
    case ModelKind::Saturation:
      coeff_ok(chi3, "chi3", false);
      break;
    case ModelKind::CubicQuintic:
      coeff_ok(chi3, "chi3", false);
      coeff_ok(chi5, "chi5", false);
      break;
    case ModelKind::DoublePowerPiecewise:
    case ModelKind::DoublePowerSmooth:
      coeff_ok(gamma, "gamma", true);
      require(p > 2 && p < 6, "exponent p must lie in (2, 6)");
      require(q > 6, "exponent q must exceed 6");
      require_spd(M, "M");
      break;
  }
  require(delta_reg >= 0, "delta_reg must be nonnegative");
}

namespace {

struct PhiEval {
  real phi = 0;    // Phi(s)
  real dphi = 0;   // Phi'(s)
  real d2phi = 0;  // Phi''(s)
};

// All catalog entries are C^1 functions of s = |Mu|^2. The piecewise
// double-power kind has a jump in Phi'' at s = 1; ties go to the q branch.
PhiEval phi_eval(const NonlinearityModel& m, Index cell, real s) {
  PhiEval e;
  switch (m.kind) {
    case ModelKind::None:
      break;
    case ModelKind::Kerr: {
      real c = m.chi3.at(cell);
      e.phi = 0.25 * c * s * s;
      e.dphi = 0.5 * c * s;
      e.d2phi = 0.5 * c;
      break;
    }
    case ModelKind::Saturation: {
      real c = m.chi3.at(cell);
      e.phi = 0.5 * c * (s - std::log1p(s));
      e.dphi = 0.5 * c * s / (1 + s);
      e.d2phi = 0.5 * c / ((1 + s) * (1 + s));
      break;
    }
    case ModelKind::CubicQuintic: {
      real c3 = m.chi3.at(cell), c5 = m.chi5.at(cell);
      e.phi = 0.25 * c3 * s * s - c5 * s * s * s / 6.0;
      e.dphi = 0.5 * c3 * s - 0.5 * c5 * s * s;
      e.d2phi = 0.5 * c3 - c5 * s;
      break;
    }
    case ModelKind::DoublePowerPiecewise: {
      real g = m.gamma.at(cell);
      if (s > 1) {
        e.phi = g * (std::pow(s, 0.5 * m.p) / m.p + 1 / m.q - 1 / m.p);
        e.dphi = 0.5 * g * std::pow(s, 0.5 * (m.p - 2));
        real sr = (m.p < 4) ? s + m.delta_reg * m.delta_reg : s;
        e.d2phi = 0.25 * g * (m.p - 2) * std::pow(sr, 0.5 * (m.p - 4));
      } else {
        e.phi = g * std::pow(s, 0.5 * m.q) / m.q;
        e.dphi = 0.5 * g * std::pow(s, 0.5 * (m.q - 2));
        e.d2phi = 0.25 * g * (m.q - 2) * std::pow(s, 0.5 * (m.q - 4));
      }
      break;
    }
    case ModelKind::DoublePowerSmooth: {
      real g = m.gamma.at(cell);
      real sq = std::pow(s, 0.5 * m.q);
      real lA = std::log1p(sq);  // log(1 + t^q), stable for tiny s
      e.phi = g / m.p * std::expm1(m.p / m.q * lA);
      e.dphi = 0.5 * g * std::exp((m.p / m.q - 1) * lA) *
               std::pow(s, 0.5 * (m.q - 2));
      e.d2phi = 0.25 * g *
                ((m.p - m.q) * std::exp((m.p / m.q - 2) * lA) *
                     std::pow(s, m.q - 2) +
                 (m.q - 2) * std::exp((m.p / m.q - 1) * lA) *
                     std::pow(s, 0.5 * (m.q - 4)));
      break;
    }
  }
  return e;
}

}  // namespace

real eval_F(const NonlinearityModel& m, Index cell, const Vec3& u) {
  require(u.allFinite(), "field value must be finite");
  if (m.kind == ModelKind::None) return 0;
  Vec3 w = m.uses_M() ? Vec3(m.M * u) : u;
  return phi_eval(m, cell, w.squaredNorm()).phi;
}

Vec3 eval_f(const NonlinearityModel& m, Index cell, const Vec3& u) {
  require(u.allFinite(), "field value must be finite");
  if (m.kind == ModelKind::None) return Vec3::Zero();
  if (!m.uses_M()) {
    return 2 * phi_eval(m, cell, u.squaredNorm()).dphi * u;
  }
  Vec3 w = m.M * u;
  return 2 * phi_eval(m, cell, w.squaredNorm()).dphi * (m.M.transpose() * w);
}

Mat3 eval_f_jacobian(const NonlinearityModel& m, Index cell, const Vec3& u) {
  require(u.allFinite(), "field value must be finite");
  if (m.kind == ModelKind::None) return Mat3::Zero();
  Vec3 w = m.uses_M() ? Vec3(m.M * u) : u;
  PhiEval e = phi_eval(m, cell, w.squaredNorm());
  Mat3 core = 2 * e.dphi * Mat3::Identity() + 4 * e.d2phi * (w * w.transpose());
  if (!m.uses_M()) return core;
  return m.M.transpose() * core * m.M;
}

real eval_F_at(const NonlinearityModel& m, const BoxGrid& g, const Vec3& x,
               const Vec3& u) {
  return eval_F(m, g.cell_of(x), u);
}

Vec3 eval_f_at(const NonlinearityModel& m, const BoxGrid& g, const Vec3& x,
               const Vec3& u) {
  return eval_f(m, g.cell_of(x), u);
}

namespace {

struct Sampler {
  std::mt19937_64 rng;
  std::normal_distribution<real> normal{0.0, 1.0};
  std::uniform_real_distribution<real> unif{0.0, 1.0};

  explicit Sampler(uint64_t seed) : rng(seed) {}

  Vec3 direction() {
    Vec3 d;
    do {
      d = Vec3(normal(rng), normal(rng), normal(rng));
    } while (d.norm() < 1e-8);
    return d.normalized();
  }
  real log_uniform(real lo, real hi) {
    return lo * std::pow(hi / lo, unif(rng));
  }
  Index cell(Index ncells) {
    if (ncells <= 1) return 0;
    return Index(rng() % uint64_t(ncells));
  }
};

void record_worst(ConditionReport& rep, real margin, Index cell, const Vec3& u,
                  const Vec3& v, real t, real value) {
  if (!rep.witness || margin < rep.worst_margin) {
    rep.worst_margin = margin;
    rep.witness = ConditionWitness{cell, u, v, t, value};
  }
}

// f(x,u) = o(|u|) near u = 0, uniformly in x: the ratio |f|/|u| must decay
// along a magnitude ladder down to zero.
ConditionReport check_small_u(const NonlinearityModel& m, Index ncells,
                              Index n_samples, uint64_t seed) {
  ConditionReport rep{GrowthCondition::F2, true, n_samples, 0, {}, 0};
  Sampler s(seed);
  real worst = std::numeric_limits<real>::max();
  for (Index k = 0; k < n_samples; ++k) {
    Index c = s.cell(ncells);
    Vec3 d = s.direction();
    real first = eval_f(m, c, 1e-1 * d).norm() / 1e-1;
    real last = eval_f(m, c, 1e-6 * d).norm() / 1e-6;
    real margin = 1e-4 * first - last + 1e-300;
    if (margin < worst) {
      worst = margin;
      record_worst(rep, margin, c, 1e-6 * d, Vec3::Zero(), 0, last);
    }
    if (margin < 0) rep.passed = false;
  }
  rep.worst_margin = worst;
  if (rep.passed) rep.witness.reset();
  return rep;
}

// <f(x,u),u> >= beta * F(x,u) > 0 for |u| >= R, with a kind-specific beta.
ConditionReport check_ar_lower(const NonlinearityModel& m, Index ncells,
                               GrowthCondition which, Index n_samples,
                               uint64_t seed) {
  ConditionReport rep{which, true, n_samples, 0, {}, 0};
  real beta = 0, lo = 1e-3;
  switch (m.kind) {
    case ModelKind::None: rep.passed = false; return rep;
    case ModelKind::Kerr: beta = 4; break;
    case ModelKind::Saturation: beta = 2.05; break;
    case ModelKind::CubicQuintic: beta = 4; break;
    case ModelKind::DoublePowerPiecewise:
    case ModelKind::DoublePowerSmooth: beta = m.p; break;
  }
  rep.constant_estimate = beta;
  Sampler s(seed);
  real worst = std::numeric_limits<real>::max();
  for (Index k = 0; k < n_samples; ++k) {
    Index c = s.cell(ncells);
    Vec3 u = s.log_uniform(lo, 1e3) * s.direction();
    real F = eval_F(m, c, u);
    real fu = eval_f(m, c, u).dot(u);
    real scale = std::abs(F) + std::abs(fu) + 1e-300;
    real pos = F / scale;                  // F > 0 part
    real slack = (fu - beta * F) / scale;  // <f,u> >= beta F part
    real margin = std::min(pos, slack);
    if (margin < worst) {
      worst = margin;
      record_worst(rep, margin, c, u, Vec3::Zero(), 0, fu - beta * F);
    }
    if (margin < -1e-12) rep.passed = false;
  }
  rep.worst_margin = worst;
  if (rep.passed) rep.witness.reset();
  return rep;
}

// Quadratic-comparison inequality used by the fiber reduction:
// (t^2-1)/2 <f(u),u> + t <f(u),v> + F(u) - F(tu+v) <= 0.
ConditionReport check_fiber_ineq(const NonlinearityModel& m, Index ncells,
                                 Index n_samples, uint64_t seed) {
  ConditionReport rep{GrowthCondition::F9, true, n_samples, 0, {}, 0};
  Sampler s(seed);
  real worst = std::numeric_limits<real>::max();
  for (Index k = 0; k < n_samples; ++k) {
    Index c = s.cell(ncells);
    Vec3 u = s.log_uniform(1e-2, 1e1) * s.direction();
    Vec3 v = s.log_uniform(1e-3, 1e1) * s.direction();
    real t = (k % 5 == 0) ? 1 + 0.01 * s.normal(s.rng) : 3 * s.unif(s.rng);
    t = std::max(t, real(0));
    real Fu = eval_F(m, c, u);
    real Ftv = eval_F(m, c, t * u + v);
    Vec3 fu = eval_f(m, c, u);
    real E = 0.5 * (t * t - 1) * fu.dot(u) + t * fu.dot(v) + Fu - Ftv;
    real scale = std::abs(Fu) + std::abs(Ftv) + std::abs(fu.dot(u)) +
                 std::abs(fu.dot(v)) + 1e-300;
    real margin = -E / scale;
    if (margin < worst) {
      worst = margin;
      record_worst(rep, margin, c, u, v, t, E);
    }
    if (margin < -1e-11) rep.passed = false;
  }
  rep.worst_margin = worst;
  if (rep.passed) rep.witness.reset();
  return rep;
}

// <f,u> >= gamma F >= 0 globally (superquadratic control with gamma > 2).
ConditionReport check_global_ar(const NonlinearityModel& m, Index ncells,
                                Index n_samples, uint64_t seed) {
  ConditionReport rep = check_ar_lower(m, ncells, GrowthCondition::F6,
                                       n_samples, seed);
  rep.condition = GrowthCondition::F6;
  // Same inequality but down to |u| ~ 0 and with F >= 0 instead of > 0.
  Sampler s(seed ^ 0x9e3779b97f4a7c15ull);
  real beta = rep.constant_estimate;
  real worst = rep.worst_margin;
  for (Index k = 0; k < n_samples; ++k) {
    Index c = s.cell(ncells);
    Vec3 u = s.log_uniform(1e-6, 1e3) * s.direction();
    real F = eval_F(m, c, u);
    real fu = eval_f(m, c, u).dot(u);
    real scale = std::abs(F) + std::abs(fu) + 1e-300;
    real margin = std::min(F / scale + 1e-13, (fu - beta * F) / scale);
    if (margin < worst) {
      worst = margin;
      record_worst(rep, margin, c, u, Vec3::Zero(), 0, fu - beta * F);
    }
    if (margin < -1e-12) rep.passed = false;
  }
  rep.worst_margin = worst;
  if (rep.passed) rep.witness.reset();
  return rep;
}

// F(x,u)/|u|^2 -> infinity uniformly: the ratio must keep growing along the
// last magnitude decade, which rules out saturating models.
ConditionReport check_superquadratic(const NonlinearityModel& m, Index ncells,
                                     Index n_samples, uint64_t seed) {
  ConditionReport rep{GrowthCondition::F12, true, n_samples, 0, {}, 0};
  Sampler s(seed);
  real worst = std::numeric_limits<real>::max();
  for (Index k = 0; k < n_samples; ++k) {
    Index c = s.cell(ncells);
    Vec3 d = s.direction();
    auto rho = [&](real r) { return eval_F(m, c, r * d) / (r * r); };
    real mid = rho(1e2), top = rho(1e3);
    real margin = (top > 0 && mid > 0) ? top / mid - 1.2
                                       : std::min(top, mid) - 1.2;
    if (margin < worst) {
      worst = margin;
      record_worst(rep, margin, c, 1e3 * d, Vec3::Zero(), 0, top);
    }
    if (margin < 0) rep.passed = false;
  }
  rep.worst_margin = worst;
  if (rep.passed) rep.witness.reset();
  return rep;
}

// F(x,u) >= c1 * min(|u|^p, |u|^q) with c1 > 0 uniform in x and u.
ConditionReport check_double_power_floor(const NonlinearityModel& m,
                                         Index ncells, Index n_samples,
                                         uint64_t seed) {
  ConditionReport rep{GrowthCondition::F14, true, n_samples, 0, {}, 0};
  real p = m.p, q = m.q;
  if (m.kind == ModelKind::Kerr || m.kind == ModelKind::Saturation ||
      m.kind == ModelKind::CubicQuintic) {
    p = q = 4;
  }
  Sampler s(seed);
  real min_ratio = std::numeric_limits<real>::max();
  real min_small = std::numeric_limits<real>::max();
  real min_large = std::numeric_limits<real>::max();
  for (Index k = 0; k < n_samples; ++k) {
    Index c = s.cell(ncells);
    Vec3 d = s.direction();
    auto ratio = [&](real r) {
      real floor = std::min(std::pow(r, p), std::pow(r, q));
      return eval_F(m, c, r * d) / floor;
    };
    real r_small = s.log_uniform(1e-2, 1.0);
    real r_large = s.log_uniform(1e1, 1e3);
    real rs = ratio(r_small), rl = ratio(r_large);
    min_small = std::min(min_small, rs);
    min_large = std::min(min_large, rl);
    if (std::min(rs, rl) < min_ratio) {
      min_ratio = std::min(rs, rl);
      record_worst(rep, min_ratio, c, (rs < rl ? r_small : r_large) * d,
                   Vec3::Zero(), 0, min_ratio);
    }
  }
  rep.constant_estimate = min_ratio;
  // Positive floor overall, and the large-|u| branch must not collapse
  // relative to the small one (saturating decay to zero fails here).
  rep.passed = min_ratio > 0 && min_large >= 0.1 * min_small;
  rep.worst_margin = min_ratio;
  if (rep.passed) rep.witness.reset();
  return rep;
}

}  // namespace

ConditionReport check_condition(const NonlinearityModel& m, Index ncells,
                                GrowthCondition cond, Index n_samples,
                                uint64_t seed) {
  require(n_samples > 0, "need at least one sample");
  switch (cond) {
    case GrowthCondition::F2: return check_small_u(m, ncells, n_samples, seed);
    case GrowthCondition::F4:
      return check_ar_lower(m, ncells, GrowthCondition::F4, n_samples, seed);
    case GrowthCondition::F6: return check_global_ar(m, ncells, n_samples, seed);
    case GrowthCondition::F9: return check_fiber_ineq(m, ncells, n_samples, seed);
    case GrowthCondition::F12:
      return check_superquadratic(m, ncells, n_samples, seed);
    case GrowthCondition::F14:
      return check_double_power_floor(m, ncells, n_samples, seed);
  }
  throw invalid_input_error("unknown growth condition");
}

}  // namespace nlmx

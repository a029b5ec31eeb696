#include "nlmx/functional.hpp"

#include <cmath>
#include <vector>

namespace nlmx {

EnergyContext::EnergyContext(const SpectralSplit& split, NonlinearityModel model)
    : ops_(&split.ops()),
      helm_(&split.helm()),
      split_(&split),
      model_(std::move(model)) {
  model_.validate(ops().grid().num_cells());
}

EnergyContext::EnergyContext(const DiscreteOperators& ops,
                             const HelmholtzProjector& helm,
                             NonlinearityModel model)
    : ops_(&ops), helm_(&helm), split_(nullptr), model_(std::move(model)) {
  model_.validate(ops_->grid().num_cells());
}

NonlinearityModel EnergyContext::regularized_for(const EdgeField& u) const {
  NonlinearityModel m = model_;
  if (m.kind == ModelKind::DoublePowerPiecewise && m.p < 4) {
    m.delta_reg = 1e-8 * field_scale(u);
  }
  return m;
}

real EnergyContext::field_scale(const EdgeField& u) const {
  if (u.size() == 0) return 0;
  MatX avg = ops().cell_average(u);
  return avg.array().abs().maxCoeff();
}

real EnergyContext::nonlinear_integral(const EdgeField& u) const {
  if (model_.trivial()) return 0;
  MatX avg = ops().cell_average(u);
  real vol = ops().vol();
  real acc = 0;
  for (Index c = 0; c < avg.rows(); ++c) {
    acc += vol * eval_F(model_, c, avg.row(c).transpose());
  }
  return acc;
}

EdgeField EnergyContext::nonlinear_covector(const EdgeField& u) const {
  if (model_.trivial()) return EdgeField::Zero(u.size());
  MatX avg = ops().cell_average(u);
  MatX fv(avg.rows(), 3);
  for (Index c = 0; c < avg.rows(); ++c) {
    fv.row(c) = eval_f(model_, c, avg.row(c).transpose()).transpose();
  }
  return ops().scatter_cells(fv);
}

real EnergyContext::energy(const EdgeField& u) const {
  return 0.5 * ops().dot_curl(u, u) - 0.5 * ops().dot_V(u, u) -
         nonlinear_integral(u);
}

EdgeField EnergyContext::gradient_covector(const EdgeField& u) const {
  return ops().A() * u - ops().M_V() * u - nonlinear_covector(u);
}

EdgeField EnergyContext::riesz_gradient(const EdgeField& u) const {
  return ops().MV_solver().solve(gradient_covector(u));
}

real EnergyContext::residual_norm(const EdgeField& u) const {
  EdgeField r = gradient_covector(u);
  return std::sqrt(std::max<real>(0, r.dot(ops().MV_solver().solve(r))));
}

EdgeField EnergyContext::hessian_apply(const EdgeField& u,
                                       const EdgeField& psi) const {
  EdgeField out = ops().A() * psi - ops().M_V() * psi;
  if (!model_.trivial()) {
    NonlinearityModel m = regularized_for(u);
    MatX avg = ops().cell_average(u);
    MatX pav = ops().cell_average(psi);
    MatX rows(avg.rows(), 3);
    for (Index c = 0; c < avg.rows(); ++c) {
      Mat3 J = eval_f_jacobian(m, c, avg.row(c).transpose());
      rows.row(c) = (J * pav.row(c).transpose()).transpose();
    }
    out -= ops().scatter_cells(rows);
  }
  return out;
}

real EnergyContext::second_directional(const EdgeField& u,
                                       const EdgeField& psi) const {
  return psi.dot(hessian_apply(u, psi));
}

SpMat EnergyContext::nonlinear_jacobian(const EdgeField& u) const {
  const Index ne = ops().grid().num_edges();
  SpMat N(ne, ne);
  if (model_.trivial()) return N;
  NonlinearityModel m = regularized_for(u);
  MatX avg = ops().cell_average(u);
  const real vol = ops().vol();
  std::vector<Triplet> t;
  const auto& grid = ops().grid();
  t.reserve(size_t(grid.num_cells()) * 80);
  for (const auto& cell : grid.cells()) {
    Index ci = grid.cell_id(cell.i, cell.j, cell.k);
    Mat3 J = eval_f_jacobian(m, ci, avg.row(ci).transpose());
    for (int d = 0; d < 3; ++d) {
      for (int dp = 0; dp < 3; ++dp) {
        if (J(d, dp) == 0) continue;
        real w = vol * J(d, dp) * 0.25 * 0.25;
        for (Index e : cell.edge[size_t(d)]) {
          if (e < 0) continue;
          for (Index ep : cell.edge[size_t(dp)]) {
            if (ep >= 0) t.emplace_back(e, ep, w);
          }
        }
      }
    }
  }
  N.setFromTriplets(t.begin(), t.end());
  return N;
}

real EnergyContext::energy_via_split(const EdgeField& u) const {
  const SpectralSplit& sp = split();
  EdgeField vt = sp.project_tilde(u);
  EdgeField vp = sp.project_plus(u);
  EdgeField w = sp.project_kernel(u);
  real qp = quadratic_form(ops(), vp);
  real qt = quadratic_form(ops(), vt);
  return 0.5 * qp + 0.5 * qt - 0.5 * ops().dot_V(w, w) - nonlinear_integral(u);
}

real EnergyContext::concave_defect(const EdgeField& u) const {
  const SpectralSplit& sp = split();
  EdgeField vt = sp.project_tilde(u);
  EdgeField w = sp.project_kernel(u);
  return -0.5 * quadratic_form(ops(), vt) + 0.5 * ops().dot_V(w, w) +
         nonlinear_integral(u);
}

EnergyContext::Certificate EnergyContext::admissible_certificate(
    const EdgeField& u) const {
  real total = std::sqrt(std::max<real>(0, ops().dot_V(u, u)));
  EdgeField vp = split().project_plus(u);
  real plus = std::sqrt(std::max<real>(0, ops().dot_V(vp, vp)));
  Certificate c;
  c.plus_fraction = total > 0 ? plus / total : 0;
  c.admissible = total > 0 && plus > 1e-6 * total;
  return c;
}

real RadialOracle::magnitude(real r) const {
  real v = V(r), g = Gamma(r);
  if (v == 0) return 0;
  require(g != 0, "Gamma vanishes where V does not; no radial solution");
  real ratio = v / g;
  if (ratio < 0) {
    throw certificate_error(
        "V and Gamma disagree in sign; the radial family has no solution");
  }
  return std::pow(ratio, 1 / (p - 2));
}

Vec3 RadialOracle::value(const Vec3& x) const {
  Vec3 d = x - center;
  real r = d.norm();
  if (r == 0) return Vec3::Zero();
  return magnitude(r) * (d / r);
}

RadialOracle make_radial_oracle(std::function<real(real)> V,
                                std::function<real(real)> Gamma, real p,
                                const Vec3& center, real r_max,
                                Index n_samples) {
  require(p > 2, "radial family needs p > 2");
  require(r_max > 0 && n_samples > 1, "invalid sampling range");
  RadialOracle o{std::move(V), std::move(Gamma), p, center};
  for (Index i = 1; i <= n_samples; ++i) {
    real r = r_max * real(i) / real(n_samples);
    if (o.V(r) * o.Gamma(r) < 0) {
      throw certificate_error(
          "V * Gamma changes sign on the requested range; the radial "
          "family has no real solution there");
    }
  }
  return o;
}

RadialCheckReport verify_radial_oracle(const RadialOracle& o, real r_max,
                                       Index n_samples) {
  RadialCheckReport rep;
  real worst = 0;
  for (Index i = 1; i <= n_samples; ++i) {
    real r = r_max * real(i) / real(n_samples);
    real m = o.magnitude(r);
    real lhs = o.V(r) * m;
    real rhs = o.Gamma(r) * std::pow(m, o.p - 1);
    worst = std::max(worst,
                     std::abs(lhs - rhs) / std::max<real>(1, std::abs(lhs)));
    rep.max_magnitude = std::max(rep.max_magnitude, m);
  }
  rep.max_identity_defect = worst;
  rep.passed = worst <= 1e-12;
  return rep;
}

}  // namespace nlmx

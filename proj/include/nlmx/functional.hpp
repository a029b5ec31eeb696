#pragma once

#include "nlmx/material.hpp"
#include "nlmx/spectrum.hpp"
#include "nlmx/types.hpp"

#include <functional>
#include <optional>

namespace nlmx {

// Discrete energy J(u) = 1/2 u^T A u - 1/2 u^T M_V u - sum_c vol F(c, ubar_c)
// with the nonlinear term evaluated at cell-averaged midpoint values. The
// gradient and Hessian are the exact derivatives of this discrete J, so
// optimizers below see a consistent smooth objective.
class EnergyContext {
 public:
  EnergyContext(const SpectralSplit& split, NonlinearityModel model);
  // Split-free variant: everything works except the split-route assemblies
  // and the admissibility certificate, which need the spectral basis.
  EnergyContext(const DiscreteOperators& ops, const HelmholtzProjector& helm,
                NonlinearityModel model);

  [[nodiscard]] const DiscreteOperators& ops() const { return *ops_; }
  [[nodiscard]] const HelmholtzProjector& helm() const { return *helm_; }
  [[nodiscard]] bool has_split() const { return split_ != nullptr; }
  [[nodiscard]] const SpectralSplit& split() const {
    require(split_ != nullptr, "this context was built without a split");
    return *split_;
  }
  [[nodiscard]] const NonlinearityModel& model() const { return model_; }

  [[nodiscard]] real energy(const EdgeField& u) const;
  [[nodiscard]] real nonlinear_integral(const EdgeField& u) const;
  [[nodiscard]] EdgeField nonlinear_covector(const EdgeField& u) const;
  // Euclidean covector of J; the Riesz gradient applies M^{-1} to it.
  [[nodiscard]] EdgeField gradient_covector(const EdgeField& u) const;
  [[nodiscard]] EdgeField riesz_gradient(const EdgeField& u) const;
  [[nodiscard]] real residual_norm(const EdgeField& u) const;
  // Hessian action (A - M - N'(u)) psi and the assembled N'(u).
  [[nodiscard]] EdgeField hessian_apply(const EdgeField& u,
                                        const EdgeField& psi) const;
  [[nodiscard]] real second_directional(const EdgeField& u,
                                        const EdgeField& psi) const;
  [[nodiscard]] SpMat nonlinear_jacobian(const EdgeField& u) const;

  // Independent assembly route: project u into the three spectral blocks and
  // sum 1/2 Q(v+) + 1/2 Q(vt) - 1/2 ||w||_V^2 - integral F. Must agree with
  // energy() to quadrature roundoff; serves as a cross-check, not a fast path.
  [[nodiscard]] real energy_via_split(const EdgeField& u) const;
  // Concave-side bookkeeping: -1/2 Q(vt) + 1/2 ||w||_V^2 + integral F, so
  // that energy + concave_defect = 1/2 Q(v+) identically.
  [[nodiscard]] real concave_defect(const EdgeField& u) const;

  // Sup-norm of the cell averages, the scale used for regularizing the
  // low-exponent Hessian branch.
  [[nodiscard]] real field_scale(const EdgeField& u) const;

  struct Certificate {
    real plus_fraction = 0;  // ||P_+ u||_V / ||u||_V
    bool admissible = false;
  };
  // Nondegeneracy of a candidate: its positive-cone component must not
  // vanish, otherwise the fiber geometry collapses.
  [[nodiscard]] Certificate admissible_certificate(const EdgeField& u) const;

 private:
  const DiscreteOperators* ops_;
  const HelmholtzProjector* helm_;
  const SpectralSplit* split_;
  NonlinearityModel model_;

  [[nodiscard]] NonlinearityModel regularized_for(const EdgeField& u) const;
};

// Closed-form family for the strong equation curl curl u + V(|x-c|) u =
// Gamma(|x-c|) |u|^{p-2} u: the hedgehog u = m(|x-c|) (x-c)/|x-c| with
// m = (V/Gamma)^{1/(p-2)} is curl-free, so the identity reduces to an
// algebraic balance checkable to machine precision.
struct RadialOracle {
  std::function<real(real)> V;
  std::function<real(real)> Gamma;
  real p = 4;
  Vec3 center = Vec3::Zero();

  [[nodiscard]] real magnitude(real r) const;
  [[nodiscard]] Vec3 value(const Vec3& x) const;
};

// Validates the sign gate V * Gamma >= 0 on radius samples; refusal is a
// certificate_error (the family has no real solution there).
RadialOracle make_radial_oracle(std::function<real(real)> V,
                                std::function<real(real)> Gamma, real p,
                                const Vec3& center, real r_max,
                                Index n_samples = 512);

struct RadialCheckReport {
  real max_identity_defect = 0;  // |V m - Gamma m^{p-1}| over samples
  real max_magnitude = 0;
  bool passed = false;
};

RadialCheckReport verify_radial_oracle(const RadialOracle& o, real r_max,
                                       Index n_samples = 512);

}  // namespace nlmx

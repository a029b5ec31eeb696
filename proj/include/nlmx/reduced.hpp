#pragma once

#include "nlmx/nehari.hpp"
#include "nlmx/symmetry.hpp"

#include <functional>

namespace nlmx {

// Scalar material profiles on the (r, z) half-plane for the azimuthal
// reduction. mu_inv_h weights the horizontal curl component (-r dz alpha),
// mu_inv_z the vertical one (2 alpha + r dr alpha); V is the transverse
// eigenvalue of the potential tensor, which is what the azimuthal ansatz
// feels. All three must be rotationally symmetric by construction.
struct CylProfiles {
  std::function<real(real, real)> mu_inv_h;
  std::function<real(real, real)> mu_inv_z;
  std::function<real(real, real)> V;

  static CylProfiles constant(real mu_inv, real V);
};

// Scalar problem obtained by constraining the energy to the azimuthal
// fixed-point class u = alpha(r, z) (-y', x', 0). That class is curl-positive
// (it meets no gradients), so the fiber subspace is empty and the whole space
// is the positive block; the reduction engine then runs in its
// positive-definite specialization. Unknowns are the interior alpha values
// (i in [0, nr), j in [1, nz)); the quadratic form uses the exact weak curl
// components with midpoint quadrature and an odd ghost at r = R.
class ReducedTauProblem final : public NehariProblem {
 public:
  ReducedTauProblem(const CylGrid& grid, const CylProfiles& mat,
                    NonlinearityModel model);
  // Convenience: V = lambda everywhere, mu = id.
  ReducedTauProblem(const CylGrid& grid, real lambda, NonlinearityModel model);

  [[nodiscard]] Index size() const override;
  [[nodiscard]] real energy(const VecX& a) const override;
  [[nodiscard]] VecX gradient(const VecX& a) const override;
  [[nodiscard]] SpMat nonlinear_jacobian(const VecX& a) const override;
  [[nodiscard]] const SpMat& quad_matrix() const override;
  [[nodiscard]] const SpMat& mass_matrix() const override;
  [[nodiscard]] VecX mass_solve(const VecX& covector) const override;
  [[nodiscard]] VecX project_plus(const VecX& u) const override;
  [[nodiscard]] const SpMat& fiber_map() const override;
  [[nodiscard]] const MatX& fiber_basis() const override;
  [[nodiscard]] const VecX& fiber_values() const override;
  [[nodiscard]] real field_scale(const VecX& a) const override;
  [[nodiscard]] const Certificates& certificates() const override;

  [[nodiscard]] const CylGrid& cyl() const { return cyl_; }
  [[nodiscard]] Index dof(int i, int j) const {
    return Index(j - 1) * cyl_.nr + i;
  }
  // Curl stiffness, potential-weighted mass, and unit-weight mass.
  [[nodiscard]] const SpMat& stiffness() const { return K_; }
  [[nodiscard]] const SpMat& potential_mass() const { return MV_; }
  [[nodiscard]] const SpMat& unit_mass() const { return M1_; }
  // a^T (K - M_V) a, the quadratic part of twice the energy.
  [[nodiscard]] real quadratic(const VecX& a) const;
  // Volume integral of F along the ansatz.
  [[nodiscard]] real nonlinear_integral(const VecX& a) const;

  [[nodiscard]] CylField to_field(const VecX& a) const;
  [[nodiscard]] VecX from_field(const CylField& f) const;

 private:
  CylGrid cyl_;
  NonlinearityModel model_;
  Certificates certs_;
  SpMat K_, MV_, M1_, quad_, fiber_empty_;
  VecX m1_diag_;
  VecX radius_;  // r at each dof
  VecX weight_;  // 2 pi r hr hz at each dof
  MatX basis_empty_;
  VecX values_empty_;

  void build(const CylProfiles& mat);
  [[nodiscard]] NonlinearityModel regularized_for(const VecX& a) const;
};

// Smallest eigenvalue of the curl stiffness against the unit-weight mass;
// potentials with V < lambda1 pointwise leave the reduced form positive
// definite.
real reduced_lambda1(const CylGrid& grid, const CylProfiles& mat);

struct ReducedSolution {
  CylField field;   // beta = gamma = 0 by construction
  NehariResult result;
  MultistartReport report;
  real lambda1 = 0;
};

// Ground state of the reduced problem via the shared reduction engine.
ReducedSolution reduced_tau_solver(const CylGrid& grid, const CylProfiles& mat,
                                   const NonlinearityModel& model,
                                   const NehariOptions& opt = {});
ReducedSolution reduced_tau_solver(const CylGrid& grid, real lambda,
                                   const NonlinearityModel& model,
                                   const NehariOptions& opt = {});

// Consistency oracle for the reduced operator: sample a smooth profile, push
// it through the reduced stiffness (strong form), lift to the box lattice,
// and compare against the full 3D curl-curl applied to the sampled ansatz.
// Probes stay on clean interior stencils away from the axis, the rim, and
// the walls. The two routes are independent discretizations of the same
// operator, so the mismatch measures their shared truncation error.
struct LiftCompareReport {
  real rel_l2 = 0;
  real rel_sup = 0;
  real scale = 0;      // sup of the reference operator values
  Index n_probes = 0;
};

LiftCompareReport lift_compare(const BoxGrid& box, const CylGrid& cyl,
                               const std::function<real(real, real)>& alpha);

}  // namespace nlmx

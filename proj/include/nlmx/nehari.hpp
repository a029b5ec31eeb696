#pragma once

#include "nlmx/functional.hpp"
#include "nlmx/types.hpp"

#include <Eigen/SparseCholesky>

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace nlmx {

// Abstract strongly indefinite variational problem: an energy J on R^n with a
// V-weighted mass metric, a positive spectral block, and a fiber subspace
// parametrized by a sparse potential map (the gradient kernel, possibly with
// zero columns) plus a small dense mass-orthonormal basis of low modes. The
// reduction engine below talks only to this interface, so the full 3D problem
// and the symmetry-reduced scalar problem share one implementation.
class NehariProblem {
 public:
  struct Certificates {
    // Sampled once per model; the fiber solve refuses uncertified-convex
    // models because uniqueness of the fiber point is then unavailable.
    bool convex = false;
    // Superlinear growth; when absent, rays may fail to turn down and the
    // ground-state search reports coverage instead of erroring.
    bool superlinear = false;
    std::string model;
  };

  virtual ~NehariProblem() = default;

  [[nodiscard]] virtual Index size() const = 0;
  [[nodiscard]] virtual real energy(const VecX& u) const = 0;
  // Euclidean covector of the energy.
  [[nodiscard]] virtual VecX gradient(const VecX& u) const = 0;
  [[nodiscard]] virtual SpMat nonlinear_jacobian(const VecX& u) const = 0;
  [[nodiscard]] virtual const SpMat& quad_matrix() const = 0;
  [[nodiscard]] virtual const SpMat& mass_matrix() const = 0;
  [[nodiscard]] virtual VecX mass_solve(const VecX& covector) const = 0;
  [[nodiscard]] virtual VecX project_plus(const VecX& u) const = 0;
  [[nodiscard]] virtual const SpMat& fiber_map() const = 0;
  [[nodiscard]] virtual const MatX& fiber_basis() const = 0;
  [[nodiscard]] virtual const VecX& fiber_values() const = 0;
  [[nodiscard]] virtual real field_scale(const VecX& u) const = 0;
  [[nodiscard]] virtual const Certificates& certificates() const = 0;
};

// Adapter presenting an EnergyContext (with spectral split) as a problem.
class EnergyProblem final : public NehariProblem {
 public:
  explicit EnergyProblem(const EnergyContext& ctx);

  [[nodiscard]] Index size() const override;
  [[nodiscard]] real energy(const VecX& u) const override;
  [[nodiscard]] VecX gradient(const VecX& u) const override;
  [[nodiscard]] SpMat nonlinear_jacobian(const VecX& u) const override;
  [[nodiscard]] const SpMat& quad_matrix() const override;
  [[nodiscard]] const SpMat& mass_matrix() const override;
  [[nodiscard]] VecX mass_solve(const VecX& covector) const override;
  [[nodiscard]] VecX project_plus(const VecX& u) const override;
  [[nodiscard]] const SpMat& fiber_map() const override;
  [[nodiscard]] const MatX& fiber_basis() const override;
  [[nodiscard]] const VecX& fiber_values() const override;
  [[nodiscard]] real field_scale(const VecX& u) const override;
  [[nodiscard]] const Certificates& certificates() const override;

  [[nodiscard]] const EnergyContext& context() const { return *ctx_; }

 private:
  const EnergyContext* ctx_;
  Certificates certs_;
};

struct NehariOptions {
  real fiber_tol = 1e-10;
  real outer_tol = 1e-7;
  int fiber_cap = 500;
  int outer_cap = 200;
  int line_cap = 60;
  int starts = 8;
  uint64_t seed = 20240901;
  // Finish converged starts with a damped full-space Newton polish.
  bool polish = true;
  // Heuristic direction-overlap penalty against previously found states.
  bool deflate = false;
  real deflation_weight = 1.0;
  int beta_witness_samples = 41;
  // Optional filter applied to each random start before the positive-block
  // projection, e.g. a symmetry-class projection that confines the search to
  // an invariant subspace. Identity when absent.
  std::function<VecX(const VecX&)> start_transform;
  // Optional SPD Riesz map applied to energy covectors in the spherical
  // descent instead of the mass inverse. Preconditioning with (an SPD shift
  // of) the quadratic operator makes the descent rate grid-independent on
  // stiff discretizations; convergence is still certified in the mass-inverse
  // residual norm.
  std::function<VecX(const VecX&)> precond;
};

struct FiberSolution {
  VecX u_plus;
  VecX tilde;
  VecX total;
  real inner_residual = 0;
  real energy = 0;
  int iterations = 0;
  bool converged = false;
};

// Ray through a fixed direction: the fiber-corrected maximizer over t > 0.
struct RayPoint {
  real t = 0;
  FiberSolution fiber;
  real beta_value = 0;
  real beta_slope = 0;
};

struct NehariResult {
  VecX direction;  // unit vector in the positive block, V-metric
  real t_u = 0;
  FiberSolution fiber;  // solution field is fiber.total
  real c_N = 0;
  real c_M = 0;
  real residual_norm = 0;
  bool plus_nonzero = false;
  bool beta_unimodal = false;
  bool converged = false;
  int start_index = -1;
  std::vector<std::string> warnings;
};

struct StartRecord {
  int index = -1;
  uint64_t seed = 0;
  bool ray_found = false;
  bool converged = false;
  real energy = 0;
  real residual = 0;
};

struct MultistartReport {
  std::vector<StartRecord> starts;
  // Fraction of starts whose ray had a maximum; below 1 only for models
  // without certified superlinear growth.
  real coverage = 0;
  NehariProblem::Certificates certificates;
};

class NehariEngine {
 public:
  explicit NehariEngine(const NehariProblem& problem, NehariOptions opt = {});

  // Unique maximizer of J over u_plus + fiber subspace (equivalently the
  // minimizer of the convex concave-part functional). The two-argument form
  // starts from the given fiber coordinates instead of zero.
  [[nodiscard]] FiberSolution fiber_minimize(const VecX& u_plus) const;
  [[nodiscard]] FiberSolution fiber_minimize(const VecX& u_plus,
                                             const VecX& phi0,
                                             const VecX& coef0) const;

  // J evaluated on the fiber-corrected ray through a direction.
  [[nodiscard]] real beta(const VecX& direction, real t) const;

  // Alternating (t, fiber) maximization along the ray; throws solver_error
  // with message "no ray maximum" when the bracket never turns down.
  [[nodiscard]] RayPoint ray_maximize(const VecX& direction) const;

  // Multistart minimization of J over rays; lowest-energy converged start.
  [[nodiscard]] NehariResult ground_state(
      MultistartReport* report = nullptr) const;

  // Re-evaluates max_t beta along the result's direction.
  [[nodiscard]] real mountain_pass_estimate(const NehariResult& r) const;

  // Sampled single-sign-change test of beta differences on [0, t_top].
  [[nodiscard]] bool unimodality_witness(const VecX& direction,
                                         real t_top) const;

  [[nodiscard]] const NehariProblem& problem() const { return *p_; }
  [[nodiscard]] const NehariOptions& options() const { return opt_; }

 private:
  struct FiberState {
    VecX phi, coef;
  };

  [[nodiscard]] real vnorm(const VecX& u) const;
  [[nodiscard]] VecX normalized(const VecX& u) const;
  FiberSolution fiber_solve(const VecX& u_plus, FiberState* state) const;
  RayPoint ray_solve(const VecX& unit_dir, real t_init,
                     FiberState* state) const;
  [[nodiscard]] real beta_slope(const VecX& unit_dir,
                                const FiberSolution& fiber) const;
  NehariResult run_start(int index, uint64_t seed,
                         const std::vector<VecX>& found,
                         StartRecord* record) const;
  bool newton_polish(VecX& u, real* residual) const;
  [[nodiscard]] real full_residual(const VecX& u) const;

  const NehariProblem* p_;
  NehariOptions opt_;
  SpMat L_;  // Gram matrix of the sparse fiber map in the mass metric
  std::shared_ptr<Eigen::SimplicialLDLT<SpMat>> lchol_;
};

}  // namespace nlmx

#pragma once

#include "nlmx/grid.hpp"
#include "nlmx/types.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace nlmx {

// Scalar coefficient field, either uniform or piecewise constant per cell.
// Pointwise evaluation snaps to the containing cell.
class CellCoeff {
 public:
  CellCoeff() : uniform_(0) {}
  CellCoeff(real v) : uniform_(v) {}  // NOLINT: implicit by design
  explicit CellCoeff(VecX per_cell) : values_(std::move(per_cell)) {}

  [[nodiscard]] real at(Index cell) const {
    if (values_.size() == 0) return uniform_;
    return values_[cell];
  }
  [[nodiscard]] bool is_uniform() const { return values_.size() == 0; }
  [[nodiscard]] real min_value() const {
    return values_.size() == 0 ? uniform_ : values_.minCoeff();
  }
  [[nodiscard]] real max_value() const {
    return values_.size() == 0 ? uniform_ : values_.maxCoeff();
  }

 private:
  real uniform_ = 0;
  VecX values_;
};

// Per-cell symmetric positive definite tensors mu^{-1} and V. The solver
// consumes mu only through its inverse, so that is what gets stored.
class MaterialTensors {
 public:
  static MaterialTensors isotropic(real mu, real V);
  static MaterialTensors diagonal(const Vec3& mu_diag, const Vec3& V_diag);
  static MaterialTensors from_fields(const BoxGrid& grid,
                                     const std::function<Mat3(const Vec3&)>& mu,
                                     const std::function<Mat3(const Vec3&)>& V);
  // V = omega^2 * eps, computed entrywise.
  static MaterialTensors from_omega_eps(
      const BoxGrid& grid, real omega,
      const std::function<Mat3(const Vec3&)>& eps);

  [[nodiscard]] const Mat3& mu_inv_at(Index cell) const {
    return per_cell_ ? mu_inv_[size_t(cell)] : mu_inv0_;
  }
  [[nodiscard]] const Mat3& V_at(Index cell) const {
    return per_cell_ ? V_[size_t(cell)] : V0_;
  }
  [[nodiscard]] bool per_cell() const { return per_cell_; }
  [[nodiscard]] bool mu_inv_diagonal() const { return mu_diag_; }
  [[nodiscard]] bool V_diagonal() const { return V_diag_; }

  // Smallest eigenvalue of V over all cells (positive unless indefinite
  // tensors were explicitly allowed).
  [[nodiscard]] real V_min_eig() const { return V_min_eig_; }

  // Experimental escape hatch: admit indefinite V (no convergence promise).
  void allow_indefinite_V() { allow_indef_ = true; }
  void validate(Index ncells) const;

  // Scales V by c in place (used by parameter sweeps).
  void scale_V(real c);

 private:
  bool per_cell_ = false;
  bool mu_diag_ = true, V_diag_ = true;
  bool allow_indef_ = false;
  real V_min_eig_ = 0;
  Mat3 mu_inv0_ = Mat3::Identity(), V0_ = Mat3::Identity();
  std::vector<Mat3> mu_inv_, V_;

  void finalize(Index ncells);
};

enum class ModelKind {
  None,
  Kerr,
  Saturation,
  CubicQuintic,
  DoublePowerPiecewise,
  DoublePowerSmooth,
};

const char* model_kind_name(ModelKind k);

// Nonlinearity F(x,u) with gradient f = dF/du. Every catalog entry is a
// function of s = |M u|^2 with per-cell coefficients, which keeps F even in u
// and invariant under rotations commuting with M.
struct NonlinearityModel {
  ModelKind kind = ModelKind::None;
  CellCoeff chi3{1.0};
  CellCoeff chi5{1.0};
  CellCoeff gamma{1.0};
  real p = 4.0;
  real q = 8.0;
  Mat3 M = Mat3::Identity();
  // Regularization scale for the p < 4 power branch of the second derivative.
  real delta_reg = 0.0;

  void validate(Index ncells) const;
  [[nodiscard]] bool uses_M() const;
  [[nodiscard]] bool trivial() const { return kind == ModelKind::None; }
};

real eval_F(const NonlinearityModel& m, Index cell, const Vec3& u);
Vec3 eval_f(const NonlinearityModel& m, Index cell, const Vec3& u);
// Jacobian df/du (symmetric); the p < 4 branch uses the delta regularization.
Mat3 eval_f_jacobian(const NonlinearityModel& m, Index cell, const Vec3& u);

// Point-based convenience (snaps x to the containing cell).
real eval_F_at(const NonlinearityModel& m, const BoxGrid& g, const Vec3& x,
               const Vec3& u);
Vec3 eval_f_at(const NonlinearityModel& m, const BoxGrid& g, const Vec3& x,
               const Vec3& u);

enum class GrowthCondition { F2, F4, F6, F9, F12, F14 };

struct ConditionWitness {
  Index cell = 0;
  Vec3 u = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  real t = 0;
  real value = 0;
};

struct ConditionReport {
  GrowthCondition condition;
  bool passed = false;
  Index samples = 0;
  // Smallest slack seen; negative means the inequality failed there.
  real worst_margin = 0;
  std::optional<ConditionWitness> witness;  // present on failure
  // Empirical lower-bound constant for the growth conditions that have one.
  real constant_estimate = 0;
};

// Sampled hypothesis check. A failed report is a result, not an error.
ConditionReport check_condition(const NonlinearityModel& m, Index ncells,
                                GrowthCondition cond, Index n_samples,
                                uint64_t seed);

}  // namespace nlmx

#pragma once

#include "nlmx/operators.hpp"
#include "nlmx/types.hpp"

#include <memory>

namespace nlmx {

// Weighted Helmholtz decomposition u = G phi + v against the V-inner
// product: the potential solves the node Laplacian L = G^T M_V G, which makes
// v = u - G phi exactly V-orthogonal to every discrete gradient, i.e.
// div_weighted(v) = 0 up to roundoff.
class HelmholtzProjector {
 public:
  struct Stats {
    Index iterations = 0;  // zero for the direct path
    real residual = 0;     // relative residual of the potential solve
    bool direct = true;
  };
  struct Decomposition {
    NodeField phi;
    EdgeField w;  // gradient part G phi
    EdgeField v;  // V-divergence-free remainder
    Stats stats;
  };

  // Problems with at most direct_limit nodes use a cached Cholesky
  // factorization; larger ones fall back to conjugate gradients with an
  // incomplete Cholesky preconditioner.
  explicit HelmholtzProjector(const DiscreteOperators& ops, real tol = 1e-12,
                              Index direct_limit = 80000);

  [[nodiscard]] Decomposition decompose(const EdgeField& u) const;
  [[nodiscard]] EdgeField project_gradient(const EdgeField& u) const;
  [[nodiscard]] EdgeField project_divfree(const EdgeField& u) const;

  // Solves L x = rhs with the same machinery (also used as an outer
  // preconditioner by the fiber solver).
  [[nodiscard]] NodeField solve_node_laplacian(const EdgeField& covector) const;
  [[nodiscard]] NodeField solve_node_laplacian(const NodeField& rhs,
                                               Stats* stats) const;

  [[nodiscard]] const SpMat& node_laplacian() const { return L_; }
  [[nodiscard]] const DiscreteOperators& ops() const { return *ops_; }
  [[nodiscard]] bool direct() const { return direct_; }

 private:
  const DiscreteOperators* ops_;
  real tol_;
  bool direct_;
  SpMat L_;
  std::shared_ptr<Eigen::SimplicialLDLT<SpMat>> ldlt_;
  mutable Stats last_;
};

}  // namespace nlmx

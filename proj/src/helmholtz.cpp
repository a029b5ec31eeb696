#include "nlmx/helmholtz.hpp"

#include <Eigen/IterativeLinearSolvers>

#include <cmath>

namespace nlmx {

HelmholtzProjector::HelmholtzProjector(const DiscreteOperators& ops, real tol,
                                       Index direct_limit)
    : ops_(&ops), tol_(tol) {
  const SpMat& G = ops.G();
  L_ = SpMat(G.transpose() * ops.M_V() * G);
  L_.makeCompressed();
  direct_ = ops.grid().num_nodes() <= direct_limit;
  if (direct_ && L_.rows() > 0) {
    ldlt_ = std::make_shared<Eigen::SimplicialLDLT<SpMat>>();
    ldlt_->compute(L_);
    if (ldlt_->info() != Eigen::Success) {
      throw solver_error("node Laplacian factorization failed");
    }
  }
}

NodeField HelmholtzProjector::solve_node_laplacian(const NodeField& rhs,
                                                   Stats* stats) const {
  Stats st;
  if (rhs.size() == 0) {
    if (stats) *stats = st;
    return rhs;
  }
  NodeField x;
  if (direct_) {
    x = ldlt_->solve(rhs);
    real denom = rhs.norm();
    st.residual = denom > 0 ? (L_ * x - rhs).norm() / denom : 0;
  } else {
    Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper,
                             Eigen::IncompleteCholesky<real>>
        cg;
    // Cap scaled with the expected Laplacian condition growth per axis.
    auto cap = Index(100 * std::cbrt(double(rhs.size())) * 10);
    cg.setMaxIterations(cap);
    cg.setTolerance(tol_);
    cg.compute(L_);
    x = cg.solve(rhs);
    st.direct = false;
    st.iterations = cg.iterations();
    st.residual = cg.error();
    if (cg.info() != Eigen::Success && cg.error() > 100 * tol_) {
      throw solver_error("potential solve did not converge");
    }
  }
  if (stats) *stats = st;
  last_ = st;
  return x;
}

NodeField HelmholtzProjector::solve_node_laplacian(
    const EdgeField& covector) const {
  return solve_node_laplacian(NodeField(ops_->G().transpose() * covector),
                              nullptr);
}

HelmholtzProjector::Decomposition HelmholtzProjector::decompose(
    const EdgeField& u) const {
  require(u.size() == ops_->grid().num_edges(),
          "field length does not match the grid");
  Decomposition d;
  NodeField rhs = ops_->G().transpose() * (ops_->M_V() * u);
  d.phi = solve_node_laplacian(rhs, &d.stats);
  d.w = ops_->G() * d.phi;
  d.v = u - d.w;
  return d;
}

EdgeField HelmholtzProjector::project_gradient(const EdgeField& u) const {
  return decompose(u).w;
}

EdgeField HelmholtzProjector::project_divfree(const EdgeField& u) const {
  return decompose(u).v;
}

}  // namespace nlmx

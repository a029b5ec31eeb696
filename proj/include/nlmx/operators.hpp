#pragma once

#include "nlmx/grid.hpp"
#include "nlmx/material.hpp"
#include "nlmx/types.hpp"

#include <Eigen/SparseCholesky>

#include <array>
#include <functional>
#include <memory>

namespace nlmx {

// Mimetic first-order operators on the staggered grid, with mass matrices
// weighted by the material tensors. Tangential components on the outer
// boundary and on mask surfaces are eliminated, so curl_grad == 0 holds as an
// exact matrix identity.
class DiscreteOperators {
 public:
  DiscreteOperators(const BoxGrid& grid, const MaterialTensors& mat);

  [[nodiscard]] const BoxGrid& grid() const { return *grid_; }
  [[nodiscard]] const MaterialTensors& material() const { return *mat_; }

  // grad: nodes -> edges, curl: edges -> faces.
  [[nodiscard]] const SpMat& G() const { return G_; }
  [[nodiscard]] const SpMat& C() const { return C_; }
  // Edge mass weighted by V, face mass weighted by mu^{-1}.
  [[nodiscard]] const SpMat& M_V() const { return MV_; }
  [[nodiscard]] const SpMat& M_mu() const { return Mmu_; }
  // Curl-curl stiffness C^T M_mu C.
  [[nodiscard]] const SpMat& A() const { return A_; }
  // Averaging map onto cells for one field component, entries 1/4.
  [[nodiscard]] const SpMat& edge_to_cell(int axis) const {
    return Ad_[size_t(axis)];
  }

  [[nodiscard]] real vol() const { return vol_; }

  [[nodiscard]] real dot_V(const EdgeField& a, const EdgeField& b) const {
    return a.dot(MV_ * b);
  }
  [[nodiscard]] real dot_curl(const EdgeField& a, const EdgeField& b) const {
    return a.dot(A_ * b);
  }

  // Weak divergence of V u, normalized by the nodal control volume. Built
  // from the exact adjoint of G, so it vanishes iff u is V-orthogonal to
  // every discrete gradient.
  [[nodiscard]] NodeField div_weighted(const EdgeField& u) const;

  // M_V^{-1} C^T M_mu psi, the edge representation of the adjoint curl.
  [[nodiscard]] EdgeField curl_adjoint(const FaceField& psi) const;

  // Per-cell average of the field, one row per active cell.
  [[nodiscard]] MatX cell_average(const EdgeField& u) const;
  // Adjoint of cell_average scaled by cell volume: accumulates per-cell
  // covector densities back onto edges.
  [[nodiscard]] EdgeField scatter_cells(const MatX& g) const;

  [[nodiscard]] const Eigen::SimplicialLDLT<SpMat>& MV_solver() const;

 private:
  const BoxGrid* grid_;
  const MaterialTensors* mat_;
  real vol_;
  SpMat G_, C_, MV_, Mmu_, A_;
  std::array<SpMat, 3> Ad_;
  mutable std::shared_ptr<Eigen::SimplicialLDLT<SpMat>> mv_solver_;
};

// Point samples of analytic fields on the staggered lattices. Inactive
// positions are skipped; each edge or face stores its own vector component.
EdgeField sample_edge_field(const BoxGrid& g,
                            const std::function<Vec3(const Vec3&)>& f);
NodeField sample_node_field(const BoxGrid& g,
                            const std::function<real(const Vec3&)>& f);
FaceField sample_face_field(const BoxGrid& g,
                            const std::function<Vec3(const Vec3&)>& f);

}  // namespace nlmx

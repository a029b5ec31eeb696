#include "nlmx/operators.hpp"

#include <vector>

namespace nlmx {

namespace {

void add_entry(std::vector<Triplet>& t, Index row, Index col, real v) {
  if (row >= 0 && col >= 0) t.emplace_back(row, col, v);
}

}  // namespace

DiscreteOperators::DiscreteOperators(const BoxGrid& grid,
                                     const MaterialTensors& mat)
    : grid_(&grid), mat_(&mat), vol_(grid.cell_volume()) {
  mat.validate(grid.num_cells());
  const Index ne = grid.num_edges();
  const Index nn = grid.num_nodes();
  const Index nf = grid.num_faces();
  const Index nc = grid.num_cells();
  const real hx = grid.hx, hy = grid.hy, hz = grid.hz;

  // Gradient rows: difference of endpoint nodes along the edge axis.
  // Boundary nodes carry the homogeneous Dirichlet value zero.
  {
    std::vector<Triplet> t;
    t.reserve(size_t(2 * ne));
    for (const auto& e : grid.edges()) {
      Index row = grid.edge_dof(e.axis, e.i, e.j, e.k);
      real h = grid.spacing(e.axis);
      int di = e.axis == 0, dj = e.axis == 1, dk = e.axis == 2;
      add_entry(t, row, grid.node_dof(e.i + di, e.j + dj, e.k + dk), 1 / h);
      add_entry(t, row, grid.node_dof(e.i, e.j, e.k), -1 / h);
    }
    G_.resize(ne, nn);
    G_.setFromTriplets(t.begin(), t.end());
  }

  // Curl rows: boundary circulation of the face divided by its area.
  // Absent (metallic) edges contribute zero and are simply skipped.
  {
    std::vector<Triplet> t;
    t.reserve(size_t(4 * nf));
    for (const auto& f : grid.faces()) {
      Index row = grid.face_dof(f.axis, f.i, f.j, f.k);
      int i = f.i, j = f.j, k = f.k;
      switch (f.axis) {
        case 0:
          add_entry(t, row, grid.edge_dof(2, i, j + 1, k), 1 / hy);
          add_entry(t, row, grid.edge_dof(2, i, j, k), -1 / hy);
          add_entry(t, row, grid.edge_dof(1, i, j, k + 1), -1 / hz);
          add_entry(t, row, grid.edge_dof(1, i, j, k), 1 / hz);
          break;
        case 1:
          add_entry(t, row, grid.edge_dof(0, i, j, k + 1), 1 / hz);
          add_entry(t, row, grid.edge_dof(0, i, j, k), -1 / hz);
          add_entry(t, row, grid.edge_dof(2, i + 1, j, k), -1 / hx);
          add_entry(t, row, grid.edge_dof(2, i, j, k), 1 / hx);
          break;
        default:
          add_entry(t, row, grid.edge_dof(1, i + 1, j, k), 1 / hx);
          add_entry(t, row, grid.edge_dof(1, i, j, k), -1 / hx);
          add_entry(t, row, grid.edge_dof(0, i, j + 1, k), -1 / hy);
          add_entry(t, row, grid.edge_dof(0, i, j, k), 1 / hy);
          break;
      }
    }
    C_.resize(nf, ne);
    C_.setFromTriplets(t.begin(), t.end());
  }

  // Component averaging onto cells, entries 1/4 per contributing edge.
  // Edges eliminated by the boundary condition hold the value zero, so the
  // divisor stays 4 regardless of how many of them are active.
  {
    std::array<std::vector<Triplet>, 3> t;
    for (const auto& c : grid.cells()) {
      Index ci = grid.cell_id(c.i, c.j, c.k);
      for (int d = 0; d < 3; ++d) {
        for (Index e : c.edge[size_t(d)]) {
          add_entry(t[size_t(d)], ci, e, 0.25);
        }
      }
    }
    for (int d = 0; d < 3; ++d) {
      Ad_[size_t(d)].resize(nc, ne);
      Ad_[size_t(d)].setFromTriplets(t[size_t(d)].begin(), t[size_t(d)].end());
    }
  }

  // Edge mass: lumped diagonal from the V_dd average over the four adjacent
  // cells (all active whenever the edge exists), plus averaged off-diagonal
  // couplings when V is anisotropic.
  {
    VecX diag = VecX::Zero(ne);
    std::vector<Triplet> cross;
    for (const auto& c : grid.cells()) {
      const Mat3& V = mat.V_at(grid.cell_id(c.i, c.j, c.k));
      for (int d = 0; d < 3; ++d) {
        for (Index e : c.edge[size_t(d)]) {
          if (e >= 0) diag[e] += 0.25 * vol_ * V(d, d);
        }
      }
      if (!mat.V_diagonal()) {
        for (int d = 0; d < 3; ++d) {
          for (int dp = 0; dp < 3; ++dp) {
            if (d == dp || V(d, dp) == 0) continue;
            for (Index e : c.edge[size_t(d)]) {
              for (Index ep : c.edge[size_t(dp)]) {
                add_entry(cross, e, ep, 0.0625 * vol_ * V(d, dp));
              }
            }
          }
        }
      }
    }
    std::vector<Triplet> t = std::move(cross);
    for (Index e = 0; e < ne; ++e) t.emplace_back(e, e, diag[e]);
    MV_.resize(ne, ne);
    MV_.setFromTriplets(t.begin(), t.end());
  }

  // Face mass: control volume vol * n_active / 2 with mu^{-1} averaged over
  // the active neighbors, plus off-diagonal couplings for anisotropic mu.
  {
    VecX diag = VecX::Zero(nf);
    std::vector<Triplet> cross;
    for (const auto& c : grid.cells()) {
      const Mat3& mi = mat.mu_inv_at(grid.cell_id(c.i, c.j, c.k));
      for (int a = 0; a < 3; ++a) {
        for (Index f : c.face[size_t(a)]) {
          diag[f] += 0.5 * vol_ * mi(a, a);
        }
      }
      if (!mat.mu_inv_diagonal()) {
        for (int a = 0; a < 3; ++a) {
          for (int ap = 0; ap < 3; ++ap) {
            if (a == ap || mi(a, ap) == 0) continue;
            for (Index f : c.face[size_t(a)]) {
              for (Index fp : c.face[size_t(ap)]) {
                add_entry(cross, f, fp, 0.25 * vol_ * mi(a, ap));
              }
            }
          }
        }
      }
    }
    // diag currently holds vol/2 * sum over active cells; the average over
    // n_active cells times the control volume vol*n_active/2 gives the same
    // sum, so no further scaling is needed.
    std::vector<Triplet> t = std::move(cross);
    for (Index f = 0; f < nf; ++f) t.emplace_back(f, f, diag[f]);
    Mmu_.resize(nf, nf);
    Mmu_.setFromTriplets(t.begin(), t.end());
  }

  A_ = SpMat(C_.transpose() * Mmu_ * C_);
  G_.makeCompressed();
  C_.makeCompressed();
  MV_.makeCompressed();
  Mmu_.makeCompressed();
  A_.makeCompressed();
}

NodeField DiscreteOperators::div_weighted(const EdgeField& u) const {
  return NodeField(-(G_.transpose() * (MV_ * u)) / vol_);
}

EdgeField DiscreteOperators::curl_adjoint(const FaceField& psi) const {
  return MV_solver().solve(C_.transpose() * (Mmu_ * psi));
}

MatX DiscreteOperators::cell_average(const EdgeField& u) const {
  MatX out(grid_->num_cells(), 3);
  for (int d = 0; d < 3; ++d) out.col(d) = Ad_[size_t(d)] * u;
  return out;
}

EdgeField DiscreteOperators::scatter_cells(const MatX& g) const {
  EdgeField out = EdgeField::Zero(grid_->num_edges());
  for (int d = 0; d < 3; ++d) {
    out += Ad_[size_t(d)].transpose() * (vol_ * g.col(d));
  }
  return out;
}

const Eigen::SimplicialLDLT<SpMat>& DiscreteOperators::MV_solver() const {
  if (!mv_solver_) {
    mv_solver_ = std::make_shared<Eigen::SimplicialLDLT<SpMat>>();
    mv_solver_->compute(MV_);
    if (mv_solver_->info() != Eigen::Success) {
      throw solver_error("edge mass factorization failed");
    }
  }
  return *mv_solver_;
}

EdgeField sample_edge_field(const BoxGrid& g,
                            const std::function<Vec3(const Vec3&)>& f) {
  EdgeField u = EdgeField::Zero(g.num_edges());
  for (const auto& e : g.edges()) {
    u[g.edge_dof(e.axis, e.i, e.j, e.k)] = f(e.center)[e.axis];
  }
  return u;
}

NodeField sample_node_field(const BoxGrid& g,
                            const std::function<real(const Vec3&)>& f) {
  NodeField phi = NodeField::Zero(g.num_nodes());
  for (const auto& n : g.nodes()) {
    phi[g.node_dof(n.i, n.j, n.k)] = f(n.center);
  }
  return phi;
}

FaceField sample_face_field(const BoxGrid& g,
                            const std::function<Vec3(const Vec3&)>& f) {
  FaceField psi = FaceField::Zero(g.num_faces());
  for (const auto& fc : g.faces()) {
    psi[g.face_dof(fc.axis, fc.i, fc.j, fc.k)] = f(fc.center)[fc.axis];
  }
  return psi;
}

}  // namespace nlmx

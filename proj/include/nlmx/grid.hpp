#pragma once

#include "nlmx/types.hpp"

#include <array>
#include <functional>
#include <vector>

namespace nlmx {

// Staggered box grid on (0,Lx) x (0,Ly) x (0,Lz) with nx*ny*nz cells.
// Degrees of freedom:
//   edges: tangential edge values, boundary-tangential edges excluded
//          (metallic condition nu x u = 0 holds identically),
//   nodes: interior scalar potential values (zero on the boundary),
//   faces: curl values; faces keep a dof whenever an adjacent cell is active.
// An optional cell mask removes cells; dofs touching a removed cell follow the
// same exclusion rules as the outer boundary, so cut-outs are metallic too.
class BoxGrid {
 public:
  using MaskPredicate = std::function<bool(const Vec3& cell_center)>;

  BoxGrid(int nx, int ny, int nz, real Lx, real Ly, real Lz,
          const MaskPredicate& active = nullptr);

  int nx, ny, nz;
  real Lx, Ly, Lz;
  real hx, hy, hz;

  [[nodiscard]] real cell_volume() const { return hx * hy * hz; }
  [[nodiscard]] real spacing(int axis) const {
    return axis == 0 ? hx : (axis == 1 ? hy : hz);
  }

  // Lattice -> dof maps; -1 marks "not a dof" (value identically zero).
  [[nodiscard]] Index edge_dof(int axis, int i, int j, int k) const;
  [[nodiscard]] Index node_dof(int i, int j, int k) const;
  [[nodiscard]] Index face_dof(int axis, int i, int j, int k) const;
  [[nodiscard]] bool cell_active_at(int i, int j, int k) const;

  [[nodiscard]] Index num_edges() const { return n_edges_; }
  [[nodiscard]] Index num_nodes() const { return n_nodes_; }
  [[nodiscard]] Index num_faces() const { return n_faces_; }
  [[nodiscard]] Index num_cells() const { return Index(cells_.size()); }
  [[nodiscard]] Index num_cells_total() const {
    return Index(nx) * ny * nz;
  }

  struct Dof {
    int axis;  // 0,1,2 for edges/faces; unused (0) for nodes
    int i, j, k;
    Vec3 center;
  };
  struct Cell {
    int i, j, k;
    Vec3 center;
    // Edge dofs of the cell, 4 per axis; -1 entries are zero-valued edges.
    std::array<Index, 4> edge[3];
    // Face dofs, {low, high} per axis.
    std::array<Index, 2> face[3];
  };

  [[nodiscard]] const std::vector<Dof>& edges() const { return edges_; }
  [[nodiscard]] const std::vector<Dof>& nodes() const { return nodes_; }
  [[nodiscard]] const std::vector<Dof>& faces() const { return faces_; }
  [[nodiscard]] const std::vector<Cell>& cells() const { return cells_; }

  // Number of active cells adjacent to a face dof (1 or 2).
  [[nodiscard]] const std::vector<int>& face_cell_count() const {
    return face_ncells_;
  }

  // Active-cell id containing x, or -1 (used for coefficient snapping).
  [[nodiscard]] Index cell_of(const Vec3& x) const;
  // Compressed id of full-lattice cell (i,j,k), or -1.
  [[nodiscard]] Index cell_id(int i, int j, int k) const;

  [[nodiscard]] bool masked() const { return masked_; }
  // Square cross-section with matching spacings (needed by the symmetry ops).
  [[nodiscard]] bool square_xy() const;
  // Mask invariant under the x<->y swap about the box diagonal.
  [[nodiscard]] bool mask_xy_symmetric() const;

 private:
  bool masked_ = false;
  Index n_edges_ = 0, n_nodes_ = 0, n_faces_ = 0;
  std::array<std::vector<Index>, 3> edge_map_;
  std::vector<Index> node_map_;
  std::array<std::vector<Index>, 3> face_map_;
  std::vector<Index> cell_map_;
  std::vector<uint8_t> active_;
  std::vector<Dof> edges_, nodes_, faces_;
  std::vector<Cell> cells_;
  std::vector<int> face_ncells_;
};

// Common mask shapes. Predicates return true where cells stay active.
BoxGrid::MaskPredicate mask_box_cut(const Vec3& lo, const Vec3& hi);
BoxGrid::MaskPredicate mask_ball_cut(const Vec3& center, real radius);
BoxGrid::MaskPredicate mask_keep_shell(const Vec3& center, real r0, real r1);
BoxGrid::MaskPredicate mask_keep_cylinder(const Vec3& axis_point, real radius);

}  // namespace nlmx

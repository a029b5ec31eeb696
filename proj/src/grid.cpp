#include "nlmx/grid.hpp"

#include <cmath>

namespace nlmx {

namespace {
inline Index lin(int i, int j, int k, int ni, int nj) {
  return (Index(k) * nj + j) * ni + i;
}
}  // namespace

BoxGrid::BoxGrid(int nx_, int ny_, int nz_, real Lx_, real Ly_, real Lz_,
                 const MaskPredicate& active)
    : nx(nx_), ny(ny_), nz(nz_), Lx(Lx_), Ly(Ly_), Lz(Lz_) {
  require(nx >= 2 && ny >= 2 && nz >= 2, "grid: need at least 2 cells per axis");
  require(Lx > 0 && Ly > 0 && Lz > 0, "grid: extents must be positive");
  hx = Lx / nx;
  hy = Ly / ny;
  hz = Lz / nz;

  active_.assign(size_t(num_cells_total()), 1);
  if (active) {
    masked_ = true;
    for (int k = 0; k < nz; ++k)
      for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
          Vec3 c((i + 0.5) * hx, (j + 0.5) * hy, (k + 0.5) * hz);
          active_[size_t(lin(i, j, k, nx, ny))] = active(c) ? 1 : 0;
        }
  }

  // Cells.
  cell_map_.assign(size_t(num_cells_total()), -1);
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        if (!active_[size_t(lin(i, j, k, nx, ny))]) continue;
        cell_map_[size_t(lin(i, j, k, nx, ny))] = Index(cells_.size());
        Cell c;
        c.i = i;
        c.j = j;
        c.k = k;
        c.center = Vec3((i + 0.5) * hx, (j + 0.5) * hy, (k + 0.5) * hz);
        cells_.push_back(c);
      }
  require(!cells_.empty(), "grid: mask removed every cell");

  auto cell_ok = [&](int i, int j, int k) {
    if (i < 0 || j < 0 || k < 0 || i >= nx || j >= ny || k >= nz) return false;
    return active_[size_t(lin(i, j, k, nx, ny))] != 0;
  };

  // Edge dofs: an edge is kept iff all four touching cells are active (the
  // outer boundary and mask surfaces both act as metallic walls).
  const int exn[3] = {nx, nx - 1, nx - 1};
  const int eyn[3] = {ny - 1, ny, ny - 1};
  const int ezn[3] = {nz - 1, nz - 1, nz};
  for (int a = 0; a < 3; ++a)
    edge_map_[a].assign(size_t(exn[a]) * eyn[a] * ezn[a], -1);
  auto edge_cells = [&](int a, int i, int j, int k,
                        std::array<std::array<int, 3>, 4>& out) {
    if (a == 0) {
      out = {{{i, j - 1, k - 1}, {i, j, k - 1}, {i, j - 1, k}, {i, j, k}}};
    } else if (a == 1) {
      out = {{{i - 1, j, k - 1}, {i, j, k - 1}, {i - 1, j, k}, {i, j, k}}};
    } else {
      out = {{{i - 1, j - 1, k}, {i, j - 1, k}, {i - 1, j, k}, {i, j, k}}};
    }
  };
  auto edge_lattice = [&](int a, int i, int j, int k) {
    int ii = (a == 0) ? i : i - 1;
    int jj = (a == 1) ? j : j - 1;
    int kk = (a == 2) ? k : k - 1;
    return lin(ii, jj, kk, exn[a], eyn[a]);
  };
  const int elo[3][3] = {{0, 1, 1}, {1, 0, 1}, {1, 1, 0}};
  const int ehi[3][3] = {{nx, ny, nz}, {nx, ny, nz}, {nx, ny, nz}};
  for (int a = 0; a < 3; ++a) {
    int ihi = (a == 0) ? nx : nx;  // exclusive bounds below
    (void)ihi;
    for (int k = elo[a][2]; k < ((a == 2) ? ehi[a][2] : nz); ++k)
      for (int j = elo[a][1]; j < ((a == 1) ? ehi[a][1] : ny); ++j)
        for (int i = elo[a][0]; i < ((a == 0) ? ehi[a][0] : nx); ++i) {
          std::array<std::array<int, 3>, 4> cs;
          edge_cells(a, i, j, k, cs);
          bool ok = true;
          for (auto& c : cs) ok = ok && cell_ok(c[0], c[1], c[2]);
          if (!ok) continue;
          edge_map_[a][size_t(edge_lattice(a, i, j, k))] = n_edges_++;
          Dof d;
          d.axis = a;
          d.i = i;
          d.j = j;
          d.k = k;
          d.center = Vec3((i + (a == 0 ? 0.5 : 0.0)) * hx,
                          (j + (a == 1 ? 0.5 : 0.0)) * hy,
                          (k + (a == 2 ? 0.5 : 0.0)) * hz);
          edges_.push_back(d);
        }
  }

  // Node dofs: kept iff all eight touching cells are active.
  node_map_.assign(size_t(nx - 1) * (ny - 1) * (nz - 1), -1);
  for (int k = 1; k < nz; ++k)
    for (int j = 1; j < ny; ++j)
      for (int i = 1; i < nx; ++i) {
        bool ok = true;
        for (int dk = -1; dk <= 0 && ok; ++dk)
          for (int dj = -1; dj <= 0 && ok; ++dj)
            for (int di = -1; di <= 0 && ok; ++di)
              ok = cell_ok(i + di, j + dj, k + dk);
        if (!ok) continue;
        node_map_[size_t(lin(i - 1, j - 1, k - 1, nx - 1, ny - 1))] = n_nodes_++;
        Dof d;
        d.axis = 0;
        d.i = i;
        d.j = j;
        d.k = k;
        d.center = Vec3(i * hx, j * hy, k * hz);
        nodes_.push_back(d);
      }

  // Face dofs: kept iff at least one adjacent cell is active.
  const int fxn[3] = {nx + 1, nx, nx};
  const int fyn[3] = {ny, ny + 1, ny};
  const int fzn[3] = {nz, nz, nz + 1};
  for (int a = 0; a < 3; ++a)
    face_map_[a].assign(size_t(fxn[a]) * fyn[a] * fzn[a], -1);
  for (int a = 0; a < 3; ++a) {
    for (int k = 0; k < fzn[a]; ++k)
      for (int j = 0; j < fyn[a]; ++j)
        for (int i = 0; i < fxn[a]; ++i) {
          int count = 0;
          if (a == 0)
            count = cell_ok(i - 1, j, k) + cell_ok(i, j, k);
          else if (a == 1)
            count = cell_ok(i, j - 1, k) + cell_ok(i, j, k);
          else
            count = cell_ok(i, j, k - 1) + cell_ok(i, j, k);
          if (count == 0) continue;
          face_map_[a][size_t(lin(i, j, k, fxn[a], fyn[a]))] = n_faces_++;
          Dof d;
          d.axis = a;
          d.i = i;
          d.j = j;
          d.k = k;
          d.center = Vec3((i + (a == 0 ? 0.0 : 0.5)) * hx,
                          (j + (a == 1 ? 0.0 : 0.5)) * hy,
                          (k + (a == 2 ? 0.0 : 0.5)) * hz);
          faces_.push_back(d);
          face_ncells_.push_back(count);
        }
  }

  // Cell connectivity for assembly and quadrature.
  for (auto& c : cells_) {
    int i = c.i, j = c.j, k = c.k;
    c.edge[0] = {edge_dof(0, i, j, k), edge_dof(0, i, j + 1, k),
                 edge_dof(0, i, j, k + 1), edge_dof(0, i, j + 1, k + 1)};
    c.edge[1] = {edge_dof(1, i, j, k), edge_dof(1, i + 1, j, k),
                 edge_dof(1, i, j, k + 1), edge_dof(1, i + 1, j, k + 1)};
    c.edge[2] = {edge_dof(2, i, j, k), edge_dof(2, i + 1, j, k),
                 edge_dof(2, i, j + 1, k), edge_dof(2, i + 1, j + 1, k)};
    c.face[0] = {face_dof(0, i, j, k), face_dof(0, i + 1, j, k)};
    c.face[1] = {face_dof(1, i, j, k), face_dof(1, i, j + 1, k)};
    c.face[2] = {face_dof(2, i, j, k), face_dof(2, i, j, k + 1)};
  }
}

Index BoxGrid::edge_dof(int axis, int i, int j, int k) const {
  const int ni = (axis == 0) ? nx : nx - 1;
  const int nj = (axis == 1) ? ny : ny - 1;
  const int nk = (axis == 2) ? nz : nz - 1;
  int ii = (axis == 0) ? i : i - 1;
  int jj = (axis == 1) ? j : j - 1;
  int kk = (axis == 2) ? k : k - 1;
  if (ii < 0 || jj < 0 || kk < 0 || ii >= ni || jj >= nj || kk >= nk) return -1;
  return edge_map_[size_t(axis)][size_t(lin(ii, jj, kk, ni, nj))];
}

Index BoxGrid::node_dof(int i, int j, int k) const {
  if (i < 1 || j < 1 || k < 1 || i >= nx || j >= ny || k >= nz) return -1;
  return node_map_[size_t(lin(i - 1, j - 1, k - 1, nx - 1, ny - 1))];
}

Index BoxGrid::face_dof(int axis, int i, int j, int k) const {
  const int ni = (axis == 0) ? nx + 1 : nx;
  const int nj = (axis == 1) ? ny + 1 : ny;
  const int nk = (axis == 2) ? nz + 1 : nz;
  if (i < 0 || j < 0 || k < 0 || i >= ni || j >= nj || k >= nk) return -1;
  return face_map_[size_t(axis)][size_t(lin(i, j, k, ni, nj))];
}

bool BoxGrid::cell_active_at(int i, int j, int k) const {
  if (i < 0 || j < 0 || k < 0 || i >= nx || j >= ny || k >= nz) return false;
  return active_[size_t(lin(i, j, k, nx, ny))] != 0;
}

Index BoxGrid::cell_id(int i, int j, int k) const {
  if (i < 0 || j < 0 || k < 0 || i >= nx || j >= ny || k >= nz) return -1;
  return cell_map_[size_t(lin(i, j, k, nx, ny))];
}

Index BoxGrid::cell_of(const Vec3& x) const {
  int i = int(std::floor(x[0] / hx));
  int j = int(std::floor(x[1] / hy));
  int k = int(std::floor(x[2] / hz));
  i = std::min(std::max(i, 0), nx - 1);
  j = std::min(std::max(j, 0), ny - 1);
  k = std::min(std::max(k, 0), nz - 1);
  return cell_id(i, j, k);
}

bool BoxGrid::square_xy() const {
  return nx == ny && std::abs(hx - hy) <= 1e-14 * (hx + hy);
}

bool BoxGrid::mask_xy_symmetric() const {
  if (!masked_) return true;
  if (nx != ny) return false;
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        if (cell_active_at(i, j, k) != cell_active_at(j, i, k)) return false;
  return true;
}

BoxGrid::MaskPredicate mask_box_cut(const Vec3& lo, const Vec3& hi) {
  return [=](const Vec3& c) {
    bool inside = c[0] > lo[0] && c[0] < hi[0] && c[1] > lo[1] &&
                  c[1] < hi[1] && c[2] > lo[2] && c[2] < hi[2];
    return !inside;
  };
}

BoxGrid::MaskPredicate mask_ball_cut(const Vec3& center, real radius) {
  return [=](const Vec3& c) { return (c - center).norm() > radius; };
}

BoxGrid::MaskPredicate mask_keep_shell(const Vec3& center, real r0, real r1) {
  return [=](const Vec3& c) {
    real r = (c - center).norm();
    return r > r0 && r < r1;
  };
}

BoxGrid::MaskPredicate mask_keep_cylinder(const Vec3& axis_point, real radius) {
  return [=](const Vec3& c) {
    real dx = c[0] - axis_point[0], dy = c[1] - axis_point[1];
    return std::sqrt(dx * dx + dy * dy) < radius;
  };
}

}  // namespace nlmx

#include "nlmx/symmetry.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>

namespace nlmx {

namespace {

constexpr real kHalfPi = 1.5707963267948966;
constexpr real kTwoPi = 6.283185307179586;

void require_square(const BoxGrid& g) {
  if (!g.square_xy()) {
    throw symmetry_error(
        "this operation needs a square x-y cross-section with matching "
        "spacings");
  }
}

real at(const BoxGrid& g, const EdgeField& u, int axis, int i, int j, int k) {
  Index d = g.edge_dof(axis, i, j, k);
  return d >= 0 ? u[d] : real(0);
}

}  // namespace

CylGrid::CylGrid(int nr_, int nz_, real R_, real L_)
    : nr(nr_), nz(nz_), R(R_), L(L_) {
  require(nr >= 2 && nz >= 2, "cylindrical grid needs at least 2x2 cells");
  require(R > 0 && L > 0, "cylindrical grid needs positive extents");
  hr = R / nr;
  hz = L / nz;
}

CylField CylField::zeros(const CylGrid& g) {
  CylField f;
  f.alpha = VecX::Zero(g.num_nodes());
  f.beta = VecX::Zero(g.num_nodes());
  f.gamma = VecX::Zero(g.num_nodes());
  return f;
}

CylGrid inscribed_cylinder(const BoxGrid& g, int nr, int nz) {
  require_square(g);
  if (nr <= 0) nr = std::max(2, g.nx / 2);
  if (nz <= 0) nz = g.nz;
  return CylGrid(nr, nz, g.Lx / 2, g.Lz);
}

EdgeField reflect_xy(const BoxGrid& g, const EdgeField& u) {
  require_square(g);
  require(u.size() == g.num_edges(), "field size mismatch");
  EdgeField out(u.size());
  const auto& dofs = g.edges();
  for (Index e = 0; e < Index(dofs.size()); ++e) {
    const auto& d = dofs[size_t(e)];
    if (d.axis == 0) {
      out[e] = at(g, u, 1, d.j, d.i, d.k);
    } else if (d.axis == 1) {
      out[e] = at(g, u, 0, d.j, d.i, d.k);
    } else {
      out[e] = at(g, u, 2, d.j, d.i, d.k);
    }
  }
  return out;
}

EdgeField rotate_quarter(const BoxGrid& g, const EdgeField& u,
                         int quarter_turns) {
  require_square(g);
  require(u.size() == g.num_edges(), "field size mismatch");
  int q = ((quarter_turns % 4) + 4) % 4;
  EdgeField cur = u;
  const int n = g.nx;
  const auto& dofs = g.edges();
  for (int step = 0; step < q; ++step) {
    EdgeField out(cur.size());
    for (Index e = 0; e < Index(dofs.size()); ++e) {
      const auto& d = dofs[size_t(e)];
      if (d.axis == 0) {
        out[e] = -at(g, cur, 1, d.j, n - 1 - d.i, d.k);
      } else if (d.axis == 1) {
        out[e] = at(g, cur, 0, d.j, n - d.i, d.k);
      } else {
        out[e] = at(g, cur, 2, d.j, n - d.i, d.k);
      }
    }
    cur = std::move(out);
  }
  return cur;
}

EdgeField mirror_z(const BoxGrid& g, const EdgeField& u) {
  require(u.size() == g.num_edges(), "field size mismatch");
  EdgeField out(u.size());
  const auto& dofs = g.edges();
  for (Index e = 0; e < Index(dofs.size()); ++e) {
    const auto& d = dofs[size_t(e)];
    if (d.axis == 2) {
      out[e] = -at(g, u, 2, d.i, d.j, g.nz - 1 - d.k);
    } else {
      out[e] = at(g, u, d.axis, d.i, d.j, g.nz - d.k);
    }
  }
  return out;
}

EdgeField s1_apply(const BoxGrid& g, const EdgeField& u) {
  return -reflect_xy(g, u);
}

EdgeField s2_apply(const BoxGrid& g, const EdgeField& u) {
  return reflect_xy(g, u);
}

EdgeField s1_project(const BoxGrid& g, const EdgeField& u) {
  return 0.5 * (u + s1_apply(g, u));
}

EdgeField s2_project(const BoxGrid& g, const EdgeField& u) {
  return 0.5 * (u + s2_apply(g, u));
}

real sample_edge_component(const BoxGrid& g, const EdgeField& u, int axis,
                           const Vec3& p) {
  const real h[3] = {g.hx, g.hy, g.hz};
  int base[3];
  real w[3];
  for (int d = 0; d < 3; ++d) {
    real xi = p[d] / h[d] - (d == axis ? 0.5 : 0.0);
    real fl = std::floor(xi);
    base[d] = int(fl);
    w[d] = xi - fl;
  }
  real acc = 0;
  for (int corner = 0; corner < 8; ++corner) {
    int idx[3];
    real weight = 1;
    for (int d = 0; d < 3; ++d) {
      int bit = (corner >> d) & 1;
      idx[d] = base[d] + bit;
      weight *= bit ? w[d] : (1 - w[d]);
    }
    if (weight == 0) continue;
    Index dof = g.edge_dof(axis, idx[0], idx[1], idx[2]);
    if (dof >= 0) acc += weight * u[dof];
  }
  return acc;
}

Vec3 sample_edge_vector(const BoxGrid& g, const EdgeField& u, const Vec3& p) {
  return Vec3(sample_edge_component(g, u, 0, p),
              sample_edge_component(g, u, 1, p),
              sample_edge_component(g, u, 2, p));
}

EdgeField rotate_field(const BoxGrid& g, const EdgeField& u, real angle) {
  require_square(g);
  require(u.size() == g.num_edges(), "field size mismatch");
  real turns = angle / kHalfPi;
  real nearest = std::round(turns);
  if (std::abs(turns - nearest) < 1e-9) {
    return rotate_quarter(g, u, int(nearest));
  }
  const real c = std::cos(angle), s = std::sin(angle);
  const real cx = g.Lx / 2, cy = g.Ly / 2;
  EdgeField out(u.size());
  const auto& dofs = g.edges();
  for (Index e = 0; e < Index(dofs.size()); ++e) {
    const auto& d = dofs[size_t(e)];
    const real dx = d.center.x() - cx, dy = d.center.y() - cy;
    // Pull back through the inverse rotation, then rotate the sampled vector.
    Vec3 p(cx + c * dx + s * dy, cy - s * dx + c * dy, d.center.z());
    Vec3 v = sample_edge_vector(g, u, p);
    if (d.axis == 0) {
      out[e] = c * v.x() - s * v.y();
    } else if (d.axis == 1) {
      out[e] = s * v.x() + c * v.y();
    } else {
      out[e] = v.z();
    }
  }
  return out;
}

EdgeField group_average(const BoxGrid& g, const EdgeField& u, int n_angles) {
  require(n_angles >= 1, "group average needs at least one angle");
  EdgeField acc = EdgeField::Zero(u.size());
  for (int k = 0; k < n_angles; ++k) {
    acc += rotate_field(g, u, kTwoPi * k / n_angles);
  }
  return acc / n_angles;
}

CylBasis::CylBasis(const DiscreteOperators& ops, const CylGrid& cyl)
    : ops_(&ops), cyl_(cyl) {
  const BoxGrid& g = ops.grid();
  require(cyl_.R <= std::min(g.Lx, g.Ly) / 2 + 1e-9 * cyl_.R,
          "cylinder radius exceeds the inscribed radius of the box");
  require(std::abs(cyl_.L - g.Lz) <= 1e-9 * g.Lz,
          "cylinder height must match the box height");

  const int nr = cyl_.nr, nz = cyl_.nz;
  n_alpha_ = Index(nr) * (nz - 1);
  n_beta_ = n_alpha_;
  // gamma lives on the cell-centered z lattice (j at z = (j + 1/2) hz):
  // vertical edges sit at half-integer heights, so node-based layers would
  // leave the alternating mode gamma_j = (-1)^j invisible (a rank defect of
  // the lift); the staggered layers parametrize the same span bijectively.
  n_gamma_ = Index(nr) * nz;
  auto col_alpha = [&](int i, int j) { return Index(j - 1) * nr + i; };
  auto col_beta = [&](int i, int j) {
    return n_alpha_ + Index(j - 1) * nr + i;
  };
  auto col_gamma = [&](int i, int j) {
    return n_alpha_ + n_beta_ + Index(j) * nr + i;
  };

  const real cx = g.Lx / 2, cy = g.Ly / 2;
  std::vector<Triplet> trips;
  trips.reserve(size_t(g.num_edges()) * 8);
  const auto& dofs = g.edges();
  for (Index e = 0; e < Index(dofs.size()); ++e) {
    const auto& d = dofs[size_t(e)];
    const real dx = d.center.x() - cx, dy = d.center.y() - cy;
    const real r = std::hypot(dx, dy);
    if (r >= cyl_.R) continue;
    // Radial interpolation stencils. Inside the first half cell the even
    // extension clamps to node 0; past the last node, alpha and gamma taper
    // linearly to zero at r = R (odd ghost) while beta stays constant (free).
    struct Entry {
      int i;
      real w;
    };
    Entry dir[2];
    Entry free_dir[2];
    int n_dir = 0, n_free = 0;
    {
      real xi = r / cyl_.hr - 0.5;
      real fl = std::floor(xi);
      int i0 = int(fl);
      real w = xi - fl;
      if (i0 < 0) {
        dir[0] = {0, 1.0};
        n_dir = 1;
        free_dir[0] = {0, 1.0};
        n_free = 1;
      } else if (i0 >= nr - 1) {
        dir[0] = {nr - 1, 1 - 2 * w};
        n_dir = 1;
        free_dir[0] = {nr - 1, 1.0};
        n_free = 1;
      } else {
        dir[0] = {i0, 1 - w};
        dir[1] = {i0 + 1, w};
        n_dir = 2;
        free_dir[0] = dir[0];
        free_dir[1] = dir[1];
        n_free = 2;
      }
    }
    if (d.axis == 2) {
      Entry zs[2];  // .i holds the staggered z layer index here
      {
        real eta = d.center.z() / cyl_.hz - 0.5;
        int j0 = std::clamp(int(std::floor(eta)), 0, nz - 2);
        real w = std::clamp(eta - j0, real(0), real(1));
        zs[0] = {j0, 1 - w};
        zs[1] = {j0 + 1, w};
      }
      for (int a = 0; a < n_dir; ++a)
        for (auto& z : zs) {
          real cw = dir[a].w * z.w;
          if (cw != 0) trips.emplace_back(e, col_gamma(dir[a].i, z.i), cw);
        }
    } else {
      Entry zs[2];  // .i holds the z node index here
      {
        real eta = d.center.z() / cyl_.hz;
        real fl = std::floor(eta);
        int j0 = std::clamp(int(fl), 0, nz - 1);
        real w = eta - j0;
        zs[0] = {j0, 1 - w};
        zs[1] = {j0 + 1, w};
      }
      const real wa = (d.axis == 0) ? -dy : dx;  // azimuthal basis component
      const real wb = (d.axis == 0) ? dx : dy;   // radial basis component
      for (auto& z : zs) {
        if (z.i < 1 || z.i > nz - 1) continue;  // metallic z-walls
        for (int a = 0; a < n_dir; ++a) {
          real cw = wa * dir[a].w * z.w;
          if (cw != 0) trips.emplace_back(e, col_alpha(dir[a].i, z.i), cw);
        }
        for (int a = 0; a < n_free; ++a) {
          real cw = wb * free_dir[a].w * z.w;
          if (cw != 0) trips.emplace_back(e, col_beta(free_dir[a].i, z.i), cw);
        }
      }
    }
  }
  B_.resize(g.num_edges(), n_alpha_ + n_beta_ + n_gamma_);
  B_.setFromTriplets(trips.begin(), trips.end());
  B_.makeCompressed();

  gram_ = SpMat(B_.transpose() * ops.M_V() * B_);
  // Columns without support (masked regions, wall-adjacent corners) get a
  // unit diagonal so the factorization stays definite; their coefficients
  // solve to zero because the corresponding right-hand sides vanish.
  VecX diag = gram_.diagonal();
  real dmax = diag.size() > 0 ? diag.maxCoeff() : real(1);
  std::vector<Triplet> fix;
  for (Index c = 0; c < diag.size(); ++c) {
    if (diag[c] <= 1e-13 * dmax) fix.emplace_back(c, c, dmax);
  }
  if (!fix.empty()) {
    SpMat add(gram_.rows(), gram_.cols());
    add.setFromTriplets(fix.begin(), fix.end());
    gram_ = SpMat(gram_ + add);
  }
  gram_.makeCompressed();
  solver_ = std::make_shared<Eigen::SimplicialLDLT<SpMat>>();
  solver_->compute(gram_);
  if (solver_->info() != Eigen::Success) {
    throw solver_error("cylindrical basis Gram factorization failed");
  }
}

VecX CylBasis::pack(const CylField& f) const {
  const int nr = cyl_.nr, nz = cyl_.nz;
  require(f.alpha.size() == cyl_.num_nodes() &&
              f.beta.size() == cyl_.num_nodes() &&
              f.gamma.size() == cyl_.num_nodes(),
          "cylindrical field size mismatch");
  VecX c = VecX::Zero(num_coeffs());
  Index pos = 0;
  for (int j = 1; j <= nz - 1; ++j)
    for (int i = 0; i < nr; ++i) c[pos++] = f.alpha[cyl_.node(i, j)];
  for (int j = 1; j <= nz - 1; ++j)
    for (int i = 0; i < nr; ++i) c[pos++] = f.beta[cyl_.node(i, j)];
  // gamma entries are staggered: slot (i, j) holds gamma at z = (j + 1/2) hz
  // for j in [0, nz); the top node layer of the array is unused.
  for (int j = 0; j < nz; ++j)
    for (int i = 0; i < nr; ++i) c[pos++] = f.gamma[cyl_.node(i, j)];
  return c;
}

CylField CylBasis::unpack(const VecX& c) const {
  require(c.size() == num_coeffs(), "coefficient size mismatch");
  const int nr = cyl_.nr, nz = cyl_.nz;
  CylField f = CylField::zeros(cyl_);
  Index pos = 0;
  for (int j = 1; j <= nz - 1; ++j)
    for (int i = 0; i < nr; ++i) f.alpha[cyl_.node(i, j)] = c[pos++];
  for (int j = 1; j <= nz - 1; ++j)
    for (int i = 0; i < nr; ++i) f.beta[cyl_.node(i, j)] = c[pos++];
  for (int j = 0; j < nz; ++j)
    for (int i = 0; i < nr; ++i) f.gamma[cyl_.node(i, j)] = c[pos++];
  return f;
}

EdgeField CylBasis::lift(const CylField& f) const { return B_ * pack(f); }

CylField CylBasis::extract(const EdgeField& u) const {
  require(u.size() == ops_->grid().num_edges(), "field size mismatch");
  VecX rhs = B_.transpose() * (ops_->M_V() * u);
  return unpack(solver_->solve(rhs));
}

EdgeField CylBasis::project(const EdgeField& u) const {
  require(u.size() == ops_->grid().num_edges(), "field size mismatch");
  VecX rhs = B_.transpose() * (ops_->M_V() * u);
  return B_ * solver_->solve(rhs);
}

real CylBasis::subspace_distance(const EdgeField& u) const {
  real nu = ops_->dot_V(u, u);
  if (!(nu > 0)) return 0;
  EdgeField d = u - project(u);
  return std::sqrt(std::max<real>(0, ops_->dot_V(d, d) / nu));
}

CylField split_tau_rho_zeta(const CylBasis& basis, const EdgeField& u,
                            real equi_tol) {
  real defect = basis.subspace_distance(u);
  if (defect > equi_tol) {
    throw symmetry_error(
        "input is not rotationally equivariant: relative defect " +
        std::to_string(defect) + " exceeds tolerance " +
        std::to_string(equi_tol));
  }
  return basis.extract(u);
}

EdgeField reconstruct(const CylBasis& basis, const CylField& f) {
  return basis.lift(f);
}

SymmetryReport symmetry_report(const CylBasis& basis, const EdgeField& u,
                               int n_angles) {
  const DiscreteOperators& ops = basis.ops();
  const BoxGrid& g = ops.grid();
  SymmetryReport rep;
  real nu2 = ops.dot_V(u, u);
  if (!(nu2 > 0)) return rep;
  real nu = std::sqrt(nu2);

  EdgeField r90 = rotate_quarter(g, u, 1);
  real rot_defect = std::sqrt(std::max<real>(
      0, ops.dot_V(EdgeField(u - r90), EdgeField(u - r90)))) / nu;
  rep.equivariance_defect = std::max(rot_defect, basis.subspace_distance(u));

  EdgeField avg = group_average(g, u, n_angles);
  EdgeField da = u - avg;
  rep.rotation_average_defect =
      std::sqrt(std::max<real>(0, ops.dot_V(da, da))) / nu;

  CylField f = basis.extract(u);
  CylField ft = f, fr = f, fz = f;
  ft.beta.setZero();
  ft.gamma.setZero();
  fr.alpha.setZero();
  fr.gamma.setZero();
  fz.alpha.setZero();
  fz.beta.setZero();
  EdgeField ut = basis.lift(ft), ur = basis.lift(fr), uz = basis.lift(fz);
  EdgeField proj = ut + ur + uz;
  real denom = ops.dot_V(proj, proj);
  if (denom > 0) {
    rep.tau_fraction = ops.dot_V(ut, ut) / denom;
    rep.rho_fraction = ops.dot_V(ur, ur) / denom;
    rep.zeta_fraction = ops.dot_V(uz, uz) / denom;
  }

  EdgeField m = mirror_z(g, u);
  EdgeField dm = u - m, dp = u + m;
  rep.mirror_defect =
      std::min(std::sqrt(std::max<real>(0, ops.dot_V(dm, dm))),
               std::sqrt(std::max<real>(0, ops.dot_V(dp, dp)))) /
      nu;
  return rep;
}

EvennessReport check_even_samples(
    const std::function<real(Index, const Vec3&)>& F, Index ncells,
    Index n_samples, uint64_t seed) {
  require(ncells > 0 && n_samples > 0, "evenness check needs samples");
  std::mt19937_64 rng(seed);
  std::normal_distribution<real> nd;
  std::uniform_int_distribution<Index> cell(0, ncells - 1);
  std::uniform_real_distribution<real> mag(-2.0, 2.0);
  EvennessReport rep;
  for (Index s = 0; s < n_samples; ++s) {
    Index c = cell(rng);
    Vec3 u(nd(rng), nd(rng), nd(rng));
    u *= std::pow(10.0, mag(rng));
    real fp = F(c, u);
    real fm = F(c, -u);
    real defect = std::abs(fp - fm) / (1 + std::abs(fp));
    rep.worst = std::max(rep.worst, defect);
  }
  rep.even = rep.worst <= 1e-12;
  return rep;
}

EvennessReport check_model_even(const NonlinearityModel& m, Index ncells,
                                Index n_samples, uint64_t seed) {
  return check_even_samples(
      [&](Index c, const Vec3& u) { return eval_F(m, c, u); }, ncells,
      n_samples, seed);
}

}  // namespace nlmx

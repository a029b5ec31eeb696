#pragma once

#include "nlmx/material.hpp"
#include "nlmx/operators.hpp"
#include "nlmx/types.hpp"

#include <Eigen/SparseCholesky>

#include <functional>
#include <memory>
#include <vector>

namespace nlmx {

// Half-plane (r, z) grid for fields with rotational symmetry about the box
// axis. Radial samples sit at r = (i + 1/2) hr so no node touches the
// coordinate singularity at r = 0; z samples are plain nodes including both
// walls.
struct CylGrid {
  int nr = 0, nz = 0;
  real R = 0, L = 0, hr = 0, hz = 0;

  CylGrid(int nr_, int nz_, real R_, real L_);

  [[nodiscard]] Index num_nodes() const { return Index(nr) * (nz + 1); }
  [[nodiscard]] Index node(int i, int j) const { return Index(j) * nr + i; }
  [[nodiscard]] real r_at(int i) const { return (real(i) + 0.5) * hr; }
  [[nodiscard]] real z_at(int j) const { return real(j) * hz; }
};

// Scalar profiles of the rotationally symmetric ansatz
//   u = alpha (-y', x', 0) + beta (x', y', 0) + gamma (0, 0, 1),
// where (x', y') are offsets from the box axis. alpha and beta vanish on the
// z-walls and alpha, gamma vanish at r = R (tangential-trace condition);
// those lattice entries are stored but pinned to zero by the operations.
// alpha and beta sample at the z nodes j*hz. gamma is staggered: slot (i, j)
// holds the value at z = (j + 1/2) hz for j in [0, nz), matching the vertical
// edge heights (node-based layers would make the alternating-in-j mode
// invisible to the lift); the top node layer of the array is unused.
struct CylField {
  VecX alpha, beta, gamma;

  static CylField zeros(const CylGrid& g);
};

// Largest rotation-invariant grid aligned with a square-section box:
// R = Lx/2, matching z extent. Defaults: nr = nx/2, nz = nz(box).
CylGrid inscribed_cylinder(const BoxGrid& g, int nr = 0, int nz = 0);

// ---------------------------------------------------------------------------
// Exact lattice isometries. These permute edge dofs (with signs), so algebraic
// identities (involution, energy invariance for conforming materials) hold to
// roundoff, not to discretization error. All require a square x-y section.
// ---------------------------------------------------------------------------

// (x, y) -> (y, x) pullback with component swap. Realizes S2 on fields that
// are rotationally equivariant; an exact isometry of all assembled forms
// whenever the materials depend on (r, z) only.
EdgeField reflect_xy(const BoxGrid& g, const EdgeField& u);

// Rotation about the box axis by quarter_turns * 90 degrees.
EdgeField rotate_quarter(const BoxGrid& g, const EdgeField& u,
                         int quarter_turns);

// z -> Lz - z pullback (the z component flips sign).
EdgeField mirror_z(const BoxGrid& g, const EdgeField& u);

// S1 = -reflect, S2 = +reflect: on equivariant fields these fix the
// azimuthal (tau) part respectively the meridional (rho/zeta) part.
EdgeField s1_apply(const BoxGrid& g, const EdgeField& u);
EdgeField s2_apply(const BoxGrid& g, const EdgeField& u);
// Fixed-point projectors (id + S)/2; they sum to the identity.
EdgeField s1_project(const BoxGrid& g, const EdgeField& u);
EdgeField s2_project(const BoxGrid& g, const EdgeField& u);

// ---------------------------------------------------------------------------
// Interpolation and the rotation group action.
// ---------------------------------------------------------------------------

// Trilinear interpolation of one vector component from its staggered edge
// sublattice. Points outside the box, or stencil entries eliminated by the
// metallic condition or a mask, contribute zero.
real sample_edge_component(const BoxGrid& g, const EdgeField& u, int axis,
                           const Vec3& p);
Vec3 sample_edge_vector(const BoxGrid& g, const EdgeField& u, const Vec3& p);

// (g * u)(x) = R u(R^{-1} x) for the rotation by `angle` about the box axis.
// Quarter-turn angles take the exact lattice path; other angles interpolate.
EdgeField rotate_field(const BoxGrid& g, const EdgeField& u, real angle);

// Average of rotate_field over n_angles equispaced angles. Idempotent to
// roundoff when every angle is a quarter turn (n_angles in {1, 2, 4});
// otherwise repeated application drifts by the interpolation error O(h^2).
EdgeField group_average(const BoxGrid& g, const EdgeField& u,
                        int n_angles = 16);

// ---------------------------------------------------------------------------
// Discrete cylindrical subspace: lift and mass-orthogonal extraction.
// ---------------------------------------------------------------------------

// Sparse lift B mapping (alpha, beta, gamma) profiles to an EdgeField by
// bilinear interpolation in (r, z), and its exact left inverse
// (B^T M B)^{-1} B^T M in the V-weighted metric. extract(lift(f)) == f to
// solver roundoff, and lift(extract(u)) is the M-orthogonal projection of u
// onto the rotationally equivariant subspace.
class CylBasis {
 public:
  CylBasis(const DiscreteOperators& ops, const CylGrid& cyl);

  [[nodiscard]] const CylGrid& cyl() const { return cyl_; }
  [[nodiscard]] const DiscreteOperators& ops() const { return *ops_; }
  [[nodiscard]] const SpMat& lift_matrix() const { return B_; }

  [[nodiscard]] EdgeField lift(const CylField& f) const;
  [[nodiscard]] CylField extract(const EdgeField& u) const;
  [[nodiscard]] EdgeField project(const EdgeField& u) const;
  // ||u - project(u)||_V / ||u||_V; zero vector reports zero.
  [[nodiscard]] real subspace_distance(const EdgeField& u) const;

  [[nodiscard]] VecX pack(const CylField& f) const;
  [[nodiscard]] CylField unpack(const VecX& c) const;
  [[nodiscard]] Index num_coeffs() const { return B_.cols(); }

 private:
  const DiscreteOperators* ops_;
  CylGrid cyl_;
  SpMat B_;
  SpMat gram_;
  std::shared_ptr<Eigen::SimplicialLDLT<SpMat>> solver_;
  // Column bookkeeping: per block, the kept lattice nodes.
  Index n_alpha_ = 0, n_beta_ = 0, n_gamma_ = 0;
};

// Unique decomposition of an equivariant field into the three rotational
// profiles. Inputs farther than equi_tol (relative, V-metric) from the
// equivariant subspace are refused with the measured defect.
CylField split_tau_rho_zeta(const CylBasis& basis, const EdgeField& u,
                            real equi_tol = 1e-2);
// Inverse direction: evaluate the ansatz back onto the edge lattice.
EdgeField reconstruct(const CylBasis& basis, const CylField& f);

// ---------------------------------------------------------------------------
// Diagnostics.
// ---------------------------------------------------------------------------

struct SymmetryReport {
  // Exact-subgroup defect joined with the distance to the discrete
  // equivariant subspace; machine-small iff u is a lifted profile field.
  real equivariance_defect = 0;
  // Literal n_angles rotation average defect; carries the O(h^2)
  // interpolation floor of the discrete group action.
  real rotation_average_defect = 0;
  // V-energy shares of the three profiles within the projected field.
  real tau_fraction = 0;
  real rho_fraction = 0;
  real zeta_fraction = 0;
  // min over sign of || u -+ mirror_z(u) ||_V / ||u||_V.
  real mirror_defect = 0;
};

SymmetryReport symmetry_report(const CylBasis& basis, const EdgeField& u,
                               int n_angles = 16);

// ---------------------------------------------------------------------------
// Evenness gate for the azimuthal fixed-point reduction.
// ---------------------------------------------------------------------------

struct EvennessReport {
  bool even = false;
  real worst = 0;  // max relative |F(c, u) - F(c, -u)| over samples
};

EvennessReport check_even_samples(
    const std::function<real(Index, const Vec3&)>& F, Index ncells,
    Index n_samples, uint64_t seed);
EvennessReport check_model_even(const NonlinearityModel& m, Index ncells,
                                Index n_samples = 2000, uint64_t seed = 91);

}  // namespace nlmx

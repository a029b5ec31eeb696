#pragma once

#include "nlmx/helmholtz.hpp"
#include "nlmx/operators.hpp"
#include "nlmx/types.hpp"

#include <array>
#include <string>
#include <vector>

namespace nlmx {

// Generalized pencil A v = lambda M_V v. The gradient subspace fills the
// kernel of A, so physically meaningful (Maxwell) modes are the nonzero
// eigenvalues; their eigenfields are automatically V-divergence-free.
struct EigenOptions {
  Index n_modes = 6;     // Maxwell modes requested
  real tol = 1e-8;       // relative residual target per mode
  Index block = 8;       // Krylov block width
  Index max_iter = 200;  // outer block iterations
  real shift_alpha = 1.0;
  // Grad-div regularization path: solve A + s B instead of projecting, with
  // B = (M_V G)(M_V G)^T / vol pushing gradients up to s * spec(L)/vol.
  bool use_graddiv = false;
  real graddiv_s = 1.0;
  uint64_t seed = 12345;
  Index dense_limit = 2600;  // edge count below which the dense path is used
  bool force_dense = false;
  bool force_iterative = false;
  Index direct_K_limit = 40000;  // edges; above this K-solves switch to CG
};

struct EigenResult {
  VecX lambda;     // ascending Maxwell eigenvalues
  MatX vectors;    // M_V-orthonormal eigenfields, one column per mode
  VecX residuals;  // ||A v - lambda M v||_{M^{-1}} per unit-M-norm mode
  // Dense path only: number of numerically zero pencil eigenvalues, which
  // must equal the node count plus the harmonic dimension.
  Index zero_modes = -1;
  // Harmonic fields (zero curl, V-divergence-free) found among the returned
  // modes; nonzero only on multiply connected masked domains.
  Index harmonic_dim = 0;
  bool dense_path = false;
  Index iterations = 0;
  real graddiv_shift_used = 0;
  // Cluster labels for (near-)degenerate eigenvalues, 0-based consecutive.
  std::vector<Index> cluster;
  std::vector<std::string> warnings;
};

EigenResult solve_maxwell_modes(const DiscreteOperators& ops,
                                const HelmholtzProjector& helm,
                                const EigenOptions& opt);

// Curl energy minus V mass: Q(u) = u^T (A - M_V) u. Eigenfields of the
// pencil evaluate to lambda - 1 per unit of M-mass.
real quadratic_form(const DiscreteOperators& ops, const EdgeField& u);

// Number of computed eigenvalues strictly below the threshold.
Index count_below(const EigenResult& r, real threshold);

// Splitting of the V-divergence-free subspace at the pencil threshold
// lambda = 1: modes at or below it span the finite-dimensional part on which
// Q is concave; the rest is the positive cone. The infinite-dimensional
// gradient kernel is handled by the Helmholtz projector.
class SpectralSplit {
 public:
  SpectralSplit(const DiscreteOperators& ops, const HelmholtzProjector& helm,
                const EigenResult& modes, real threshold = 1.0);

  [[nodiscard]] Index dim_tilde() const { return tilde_basis_.cols(); }
  [[nodiscard]] const MatX& tilde_basis() const { return tilde_basis_; }
  [[nodiscard]] const VecX& tilde_values() const { return tilde_values_; }
  [[nodiscard]] real threshold() const { return threshold_; }
  // True when some eigenvalue sits within 1e-9 of the threshold, in which
  // case the split is ill-conditioned and a warning is attached.
  [[nodiscard]] bool degenerate() const { return degenerate_; }
  [[nodiscard]] const std::vector<std::string>& warnings() const {
    return warnings_;
  }

  [[nodiscard]] EdgeField project_tilde(const EdgeField& u) const;
  [[nodiscard]] EdgeField project_plus(const EdgeField& u) const;
  // Gradient-part projector, forwarded from the Helmholtz decomposition.
  [[nodiscard]] EdgeField project_kernel(const EdgeField& u) const;

  [[nodiscard]] const DiscreteOperators& ops() const { return *ops_; }
  [[nodiscard]] const HelmholtzProjector& helm() const { return *helm_; }

 private:
  const DiscreteOperators* ops_;
  const HelmholtzProjector* helm_;
  real threshold_;
  bool degenerate_ = false;
  MatX tilde_basis_;
  VecX tilde_values_;
  std::vector<std::string> warnings_;
};

// Analytic resonator oracle for the uniform-coefficient box (0,Lx) x (0,Ly)
// x (0,Lz) with metallic walls: wavevector k = pi (m/Lx, n/Ly, p/Lz),
// lambda = |k|^2. Index triples with two or more zeros carry no mode; one
// zero gives a single mode; none gives two polarizations.
struct CavityMode {
  std::array<int, 3> idx;
  real lambda;          // continuum eigenvalue
  Index multiplicity;   // 0, 1, or 2
};

std::vector<CavityMode> cavity_spectrum(real Lx, real Ly, real Lz,
                                        Index n_values, int max_index = 12);

// Discrete dispersion of the same mode on a staggered grid: each k_d^2 is
// replaced by (4/h_d^2) sin^2(k_d h_d / 2), exact for the tensor-product
// eigenfields of the uniform unmasked grid.
real cavity_dispersion(const BoxGrid& g, int m, int n, int p);

// First n_values discrete cavity eigenvalues (with multiplicity), sorted.
VecX cavity_spectrum_discrete(const BoxGrid& g, Index n_values,
                              int max_index = 12);

}  // namespace nlmx

#include "nlmx/spectrum.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/IterativeLinearSolvers>

#include <algorithm>
#include <cmath>
#include <random>

namespace nlmx {

namespace {

constexpr real kZeroSnap = 1e-7;     // relative cutoff for kernel eigenvalues
constexpr real kClusterTol = 1e-7;   // relative gap closing a cluster

real m_dot(const SpMat& M, const VecX& a, const VecX& b) {
  return a.dot(M * b);
}

std::vector<Index> cluster_labels(const VecX& lambda) {
  std::vector<Index> c(size_t(lambda.size()), 0);
  Index id = 0;
  for (Index i = 1; i < lambda.size(); ++i) {
    if (lambda[i] - lambda[i - 1] >
        kClusterTol * std::max<real>(1, std::abs(lambda[i]))) {
      ++id;
    }
    c[size_t(i)] = id;
  }
  return c;
}

// Residual ||A v - lambda M v||_{M^{-1}} for a unit-M-norm candidate.
real pencil_residual(const DiscreteOperators& ops, const SpMat& Aeff,
                     const VecX& v, real lambda) {
  VecX r = Aeff * v - lambda * (ops.M_V() * v);
  return std::sqrt(std::max<real>(0, r.dot(ops.MV_solver().solve(r))));
}

struct InnerSolver {
  bool direct = true;
  real tol = 1e-12;
  Eigen::SimplicialLDLT<SpMat> ldlt;
  Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper,
                           Eigen::IncompleteCholesky<real>>
      cg;

  void setup(const SpMat& K, bool use_direct, real tol_) {
    direct = use_direct;
    tol = tol_;
    if (direct) {
      ldlt.compute(K);
      if (ldlt.info() != Eigen::Success) {
        throw solver_error("shifted stiffness factorization failed");
      }
    } else {
      cg.setTolerance(tol);
      cg.setMaxIterations(20000);
      cg.compute(K);
      if (cg.info() != Eigen::Success) {
        throw solver_error("shifted stiffness preconditioner failed");
      }
    }
  }
  VecX solve(const VecX& b) {
    if (direct) return ldlt.solve(b);
    VecX x = cg.solve(b);
    if (cg.info() != Eigen::Success && cg.error() > 100 * tol) {
      throw solver_error("inner conjugate gradient stalled");
    }
    return x;
  }
};

EigenResult dense_pencil(const DiscreteOperators& ops,
                         const HelmholtzProjector& helm,
                         const EigenOptions& opt) {
  const Index ne = ops.grid().num_edges();
  MatX Ad = MatX(ops.A());
  MatX Md = MatX(ops.M_V());
  Eigen::GeneralizedSelfAdjointEigenSolver<MatX> ges;
  ges.compute(Ad, Md, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
  if (ges.info() != Eigen::Success) {
    throw solver_error("dense pencil eigensolve failed");
  }
  const VecX& ev = ges.eigenvalues();
  real top = std::max<real>(1, ev.cwiseAbs().maxCoeff());
  Index nz = 0;
  while (nz < ne && std::abs(ev[nz]) <= kZeroSnap * top) ++nz;

  // The zero eigenspace is gradients plus (for multiply connected masked
  // domains) harmonic fields. The divergence-free projection of that space
  // reveals the harmonic part; gradients project to zero.
  std::vector<VecX> harmonic;
  for (Index c = 0; c < nz; ++c) {
    VecX h = helm.project_divfree(ges.eigenvectors().col(c));
    for (const VecX& prev : harmonic) {
      h -= m_dot(ops.M_V(), prev, h) * prev;
    }
    real n = std::sqrt(std::max<real>(0, m_dot(ops.M_V(), h, h)));
    if (n > 1e-5) harmonic.push_back(h / n);
  }
  Index hd = Index(harmonic.size());

  EigenResult res;
  res.dense_path = true;
  res.zero_modes = nz;
  Index avail = hd + (ne - nz);
  Index take = std::min(opt.n_modes, avail);
  res.lambda = VecX::Zero(take);
  res.vectors = MatX::Zero(ne, take);
  res.residuals = VecX::Zero(take);
  for (Index i = 0; i < take; ++i) {
    if (i < hd) {
      res.vectors.col(i) = harmonic[size_t(i)];
      res.lambda[i] = 0;
    } else {
      res.vectors.col(i) = ges.eigenvectors().col(nz + i - hd);
      res.lambda[i] = ev[nz + i - hd];
    }
    res.residuals[i] =
        pencil_residual(ops, ops.A(), res.vectors.col(i), res.lambda[i]);
  }
  res.cluster = cluster_labels(res.lambda);
  if (nz - hd != ops.grid().num_nodes()) {
    res.warnings.push_back(
        "gradient kernel dimension does not match the node count");
  }
  res.iterations = 0;
  res.graddiv_shift_used = 0;
  res.harmonic_dim = hd;
  return res;
}

struct KrylovResult {
  EigenResult res;
  real max_gradient_content = 0;
};

KrylovResult krylov_pencil(const DiscreteOperators& ops,
                           const HelmholtzProjector& helm,
                           const EigenOptions& opt, real graddiv_s) {
  const Index ne = ops.grid().num_edges();
  const SpMat& MV = ops.M_V();
  const bool project = graddiv_s <= 0;

  SpMat Aeff = ops.A();
  if (!project) {
    SpMat W = SpMat(MV * ops.G());
    Aeff = SpMat(Aeff + (graddiv_s / ops.vol()) * SpMat(W * W.transpose()));
    Aeff.makeCompressed();
  }
  SpMat K = SpMat(Aeff + opt.shift_alpha * MV);
  K.makeCompressed();

  InnerSolver inner;
  inner.setup(K, ne <= opt.direct_K_limit, std::min<real>(1e-12, opt.tol * 1e-4));

  auto apply_S = [&](const VecX& x) {
    VecX y = inner.solve(MV * x);
    if (project) y = helm.project_divfree(y);
    return y;
  };

  const Index nm = std::min<Index>(opt.n_modes, ne / 2);
  const Index b = std::clamp<Index>(std::max(opt.block, nm > 4 ? Index(8) : Index(6)),
                                    2, 24);
  const Index cap = std::min<Index>(std::max<Index>(6 * b, 4 * nm + 2 * b), ne);
  const Index keep = std::min<Index>(2 * nm + b, cap - b);

  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<real> nd;
  MatX Q(ne, 0);

  auto append_block = [&](MatX X) -> Index {
    for (int pass = 0; pass < 2; ++pass) {
      if (Q.cols() > 0) X -= Q * (Q.transpose() * (MV * X));
    }
    Index kept = 0;
    for (Index j = 0; j < X.cols(); ++j) {
      VecX x = X.col(j);
      for (Index i = 0; i < kept; ++i) {
        x -= m_dot(MV, X.col(i), x) * X.col(i);
      }
      real n = std::sqrt(std::max<real>(0, m_dot(MV, x, x)));
      if (n > 1e-10) {
        X.col(kept++) = x / n;
      }
    }
    if (kept > 0) {
      Q.conservativeResize(Eigen::NoChange, Q.cols() + kept);
      Q.rightCols(kept) = X.leftCols(kept);
    }
    return kept;
  };

  auto random_block = [&]() {
    MatX X(ne, b);
    for (Index j = 0; j < b; ++j) {
      for (Index i = 0; i < ne; ++i) X(i, j) = nd(rng);
      if (project) X.col(j) = helm.project_divfree(X.col(j));
    }
    return X;
  };

  append_block(random_block());
  Index news = Q.cols();

  EigenResult res;
  res.graddiv_shift_used = project ? 0 : graddiv_s;
  Eigen::SelfAdjointEigenSolver<MatX> es;
  bool done = false;

  for (Index it = 0; it < opt.max_iter && !done; ++it) {
    res.iterations = it + 1;
    MatX Xn(ne, news);
    for (Index j = 0; j < news; ++j) {
      Xn.col(j) = apply_S(Q.col(Q.cols() - news + j));
    }
    news = append_block(std::move(Xn));
    if (news == 0) {
      news = append_block(random_block());
      if (news == 0) break;  // subspace exhausted
    }

    MatX T = Q.transpose() * (Aeff * Q);
    T = 0.5 * (T + T.transpose()).eval();
    es.compute(T);
    if (es.info() != Eigen::Success) {
      throw solver_error("Rayleigh-Ritz eigensolve failed");
    }

    Index have = std::min<Index>(nm, Q.cols());
    if (have == nm) {
      real lam_top = es.eigenvalues()[Q.cols() - 1];
      real floor_ = 1e-3 * std::max<real>(1, lam_top);
      done = true;
      for (Index i = 0; i < nm && done; ++i) {
        VecX v = Q * es.eigenvectors().col(i);
        real lam = es.eigenvalues()[i];
        real rn = pencil_residual(ops, Aeff, v, lam);
        done = rn <= opt.tol * std::max(std::abs(lam), floor_);
      }
    }
    if (!done && Q.cols() > cap) {
      MatX compact = Q * es.eigenvectors().leftCols(keep);
      Q = compact;
      news = std::min<Index>(b, Q.cols());
    }
  }
  if (!done) {
    throw solver_error("pencil iteration did not reach the residual target");
  }

  Index have = std::min<Index>(nm, Q.cols());
  res.lambda = VecX(have);
  res.vectors = MatX(ne, have);
  res.residuals = VecX(have);
  real lam_top = std::max<real>(1, std::abs(es.eigenvalues()[Q.cols() - 1]));
  KrylovResult out;
  for (Index i = 0; i < have; ++i) {
    VecX v = Q * es.eigenvectors().col(i);
    real n = std::sqrt(m_dot(MV, v, v));
    v /= n;
    real lam = es.eigenvalues()[i];
    if (std::abs(lam) <= kZeroSnap * lam_top) lam = 0;
    res.vectors.col(i) = v;
    res.lambda[i] = lam;
    res.residuals[i] = pencil_residual(ops, Aeff, v, lam);
    if (lam == 0) ++res.harmonic_dim;
    // Gradient leakage measured with the Helmholtz projector; it plays no
    // part in the iteration itself when the grad-div path is active.
    real gc = std::sqrt(std::max<real>(
        0, m_dot(MV, helm.project_gradient(v), helm.project_gradient(v))));
    out.max_gradient_content = std::max(out.max_gradient_content, gc);
  }
  res.cluster = cluster_labels(res.lambda);
  out.res = std::move(res);
  return out;
}

}  // namespace

EigenResult solve_maxwell_modes(const DiscreteOperators& ops,
                                const HelmholtzProjector& helm,
                                const EigenOptions& opt) {
  require(opt.n_modes > 0, "must request at least one mode");
  require(opt.tol > 0 && opt.shift_alpha > 0, "tolerances must be positive");
  const Index ne = ops.grid().num_edges();
  bool dense = !opt.force_iterative &&
               (opt.force_dense || ne <= opt.dense_limit);
  if (dense) return dense_pencil(ops, helm, opt);

  if (!opt.use_graddiv) {
    return krylov_pencil(ops, helm, opt, 0).res;
  }
  // Grad-div path: if the gradient band lands inside the requested window the
  // modes come back polluted; push it up and retry.
  real s = opt.graddiv_s;
  for (int attempt = 0; attempt < 3; ++attempt, s *= 10) {
    KrylovResult kr = krylov_pencil(ops, helm, opt, s);
    if (kr.max_gradient_content <= 1e-6) {
      if (attempt > 0) {
        kr.res.warnings.push_back("grad-div shift raised to avoid "
                                  "gradient-band contamination");
      }
      return kr.res;
    }
  }
  throw solver_error(
      "grad-div regularization kept leaking gradient modes; raise the shift");
}

real quadratic_form(const DiscreteOperators& ops, const EdgeField& u) {
  return ops.dot_curl(u, u) - ops.dot_V(u, u);
}

Index count_below(const EigenResult& r, real threshold) {
  Index n = 0;
  while (n < r.lambda.size() && r.lambda[n] < threshold) ++n;
  return n;
}

SpectralSplit::SpectralSplit(const DiscreteOperators& ops,
                             const HelmholtzProjector& helm,
                             const EigenResult& modes, real threshold)
    : ops_(&ops), helm_(&helm), threshold_(threshold) {
  require(modes.lambda.size() > 0, "no modes supplied");
  require(modes.vectors.rows() == ops.grid().num_edges(),
          "modes were computed on a different grid");
  real guard = kClusterTol * std::max<real>(1, threshold);
  if (modes.lambda[modes.lambda.size() - 1] <= threshold + guard) {
    throw solver_error(
        "spectral split needs modes beyond the threshold; request more");
  }
  Index nt = 0;
  while (nt < modes.lambda.size() && modes.lambda[nt] <= threshold + guard) {
    ++nt;
  }
  tilde_basis_ = modes.vectors.leftCols(nt);
  tilde_values_ = modes.lambda.head(nt);
  for (Index i = 0; i < modes.lambda.size(); ++i) {
    if (std::abs(modes.lambda[i] - threshold) <
        1e-9 * std::max<real>(1, threshold)) {
      degenerate_ = true;
      warnings_.push_back(
          "eigenvalue within 1e-9 of the splitting threshold; the "
          "decomposition is ill-conditioned");
      break;
    }
  }
}

EdgeField SpectralSplit::project_tilde(const EdgeField& u) const {
  if (tilde_basis_.cols() == 0) return EdgeField::Zero(u.size());
  VecX c = tilde_basis_.transpose() * (ops_->M_V() * u);
  return tilde_basis_ * c;
}

EdgeField SpectralSplit::project_plus(const EdgeField& u) const {
  return helm_->project_divfree(u) - project_tilde(u);
}

EdgeField SpectralSplit::project_kernel(const EdgeField& u) const {
  return helm_->project_gradient(u);
}

std::vector<CavityMode> cavity_spectrum(real Lx, real Ly, real Lz,
                                        Index n_values, int max_index) {
  require(Lx > 0 && Ly > 0 && Lz > 0, "box lengths must be positive");
  std::vector<CavityMode> all;
  const real pi = std::acos(real(-1));
  for (int m = 0; m <= max_index; ++m) {
    for (int n = 0; n <= max_index; ++n) {
      for (int p = 0; p <= max_index; ++p) {
        int zeros = (m == 0) + (n == 0) + (p == 0);
        if (zeros >= 2) continue;
        Index mult = zeros == 1 ? 1 : 2;
        real lam = pi * pi * (real(m * m) / (Lx * Lx) +
                              real(n * n) / (Ly * Ly) +
                              real(p * p) / (Lz * Lz));
        all.push_back({{m, n, p}, lam, mult});
      }
    }
  }
  std::sort(all.begin(), all.end(),
            [](const CavityMode& a, const CavityMode& b) {
              return a.lambda < b.lambda;
            });
  Index total = 0;
  size_t cut = 0;
  while (cut < all.size() && total < n_values) {
    total += all[cut].multiplicity;
    ++cut;
  }
  require(total >= n_values, "max_index too small for requested mode count");
  all.resize(cut);
  return all;
}

real cavity_dispersion(const BoxGrid& g, int m, int n, int p) {
  const real pi = std::acos(real(-1));
  auto term = [&](int idx, real L, real h) {
    if (idx == 0) return real(0);
    real s = std::sin(idx * pi / L * h / 2);
    return 4 / (h * h) * s * s;
  };
  return term(m, g.Lx, g.hx) + term(n, g.Ly, g.hy) + term(p, g.Lz, g.hz);
}

VecX cavity_spectrum_discrete(const BoxGrid& g, Index n_values, int max_index) {
  std::vector<CavityMode> modes =
      cavity_spectrum(g.Lx, g.Ly, g.Lz, n_values + 8, max_index);
  std::vector<real> vals;
  for (const auto& cm : modes) {
    real lam = cavity_dispersion(g, cm.idx[0], cm.idx[1], cm.idx[2]);
    for (Index r = 0; r < cm.multiplicity; ++r) vals.push_back(lam);
  }
  std::sort(vals.begin(), vals.end());
  require(Index(vals.size()) >= n_values, "not enough cavity modes enumerated");
  VecX out(n_values);
  for (Index i = 0; i < n_values; ++i) out[i] = vals[size_t(i)];
  return out;
}

}  // namespace nlmx

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "nlmx/grid.hpp"
#include "nlmx/operators.hpp"

#include <cmath>
#include <random>

using namespace nlmx;

namespace {

VecX random_vec(Index n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<real> d;
  VecX v(n);
  for (Index i = 0; i < n; ++i) v[i] = d(rng);
  return v;
}

real max_abs(const SpMat& m) {
  real worst = 0;
  for (int k = 0; k < m.outerSize(); ++k) {
    for (SpMat::InnerIterator it(m, k); it; ++it) {
      worst = std::max(worst, std::abs(it.value()));
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("full box dof counts match closed forms") {
  int nx = 6, ny = 5, nz = 4;
  BoxGrid g(nx, ny, nz, 1.2, 1.0, 0.8);
  Index ne = Index(nx) * (ny - 1) * (nz - 1) + Index(nx - 1) * ny * (nz - 1) +
             Index(nx - 1) * (ny - 1) * nz;
  Index nn = Index(nx - 1) * (ny - 1) * (nz - 1);
  Index nf = Index(nx + 1) * ny * nz + Index(nx) * (ny + 1) * nz +
             Index(nx) * ny * (nz + 1);
  CHECK(g.num_edges() == ne);
  CHECK(g.num_nodes() == nn);
  CHECK(g.num_faces() == nf);
  CHECK(g.num_cells() == Index(nx) * ny * nz);
  CHECK(!g.masked());
}

TEST_CASE("dof centers sit on the staggered lattice") {
  BoxGrid g(4, 4, 4, 2.0, 2.0, 2.0);
  real h = 0.5;
  for (const auto& e : g.edges()) {
    Vec3 expect(e.i * h, e.j * h, e.k * h);
    expect[e.axis] += 0.5 * h;
    CHECK((e.center - expect).norm() == doctest::Approx(0).epsilon(1e-14));
  }
  for (const auto& n : g.nodes()) {
    CHECK(n.center.x() == doctest::Approx(n.i * h));
    CHECK(n.center.y() == doctest::Approx(n.j * h));
    CHECK(n.center.z() == doctest::Approx(n.k * h));
  }
  for (const auto& f : g.faces()) {
    Vec3 expect(f.i * h, f.j * h, f.k * h);
    for (int d = 0; d < 3; ++d) {
      if (d != f.axis) expect[d] += 0.5 * h;
    }
    CHECK((f.center - expect).norm() == doctest::Approx(0).epsilon(1e-14));
  }
}

TEST_CASE("curl of gradient vanishes as an exact matrix identity") {
  auto check_grid = [](const BoxGrid& g) {
    auto mat = MaterialTensors::isotropic(1.0, 1.0);
    DiscreteOperators ops(g, mat);
    SpMat CG = SpMat(ops.C() * ops.G());
    CG.prune(0.0, 0.0);
    CHECK(max_abs(CG) <= 1e-18);
    NodeField phi = random_vec(g.num_nodes(), 7);
    FaceField r = ops.C() * (ops.G() * phi);
    CHECK(r.cwiseAbs().maxCoeff() <= 1e-13 * (1 + phi.cwiseAbs().maxCoeff()));
  };
  check_grid(BoxGrid(8, 8, 8, 1, 1, 1));
  check_grid(BoxGrid(9, 6, 7, 2.0, 1.0, 1.5));
  check_grid(BoxGrid(10, 10, 10, 2, 2, 2,
                     mask_ball_cut(Vec3(1, 1, 1), 0.6)));
  check_grid(BoxGrid(10, 10, 10, 2, 2, 2,
                     mask_keep_cylinder(Vec3(1, 1, 0), 0.9)));
}

TEST_CASE("curl is exact on fields with affine components") {
  BoxGrid g(7, 6, 5, 1.4, 1.2, 1.0);
  auto mat = MaterialTensors::isotropic(1.0, 1.0);
  DiscreteOperators ops(g, mat);
  EdgeField u = sample_edge_field(
      g, [](const Vec3& x) { return Vec3(-x.y(), x.x(), 0); });
  FaceField cu = ops.C() * u;
  Eigen::SparseMatrix<real, Eigen::RowMajor> Crow(ops.C());
  for (const auto& f : g.faces()) {
    Index row = g.face_dof(f.axis, f.i, f.j, f.k);
    if (Crow.innerVector(row).nonZeros() != 4) continue;  // touches boundary
    real want = f.axis == 2 ? 2.0 : 0.0;
    CHECK(std::abs(cu[row] - want) <= 1e-12);
  }
}

TEST_CASE("discrete curl converges at second order on smooth fields") {
  auto field = [](const Vec3& p) {
    return Vec3(std::sin(p.y()) * std::cos(p.z()),
                std::exp(0.3 * p.x()) * std::sin(p.z()),
                std::sin(p.x()) * std::cos(p.y()));
  };
  auto curl = [](const Vec3& p) {
    return Vec3(-std::sin(p.x()) * std::sin(p.y()) -
                    std::exp(0.3 * p.x()) * std::cos(p.z()),
                -std::sin(p.y()) * std::sin(p.z()) -
                    std::cos(p.x()) * std::cos(p.y()),
                0.3 * std::exp(0.3 * p.x()) * std::sin(p.z()) -
                    std::cos(p.y()) * std::cos(p.z()));
  };
  auto mat = MaterialTensors::isotropic(1.0, 1.0);
  std::vector<real> errs;
  for (int n : {8, 16, 32}) {
    BoxGrid g(n, n, n, 1, 1, 1);
    DiscreteOperators ops(g, mat);
    EdgeField u = sample_edge_field(g, field);
    FaceField cu = ops.C() * u;
    Eigen::SparseMatrix<real, Eigen::RowMajor> Crow(ops.C());
    real worst = 0;
    for (const auto& f : g.faces()) {
      Index row = g.face_dof(f.axis, f.i, f.j, f.k);
      if (Crow.innerVector(row).nonZeros() != 4) continue;
      worst = std::max(worst, std::abs(cu[row] - curl(f.center)[f.axis]));
    }
    errs.push_back(worst);
  }
  real slope1 = std::log2(errs[0] / errs[1]);
  real slope2 = std::log2(errs[1] / errs[2]);
  CHECK(slope1 >= 1.9);
  CHECK(slope2 >= 1.9);
}

TEST_CASE("weighted divergence is the exact adjoint of the gradient") {
  BoxGrid g(9, 8, 7, 1.1, 1.0, 0.9, mask_box_cut(Vec3(0.3, 0.3, 0.3),
                                                  Vec3(0.6, 0.6, 0.6)));
  CHECK(g.masked());
  auto mat = MaterialTensors::from_fields(
      g, [](const Vec3&) { return Mat3::Identity(); },
      [](const Vec3& x) {
        Mat3 V = Mat3::Identity() * (2 + std::sin(x.x()));
        V(0, 1) = V(1, 0) = 0.2;
        return V;
      });
  DiscreteOperators ops(g, mat);
  NodeField phi = random_vec(g.num_nodes(), 11);
  EdgeField u = random_vec(g.num_edges(), 13);
  real lhs = ops.dot_V(ops.G() * phi, u);
  real rhs = -ops.vol() * phi.dot(ops.div_weighted(u));
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));

  // div_weighted(grad phi) equals the node Laplacian action up to the sign
  // and volume normalization.
  NodeField lap = ops.div_weighted(ops.G() * phi);
  NodeField direct = ops.G().transpose() * (ops.M_V() * (ops.G() * phi));
  CHECK((lap * ops.vol() + direct).cwiseAbs().maxCoeff() <=
        1e-12 * (1 + direct.cwiseAbs().maxCoeff()));
}

TEST_CASE("adjoint curl pairs with the curl under the weighted inner products") {
  BoxGrid g(8, 8, 8, 1.5, 1.5, 1.5);
  auto mat = MaterialTensors::diagonal(Vec3(1.0, 2.0, 0.5), Vec3(2.0, 1.0, 3.0));
  DiscreteOperators ops(g, mat);
  EdgeField u = random_vec(g.num_edges(), 17);
  FaceField psi = random_vec(g.num_faces(), 19);
  real lhs = (ops.C() * u).dot(ops.M_mu() * psi);
  real rhs = ops.dot_V(u, ops.curl_adjoint(psi));
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("edge mass is symmetric positive definite and scales linearly in V") {
  BoxGrid g(6, 6, 6, 1, 1, 1, mask_ball_cut(Vec3(0.5, 0.5, 0.5), 0.25));
  Mat3 V = Mat3::Identity() * 2;
  V(0, 1) = V(1, 0) = 0.5;
  V(1, 2) = V(2, 1) = 0.3;
  auto mk = [&](real c) {
    return MaterialTensors::from_fields(
        g, [](const Vec3&) { return Mat3::Identity(); },
        [&, c](const Vec3&) { return Mat3(c * V); });
  };
  DiscreteOperators ops1(g, mk(1.0));
  DiscreteOperators ops2(g, mk(3.7));
  SpMat diff = SpMat(ops2.M_V() - 3.7 * ops1.M_V());
  CHECK(max_abs(diff) <= 1e-13 * max_abs(ops1.M_V()));
  SpMat asym = SpMat(ops1.M_V() - SpMat(ops1.M_V().transpose()));
  CHECK(max_abs(asym) <= 1e-15);
  for (uint64_t s = 0; s < 5; ++s) {
    EdgeField u = random_vec(g.num_edges(), 23 + s);
    CHECK(ops1.dot_V(u, u) > 0);
    CHECK(ops1.dot_curl(u, u) >= 0);
  }
  // Interior edges of a uniform diagonal material carry exactly vol * V_dd.
  auto iso = MaterialTensors::isotropic(1.0, 2.5);
  BoxGrid gf(5, 5, 5, 1, 1, 1);
  DiscreteOperators opsf(gf, iso);
  VecX d = opsf.M_V().diagonal();
  CHECK(d.maxCoeff() == doctest::Approx(2.5 * opsf.vol()).epsilon(1e-14));
}

TEST_CASE("cell averaging and scattering are volume-weighted adjoints") {
  BoxGrid g(10, 8, 9, 1.0, 0.8, 1.2, mask_ball_cut(Vec3(0.5, 0.4, 0.6), 0.2));
  auto mat = MaterialTensors::isotropic(1.0, 1.0);
  DiscreteOperators ops(g, mat);
  EdgeField u = random_vec(g.num_edges(), 29);
  MatX gcell(g.num_cells(), 3);
  std::mt19937_64 rng(31);
  std::normal_distribution<real> nd;
  for (Index c = 0; c < g.num_cells(); ++c) {
    for (int d = 0; d < 3; ++d) gcell(c, d) = nd(rng);
  }
  MatX avg = ops.cell_average(u);
  real lhs = (avg.array() * gcell.array()).sum() * ops.vol();
  real rhs = u.dot(ops.scatter_cells(gcell));
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-11));

  // A constant tangential field averages to the constant on interior cells.
  EdgeField ones = sample_edge_field(g, [](const Vec3&) {
    return Vec3(1.0, 2.0, 3.0);
  });
  MatX a = ops.cell_average(ones);
  bool found_interior = false;
  for (const auto& c : g.cells()) {
    bool interior = true;
    for (int d = 0; d < 3 && interior; ++d) {
      for (Index e : c.edge[size_t(d)]) interior = interior && e >= 0;
    }
    if (!interior) continue;
    found_interior = true;
    Index ci = g.cell_id(c.i, c.j, c.k);
    CHECK(a(ci, 0) == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(a(ci, 1) == doctest::Approx(2.0).epsilon(1e-13));
    CHECK(a(ci, 2) == doctest::Approx(3.0).epsilon(1e-13));
  }
  CHECK(found_interior);
}

TEST_CASE("masked grids keep only fully interior tangential edges") {
  BoxGrid g(8, 8, 8, 2, 2, 2, mask_ball_cut(Vec3(1, 1, 1), 0.5));
  BoxGrid full(8, 8, 8, 2, 2, 2);
  CHECK(g.num_cells() < full.num_cells());
  CHECK(g.num_edges() < full.num_edges());
  CHECK(g.num_nodes() < full.num_nodes());
  // Every active edge sees four active cells; verify via the grid's own
  // adjacency by checking the mass diagonal equals vol exactly (V = id).
  auto mat = MaterialTensors::isotropic(1.0, 1.0);
  DiscreteOperators ops(g, mat);
  VecX d = ops.M_V().diagonal();
  CHECK(d.minCoeff() == doctest::Approx(ops.vol()).epsilon(1e-14));
  CHECK(d.maxCoeff() == doctest::Approx(ops.vol()).epsilon(1e-14));
  CHECK(g.mask_xy_symmetric());
  CHECK(g.square_xy());
}

TEST_CASE("grid rejects invalid sizes and mask wipeouts") {
  CHECK_THROWS_AS(BoxGrid(1, 4, 4, 1, 1, 1), invalid_input_error);
  CHECK_THROWS_AS(BoxGrid(4, 4, 4, -1, 1, 1), invalid_input_error);
  CHECK_THROWS_AS(BoxGrid(4, 4, 4, 1, 1, 1,
                          [](const Vec3&) { return false; }),
                  invalid_input_error);
}

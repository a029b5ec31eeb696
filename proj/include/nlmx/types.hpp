#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace nlmx {

using real = double;
using Index = Eigen::Index;

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<real>;
using Triplet = Eigen::Triplet<real>;

// Discrete fields are flat coefficient vectors; the owning grid defines the
// dof layout (x-block, then y, then z for edges/faces).
using EdgeField = VecX;
using FaceField = VecX;
using NodeField = VecX;

// Error categories mirror the CLI exit codes: invalid input/config (2),
// solver breakdown (3), failed certificate or inapplicable oracle (4).
struct invalid_input_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct solver_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct certificate_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct symmetry_error : invalid_input_error {
  using invalid_input_error::invalid_input_error;
};

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw invalid_input_error(msg);
}

}  // namespace nlmx

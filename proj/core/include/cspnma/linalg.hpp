#pragma once

#include <Eigen/Dense>
#include <vector>

#include "cspnma/errors.hpp"

namespace cspnma {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Default relative rank cutoff: eigenvalues below rel_tol * max|lambda|
// are treated as exactly zero.
inline constexpr double kPinvRelTol = 1e-12;

struct RankInfo {
  int rank = 0;
  double tolerance = 0.0;
  Vector eigenvalues;  // sorted by descending magnitude
};

struct Pinv {
  Matrix pinv;
  RankInfo rank;
};

// Exact symmetrization; all symmetric results are stored this way so that
// m(i,j) == m(j,i) holds bitwise.
Matrix symmetrized(const Matrix& m);

// Moore-Penrose pseudoinverse of a symmetric matrix via symmetric
// eigendecomposition. Throws InvalidMatrix on non-finite input.
Pinv pseudoinverse(const Matrix& m, double rel_tol = kPinvRelTol);

// a' * m * b with dimension checking.
double quad_form(const Vector& a, const Matrix& m, const Vector& b);

// Block-diagonal symmetric matrix; blocks are kept dense, global
// operations never assemble the full matrix unless asked.
struct BlockDiag {
  std::vector<Matrix> blocks;
  std::vector<int> offsets;  // starting row of each block, strictly increasing
  int dim = 0;

  void append(Matrix block);
  Vector apply(const Vector& x) const;
  // a' * (this) * b
  double quad(const Vector& a, const Vector& b) const;
  Matrix dense() const;
};

struct BlockDiagPinv {
  BlockDiag pinv;
  std::vector<RankInfo> ranks;
  int total_rank = 0;
};

// Blockwise pseudoinverse; equals pseudoinverse(dense(v)) for symmetric
// blocks.
BlockDiagPinv blockdiag_pinv(const BlockDiag& v, double rel_tol = kPinvRelTol);

}  // namespace cspnma

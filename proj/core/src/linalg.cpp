#include "cspnma/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace cspnma {

Matrix symmetrized(const Matrix& m) {
  Matrix s = 0.5 * (m + m.transpose());
  // Enforce bitwise symmetry: the average above can differ in the last ulp
  // between (i,j) and (j,i) only if compiled with unsafe math, but copying
  // the upper triangle makes the invariant unconditional.
  for (Eigen::Index i = 0; i < s.rows(); ++i)
    for (Eigen::Index j = 0; j < i; ++j) s(i, j) = s(j, i);
  return s;
}

Pinv pseudoinverse(const Matrix& m, double rel_tol) {
  if (m.rows() != m.cols())
    fail(ErrorCode::DimError, "pseudoinverse: matrix must be square");
  if (rel_tol < 0)
    fail(ErrorCode::DimError, "pseudoinverse: negative tolerance");
  if (!m.allFinite())
    fail(ErrorCode::InvalidMatrix, "pseudoinverse: non-finite entries");

  const Eigen::Index n = m.rows();
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(m));
  if (es.info() != Eigen::Success)
    fail(ErrorCode::InvalidMatrix, "pseudoinverse: eigendecomposition failed");

  const Vector& lam = es.eigenvalues();
  double max_abs = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    max_abs = std::max(max_abs, std::abs(lam(i)));
  const double tol = rel_tol * max_abs;

  Vector inv = Vector::Zero(n);
  int rank = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(lam(i)) > tol) {
      inv(i) = 1.0 / lam(i);
      ++rank;
    }
  }

  Pinv out;
  out.pinv = symmetrized(es.eigenvectors() * inv.asDiagonal() *
                         es.eigenvectors().transpose());
  out.rank.rank = rank;
  out.rank.tolerance = tol;
  out.rank.eigenvalues = lam;
  std::sort(out.rank.eigenvalues.begin(), out.rank.eigenvalues.end(),
            [](double a, double b) { return std::abs(a) > std::abs(b); });
  return out;
}

double quad_form(const Vector& a, const Matrix& m, const Vector& b) {
  if (a.size() != m.rows() || b.size() != m.cols())
    fail(ErrorCode::DimError, "quad_form: dimension mismatch");
  return a.dot(m * b);
}

void BlockDiag::append(Matrix block) {
  if (block.rows() != block.cols())
    fail(ErrorCode::DimError, "BlockDiag: blocks must be square");
  offsets.push_back(dim);
  dim += static_cast<int>(block.rows());
  blocks.push_back(std::move(block));
}

Vector BlockDiag::apply(const Vector& x) const {
  if (x.size() != dim) fail(ErrorCode::DimError, "BlockDiag: size mismatch");
  Vector out(dim);
  for (size_t k = 0; k < blocks.size(); ++k) {
    const auto n = blocks[k].rows();
    out.segment(offsets[k], n) = blocks[k] * x.segment(offsets[k], n);
  }
  return out;
}

double BlockDiag::quad(const Vector& a, const Vector& b) const {
  if (a.size() != dim || b.size() != dim)
    fail(ErrorCode::DimError, "BlockDiag: size mismatch");
  double acc = 0.0;
  for (size_t k = 0; k < blocks.size(); ++k) {
    const auto n = blocks[k].rows();
    acc += a.segment(offsets[k], n).dot(blocks[k] * b.segment(offsets[k], n));
  }
  return acc;
}

Matrix BlockDiag::dense() const {
  Matrix out = Matrix::Zero(dim, dim);
  for (size_t k = 0; k < blocks.size(); ++k) {
    const auto n = blocks[k].rows();
    out.block(offsets[k], offsets[k], n, n) = blocks[k];
  }
  return out;
}

BlockDiagPinv blockdiag_pinv(const BlockDiag& v, double rel_tol) {
  BlockDiagPinv out;
  out.ranks.reserve(v.blocks.size());
  for (const Matrix& block : v.blocks) {
    Pinv p = pseudoinverse(block, rel_tol);
    out.pinv.append(std::move(p.pinv));
    out.total_rank += p.rank.rank;
    out.ranks.push_back(std::move(p.rank));
  }
  return out;
}

}  // namespace cspnma

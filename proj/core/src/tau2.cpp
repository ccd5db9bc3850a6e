#include "cspnma/tau2.hpp"

#include <algorithm>
#include <cmath>

#include "cspnma/contrast_system.hpp"
#include "cspnma/diagnostics.hpp"
#include "cspnma/projection.hpp"

namespace cspnma {

double estimate_tau2(const TreatmentNetwork& net) {
  const HeterogeneitySpec fixed{};
  const ContrastSystem sys = assemble_system(net, fixed, Assembly::Embed);
  const FitResult fr = fit(sys);
  const QResult base = q_test(fr.fit, sys, fr.op, false);
  if (base.df == 0)
    fail(ErrorCode::TauNotEstimable, "no inconsistency degrees of freedom");

  const int n = sys.rows();
  const int m = sys.columns();

  // Residual operator R = I - H with H = X I+ X' V+ mapping observations to
  // fitted values; built blockwise through the indicator design.
  Matrix xtvp = Matrix::Zero(m, n);
  for (size_t k = 0; k < sys.studies.size(); ++k) {
    const StudySlice& sl = sys.slices[k];
    const Matrix& w = fr.op.v_pinv.blocks[k];
    const int len = sl.end - sl.begin;
    for (int i = 0; i < len; ++i)
      for (int j = 0; j < len; ++j)
        xtvp(sys.row_pair[sl.begin + i], sl.begin + j) += w(i, j);
  }
  const Matrix proj_rows = fr.op.info_pinv * xtvp;  // m x n
  Matrix h(n, n);
  for (int r = 0; r < n; ++r) h.row(r) = proj_rows.row(sys.row_pair[r]);
  const Matrix r_op = Matrix::Identity(n, n) - h;

  Matrix vpr(n, n);
  for (size_t k = 0; k < sys.studies.size(); ++k) {
    const StudySlice& sl = sys.slices[k];
    const int len = sl.end - sl.begin;
    vpr.middleRows(sl.begin, len) =
        fr.op.v_pinv.blocks[k] * r_op.middleRows(sl.begin, len);
  }
  const Matrix w0 = r_op.transpose() * vpr;

  // Expected Q under the plug-in rule as a function of tau^2; only the
  // block-diagonal part of W0 meets the covariance.
  auto expected_q = [&](double tau2) {
    double acc = 0.0;
    for (size_t k = 0; k < sys.studies.size(); ++k) {
      const StudySlice& sl = sys.slices[k];
      const int len = sl.end - sl.begin;
      const StudyBlock adj = apply_heterogeneity(sys.studies[k], tau2);
      acc += w0.block(sl.begin, sl.begin, len, len)
                 .cwiseProduct(adj.cov)
                 .sum();
    }
    return acc;
  };
  const double slope = expected_q(1.0) - expected_q(0.0);
  if (!(slope > 1e-12))
    fail(ErrorCode::TauNotEstimable, "expected Q is flat in tau^2");

  return std::max(0.0, (base.q - base.df) / slope);
}

}  // namespace cspnma

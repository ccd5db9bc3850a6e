#include "cspnma/projection.hpp"

#include <algorithm>
#include <cmath>

namespace cspnma {

namespace {

void check_target(const ContrastSystem& sys, ContrastId target) {
  if (target.low < 0 || target.high >= sys.n_treatments ||
      target.low >= target.high)
    fail(ErrorCode::UnknownContrast, "target is not a canonical contrast");
}

}  // namespace

FitResult fit(const ContrastSystem& sys, double rel_tol) {
  const int m = sys.columns();
  const int T = sys.n_treatments;

  BlockDiagPinv vp = blockdiag_pinv(sys.v, rel_tol);

  // Raw information and score accumulated blockwise: rows of the design
  // are contrast-column indicators, so each study block scatters into the
  // rows/columns of its pairs.
  Matrix info_raw = Matrix::Zero(m, m);
  Vector score = Vector::Zero(m);
  for (size_t k = 0; k < sys.studies.size(); ++k) {
    const StudySlice& sl = sys.slices[k];
    const Matrix& w = vp.pinv.blocks[k];
    const int len = sl.end - sl.begin;
    const Vector wy = w * sys.y.segment(sl.begin, len);
    for (int i = 0; i < len; ++i) {
      const int ci = sys.row_pair[sl.begin + i];
      score(ci) += wy(i);
      for (int j = 0; j < len; ++j)
        info_raw(ci, sys.row_pair[sl.begin + j]) += w(i, j);
    }
  }

  // The consistency constraint is enforced by compressing the information
  // onto the consistency subspace before inverting; the pseudoinverse of
  // the projected matrix is then exactly the constrained-GLS covariance.
  const Matrix proj = consistency_projector(T);
  Matrix info = symmetrized(proj * info_raw * proj);

  Pinv ip = pseudoinverse(info, rel_tol);
  if (ip.rank.rank < T - 1)
    fail(ErrorCode::DegenerateInformation,
         "information rank " + std::to_string(ip.rank.rank) +
             " below treatments-1");

  FitResult out;
  out.op.info = std::move(info);
  out.op.info_pinv = std::move(ip.pinv);
  out.op.info_rank = std::move(ip.rank);
  out.op.v_pinv = std::move(vp.pinv);
  out.op.v_ranks = std::move(vp.ranks);
  out.op.rank_v = vp.total_rank;

  out.fit.theta_hat = out.op.info_pinv * score;
  out.fit.cov_theta = out.op.info_pinv;
  out.fit.fitted.resize(sys.rows());
  for (int r = 0; r < sys.rows(); ++r)
    out.fit.fitted(r) = out.fit.theta_hat(sys.row_pair[r]);
  out.fit.residual = sys.y - out.fit.fitted;
  return out;
}

PotentialFlow potential_flow(const ProjectionOperator& op,
                             const ContrastSystem& sys, ContrastId target) {
  check_target(sys, target);
  const int col = pair_index(target, sys.n_treatments);

  PotentialFlow out;
  out.u = op.info_pinv.col(col);
  out.p.resize(sys.rows());
  for (size_t k = 0; k < sys.studies.size(); ++k) {
    const StudySlice& sl = sys.slices[k];
    const int len = sl.end - sl.begin;
    Vector u_local(len);
    for (int i = 0; i < len; ++i) u_local(i) = out.u(sys.row_pair[sl.begin + i]);
    out.p.segment(sl.begin, len) = op.v_pinv.blocks[k] * u_local;
  }
  return out;
}

StructuralSplit structural_split(const Vector& p, const ContrastSystem& sys,
                                 ContrastId target) {
  check_target(sys, target);
  if (p.size() != sys.rows())
    fail(ErrorCode::DimError, "structural_split: coefficient size mismatch");
  const int col = pair_index(target, sys.n_treatments);
  StructuralSplit out;
  double total = 0.0;
  for (int r = 0; r < sys.rows(); ++r) {
    const double term = p(r) * sys.y(r);
    total += term;
    if (sys.row_pair[r] == col) {
      out.direct += term;
      out.has_direct_rows = true;
    }
  }
  out.indirect = total - out.direct;
  return out;
}

std::vector<StudyContribution> study_contributions(const PotentialFlow& flow,
                                                   const ContrastSystem& sys,
                                                   ContrastId target) {
  std::vector<StudyContribution> out;
  out.reserve(sys.studies.size());
  for (size_t k = 0; k < sys.studies.size(); ++k) {
    const StudySlice& sl = sys.slices[k];
    const int len = sl.end - sl.begin;
    StudyContribution c;
    c.study_id = sl.study_id;
    c.target = target;
    c.coeff = flow.p.segment(sl.begin, len);
    c.value = c.coeff.dot(sys.y.segment(sl.begin, len));
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<StudyContribution> study_contributions(const ProjectionOperator& op,
                                                   const ContrastSystem& sys,
                                                   ContrastId target) {
  return study_contributions(potential_flow(op, sys, target), sys, target);
}

EquivalenceReport equivalence_check(const TreatmentNetwork& net,
                                    const HeterogeneitySpec& het, double tol) {
  const ContrastSystem reduced = assemble_system(net, het, Assembly::AsIs);
  const ContrastSystem full = assemble_system(net, het, Assembly::Embed);
  const FitResult fa = fit(reduced);
  const FitResult fb = fit(full);

  EquivalenceReport rep;
  rep.max_dtheta =
      (fa.fit.theta_hat - fb.fit.theta_hat).lpNorm<Eigen::Infinity>();
  rep.max_dinfo = (fa.op.info - fb.op.info).lpNorm<Eigen::Infinity>();
  rep.pass = rep.max_dtheta <= tol && rep.max_dinfo <= tol;
  return rep;
}

}  // namespace cspnma

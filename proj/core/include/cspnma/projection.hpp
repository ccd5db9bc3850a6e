#pragma once

#include <string>
#include <vector>

#include "cspnma/contrast_system.hpp"

namespace cspnma {

// Fisher information of the constrained GLS problem, projected onto the
// consistency subspace, together with its pseudoinverse and the blockwise
// pseudoinverse of the observation covariance. Rows of the projection
// mapping are materialized lazily per target (see potential_flow).
struct ProjectionOperator {
  Matrix info;        // m x m, symmetric PSD, rank T-1
  Matrix info_pinv;
  RankInfo info_rank;
  BlockDiag v_pinv;
  std::vector<RankInfo> v_ranks;
  int rank_v = 0;
};

struct NmaFit {
  Vector theta_hat;  // all m pairwise estimates
  Matrix cov_theta;  // == info_pinv
  Vector fitted;     // design rows evaluated at theta_hat
  Vector residual;
};

struct FitResult {
  ProjectionOperator op;
  NmaFit fit;
};

// Constrained GLS fit of the stacked system. Throws DegenerateInformation
// when the information rank falls below T-1.
FitResult fit(const ContrastSystem& sys, double rel_tol = kPinvRelTol);

// Potential vector u (over contrast columns) and observation-space
// coefficient row p for one target comparison; p'y equals the target
// estimate.
struct PotentialFlow {
  Vector u;
  Vector p;
};
PotentialFlow potential_flow(const ProjectionOperator& op,
                             const ContrastSystem& sys, ContrastId target);

// Split of the estimate into rows observing the target pair directly and
// everything else.
struct StructuralSplit {
  double direct = 0.0;
  double indirect = 0.0;
  bool has_direct_rows = false;
};
StructuralSplit structural_split(const Vector& p, const ContrastSystem& sys,
                                 ContrastId target);

struct StudyContribution {
  std::string study_id;
  ContrastId target;
  Vector coeff;   // coefficient slice over the study's contrasts
  double value;   // coeff' y_k
};
std::vector<StudyContribution> study_contributions(const ProjectionOperator& op,
                                                   const ContrastSystem& sys,
                                                   ContrastId target);
std::vector<StudyContribution> study_contributions(const PotentialFlow& flow,
                                                   const ContrastSystem& sys,
                                                   ContrastId target);

// Dual fit of the same network in its as-given representation (basic
// blocks inverted directly) and in the embedded full-pairwise
// representation; both must agree.
struct EquivalenceReport {
  double max_dtheta = 0.0;
  double max_dinfo = 0.0;
  bool pass = false;
};
EquivalenceReport equivalence_check(const TreatmentNetwork& net,
                                    const HeterogeneitySpec& het = {},
                                    double tol = 1e-9);

}  // namespace cspnma

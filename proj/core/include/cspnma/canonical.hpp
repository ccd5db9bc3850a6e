#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cspnma/projection.hpp"

namespace cspnma {

// Edge weights at or below this threshold count as exhausted during path
// extraction.
inline constexpr double kFlowEps = 1e-12;

struct FlowEdge {
  int from = 0;
  int to = 0;
  double weight = 0.0;
  int study = -1;  // index into ContrastSystem::studies; -1 inside one study
};

struct StudyFlowGraph {
  std::string study_id;
  std::vector<int> nodes;
  std::vector<FlowEdge> edges;
};

// Within-study collapse: the signed coefficient vector is read as a
// directed weighted graph, source-to-sink heaviest (bottleneck-maximal)
// paths are extracted and each is collapsed to its endpoint edge.
struct CollapseResult {
  // Signed coefficient per pair; positive means low -> high.
  std::map<ContrastId, double> canonical;
  double w_direct = 0.0;
  double residual_mass = 0.0;
};
CollapseResult collapse(const Vector& study_coeff, const StudyBlock& study,
                        ContrastId target, double flow_eps = kFlowEps);

struct CanonicalStudyComponent {
  std::string study_id;
  ContrastId target;
  double direct_weight = 0.0;    // w_{ab,k}
  double direct_value = 0.0;     // w * y_ab
  double direct_variance = 0.0;  // w^2 * sigma^2
  double estimate = 0.0;         // y_ab,k in the full representation
  double variance = 0.0;         // sigma^2_ab,k
};

struct StudyPath {
  std::vector<int> nodes;            // a = v0, ..., vL = b; distinct
  std::vector<int> segment_studies;  // study index per segment
  double weight = 0.0;
  double delta = 0.0;     // sum of directed segment contrasts
  double variance = 0.0;  // Var(delta), within-study covariance included
};

struct CanonicalDecomposition {
  ContrastId target;
  double theta_hat = 0.0;
  double var_nma = 0.0;  // effective-resistance variance of the estimate
  std::vector<CanonicalStudyComponent> direct;
  std::vector<StudyPath> paths;
  double w_dir = 0.0;
  double w_ind = 0.0;
  std::optional<double> theta_dir;
  std::optional<double> theta_ind;
  double var_c_dir = 0.0;  // Var of the direct contribution sum
  double var_c_ind = 0.0;  // Var of the path contribution sum
  double residual_mass = 0.0;
};

// Full canonical decomposition for one target: per-study collapse, pooled
// cross-study path extraction, and verification of the normalization and
// reconstruction identities (DecompositionFailure beyond 1e-6).
CanonicalDecomposition decompose(const ProjectionOperator& op,
                                 const ContrastSystem& sys, ContrastId target,
                                 double flow_eps = kFlowEps);

// Decompositions for several targets, optionally fanned out across
// worker threads; output order follows the input target order and is
// independent of the schedule.
std::vector<CanonicalDecomposition> decompose_all(
    const ProjectionOperator& op, const ContrastSystem& sys,
    const std::vector<ContrastId>& targets, int threads = 1,
    double flow_eps = kFlowEps);

struct Aggregates {
  std::optional<double> theta_dir;
  std::optional<double> theta_ind;
  double var_dir = 0.0;  // Var(theta_dir) when defined
  double var_ind = 0.0;
  double var_nma = 0.0;
  double w_dir = 0.0;
  double w_ind = 0.0;
};
Aggregates aggregate(const CanonicalDecomposition& dec);

}  // namespace cspnma

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cspnma/canonical.hpp"

namespace cspnma {

// Upper-tail probability of the chi-square distribution, via the
// regularized incomplete gamma function.
double chi2_sf(double x, int df);

// Standard normal CDF and quantile (Wichura's PPND16 algorithm).
double normal_cdf(double x);
double normal_quantile(double p);

struct QResult {
  double q = 0.0;
  int df = 0;
  double p_value = 1.0;
  bool no_inconsistency_df = false;
  bool approximate = false;  // plug-in tau^2 under random effects
};

// Global inconsistency test Q = r' V^+ r with df = rank(V) - (T-1).
QResult q_test(const NmaFit& fit, const ContrastSystem& sys,
               const ProjectionOperator& op, bool random_effects = false);
QResult q_test(const NmaFit& fit, const ContrastSystem& sys,
               bool random_effects = false);

enum class RowKind {
  DirectStudy,
  IndirectPath,
  DirectSummary,
  IndirectSummary,
  Network
};
const char* to_string(RowKind kind);

struct ForestRow {
  RowKind kind;
  std::string label;
  std::string path;  // "A->C->B" arrows for path rows, empty otherwise
  double estimate = 0.0;  // normalized display form
  double ci_low = 0.0;
  double ci_high = 0.0;
  double weight = 0.0;
  double weight_pct = 0.0;
  double contrib = 0.0;  // contribution form w * estimate
  double contrib_ci_low = 0.0;
  double contrib_ci_high = 0.0;
};

// Forest rows for one target: direct studies, indirect paths, the two
// summary rows and the network row. Throws EmptyTarget when the
// decomposition carries no components.
std::vector<ForestRow> forest(const CanonicalDecomposition& dec,
                              const ContrastSystem& sys, double alpha = 0.05);

struct TensionComponent {
  double estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double weight = 0.0;
};

struct TensionRow {
  ContrastId target;
  std::string label;  // "X vs BASE"
  std::optional<TensionComponent> dir;
  std::optional<TensionComponent> ind;
  TensionComponent nma;
};

// One row per comparison against the baseline treatment, sharing the
// decompositions already computed for those targets. Estimates are
// reported as "other vs baseline".
std::vector<TensionRow> tension(const std::vector<CanonicalDecomposition>& decs,
                                const ContrastSystem& sys, int baseline,
                                double alpha = 0.05);

}  // namespace cspnma

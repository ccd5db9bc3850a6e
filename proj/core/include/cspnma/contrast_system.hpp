#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cspnma/network.hpp"

namespace cspnma {

struct StudySlice {
  std::string study_id;
  int begin = 0;
  int end = 0;  // past-the-end row
};

// Stacked full-contrast observation system. Every design row is an
// indicator of one canonical contrast column, so the design matrix is
// represented by `row_pair` instead of being materialized.
struct ContrastSystem {
  int n_treatments = 0;
  std::vector<std::string> labels;     // canonical treatment labels
  Vector y;
  std::vector<int> row_pair;           // row -> contrast column
  BlockDiag v;
  std::vector<StudySlice> slices;      // input study order
  std::vector<StudyBlock> studies;     // the blocks actually stacked
  bool embedded = true;                // all blocks in full-pairwise form

  int rows() const { return static_cast<int>(y.size()); }
  int columns() const { return pair_count(n_treatments); }
  std::string target_label(ContrastId c) const {
    return labels[c.low] + ":" + labels[c.high];
  }
};

// Expands a study to the full-pairwise representation. Returns the
// expanded block together with the expansion matrix mapping the input
// contrasts to the full set; a full-pairwise input returns itself with
// the identity.
std::pair<StudyBlock, Matrix> embed_full(const StudyBlock& sb);

// Adds the between-study variance component: tau^2 on every contrast
// variance and +-tau^2/2 on contrast pairs sharing one treatment, signs
// following the stored orientation. Works on either representation.
StudyBlock apply_heterogeneity(StudyBlock sb, double tau2);

// All (T choose 3) triangle relations theta_ac - theta_ab - theta_bc = 0;
// rows are a deterministic generating set of the consistency constraints.
Matrix consistency_matrix(int n_treatments);

// Orthogonal projector onto the null space of the consistency constraints
// (the subspace of contrast vectors induced by treatment-level potentials).
Matrix consistency_projector(int n_treatments);

enum class Assembly { Embed, AsIs };

// Validates the network (connectivity, duplicate study ids), applies the
// heterogeneity spec, and stacks studies in input order with contrasts in
// canonical order inside each study.
ContrastSystem assemble_system(const TreatmentNetwork& net,
                               const HeterogeneitySpec& het = {},
                               Assembly mode = Assembly::Embed);

}  // namespace cspnma

#pragma once

#include <compare>
#include <optional>
#include <string>
#include <vector>

#include "cspnma/linalg.hpp"

namespace cspnma {

struct Treatment {
  std::string id;
  int index = 0;  // position in the canonical (lexicographic) ordering
};

// Pairwise comparison in canonical orientation: the stored effect is the
// effect of `high` relative to `low`, with low < high in the canonical
// treatment ordering.
struct ContrastId {
  int low = 0;
  int high = 0;

  friend auto operator<=>(const ContrastId&, const ContrastId&) = default;
};

// Number of pairwise contrasts among n treatments.
int pair_count(int n_treatments);

// Column index of a canonical pair under lexicographic ordering
// (0,1), (0,2), ..., (T-2,T-1).
int pair_index(ContrastId c, int n_treatments);
ContrastId pair_at(int index, int n_treatments);

enum class Representation { Basic, FullPairwise };

// One study's observed contrasts with their within-study covariance.
// Contrasts are stored in canonical orientation and canonical order;
// inputs in the opposite orientation are sign-flipped on ingestion.
struct StudyBlock {
  std::string study_id;
  std::vector<int> treatments;         // S_k, ascending
  std::vector<ContrastId> contrasts;   // canonical order
  Vector effects;
  Matrix cov;
  Representation representation = Representation::FullPairwise;
  int baseline = -1;  // treatment index; Basic representation only

  int arms() const { return static_cast<int>(treatments.size()); }
  int size() const { return static_cast<int>(contrasts.size()); }
  // Position of a pair in `contrasts`, or -1.
  int local_index(ContrastId c) const;
};

// Sorts contrasts canonically (permuting effects and covariance rows along)
// and derives the treatment set. Throws MalformedStudy on duplicates or
// malformed shapes.
void canonicalize(StudyBlock& sb);

struct TreatmentNetwork {
  std::vector<Treatment> treatments;  // sorted by label
  std::vector<StudyBlock> studies;

  int n_treatments() const { return static_cast<int>(treatments.size()); }
  // -1 when the label is unknown.
  int index_of(const std::string& label) const;
  const std::string& label(int index) const { return treatments[index].id; }
};

struct HeterogeneitySpec {
  enum class Mode { Fixed, RandomGiven, RandomEstimated };
  Mode mode = Mode::Fixed;
  double tau2 = 0.0;                // RandomGiven
  std::optional<double> tau2_hat;   // filled after estimation

  bool random() const { return mode != Mode::Fixed; }
  double effective_tau2() const;
};

}  // namespace cspnma

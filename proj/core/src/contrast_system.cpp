#include "cspnma/contrast_system.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

namespace cspnma {

namespace {

// Baseline of a basic block: the unique treatment shared by all contrasts.
int infer_baseline(const StudyBlock& sb) {
  if (sb.baseline >= 0) {
    for (const ContrastId& c : sb.contrasts)
      if (c.low != sb.baseline && c.high != sb.baseline)
        fail(ErrorCode::MalformedStudy,
             sb.study_id + ": contrast does not include the declared baseline");
    return sb.baseline;
  }
  std::set<int> shared{sb.contrasts.front().low, sb.contrasts.front().high};
  for (const ContrastId& c : sb.contrasts) {
    std::set<int> keep;
    if (shared.count(c.low)) keep.insert(c.low);
    if (shared.count(c.high)) keep.insert(c.high);
    shared = std::move(keep);
  }
  if (shared.empty())
    fail(ErrorCode::MalformedStudy,
         sb.study_id + ": inconsistent baseline labeling in basic block");
  // Two shared treatments can only happen for a single contrast; either
  // works, take the smaller for determinism.
  return *shared.begin();
}

}  // namespace

std::pair<StudyBlock, Matrix> embed_full(const StudyBlock& sb) {
  const int arms = sb.arms();
  const int full = arms * (arms - 1) / 2;

  if (sb.representation == Representation::FullPairwise) {
    if (sb.size() != full)
      fail(ErrorCode::MalformedStudy,
           sb.study_id + ": full representation must list all pairs");
    return {sb, Matrix::Identity(full, full)};
  }

  if (sb.size() != arms - 1)
    fail(ErrorCode::MalformedStudy,
         sb.study_id + ": basic representation must list arms-1 contrasts");
  const int base = infer_baseline(sb);

  // Orientation sign of each stored contrast relative to "vs baseline":
  // +1 when the stored effect already reads other-vs-baseline.
  std::map<int, int> basic_of;  // non-baseline treatment -> stored row
  std::vector<double> sign(sb.size());
  for (int j = 0; j < sb.size(); ++j) {
    const ContrastId& c = sb.contrasts[j];
    const int other = (c.low == base) ? c.high : c.low;
    if (other == base || basic_of.count(other))
      fail(ErrorCode::MalformedStudy,
           sb.study_id + ": inconsistent baseline labeling");
    basic_of[other] = j;
    sign[j] = (c.low == base) ? 1.0 : -1.0;
  }

  StudyBlock out;
  out.study_id = sb.study_id;
  out.treatments = sb.treatments;
  out.representation = Representation::FullPairwise;
  out.baseline = -1;

  Matrix a = Matrix::Zero(full, sb.size());
  out.contrasts.reserve(full);
  int row = 0;
  for (int i = 0; i < arms; ++i) {
    for (int j = i + 1; j < arms; ++j, ++row) {
      const int u = sb.treatments[i], v = sb.treatments[j];
      out.contrasts.push_back({u, v});
      if (v != base) a(row, basic_of[v]) += sign[basic_of[v]];
      if (u != base) a(row, basic_of[u]) -= sign[basic_of[u]];
    }
  }
  out.effects = a * sb.effects;
  out.cov = symmetrized(a * sb.cov * a.transpose());
  return {std::move(out), std::move(a)};
}

StudyBlock apply_heterogeneity(StudyBlock sb, double tau2) {
  if (tau2 == 0.0) return sb;
  const int n = sb.size();
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      const ContrastId& ci = sb.contrasts[i];
      const ContrastId& cj = sb.contrasts[j];
      // Gram matrix of the arm-incidence vectors (+1 at high, -1 at low).
      const int g = (ci.high == cj.high) - (ci.high == cj.low) -
                    (ci.low == cj.high) + (ci.low == cj.low);
      if (g == 0) continue;
      const double add = 0.5 * tau2 * g;
      sb.cov(i, j) += add;
      if (i != j) sb.cov(j, i) += add;
    }
  }
  return sb;
}

Matrix consistency_matrix(int n_treatments) {
  const int m = pair_count(n_treatments);
  const int triples =
      n_treatments * (n_treatments - 1) * (n_treatments - 2) / 6;
  Matrix c = Matrix::Zero(triples, m);
  int row = 0;
  for (int a = 0; a < n_treatments; ++a)
    for (int b = a + 1; b < n_treatments; ++b)
      for (int d = b + 1; d < n_treatments; ++d, ++row) {
        c(row, pair_index({a, d}, n_treatments)) = 1.0;
        c(row, pair_index({a, b}, n_treatments)) = -1.0;
        c(row, pair_index({b, d}, n_treatments)) = -1.0;
      }
  return c;
}

Matrix consistency_projector(int n_treatments) {
  const int m = pair_count(n_treatments);
  Matrix p(m, m);
  const double scale = 1.0 / n_treatments;
  for (int i = 0; i < m; ++i) {
    const ContrastId ci = pair_at(i, n_treatments);
    for (int j = 0; j < m; ++j) {
      const ContrastId cj = pair_at(j, n_treatments);
      const int g = (ci.high == cj.high) - (ci.high == cj.low) -
                    (ci.low == cj.high) + (ci.low == cj.low);
      p(i, j) = scale * g;
    }
  }
  return p;
}

ContrastSystem assemble_system(const TreatmentNetwork& net,
                               const HeterogeneitySpec& het, Assembly mode) {
  const int T = net.n_treatments();
  if (T < 2) fail(ErrorCode::MalformedStudy, "network needs two treatments");
  for (int i = 0; i + 1 < T; ++i)
    if (!(net.treatments[i].id < net.treatments[i + 1].id))
      fail(ErrorCode::MalformedStudy, "treatment labels must be unique and sorted");
  if (net.studies.empty())
    fail(ErrorCode::MalformedStudy, "network has no studies");

  std::set<std::string> seen;
  for (const StudyBlock& sb : net.studies)
    if (!seen.insert(sb.study_id).second)
      fail(ErrorCode::MalformedStudy, "duplicate study id: " + sb.study_id);

  // Connectivity of the evidence graph via union-find.
  std::vector<int> parent(T);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const StudyBlock& sb : net.studies) {
    for (int t : sb.treatments) {
      if (t < 0 || t >= T)
        fail(ErrorCode::MalformedStudy, sb.study_id + ": unknown treatment index");
      parent[find(t)] = find(sb.treatments.front());
    }
  }
  for (int t = 1; t < T; ++t)
    if (find(t) != find(0))
      fail(ErrorCode::DisconnectedNetwork, "evidence graph is not connected");

  const double tau2 = het.effective_tau2();

  ContrastSystem sys;
  sys.n_treatments = T;
  sys.labels.reserve(T);
  for (const Treatment& t : net.treatments) sys.labels.push_back(t.id);
  sys.embedded = (mode == Assembly::Embed);

  std::vector<double> y;
  for (const StudyBlock& input : net.studies) {
    StudyBlock block =
        (mode == Assembly::Embed) ? embed_full(input).first : input;
    block = apply_heterogeneity(std::move(block), tau2);

    StudySlice slice;
    slice.study_id = block.study_id;
    slice.begin = static_cast<int>(y.size());
    for (int j = 0; j < block.size(); ++j) {
      y.push_back(block.effects(j));
      sys.row_pair.push_back(pair_index(block.contrasts[j], T));
    }
    slice.end = static_cast<int>(y.size());
    sys.slices.push_back(std::move(slice));
    sys.v.append(block.cov);
    sys.studies.push_back(std::move(block));
  }
  sys.y = Eigen::Map<Vector>(y.data(), static_cast<Eigen::Index>(y.size()));
  return sys;
}

}  // namespace cspnma

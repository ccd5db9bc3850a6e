#include "cspnma/network.hpp"

#include <algorithm>
#include <numeric>
#include <set>

namespace cspnma {

int pair_count(int n_treatments) { return n_treatments * (n_treatments - 1) / 2; }

int pair_index(ContrastId c, int n_treatments) {
  const int a = c.low, b = c.high;
  return a * (n_treatments - 1) - a * (a - 1) / 2 + (b - a - 1);
}

ContrastId pair_at(int index, int n_treatments) {
  for (int a = 0; a < n_treatments - 1; ++a) {
    const int here = n_treatments - 1 - a;
    if (index < here) return {a, a + 1 + index};
    index -= here;
  }
  fail(ErrorCode::UnknownContrast, "pair_at: index out of range");
}

int StudyBlock::local_index(ContrastId c) const {
  auto it = std::lower_bound(contrasts.begin(), contrasts.end(), c);
  if (it == contrasts.end() || *it != c) return -1;
  return static_cast<int>(it - contrasts.begin());
}

void canonicalize(StudyBlock& sb) {
  const int n = sb.size();
  if (n < 1) fail(ErrorCode::MalformedStudy, sb.study_id + ": no contrasts");
  if (sb.effects.size() != n || sb.cov.rows() != n || sb.cov.cols() != n)
    fail(ErrorCode::MalformedStudy, sb.study_id + ": contrast/cov size mismatch");

  for (const ContrastId& c : sb.contrasts)
    if (!(c.low < c.high))
      fail(ErrorCode::MalformedStudy, sb.study_id + ": non-canonical contrast");

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int i, int j) {
    return sb.contrasts[i] < sb.contrasts[j];
  });
  for (int i = 0; i + 1 < n; ++i)
    if (sb.contrasts[order[i]] == sb.contrasts[order[i + 1]])
      fail(ErrorCode::MalformedStudy, sb.study_id + ": duplicate contrast");

  std::vector<ContrastId> contrasts(n);
  Vector effects(n);
  Matrix cov(n, n);
  for (int i = 0; i < n; ++i) {
    contrasts[i] = sb.contrasts[order[i]];
    effects(i) = sb.effects(order[i]);
    for (int j = 0; j < n; ++j) cov(i, j) = sb.cov(order[i], order[j]);
  }
  sb.contrasts = std::move(contrasts);
  sb.effects = std::move(effects);
  sb.cov = symmetrized(cov);

  std::set<int> arms;
  for (const ContrastId& c : sb.contrasts) {
    arms.insert(c.low);
    arms.insert(c.high);
  }
  sb.treatments.assign(arms.begin(), arms.end());
  if (sb.arms() < 2)
    fail(ErrorCode::MalformedStudy, sb.study_id + ": fewer than two arms");
}

int TreatmentNetwork::index_of(const std::string& label) const {
  for (const Treatment& t : treatments)
    if (t.id == label) return t.index;
  return -1;
}

double HeterogeneitySpec::effective_tau2() const {
  switch (mode) {
    case Mode::Fixed:
      return 0.0;
    case Mode::RandomGiven:
      return tau2;
    case Mode::RandomEstimated:
      if (!tau2_hat)
        throw std::logic_error("tau2 requested before estimation");
      return *tau2_hat;
  }
  return 0.0;
}

}  // namespace cspnma

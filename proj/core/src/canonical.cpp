#include "cspnma/canonical.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

namespace cspnma {

namespace {

constexpr int kInf = std::numeric_limits<int>::max();

struct PathPick {
  bool found = false;
  double bottleneck = 0.0;
  std::vector<int> nodes;
  std::vector<size_t> edge_ids;
};

bool reach(const std::vector<FlowEdge>& edges, double eps, double wmin,
           int n_nodes, const std::vector<char>& is_source,
           const std::vector<char>& is_sink) {
  std::vector<std::vector<int>> adj(n_nodes);
  for (const FlowEdge& e : edges)
    if (e.weight > eps && e.weight >= wmin) adj[e.from].push_back(e.to);
  std::vector<char> seen(n_nodes, 0);
  std::vector<int> queue;
  for (int u = 0; u < n_nodes; ++u)
    if (is_source[u]) {
      seen[u] = 1;
      queue.push_back(u);
    }
  for (size_t qi = 0; qi < queue.size(); ++qi) {
    const int u = queue[qi];
    if (is_sink[u]) return true;
    for (int v : adj[u])
      if (!seen[v]) {
        seen[v] = 1;
        queue.push_back(v);
      }
  }
  return false;
}

// Deterministic heaviest feasible path: maximize the bottleneck weight
// (binary search over edge weights plus reachability), then among paths at
// that bottleneck take the shortest, breaking remaining ties by the
// lexicographically smallest node sequence and then the smallest study
// sequence.
PathPick widest_path(const std::vector<FlowEdge>& edges, double eps,
                     int n_nodes, const std::vector<char>& is_source,
                     const std::vector<char>& is_sink) {
  PathPick out;

  std::vector<double> weights;
  for (const FlowEdge& e : edges)
    if (e.weight > eps) weights.push_back(e.weight);
  if (weights.empty()) return out;
  std::sort(weights.begin(), weights.end());
  weights.erase(std::unique(weights.begin(), weights.end()), weights.end());

  // Largest threshold that keeps a source-to-sink route alive.
  int lo = 0, hi = static_cast<int>(weights.size()) - 1, best = -1;
  while (lo <= hi) {
    const int mid = (lo + hi) / 2;
    if (reach(edges, eps, weights[mid], n_nodes, is_source, is_sink)) {
      best = mid;
      lo = mid + 1;
    } else {
      hi = mid - 1;
    }
  }
  if (best < 0) return out;
  const double wmin = weights[best];

  std::vector<std::vector<int>> radj(n_nodes);
  for (const FlowEdge& e : edges)
    if (e.weight > eps && e.weight >= wmin) radj[e.to].push_back(e.from);

  std::vector<int> dist(n_nodes, kInf);
  std::vector<int> queue;
  for (int u = 0; u < n_nodes; ++u)
    if (is_sink[u]) {
      dist[u] = 0;
      queue.push_back(u);
    }
  for (size_t qi = 0; qi < queue.size(); ++qi) {
    const int u = queue[qi];
    for (int v : radj[u])
      if (dist[v] == kInf) {
        dist[v] = dist[u] + 1;
        queue.push_back(v);
      }
  }

  int start = -1, best_len = kInf;
  for (int u = 0; u < n_nodes; ++u)
    if (is_source[u] && dist[u] < best_len) {
      best_len = dist[u];
      start = u;
    }
  if (start < 0) return out;

  // Greedy walk along exact distances yields the lexicographically
  // smallest shortest node sequence.
  out.found = true;
  out.bottleneck = std::numeric_limits<double>::infinity();
  out.nodes.push_back(start);
  int u = start;
  while (dist[u] > 0) {
    int next = -1;
    size_t next_edge = 0;
    for (size_t ei = 0; ei < edges.size(); ++ei) {
      const FlowEdge& e = edges[ei];
      if (e.from != u || e.weight <= eps || e.weight < wmin) continue;
      if (dist[e.to] != dist[u] - 1) continue;
      if (next == -1 || e.to < next ||
          (e.to == next && e.study < edges[next_edge].study)) {
        next = e.to;
        next_edge = ei;
      }
    }
    if (next == -1)
      fail(ErrorCode::DecompositionFailure,
           "path walk lost the route computed by reachability");
    out.bottleneck = std::min(out.bottleneck, edges[next_edge].weight);
    out.edge_ids.push_back(next_edge);
    out.nodes.push_back(next);
    u = next;
  }
  return out;
}

double live_mass(const std::vector<FlowEdge>& edges, double eps) {
  double total = 0.0;
  for (const FlowEdge& e : edges)
    if (e.weight > eps) total += e.weight;
  return total;
}

void endpoint_status(const std::vector<FlowEdge>& edges, double eps,
                     int n_nodes, std::vector<char>& is_source,
                     std::vector<char>& is_sink) {
  std::vector<char> has_out(n_nodes, 0), has_in(n_nodes, 0);
  for (const FlowEdge& e : edges) {
    if (e.weight <= eps) continue;
    has_out[e.from] = 1;
    has_in[e.to] = 1;
  }
  for (int u = 0; u < n_nodes; ++u) {
    is_source[u] = has_out[u] && !has_in[u];
    is_sink[u] = has_in[u] && !has_out[u];
  }
}

}  // namespace

CollapseResult collapse(const Vector& study_coeff, const StudyBlock& study,
                        ContrastId target, double flow_eps) {
  if (study.representation != Representation::FullPairwise ||
      study.size() != study.arms() * (study.arms() - 1) / 2)
    fail(ErrorCode::DimError, "collapse requires a full-pairwise study block");
  if (study_coeff.size() != study.size())
    fail(ErrorCode::DimError, "collapse: coefficient size mismatch");

  // Membership in the within-study consistency subspace: the coefficient
  // vector must satisfy every triangle identity over the study's arms.
  const double max_abs = study_coeff.lpNorm<Eigen::Infinity>();
  const double subspace_tol = 1e-7 * std::max(1.0, max_abs);
  const int arms = study.arms();
  for (int i = 0; i < arms; ++i)
    for (int j = i + 1; j < arms; ++j)
      for (int l = j + 1; l < arms; ++l) {
        const int u = study.treatments[i], v = study.treatments[j],
                  w = study.treatments[l];
        const double viol =
            study_coeff(study.local_index({u, w})) -
            study_coeff(study.local_index({u, v})) -
            study_coeff(study.local_index({v, w}));
        if (std::abs(viol) > subspace_tol)
          fail(ErrorCode::NotInConsistencySubspace,
               study.study_id + ": coefficient violates triangle identity by " +
                   std::to_string(viol));
      }

  const int n_nodes = study.treatments.back() + 1;
  std::vector<FlowEdge> edges;
  for (int j = 0; j < study.size(); ++j) {
    const double c = study_coeff(j);
    const ContrastId& pair = study.contrasts[j];
    if (c > flow_eps)
      edges.push_back({pair.low, pair.high, c, -1});
    else if (c < -flow_eps)
      edges.push_back({pair.high, pair.low, -c, -1});
  }

  CollapseResult out;
  std::vector<char> is_source(n_nodes, 0), is_sink(n_nodes, 0);
  while (true) {
    if (live_mass(edges, flow_eps) <= 0.0) break;
    endpoint_status(edges, flow_eps, n_nodes, is_source, is_sink);
    PathPick pick = widest_path(edges, flow_eps, n_nodes, is_source, is_sink);
    if (!pick.found) {
      // Circulation has no source-to-sink route; report it, do not spin.
      out.residual_mass += live_mass(edges, flow_eps);
      break;
    }
    const double w = pick.bottleneck;
    for (size_t ei : pick.edge_ids) {
      edges[ei].weight -= w;
      if (edges[ei].weight <= flow_eps) edges[ei].weight = 0.0;
    }
    const int v0 = pick.nodes.front(), vl = pick.nodes.back();
    const ContrastId pair = v0 < vl ? ContrastId{v0, vl} : ContrastId{vl, v0};
    out.canonical[pair] += (v0 < vl) ? w : -w;
  }

  auto it = out.canonical.find(target);
  if (it != out.canonical.end()) out.w_direct = it->second;
  return out;
}

CanonicalDecomposition decompose(const ProjectionOperator& op,
                                 const ContrastSystem& sys, ContrastId target,
                                 double flow_eps) {
  if (!sys.embedded)
    fail(ErrorCode::DimError, "decompose requires the embedded system");

  const PotentialFlow flow = potential_flow(op, sys, target);
  const int col = pair_index(target, sys.n_treatments);

  CanonicalDecomposition dec;
  dec.target = target;
  dec.theta_hat = flow.p.dot(sys.y);
  dec.var_nma = op.info_pinv(col, col);

  std::vector<FlowEdge> pool;
  for (size_t k = 0; k < sys.studies.size(); ++k) {
    const StudySlice& sl = sys.slices[k];
    const StudyBlock& study = sys.studies[k];
    const int len = sl.end - sl.begin;
    const Vector coeff = flow.p.segment(sl.begin, len);
    if (coeff.lpNorm<Eigen::Infinity>() <= flow_eps) continue;

    CollapseResult cr = collapse(coeff, study, target, flow_eps);
    dec.residual_mass += cr.residual_mass;

    if (std::abs(cr.w_direct) > flow_eps) {
      const int local = study.local_index(target);
      CanonicalStudyComponent comp;
      comp.study_id = study.study_id;
      comp.target = target;
      comp.direct_weight = cr.w_direct;
      comp.estimate = study.effects(local);
      comp.variance = study.cov(local, local);
      comp.direct_value = cr.w_direct * comp.estimate;
      comp.direct_variance = cr.w_direct * cr.w_direct * comp.variance;
      dec.direct.push_back(std::move(comp));
    }
    for (const auto& [pair, c] : cr.canonical) {
      if (pair == target || std::abs(c) <= flow_eps) continue;
      if (c > 0)
        pool.push_back({pair.low, pair.high, c, static_cast<int>(k)});
      else
        pool.push_back({pair.high, pair.low, -c, static_cast<int>(k)});
    }
  }

  // Cross-study extraction of a->b paths from the pooled multigraph.
  std::vector<char> is_source(sys.n_treatments, 0), is_sink(sys.n_treatments, 0);
  is_source[target.low] = 1;
  is_sink[target.high] = 1;
  while (true) {
    PathPick pick =
        widest_path(pool, flow_eps, sys.n_treatments, is_source, is_sink);
    if (!pick.found) break;
    const double w = pick.bottleneck;
    StudyPath path;
    path.nodes = pick.nodes;
    path.weight = w;
    for (size_t ei : pick.edge_ids) {
      path.segment_studies.push_back(pool[ei].study);
      pool[ei].weight -= w;
      if (pool[ei].weight <= flow_eps) pool[ei].weight = 0.0;
    }
    dec.paths.push_back(std::move(path));
  }
  dec.residual_mass += live_mass(pool, flow_eps);

  // Path contrasts and variances; segments from the same study carry their
  // within-study covariance.
  for (StudyPath& path : dec.paths) {
    const int segs = static_cast<int>(path.segment_studies.size());
    std::vector<int> local(segs);
    std::vector<double> sign(segs);
    for (int l = 0; l < segs; ++l) {
      const int u = path.nodes[l], v = path.nodes[l + 1];
      const ContrastId pair = u < v ? ContrastId{u, v} : ContrastId{v, u};
      const StudyBlock& study = sys.studies[path.segment_studies[l]];
      local[l] = study.local_index(pair);
      sign[l] = (u < v) ? 1.0 : -1.0;
      path.delta += sign[l] * study.effects(local[l]);
      path.variance += study.cov(local[l], local[l]);
      for (int l2 = 0; l2 < l; ++l2)
        if (path.segment_studies[l2] == path.segment_studies[l])
          path.variance +=
              2.0 * sign[l] * sign[l2] * study.cov(local[l], local[l2]);
    }
  }

  double c_dir = 0.0, c_ind = 0.0;
  for (const CanonicalStudyComponent& comp : dec.direct) {
    dec.w_dir += comp.direct_weight;
    c_dir += comp.direct_value;
    dec.var_c_dir += comp.direct_variance;
  }
  for (const StudyPath& path : dec.paths) {
    dec.w_ind += path.weight;
    c_ind += path.weight * path.delta;
    dec.var_c_ind += path.weight * path.weight * path.variance;
  }
  if (std::abs(dec.w_dir) > 1e-12) dec.theta_dir = c_dir / dec.w_dir;
  if (std::abs(dec.w_ind) > 1e-12) dec.theta_ind = c_ind / dec.w_ind;

  const double norm_gap = std::abs(dec.w_dir + dec.w_ind - 1.0);
  const double value_gap =
      std::abs(c_dir + c_ind - dec.theta_hat) /
      std::max(1.0, std::abs(dec.theta_hat));
  if (norm_gap > 1e-6 || value_gap > 1e-6)
    fail(ErrorCode::DecompositionFailure,
         sys.target_label(target) + ": reconstruction gap (norm " +
             std::to_string(norm_gap) + ", value " + std::to_string(value_gap) +
             ", residual mass " + std::to_string(dec.residual_mass) + ")");

  std::sort(dec.direct.begin(), dec.direct.end(),
            [](const CanonicalStudyComponent& a,
               const CanonicalStudyComponent& b) {
              if (a.direct_weight != b.direct_weight)
                return a.direct_weight > b.direct_weight;
              return a.study_id < b.study_id;
            });
  std::sort(dec.paths.begin(), dec.paths.end(),
            [](const StudyPath& a, const StudyPath& b) {
              if (a.weight != b.weight) return a.weight > b.weight;
              if (a.nodes.size() != b.nodes.size())
                return a.nodes.size() < b.nodes.size();
              if (a.nodes != b.nodes) return a.nodes < b.nodes;
              return a.segment_studies < b.segment_studies;
            });
  return dec;
}

std::vector<CanonicalDecomposition> decompose_all(
    const ProjectionOperator& op, const ContrastSystem& sys,
    const std::vector<ContrastId>& targets, int threads, double flow_eps) {
  const size_t n = targets.size();
  std::vector<CanonicalDecomposition> out(n);
  if (n == 0) return out;

  threads = std::max(1, std::min<int>(threads, static_cast<int>(n)));
  if (threads == 1) {
    for (size_t i = 0; i < n; ++i)
      out[i] = decompose(op, sys, targets[i], flow_eps);
    return out;
  }

  std::vector<std::exception_ptr> errors(n);
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    while (true) {
      const size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        out[i] = decompose(op, sys, targets[i], flow_eps);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> crew;
  crew.reserve(threads);
  for (int t = 0; t < threads; ++t) crew.emplace_back(worker);
  for (std::thread& t : crew) t.join();
  for (size_t i = 0; i < n; ++i)
    if (errors[i]) std::rethrow_exception(errors[i]);
  return out;
}

Aggregates aggregate(const CanonicalDecomposition& dec) {
  Aggregates agg;
  agg.w_dir = dec.w_dir;
  agg.w_ind = dec.w_ind;
  agg.var_nma = dec.var_nma;
  agg.theta_dir = dec.theta_dir;
  agg.theta_ind = dec.theta_ind;
  if (dec.theta_dir) agg.var_dir = dec.var_c_dir / (dec.w_dir * dec.w_dir);
  if (dec.theta_ind) agg.var_ind = dec.var_c_ind / (dec.w_ind * dec.w_ind);
  return agg;
}

}  // namespace cspnma

#include "cspnma/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>

namespace cspnma {

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return std::string(buf);
}

namespace {

Json meta_block(const ReportMeta& meta) {
  Json j;
  j["dataset"] = meta.dataset;
  j["mode"] = meta.mode;
  j["tau2"] = meta.tau2;
  if (meta.tau2_source.empty())
    j["tau2_source"] = nullptr;
  else
    j["tau2_source"] = meta.tau2_source;
  j["alpha"] = meta.alpha;
  return j;
}

std::string arrows(const std::vector<std::string>& nodes) {
  std::string out;
  for (size_t i = 0; i < nodes.size(); ++i) {
    if (i) out += "→";
    out += nodes[i];
  }
  return out;
}

Json path_entry(const StudyPath& path, const ContrastSystem& sys) {
  Json p;
  std::vector<std::string> nodes;
  for (int v : path.nodes) nodes.push_back(sys.labels[v]);
  Json studies = Json::array();
  for (int k : path.segment_studies)
    studies.push_back(sys.studies[k].study_id);
  p["nodes"] = nodes;
  p["path"] = arrows(nodes);
  p["studies"] = studies;
  p["weight"] = path.weight;
  p["delta"] = path.delta;
  p["variance"] = path.variance;
  p["contribution"] = path.weight * path.delta;
  return p;
}

Json target_entry(const CanonicalDecomposition& dec, const ContrastSystem& sys) {
  Json t;
  t["target"] = sys.target_label(dec.target);
  t["estimate"] = dec.theta_hat;
  t["variance"] = dec.var_nma;
  t["w_dir"] = dec.w_dir;
  t["w_ind"] = dec.w_ind;
  const Aggregates agg = aggregate(dec);
  t["theta_dir"] = agg.theta_dir ? Json(*agg.theta_dir) : Json(nullptr);
  t["theta_ind"] = agg.theta_ind ? Json(*agg.theta_ind) : Json(nullptr);
  t["var_theta_dir"] = agg.theta_dir ? Json(agg.var_dir) : Json(nullptr);
  t["var_theta_ind"] = agg.theta_ind ? Json(agg.var_ind) : Json(nullptr);
  t["residual_mass"] = dec.residual_mass;

  Json direct = Json::array();
  for (const CanonicalStudyComponent& comp : dec.direct) {
    Json d;
    d["study"] = comp.study_id;
    d["weight"] = comp.direct_weight;
    d["estimate"] = comp.estimate;
    d["variance"] = comp.variance;
    d["contribution"] = comp.direct_value;
    d["contribution_variance"] = comp.direct_variance;
    direct.push_back(std::move(d));
  }
  t["direct"] = std::move(direct);

  Json paths = Json::array();
  for (const StudyPath& path : dec.paths) paths.push_back(path_entry(path, sys));
  t["paths"] = std::move(paths);
  return t;
}

}  // namespace

Json fit_report(const ContrastSystem& sys, const FitResult& fr,
                const ReportMeta& meta) {
  Json j = meta_block(meta);
  j["treatments"] = sys.labels;
  j["n_studies"] = sys.studies.size();
  j["n_rows"] = sys.rows();
  j["rank_v"] = fr.op.rank_v;

  const double z = normal_quantile(1.0 - 0.5 * meta.alpha);
  Json estimates = Json::array();
  const int m = sys.columns();
  for (int col = 0; col < m; ++col) {
    const ContrastId c = pair_at(col, sys.n_treatments);
    const double est = fr.fit.theta_hat(col);
    const double var = fr.op.info_pinv(col, col);
    const double sd = std::sqrt(std::max(0.0, var));
    Json e;
    e["target"] = sys.target_label(c);
    e["estimate"] = est;
    e["variance"] = var;
    e["ci_low"] = est - z * sd;
    e["ci_high"] = est + z * sd;
    estimates.push_back(std::move(e));
  }
  j["estimates"] = std::move(estimates);
  return j;
}

Json decomposition_report(const ContrastSystem& sys,
                          const std::vector<CanonicalDecomposition>& decs,
                          const ReportMeta& meta, int top_n_paths) {
  Json j = meta_block(meta);
  if (top_n_paths > 0) {
    j["display_paths"] = top_n_paths;
    j["display_note"] =
        "path display capped; stored decomposition and weights stay complete";
  } else {
    j["display_paths"] = nullptr;
  }
  Json targets = Json::array();
  for (const CanonicalDecomposition& dec : decs)
    targets.push_back(target_entry(dec, sys));
  j["targets"] = std::move(targets);
  return j;
}

Json q_report(const QResult& q, const ContrastSystem& sys,
              const ReportMeta& meta) {
  Json j = meta_block(meta);
  j["n_treatments"] = sys.n_treatments;
  j["rank_v"] = q.df + sys.n_treatments - 1;
  j["q"] = q.q;
  j["df"] = q.df;
  j["p_value"] = q.p_value;
  j["p_label"] = q.approximate
                     ? "approximate (plug-in τ̂²)"
                     : "exact";
  j["no_inconsistency_df"] = q.no_inconsistency_df;
  return j;
}

Json paths_report(const ContrastSystem& sys,
                  const std::vector<CanonicalDecomposition>& decs,
                  const ReportMeta& meta, int top_n_paths) {
  Json j = meta_block(meta);
  Json targets = Json::array();
  for (const CanonicalDecomposition& dec : decs) {
    Json t;
    t["target"] = sys.target_label(dec.target);
    Json entries = Json::array();
    for (const CanonicalStudyComponent& comp : dec.direct) {
      Json e;
      e["type"] = "Dir";
      e["studies"] = Json::array({comp.study_id});
      e["path"] = sys.labels[dec.target.low] + "→" +
                  sys.labels[dec.target.high];
      e["weight"] = comp.direct_weight;
      entries.push_back(std::move(e));
    }
    int shown = 0;
    for (const StudyPath& path : dec.paths) {
      if (top_n_paths > 0 && shown >= top_n_paths) break;
      Json e = path_entry(path, sys);
      Json row;
      row["type"] = "Ind";
      row["studies"] = e["studies"];
      row["path"] = e["path"];
      row["weight"] = e["weight"];
      entries.push_back(std::move(row));
      ++shown;
    }
    t["entries"] = std::move(entries);
    t["n_paths_total"] = dec.paths.size();
    targets.push_back(std::move(t));
  }
  j["targets"] = std::move(targets);
  return j;
}

std::string decomposition_csv(const Json& report, int top_n_paths) {
  std::string out;
  if (top_n_paths > 0)
    out += "# paths truncated to top " + std::to_string(top_n_paths) +
           " by weight per target; weights normalize over the full set\n";
  out += "target,type,studies,path,weight\n";
  for (const Json& t : report.at("targets")) {
    const std::string target = t.at("target").get<std::string>();
    std::string direct_path = target;
    const size_t colon = direct_path.find(':');
    if (colon != std::string::npos)
      direct_path.replace(colon, 1, "→");
    for (const Json& d : t.at("direct")) {
      out += target + ",Dir," + d.at("study").get<std::string>() + "," +
             direct_path + "," +
             format_fixed(d.at("weight").get<double>(), 4) + "\n";
    }
    int shown = 0;
    for (const Json& p : t.at("paths")) {
      if (top_n_paths > 0 && shown >= top_n_paths) break;
      std::string studies;
      for (const Json& s : p.at("studies")) {
        if (!studies.empty()) studies += "/";
        studies += s.get<std::string>();
      }
      out += target + ",Ind," + studies + "," +
             p.at("path").get<std::string>() + "," +
             format_fixed(p.at("weight").get<double>(), 4) + "\n";
      ++shown;
    }
  }
  return out;
}

std::string weights_csv(const Json& report) {
  std::string out = "target,source,weight\n";
  for (const Json& t : report.at("targets")) {
    const std::string target = t.at("target").get<std::string>();
    for (const Json& d : t.at("direct"))
      out += target + "," + d.at("study").get<std::string>() + "," +
             format_double(d.at("weight").get<double>()) + "\n";
    out += target + ",indirect," +
           format_double(t.at("w_ind").get<double>()) + "\n";
  }
  return out;
}

Json forest_report(const CanonicalDecomposition& dec,
                   const ContrastSystem& sys, const ReportMeta& meta) {
  const std::vector<ForestRow> rows = forest(dec, sys, meta.alpha);

  Json j = meta_block(meta);
  j["kind"] = "forest";
  j["target"] = sys.target_label(dec.target);

  double x_min = rows.front().ci_low, x_max = rows.front().ci_high;
  Json rows_json = Json::array();
  for (const ForestRow& row : rows) {
    x_min = std::min(x_min, row.ci_low);
    x_max = std::max(x_max, row.ci_high);
    Json r;
    r["kind"] = to_string(row.kind);
    r["label"] = row.label;
    r["path"] = row.path;
    r["estimate"] = row.estimate;
    r["ci_low"] = row.ci_low;
    r["ci_high"] = row.ci_high;
    r["weight"] = row.weight;
    r["weight_pct"] = row.weight_pct;
    r["contribution"] = row.contrib;
    r["contribution_ci_low"] = row.contrib_ci_low;
    r["contribution_ci_high"] = row.contrib_ci_high;
    rows_json.push_back(std::move(r));
  }
  j["rows"] = std::move(rows_json);
  j["nma_estimate"] = dec.theta_hat;

  const int n = static_cast<int>(rows.size());
  double span = x_max - x_min;
  if (span <= 0.0) span = 1.0;
  Json layout;
  layout["width"] = 1200.0;
  layout["height"] = 40.0 * n + 160.0;
  layout["plot_x0"] = 430.0;
  layout["plot_x1"] = 1140.0;
  layout["x_min"] = x_min - 0.05 * span;
  layout["x_max"] = x_max + 0.05 * span;
  layout["row_y0"] = 120.0;
  layout["row_dy"] = 40.0;
  layout["marker_side_max"] = 18.0;
  j["layout"] = std::move(layout);
  return j;
}

Json tension_report(const std::vector<TensionRow>& rows,
                    const ContrastSystem& sys, int baseline,
                    const ReportMeta& meta) {
  Json j = meta_block(meta);
  j["kind"] = "tension";
  j["baseline"] = sys.labels[baseline];

  double x_min = 0.0, x_max = 0.0;
  auto component_json = [&](const TensionComponent& c) {
    x_min = std::min(x_min, c.ci_low);
    x_max = std::max(x_max, c.ci_high);
    Json e;
    e["estimate"] = c.estimate;
    e["ci_low"] = c.ci_low;
    e["ci_high"] = c.ci_high;
    e["weight"] = c.weight;
    return e;
  };

  Json rows_json = Json::array();
  for (const TensionRow& row : rows) {
    Json r;
    r["target"] = sys.target_label(row.target);
    r["label"] = row.label;
    r["nma"] = component_json(row.nma);
    r["dir"] = row.dir ? component_json(*row.dir) : Json(nullptr);
    r["ind"] = row.ind ? component_json(*row.ind) : Json(nullptr);
    rows_json.push_back(std::move(r));
  }
  j["rows"] = std::move(rows_json);

  const int n = static_cast<int>(rows.size());
  double span = x_max - x_min;
  if (span <= 0.0) span = 1.0;
  Json layout;
  layout["width"] = 1200.0;
  layout["height"] = 40.0 * n + 160.0;
  layout["plot_x0"] = 330.0;
  layout["plot_x1"] = 1140.0;
  layout["x_min"] = x_min - 0.05 * span;
  layout["x_max"] = x_max + 0.05 * span;
  layout["row_y0"] = 120.0;
  layout["row_dy"] = 40.0;
  layout["dir_dy"] = -10.0;
  layout["ind_dy"] = 10.0;
  layout["marker_r_max"] = 9.0;
  j["layout"] = std::move(layout);
  return j;
}

Json path_figure_report(const CanonicalDecomposition& dec,
                        const ContrastSystem& sys, const ReportMeta& meta,
                        int top_n_paths) {
  Json j = meta_block(meta);
  j["kind"] = "paths";
  j["target"] = sys.target_label(dec.target);

  const int n_direct = static_cast<int>(dec.direct.size());
  int n_paths = static_cast<int>(dec.paths.size());
  if (top_n_paths > 0) n_paths = std::min(n_paths, top_n_paths);
  const int rows = std::max(1, n_direct + n_paths);
  const double height = 40.0 * rows + 160.0;

  // Bipartite layout: endpoints left and right, intermediates on a middle
  // column ordered by canonical index.
  std::vector<int> middles;
  for (int t = 0; t < sys.n_treatments; ++t)
    if (t != dec.target.low && t != dec.target.high) middles.push_back(t);
  Json nodes = Json::array();
  std::vector<std::pair<double, double>> pos(sys.n_treatments, {0.0, 0.0});
  pos[dec.target.low] = {150.0, height / 2.0};
  pos[dec.target.high] = {1050.0, height / 2.0};
  for (size_t i = 0; i < middles.size(); ++i) {
    const double y =
        100.0 + (i + 1) * (height - 200.0) / (middles.size() + 1.0);
    pos[middles[i]] = {600.0, y};
  }
  for (int t = 0; t < sys.n_treatments; ++t) {
    Json node;
    node["label"] = sys.labels[t];
    node["x"] = pos[t].first;
    node["y"] = pos[t].second;
    node["endpoint"] = (t == dec.target.low || t == dec.target.high);
    nodes.push_back(std::move(node));
  }
  j["nodes"] = std::move(nodes);

  Json entries = Json::array();
  int row = 0;
  for (const CanonicalStudyComponent& comp : dec.direct) {
    Json e;
    e["type"] = "Dir";
    e["studies"] = Json::array({comp.study_id});
    e["weight"] = comp.direct_weight;
    e["width"] = std::max(0.75, 26.0 * std::abs(comp.direct_weight));
    // Direct edges bow through distinct control points to stay separable.
    const double bow = (row - 0.5 * (n_direct - 1)) * 30.0;
    Json pts = Json::array();
    pts.push_back(Json::array({pos[dec.target.low].first,
                               pos[dec.target.low].second}));
    pts.push_back(Json::array({600.0, height / 2.0 + bow}));
    pts.push_back(Json::array({pos[dec.target.high].first,
                               pos[dec.target.high].second}));
    e["points"] = std::move(pts);
    e["label_x"] = 600.0;
    e["label_y"] = height / 2.0 + bow - 6.0;
    entries.push_back(std::move(e));
    ++row;
  }
  for (int pi = 0; pi < n_paths; ++pi) {
    const StudyPath& path = dec.paths[pi];
    Json e = path_entry(path, sys);
    e["type"] = "Ind";
    e["width"] = std::max(0.75, 26.0 * path.weight);
    Json pts = Json::array();
    for (int v : path.nodes)
      pts.push_back(Json::array({pos[v].first, pos[v].second}));
    e["points"] = std::move(pts);
    const int mid = static_cast<int>(path.nodes.size()) / 2 - 1;
    const auto& a = pos[path.nodes[mid]];
    const auto& b = pos[path.nodes[mid + 1]];
    e["label_x"] = 0.5 * (a.first + b.first);
    e["label_y"] = 0.5 * (a.second + b.second) - 6.0 - 14.0 * pi;
    entries.push_back(std::move(e));
  }
  j["entries"] = std::move(entries);
  j["n_paths_total"] = dec.paths.size();

  Json layout;
  layout["width"] = 1200.0;
  layout["height"] = height;
  layout["node_radius"] = 26.0;
  j["layout"] = std::move(layout);
  return j;
}

}  // namespace cspnma

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "cspnma/canonical.hpp"
#include "cspnma/diagnostics.hpp"
#include "cspnma/ingest.hpp"
#include "cspnma/render.hpp"
#include "cspnma/report.hpp"
#include "cspnma/tau2.hpp"

namespace fs = std::filesystem;
using namespace cspnma;

namespace {

struct CliConfig {
  std::string contrasts;
  std::string cov;
  std::string arms;
  double tau2 = 0.0;
  bool tau2_given = false;
  bool estimate_tau2_flag = false;
  double alpha = 0.05;
  std::vector<std::string> targets;
  std::string baseline;
  std::string out = ".";
  std::string format = "json";
  int top_n_paths = 0;
  double correction = 0.5;
  bool strict_cov = true;
};

int worker_threads() {
  unsigned n = std::thread::hardware_concurrency();
  if (n == 0) n = 1;
  n = std::min(n, 8u);
  if (const char* env = std::getenv("CSPNMA_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) n = static_cast<unsigned>(std::min<long>(v, 256));
  }
  return static_cast<int>(n);
}

void add_common(CLI::App* cmd, CliConfig& cfg) {
  cmd->add_option("--contrasts", cfg.contrasts, "Contrast-level CSV input");
  cmd->add_option("--cov", cfg.cov, "Within-study covariance CSV");
  cmd->add_option("--arms", cfg.arms, "Arm-level binary-outcome CSV");
  cmd->add_option("--tau2", cfg.tau2, "Heterogeneity variance to plug in")
      ->check(CLI::NonNegativeNumber);
  cmd->add_flag("--estimate-tau2", cfg.estimate_tau2_flag,
                "Estimate tau^2 by the moment method and plug it in");
  cmd->add_option("--alpha", cfg.alpha, "Two-sided CI level (default 0.05)")
      ->check(CLI::Range(1e-12, 1.0 - 1e-12));
  cmd->add_option("--target", cfg.targets, "Target comparison A:B (repeatable)");
  cmd->add_option("--baseline", cfg.baseline, "Baseline treatment label");
  cmd->add_option("--out", cfg.out, "Output directory (default .)");
  cmd->add_option("--format", cfg.format, "Primary output format")
      ->check(CLI::IsMember({"json", "csv", "svg"}));
  cmd->add_option("--top-n-paths", cfg.top_n_paths,
                  "Cap displayed paths per target (storage stays complete)")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--correction", cfg.correction,
                  "Continuity correction for zero cells (default 0.5)")
      ->check(CLI::NonNegativeNumber);
  cmd->add_flag("--strict-cov,!--no-strict-cov", cfg.strict_cov,
                "Require full multi-arm covariance (default on)");
}

struct LoadedModel {
  TreatmentNetwork net;
  HeterogeneitySpec het;
  ReportMeta meta;
};

LoadedModel load_model(const CliConfig& cfg, CLI::Option* tau2_opt) {
  if (cfg.arms.empty() == cfg.contrasts.empty())
    fail(ErrorCode::CsvParse, "provide exactly one of --contrasts or --arms");

  LoadOptions opt;
  opt.strict_cov = cfg.strict_cov;
  opt.correction = cfg.correction;

  LoadedModel model;
  if (!cfg.arms.empty()) {
    model.net = load_arms_binary_file(cfg.arms, opt);
    model.meta.dataset = fs::path(cfg.arms).stem().string();
  } else {
    model.net = load_contrasts_file(cfg.contrasts, cfg.cov, opt);
    model.meta.dataset = fs::path(cfg.contrasts).stem().string();
  }

  const bool tau2_given = tau2_opt && tau2_opt->count() > 0;
  if (tau2_given && cfg.estimate_tau2_flag)
    fail(ErrorCode::CsvParse, "--tau2 and --estimate-tau2 are exclusive");
  if (cfg.estimate_tau2_flag) {
    const double hat = estimate_tau2(model.net);
    model.het.mode = HeterogeneitySpec::Mode::RandomEstimated;
    model.het.tau2_hat = hat;
    model.meta.mode = "random";
    model.meta.tau2 = hat;
    model.meta.tau2_source = "estimated";
  } else if (tau2_given && cfg.tau2 > 0.0) {
    model.het.mode = HeterogeneitySpec::Mode::RandomGiven;
    model.het.tau2 = cfg.tau2;
    model.meta.mode = "random";
    model.meta.tau2 = cfg.tau2;
    model.meta.tau2_source = "given";
  } else {
    // tau2 == 0 is the fixed-effect model; outputs match it exactly.
    model.het.mode = HeterogeneitySpec::Mode::Fixed;
    model.meta.mode = "fixed";
    model.meta.tau2 = 0.0;
  }
  model.meta.alpha = cfg.alpha;
  return model;
}

ContrastId parse_target(const std::string& spec, const ContrastSystem& sys) {
  const size_t colon = spec.find(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == spec.size())
    fail(ErrorCode::UnknownContrast, "target must look like A:B, got " + spec);
  const std::string a = spec.substr(0, colon);
  const std::string b = spec.substr(colon + 1);
  int ia = -1, ib = -1;
  for (int t = 0; t < sys.n_treatments; ++t) {
    if (sys.labels[t] == a) ia = t;
    if (sys.labels[t] == b) ib = t;
  }
  if (ia < 0 || ib < 0 || ia == ib)
    fail(ErrorCode::UnknownContrast, "unknown target " + spec);
  return {std::min(ia, ib), std::max(ia, ib)};
}

std::vector<ContrastId> resolve_targets(const CliConfig& cfg,
                                        const ContrastSystem& sys) {
  std::vector<ContrastId> targets;
  if (cfg.targets.empty()) {
    for (int col = 0; col < sys.columns(); ++col)
      targets.push_back(pair_at(col, sys.n_treatments));
    return targets;
  }
  for (const std::string& t : cfg.targets)
    targets.push_back(parse_target(t, sys));
  std::sort(targets.begin(), targets.end());
  targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
  return targets;
}

void write_file(const fs::path& path, const std::string& body) {
  fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::CsvParse, "cannot write " + path.string());
  out << body;
}

void write_json(const fs::path& path, const Json& j) {
  write_file(path, j.dump(2) + "\n");
}

std::string slug(const std::string& s) {
  std::string out;
  for (char c : s)
    out += (std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
  return out;
}

std::string fit_csv(const Json& report) {
  std::string out = "target,estimate,variance,ci_low,ci_high\n";
  for (const Json& e : report.at("estimates"))
    out += e.at("target").get<std::string>() + "," +
           format_double(e.at("estimate").get<double>()) + "," +
           format_double(e.at("variance").get<double>()) + "," +
           format_double(e.at("ci_low").get<double>()) + "," +
           format_double(e.at("ci_high").get<double>()) + "\n";
  return out;
}

int cmd_fit(const CliConfig& cfg, CLI::Option* tau2_opt) {
  LoadedModel model = load_model(cfg, tau2_opt);
  const ContrastSystem sys = assemble_system(model.net, model.het);
  const FitResult fr = fit(sys);
  const Json report = fit_report(sys, fr, model.meta);
  write_json(fs::path(cfg.out) / "fit.json", report);
  if (cfg.format == "csv")
    write_file(fs::path(cfg.out) / "fit.csv", fit_csv(report));
  std::printf("fit: %d treatments, %zu studies, rank(V)=%d, mode=%s\n",
              sys.n_treatments, sys.studies.size(), fr.op.rank_v,
              model.meta.mode.c_str());
  return 0;
}

int cmd_decompose(const CliConfig& cfg, CLI::Option* tau2_opt) {
  LoadedModel model = load_model(cfg, tau2_opt);
  const ContrastSystem sys = assemble_system(model.net, model.het);
  const FitResult fr = fit(sys);
  const std::vector<ContrastId> targets = resolve_targets(cfg, sys);
  const auto decs = decompose_all(fr.op, sys, targets, worker_threads());
  const Json report =
      decomposition_report(sys, decs, model.meta, cfg.top_n_paths);
  write_json(fs::path(cfg.out) / "decomposition.json", report);
  write_file(fs::path(cfg.out) / "decomposition.csv",
             decomposition_csv(report, cfg.top_n_paths));
  write_file(fs::path(cfg.out) / "weights.csv", weights_csv(report));
  std::printf("decompose: %zu targets written to %s\n", decs.size(),
              cfg.out.c_str());
  return 0;
}

int cmd_paths(const CliConfig& cfg, CLI::Option* tau2_opt) {
  LoadedModel model = load_model(cfg, tau2_opt);
  const ContrastSystem sys = assemble_system(model.net, model.het);
  const FitResult fr = fit(sys);
  const std::vector<ContrastId> targets = resolve_targets(cfg, sys);
  const auto decs = decompose_all(fr.op, sys, targets, worker_threads());
  const Json report = paths_report(sys, decs, model.meta, cfg.top_n_paths);
  write_json(fs::path(cfg.out) / "paths.json", report);
  for (const Json& t : report.at("targets"))
    for (const Json& e : t.at("entries"))
      std::printf("%s %s %s %s %.4f\n",
                  t.at("target").get<std::string>().c_str(),
                  e.at("type").get<std::string>().c_str(),
                  [&] {
                    std::string s;
                    for (const Json& id : e.at("studies")) {
                      if (!s.empty()) s += "/";
                      s += id.get<std::string>();
                    }
                    return s;
                  }()
                      .c_str(),
                  e.at("path").get<std::string>().c_str(),
                  e.at("weight").get<double>());
  return 0;
}

int cmd_qtest(const CliConfig& cfg, CLI::Option* tau2_opt) {
  LoadedModel model = load_model(cfg, tau2_opt);
  const ContrastSystem sys = assemble_system(model.net, model.het);
  const FitResult fr = fit(sys);
  const QResult q = q_test(fr.fit, sys, fr.op, model.het.random());
  write_json(fs::path(cfg.out) / "q.json", q_report(q, sys, model.meta));
  std::printf("Q=%.4f, df=%d, p=%.4f\n", q.q, q.df, q.p_value);
  return 0;
}

int cmd_tau2(const CliConfig& cfg) {
  if (cfg.arms.empty() == cfg.contrasts.empty())
    fail(ErrorCode::CsvParse, "provide exactly one of --contrasts or --arms");
  LoadOptions opt;
  opt.strict_cov = cfg.strict_cov;
  opt.correction = cfg.correction;
  TreatmentNetwork net;
  std::string dataset;
  if (!cfg.arms.empty()) {
    net = load_arms_binary_file(cfg.arms, opt);
    dataset = fs::path(cfg.arms).stem().string();
  } else {
    net = load_contrasts_file(cfg.contrasts, cfg.cov, opt);
    dataset = fs::path(cfg.contrasts).stem().string();
  }
  const double hat = estimate_tau2(net);
  Json j;
  j["dataset"] = dataset;
  j["tau2"] = hat;
  write_json(fs::path(cfg.out) / "tau2.json", j);
  std::printf("tau2=%.6f\n", hat);
  return 0;
}

int cmd_render(const CliConfig& cfg, CLI::Option* tau2_opt,
               const std::string& kind) {
  LoadedModel model = load_model(cfg, tau2_opt);
  const ContrastSystem sys = assemble_system(model.net, model.het);
  const FitResult fr = fit(sys);

  if (kind == "tension") {
    if (cfg.baseline.empty())
      fail(ErrorCode::UnknownContrast, "render tension requires --baseline");
    int base = -1;
    for (int t = 0; t < sys.n_treatments; ++t)
      if (sys.labels[t] == cfg.baseline) base = t;
    if (base < 0)
      fail(ErrorCode::UnknownContrast, "unknown baseline " + cfg.baseline);
    std::vector<ContrastId> targets;
    for (int t = 0; t < sys.n_treatments; ++t)
      if (t != base) targets.push_back({std::min(t, base), std::max(t, base)});
    std::sort(targets.begin(), targets.end());
    const auto decs = decompose_all(fr.op, sys, targets, worker_threads());
    const auto rows = tension(decs, sys, base, cfg.alpha);
    const Json report = tension_report(rows, sys, base, model.meta);
    write_json(fs::path(cfg.out) / "tension.json", report);
    write_file(fs::path(cfg.out) / "tension.svg", render_tension_svg(report));
    std::printf("render: tension (%zu comparisons)\n", rows.size());
    return 0;
  }

  if (kind != "forest" && kind != "paths") {
    std::fprintf(stderr, "error[Usage]: unknown render kind '%s'\n",
                 kind.c_str());
    return 64;
  }
  if (cfg.targets.empty())
    fail(ErrorCode::UnknownContrast, "render " + kind + " requires --target");
  const std::vector<ContrastId> targets = resolve_targets(cfg, sys);
  const auto decs = decompose_all(fr.op, sys, targets, worker_threads());
  for (size_t i = 0; i < targets.size(); ++i) {
    const std::string name =
        kind + "_" + slug(sys.target_label(targets[i]));
    if (kind == "forest") {
      const Json report = forest_report(decs[i], sys, model.meta);
      write_json(fs::path(cfg.out) / (name + ".json"), report);
      write_file(fs::path(cfg.out) / (name + ".svg"),
                 render_forest_svg(report));
    } else {
      const Json report =
          path_figure_report(decs[i], sys, model.meta, cfg.top_n_paths);
      write_json(fs::path(cfg.out) / (name + ".json"), report);
      write_file(fs::path(cfg.out) / (name + ".svg"),
                 render_paths_svg(report));
    }
  }
  std::printf("render: %s for %zu target(s)\n", kind.c_str(), targets.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Network meta-analysis as an exact contrast-space projection: "
               "fits, canonical direct/indirect decompositions, consistency "
               "diagnostics, and figure emission"};
  app.require_subcommand(1);
  app.fallthrough(true);

  CliConfig cfg;
  CLI::App* fit_cmd = app.add_subcommand("fit", "All-pairs estimates and CIs");
  CLI::App* dec_cmd =
      app.add_subcommand("decompose", "Canonical direct/indirect decomposition");
  CLI::App* paths_cmd =
      app.add_subcommand("paths", "Study-path listing per target");
  CLI::App* q_cmd = app.add_subcommand("qtest", "Global inconsistency test");
  CLI::App* render_cmd =
      app.add_subcommand("render", "Static SVG figures with JSON sidecars");
  CLI::App* tau_cmd =
      app.add_subcommand("tau2", "Moment estimate of the heterogeneity variance");

  std::string render_kind;
  render_cmd->add_option("kind", render_kind, "forest | tension | paths");

  CLI::Option* tau2_opts[6] = {};
  CLI::App* cmds[6] = {fit_cmd, dec_cmd, paths_cmd, q_cmd, render_cmd, tau_cmd};
  for (CLI::App* cmd : cmds) add_common(cmd, cfg);
  for (int i = 0; i < 6; ++i) tau2_opts[i] = cmds[i]->get_option("--tau2");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 64;
  }

  auto tau2_opt_for = [&](CLI::App* cmd) -> CLI::Option* {
    for (int i = 0; i < 6; ++i)
      if (cmds[i] == cmd) return tau2_opts[i];
    return nullptr;
  };

  try {
    if (fit_cmd->parsed()) return cmd_fit(cfg, tau2_opt_for(fit_cmd));
    if (dec_cmd->parsed()) return cmd_decompose(cfg, tau2_opt_for(dec_cmd));
    if (paths_cmd->parsed()) return cmd_paths(cfg, tau2_opt_for(paths_cmd));
    if (q_cmd->parsed()) return cmd_qtest(cfg, tau2_opt_for(q_cmd));
    if (render_cmd->parsed())
      return cmd_render(cfg, tau2_opt_for(render_cmd), render_kind);
    if (tau_cmd->parsed()) return cmd_tau2(cfg);
  } catch (const Error& e) {
    std::fprintf(stderr, "error[%s]: %s\n", to_string(e.code()), e.what());
    return is_data_error(e.code()) ? 2 : 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error[Internal]: %s\n", e.what());
    return 3;
  }
  return 64;
}

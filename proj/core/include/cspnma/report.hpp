#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "cspnma/diagnostics.hpp"

namespace cspnma {

// JSON is the source-of-truth output format; CSV and SVG are derived from
// it. Documents use insertion order and shortest round-trip numbers, so
// identical inputs produce identical bytes.
using Json = nlohmann::ordered_json;

struct ReportMeta {
  std::string dataset;     // input file stem
  std::string mode;        // "fixed" or "random"
  double tau2 = 0.0;
  std::string tau2_source;  // "", "given", "estimated"
  double alpha = 0.05;
};

Json fit_report(const ContrastSystem& sys, const FitResult& fr,
                const ReportMeta& meta);

Json decomposition_report(const ContrastSystem& sys,
                          const std::vector<CanonicalDecomposition>& decs,
                          const ReportMeta& meta, int top_n_paths = 0);

Json q_report(const QResult& q, const ContrastSystem& sys,
              const ReportMeta& meta);

Json paths_report(const ContrastSystem& sys,
                  const std::vector<CanonicalDecomposition>& decs,
                  const ReportMeta& meta, int top_n_paths = 0);

// Figure documents carry a layout block with every quantity needed to
// reproduce marker positions, so renderers stay pure functions of the
// JSON.
Json forest_report(const CanonicalDecomposition& dec,
                   const ContrastSystem& sys, const ReportMeta& meta);

Json tension_report(const std::vector<TensionRow>& rows,
                    const ContrastSystem& sys, int baseline,
                    const ReportMeta& meta);

Json path_figure_report(const CanonicalDecomposition& dec,
                        const ContrastSystem& sys, const ReportMeta& meta,
                        int top_n_paths = 0);

// Table-style CSV mirrors: target,type,studies,path,weight with weights at
// four decimals.
std::string decomposition_csv(const Json& decomposition_report,
                              int top_n_paths = 0);
// Long-format (target,source,weight) rows: one per direct study plus the
// pooled indirect weight.
std::string weights_csv(const Json& decomposition_report);

std::string format_double(double v);  // shortest round-trip
std::string format_fixed(double v, int decimals);

}  // namespace cspnma

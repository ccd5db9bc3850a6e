#include "cspnma/diagnostics.hpp"

#include <algorithm>
#include <cmath>

namespace cspnma {

namespace {

// Regularized upper incomplete gamma Q(a, x): lower series for x < a+1,
// modified-Lentz continued fraction otherwise.
double gamma_q(double a, double x) {
  if (x <= 0.0) return 1.0;
  const double log_prefactor = -x + a * std::log(x) - std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a;
    double del = 1.0 / a;
    double sum = del;
    for (int n = 0; n < 1000000; ++n) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-17) break;
    }
    return 1.0 - sum * std::exp(log_prefactor);
  }
  const double fpmin = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / fpmin;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 1000000; ++i) {
    const double an = -static_cast<double>(i) * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < fpmin) d = fpmin;
    c = b + an / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-16) break;
  }
  return std::exp(log_prefactor) * h;
}

}  // namespace

double chi2_sf(double x, int df) {
  if (df < 1) fail(ErrorCode::DimError, "chi2_sf: df must be positive");
  if (!(x >= 0.0)) fail(ErrorCode::DimError, "chi2_sf: x must be nonnegative");
  return gamma_q(0.5 * df, 0.5 * x);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Wichura's algorithm AS241 (PPND16), accurate to ~1e-16 over (0,1).
double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    fail(ErrorCode::DimError, "normal_quantile: p must lie in (0,1)");
  const double q = p - 0.5;
  double r, z;
  if (std::abs(q) <= 0.425) {
    r = 0.180625 - q * q;
    z = q *
        (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
              6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
            1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
          1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
        (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
              3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
            5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
          4.2313330701600911252e1) * r + 1.0);
    return z;
  }
  r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  if (r <= 5.0) {
    r -= 1.6;
    z = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
              2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
            3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
          4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
        (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
              1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
            6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
          2.05319162663775882187e0) * r + 1.0);
  } else {
    r -= 5.0;
    z = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
              1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
            2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
          5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
        (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
              1.84631831751005468180e-6) * r + 7.86869131145613259100e-4) * r +
            1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
          5.99832206555887937690e-1) * r + 1.0);
  }
  return (q < 0.0) ? -z : z;
}

QResult q_test(const NmaFit& fit, const ContrastSystem& sys,
               const ProjectionOperator& op, bool random_effects) {
  QResult out;
  out.q = std::max(0.0, op.v_pinv.quad(fit.residual, fit.residual));
  out.df = op.rank_v - (sys.n_treatments - 1);
  out.approximate = random_effects;
  if (out.df <= 0) {
    out.df = 0;
    out.p_value = 1.0;
    out.no_inconsistency_df = true;
    return out;
  }
  out.p_value = chi2_sf(out.q, out.df);
  return out;
}

QResult q_test(const NmaFit& fit, const ContrastSystem& sys,
               bool random_effects) {
  BlockDiagPinv vp = blockdiag_pinv(sys.v);
  QResult out;
  out.q = std::max(0.0, vp.pinv.quad(fit.residual, fit.residual));
  out.df = vp.total_rank - (sys.n_treatments - 1);
  out.approximate = random_effects;
  if (out.df <= 0) {
    out.df = 0;
    out.p_value = 1.0;
    out.no_inconsistency_df = true;
    return out;
  }
  out.p_value = chi2_sf(out.q, out.df);
  return out;
}

const char* to_string(RowKind kind) {
  switch (kind) {
    case RowKind::DirectStudy: return "direct_study";
    case RowKind::IndirectPath: return "indirect_path";
    case RowKind::DirectSummary: return "direct_summary";
    case RowKind::IndirectSummary: return "indirect_summary";
    case RowKind::Network: return "network";
  }
  return "unknown";
}

namespace {

std::string path_arrows(const std::vector<int>& nodes,
                        const ContrastSystem& sys) {
  std::string out;
  for (size_t i = 0; i < nodes.size(); ++i) {
    if (i) out += "→";
    out += sys.labels[nodes[i]];
  }
  return out;
}

std::string path_studies(const StudyPath& path, const ContrastSystem& sys) {
  std::string out;
  for (size_t i = 0; i < path.segment_studies.size(); ++i) {
    if (i) out += "/";
    out += sys.studies[path.segment_studies[i]].study_id;
  }
  return out;
}

}  // namespace

std::vector<ForestRow> forest(const CanonicalDecomposition& dec,
                              const ContrastSystem& sys, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    fail(ErrorCode::DimError, "forest: alpha must lie in (0,1)");
  if (dec.direct.empty() && dec.paths.empty())
    fail(ErrorCode::EmptyTarget,
         sys.target_label(dec.target) + ": decomposition has no components");

  const double z = normal_quantile(1.0 - 0.5 * alpha);
  const double total_w = dec.w_dir + dec.w_ind;
  std::vector<ForestRow> rows;

  for (const CanonicalStudyComponent& comp : dec.direct) {
    ForestRow row;
    row.kind = RowKind::DirectStudy;
    row.label = comp.study_id;
    row.path = sys.labels[dec.target.low] + "→" + sys.labels[dec.target.high];
    const double sd = std::sqrt(comp.variance);
    row.estimate = comp.estimate;
    row.ci_low = comp.estimate - z * sd;
    row.ci_high = comp.estimate + z * sd;
    row.weight = comp.direct_weight;
    row.weight_pct = 100.0 * comp.direct_weight / total_w;
    row.contrib = comp.direct_value;
    const double csd = std::abs(comp.direct_weight) * sd;
    row.contrib_ci_low = comp.direct_value - z * csd;
    row.contrib_ci_high = comp.direct_value + z * csd;
    rows.push_back(std::move(row));
  }

  for (const StudyPath& path : dec.paths) {
    ForestRow row;
    row.kind = RowKind::IndirectPath;
    row.label = path_studies(path, sys);
    row.path = path_arrows(path.nodes, sys);
    const double sd = std::sqrt(path.variance);
    row.estimate = path.delta;
    row.ci_low = path.delta - z * sd;
    row.ci_high = path.delta + z * sd;
    row.weight = path.weight;
    row.weight_pct = 100.0 * path.weight / total_w;
    row.contrib = path.weight * path.delta;
    const double csd = path.weight * sd;
    row.contrib_ci_low = row.contrib - z * csd;
    row.contrib_ci_high = row.contrib + z * csd;
    rows.push_back(std::move(row));
  }

  if (dec.theta_dir) {
    ForestRow row;
    row.kind = RowKind::DirectSummary;
    row.label = "Direct summary";
    const double var = dec.var_c_dir / (dec.w_dir * dec.w_dir);
    const double sd = std::sqrt(var);
    row.estimate = *dec.theta_dir;
    row.ci_low = row.estimate - z * sd;
    row.ci_high = row.estimate + z * sd;
    row.weight = dec.w_dir;
    row.weight_pct = 100.0 * dec.w_dir / total_w;
    row.contrib = dec.w_dir * row.estimate;
    const double csd = std::sqrt(dec.var_c_dir);
    row.contrib_ci_low = row.contrib - z * csd;
    row.contrib_ci_high = row.contrib + z * csd;
    rows.push_back(std::move(row));
  }
  if (dec.theta_ind) {
    ForestRow row;
    row.kind = RowKind::IndirectSummary;
    row.label = "Indirect summary";
    const double var = dec.var_c_ind / (dec.w_ind * dec.w_ind);
    const double sd = std::sqrt(var);
    row.estimate = *dec.theta_ind;
    row.ci_low = row.estimate - z * sd;
    row.ci_high = row.estimate + z * sd;
    row.weight = dec.w_ind;
    row.weight_pct = 100.0 * dec.w_ind / total_w;
    row.contrib = dec.w_ind * row.estimate;
    const double csd = std::sqrt(dec.var_c_ind);
    row.contrib_ci_low = row.contrib - z * csd;
    row.contrib_ci_high = row.contrib + z * csd;
    rows.push_back(std::move(row));
  }

  ForestRow net;
  net.kind = RowKind::Network;
  net.label = "Network estimate";
  const double sd = std::sqrt(dec.var_nma);
  net.estimate = dec.theta_hat;
  net.ci_low = dec.theta_hat - z * sd;
  net.ci_high = dec.theta_hat + z * sd;
  net.weight = 1.0;
  net.weight_pct = 100.0;
  net.contrib = dec.theta_hat;
  net.contrib_ci_low = net.ci_low;
  net.contrib_ci_high = net.ci_high;
  rows.push_back(std::move(net));
  return rows;
}

std::vector<TensionRow> tension(const std::vector<CanonicalDecomposition>& decs,
                                const ContrastSystem& sys, int baseline,
                                double alpha) {
  if (baseline < 0 || baseline >= sys.n_treatments)
    fail(ErrorCode::UnknownContrast, "tension: baseline treatment unknown");
  const double z = normal_quantile(1.0 - 0.5 * alpha);

  std::vector<TensionRow> rows;
  for (const CanonicalDecomposition& dec : decs) {
    if (dec.target.low != baseline && dec.target.high != baseline) continue;
    const int other =
        dec.target.low == baseline ? dec.target.high : dec.target.low;
    // Report as "other vs baseline".
    const double sign = (dec.target.low == baseline) ? 1.0 : -1.0;

    TensionRow row;
    row.target = dec.target;
    row.label = sys.labels[other] + " vs " + sys.labels[baseline];

    auto make = [&](double est, double var, double weight) {
      TensionComponent c;
      c.estimate = sign * est;
      const double sd = std::sqrt(var);
      c.ci_low = c.estimate - z * sd;
      c.ci_high = c.estimate + z * sd;
      c.weight = weight;
      return c;
    };
    row.nma = make(dec.theta_hat, dec.var_nma, 1.0);
    if (dec.theta_dir)
      row.dir = make(*dec.theta_dir, dec.var_c_dir / (dec.w_dir * dec.w_dir),
                     dec.w_dir);
    if (dec.theta_ind)
      row.ind = make(*dec.theta_ind, dec.var_c_ind / (dec.w_ind * dec.w_ind),
                     dec.w_ind);
    rows.push_back(std::move(row));
  }
  std::sort(rows.begin(), rows.end(), [&](const TensionRow& a, const TensionRow& b) {
    const int oa = a.target.low == baseline ? a.target.high : a.target.low;
    const int ob = b.target.low == baseline ? b.target.high : b.target.low;
    return oa < ob;
  });
  return rows;
}

}  // namespace cspnma

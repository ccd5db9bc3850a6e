#include "cspnma/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "cspnma/contrast_system.hpp"
#include "cspnma/report.hpp"

namespace cspnma {

namespace {

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_double(const std::string& s, const std::string& ctx) {
  const std::string t = trim(s);
  double v = 0.0;
  const char* begin = t.data();
  const char* end = begin + t.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{} || ptr != end)
    fail(ErrorCode::CsvParse, ctx + ": invalid number '" + s + "'");
  return v;
}

long parse_int(const std::string& s, const std::string& ctx) {
  const std::string t = trim(s);
  long v = 0;
  const char* begin = t.data();
  const char* end = begin + t.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{} || ptr != end)
    fail(ErrorCode::CsvParse, ctx + ": invalid integer '" + s + "'");
  return v;
}

// Reads non-empty, non-comment rows and checks the header.
std::vector<std::vector<std::string>> read_rows(
    std::istream& in, const std::vector<std::string>& header,
    const std::string& what) {
  std::string line;
  bool saw_header = false;
  std::vector<std::vector<std::string>> rows;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::vector<std::string> fields = split_line(t);
    if (!saw_header) {
      if (fields != header)
        fail(ErrorCode::CsvParse, what + ": unexpected header '" + t + "'");
      saw_header = true;
      continue;
    }
    if (fields.size() != header.size())
      fail(ErrorCode::CsvParse,
           what + " line " + std::to_string(lineno) + ": expected " +
               std::to_string(header.size()) + " fields");
    rows.push_back(std::move(fields));
  }
  if (!saw_header) fail(ErrorCode::CsvParse, what + ": missing header");
  return rows;
}

void check_psd(const StudyBlock& sb) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(sb.cov),
                                           Eigen::EigenvaluesOnly);
  const double max_abs =
      std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  if (es.eigenvalues().minCoeff() < -1e-10 * max_abs)
    fail(ErrorCode::NonPsdStudy,
         sb.study_id + ": within-study covariance is not positive semidefinite");
}

// Basic when all contrasts share one treatment and count is arms-1; full
// pairwise when every pair is present.
void classify(StudyBlock& sb) {
  const int arms = sb.arms();
  const int n = sb.size();
  if (n == arms * (arms - 1) / 2) {
    sb.representation = Representation::FullPairwise;
    sb.baseline = -1;
    return;
  }
  if (n == arms - 1) {
    std::set<int> shared(sb.treatments.begin(), sb.treatments.end());
    for (const ContrastId& c : sb.contrasts) {
      std::set<int> keep;
      if (shared.count(c.low)) keep.insert(c.low);
      if (shared.count(c.high)) keep.insert(c.high);
      shared = std::move(keep);
    }
    if (shared.size() == 1) {
      sb.representation = Representation::Basic;
      sb.baseline = *shared.begin();
      return;
    }
  }
  fail(ErrorCode::MalformedStudy,
       sb.study_id +
           ": contrasts form neither a baseline set nor the full pairwise set");
}

}  // namespace

TreatmentNetwork load_contrasts(std::istream& contrasts_csv,
                                std::istream* cov_csv, const LoadOptions& opt) {
  const auto rows = read_rows(
      contrasts_csv, {"study", "treat_a", "treat_b", "effect", "se"},
      "contrasts.csv");
  if (rows.empty()) fail(ErrorCode::CsvParse, "contrasts.csv: no data rows");

  std::set<std::string> label_set;
  for (const auto& r : rows) {
    label_set.insert(r[1]);
    label_set.insert(r[2]);
  }
  TreatmentNetwork net;
  for (const std::string& label : label_set)
    net.treatments.push_back({label, static_cast<int>(net.treatments.size())});

  struct Entry {
    double effect;
    double se;
  };
  std::vector<std::string> study_order;
  std::map<std::string, std::map<ContrastId, Entry>> by_study;
  for (const auto& r : rows) {
    const std::string& study = r[0];
    if (!by_study.count(study)) study_order.push_back(study);
    const int ia = net.index_of(r[1]);
    const int ib = net.index_of(r[2]);
    if (ia == ib)
      fail(ErrorCode::MalformedStudy, study + ": contrast of a treatment with itself");
    double effect = parse_double(r[3], study);
    const double se = parse_double(r[4], study);
    if (!(se > 0.0) || !std::isfinite(se) || !std::isfinite(effect))
      fail(ErrorCode::MalformedStudy, study + ": se must be positive and finite");
    ContrastId c{std::min(ia, ib), std::max(ia, ib)};
    if (ia > ib) effect = -effect;  // store effect of high vs low
    auto [it, inserted] = by_study[study].try_emplace(c, Entry{effect, se});
    if (!inserted)
      fail(ErrorCode::MalformedStudy,
           study + ": duplicate contrast " + r[1] + "/" + r[2]);
  }

  // Signed covariance entries keyed by ordered local pairs.
  std::map<std::string, std::map<std::pair<ContrastId, ContrastId>, double>> covs;
  if (cov_csv) {
    const auto crows = read_rows(
        *cov_csv, {"study", "pair1_a", "pair1_b", "pair2_a", "pair2_b", "cov"},
        "cov.csv");
    for (const auto& r : crows) {
      const std::string& study = r[0];
      if (!by_study.count(study))
        fail(ErrorCode::MalformedStudy, "cov.csv: unknown study " + study);
      int idx[4];
      for (int i = 0; i < 4; ++i) {
        idx[i] = net.index_of(r[1 + i]);
        if (idx[i] < 0)
          fail(ErrorCode::MalformedStudy,
               "cov.csv: unknown treatment label " + r[1 + i]);
      }
      double value = parse_double(r[5], study);
      ContrastId c1{std::min(idx[0], idx[1]), std::max(idx[0], idx[1])};
      ContrastId c2{std::min(idx[2], idx[3]), std::max(idx[2], idx[3])};
      if (idx[0] > idx[1]) value = -value;
      if (idx[2] > idx[3]) value = -value;
      if (!by_study[study].count(c1) || !by_study[study].count(c2))
        fail(ErrorCode::MalformedStudy,
             "cov.csv: " + study + " does not report both contrasts");
      if (c2 < c1) std::swap(c1, c2);
      auto [it, inserted] = covs[study].try_emplace({c1, c2}, value);
      if (!inserted)
        fail(ErrorCode::MalformedStudy,
             "cov.csv: duplicate covariance row in " + study);
    }
  }

  for (const std::string& study : study_order) {
    const auto& entries = by_study[study];
    StudyBlock sb;
    sb.study_id = study;
    const int n = static_cast<int>(entries.size());
    sb.effects.resize(n);
    sb.cov = Matrix::Zero(n, n);
    int i = 0;
    for (const auto& [c, e] : entries) {
      sb.contrasts.push_back(c);
      sb.effects(i) = e.effect;
      sb.cov(i, i) = e.se * e.se;
      ++i;
    }
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b) {
        auto it = covs[study].find({sb.contrasts[a], sb.contrasts[b]});
        if (it != covs[study].end()) {
          sb.cov(a, b) = sb.cov(b, a) = it->second;
        } else if (n > 1 && opt.strict_cov) {
          fail(ErrorCode::MalformedStudy,
               study + ": missing within-study covariance between contrasts; "
                       "multi-arm studies require the full covariance");
        }
      }
    canonicalize(sb);
    classify(sb);
    check_psd(sb);
    net.studies.push_back(std::move(sb));
  }
  return net;
}

TreatmentNetwork load_arms_binary(std::istream& arms_csv,
                                  const LoadOptions& opt) {
  if (!(opt.correction >= 0.0))
    fail(ErrorCode::CsvParse, "correction must be nonnegative");
  const auto rows =
      read_rows(arms_csv, {"study", "treatment", "events", "total"}, "arms.csv");
  if (rows.empty()) fail(ErrorCode::CsvParse, "arms.csv: no data rows");

  struct Arm {
    std::string treatment;
    long events;
    long total;
  };
  std::vector<std::string> study_order;
  std::map<std::string, std::vector<Arm>> by_study;
  std::set<std::string> label_set;
  for (const auto& r : rows) {
    const std::string& study = r[0];
    const long events = parse_int(r[2], study);
    const long total = parse_int(r[3], study);
    if (total <= 0 || events < 0 || events > total)
      fail(ErrorCode::MalformedStudy,
           study + ": arm counts must satisfy 0 <= events <= total, total > 0");
    if (!by_study.count(study)) study_order.push_back(study);
    for (const Arm& a : by_study[study])
      if (a.treatment == r[1])
        fail(ErrorCode::MalformedStudy, study + ": duplicate arm " + r[1]);
    by_study[study].push_back({r[1], events, total});
    label_set.insert(r[1]);
  }

  TreatmentNetwork net;
  for (const std::string& label : label_set)
    net.treatments.push_back({label, static_cast<int>(net.treatments.size())});

  for (const std::string& study : study_order) {
    const auto& arms = by_study[study];
    const int k = static_cast<int>(arms.size());
    if (k < 2) fail(ErrorCode::MalformedStudy, study + ": fewer than two arms");

    bool zero_cell = false;
    for (const Arm& a : arms)
      if (a.events == 0 || a.events == a.total) zero_cell = true;
    const double c = zero_cell ? opt.correction : 0.0;

    std::vector<double> logit(k), var(k);
    for (int i = 0; i < k; ++i) {
      const double r = static_cast<double>(arms[i].events) + c;
      const double s = static_cast<double>(arms[i].total - arms[i].events) + c;
      if (!(r > 0.0 && s > 0.0))
        fail(ErrorCode::MalformedStudy,
             study + ": zero cell needs a positive continuity correction");
      logit[i] = std::log(r / s);
      var[i] = 1.0 / r + 1.0 / s;
    }

    const int base = net.index_of(arms[0].treatment);
    StudyBlock sb;
    sb.study_id = study;
    const int n = k - 1;
    sb.effects.resize(n);
    sb.cov = Matrix::Zero(n, n);
    std::vector<double> sign(n);
    for (int j = 1; j < k; ++j) {
      const int t = net.index_of(arms[j].treatment);
      const ContrastId cid{std::min(base, t), std::max(base, t)};
      sb.contrasts.push_back(cid);
      sign[j - 1] = (cid.low == base) ? 1.0 : -1.0;
      sb.effects(j - 1) = sign[j - 1] * (logit[j] - logit[0]);
      sb.cov(j - 1, j - 1) = var[j] + var[0];
    }
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b)
        sb.cov(a, b) = sb.cov(b, a) = sign[a] * sign[b] * var[0];

    if (k == 2) {
      sb.representation = Representation::FullPairwise;
      sb.baseline = -1;
    } else {
      sb.representation = Representation::Basic;
      sb.baseline = base;
    }
    canonicalize(sb);
    check_psd(sb);
    net.studies.push_back(std::move(sb));
  }
  return net;
}

namespace {

std::ifstream open_or_fail(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::CsvParse, "cannot open " + path);
  return in;
}

}  // namespace

TreatmentNetwork load_contrasts_file(const std::string& contrasts_path,
                                     const std::string& cov_path,
                                     const LoadOptions& opt) {
  std::ifstream cs = open_or_fail(contrasts_path);
  if (cov_path.empty()) return load_contrasts(cs, nullptr, opt);
  std::ifstream cov = open_or_fail(cov_path);
  return load_contrasts(cs, &cov, opt);
}

TreatmentNetwork load_arms_binary_file(const std::string& arms_path,
                                       const LoadOptions& opt) {
  std::ifstream in = open_or_fail(arms_path);
  return load_arms_binary(in, opt);
}

void save_contrasts(const TreatmentNetwork& net, std::ostream& contrasts_csv,
                    std::ostream& cov_csv) {
  contrasts_csv << "study,treat_a,treat_b,effect,se\n";
  cov_csv << "study,pair1_a,pair1_b,pair2_a,pair2_b,cov\n";
  for (const StudyBlock& sb : net.studies) {
    for (int j = 0; j < sb.size(); ++j) {
      const ContrastId& c = sb.contrasts[j];
      contrasts_csv << sb.study_id << "," << net.label(c.low) << ","
                    << net.label(c.high) << "," << format_double(sb.effects(j))
                    << "," << format_double(std::sqrt(sb.cov(j, j))) << "\n";
    }
    for (int a = 0; a < sb.size(); ++a)
      for (int b = a + 1; b < sb.size(); ++b) {
        const ContrastId& c1 = sb.contrasts[a];
        const ContrastId& c2 = sb.contrasts[b];
        cov_csv << sb.study_id << "," << net.label(c1.low) << ","
                << net.label(c1.high) << "," << net.label(c2.low) << ","
                << net.label(c2.high) << "," << format_double(sb.cov(a, b))
                << "\n";
      }
  }
}

}  // namespace cspnma

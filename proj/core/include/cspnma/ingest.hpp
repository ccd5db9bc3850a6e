#pragma once

#include <iosfwd>
#include <string>

#include "cspnma/network.hpp"

namespace cspnma {

struct LoadOptions {
  // Missing covariance between contrasts of a multi-arm study is an error
  // when set; it is never imputed silently.
  bool strict_cov = true;
  // Continuity correction added to every cell of a study's arms when any
  // arm carries a zero cell.
  double correction = 0.5;
};

// contrasts.csv header: study,treat_a,treat_b,effect,se
// cov.csv header:       study,pair1_a,pair1_b,pair2_a,pair2_b,cov
TreatmentNetwork load_contrasts(std::istream& contrasts_csv,
                                std::istream* cov_csv = nullptr,
                                const LoadOptions& opt = {});
TreatmentNetwork load_contrasts_file(const std::string& contrasts_path,
                                     const std::string& cov_path = "",
                                     const LoadOptions& opt = {});

// arms.csv header: study,treatment,events,total
// Binary outcomes on the log odds ratio scale, basic representation
// against the first-listed arm of each study.
TreatmentNetwork load_arms_binary(std::istream& arms_csv,
                                  const LoadOptions& opt = {});
TreatmentNetwork load_arms_binary_file(const std::string& arms_path,
                                       const LoadOptions& opt = {});

// Round-trip serialization of a network back to the CSV schemas.
void save_contrasts(const TreatmentNetwork& net, std::ostream& contrasts_csv,
                    std::ostream& cov_csv);

}  // namespace cspnma

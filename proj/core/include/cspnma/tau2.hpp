#pragma once

#include "cspnma/network.hpp"

namespace cspnma {

// Method-of-moments heterogeneity estimate from the fixed-effect fit:
// tau2 = max(0, (Q - df) / trB), where trB is the slope of the expected
// Q statistic in tau^2 obtained by finite difference under the plug-in
// rule. Reduces to a DerSimonian-Laird-type estimate on a single
// comparison. Throws TauNotEstimable when df == 0.
double estimate_tau2(const TreatmentNetwork& net);

}  // namespace cspnma

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "drm/gsaa_convex.hpp"
#include "drm/gsaa_quad.hpp"

namespace drm {

// Command-line front end. `args` excludes the program name. Exit codes:
// 0 success, 1 usage error or malformed input, 2 infeasible scenario or a
// failed verification. Output depends only on (args, input files), so equal
// invocations produce byte-identical streams and artifacts.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Ranking rules behind the tables. Estimates order by value descending, ties
// by prosumer id then row index; intervals order by lower bound descending,
// ties by upper bound descending, then prosumer id, then row index.
std::vector<ShadowPriceEstimate> rank_estimates(std::vector<ShadowPriceEstimate> estimates);
std::vector<DualBounds> rank_bounds(std::vector<DualBounds> bounds);

}  // namespace drm

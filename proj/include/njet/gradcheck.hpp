#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace njet {

struct GradCheckResult {
  std::string name;
  double max_rel_err;
};

/// Central finite differences (adaptive step, double precision) against the
/// analytic gradients of every layer type, the synthesis operators, the loss,
/// and a small end-to-end network. Relative error uses
/// |a - n| / max(1e-4, |a|, |n|); sigma checks pin the sampling grid across
/// the stencil. Deterministic under `seed`.
std::vector<GradCheckResult> run_gradchecks(std::uint64_t seed);

}  // namespace njet

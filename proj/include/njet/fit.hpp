#pragma once

#include "njet/common.hpp"
#include "njet/resample.hpp"
#include "njet/synthesis.hpp"

namespace njet {

struct PatchFit {
  RowMatrixXd alphas;  // channels x M, one coefficient row per image channel
  double residual;     // RMS error over all evaluated pixels and channels
};

/// Least-squares fit of basis mixing coefficients to a square odd-sized patch,
/// solved per channel via normal equations on the basis Gram matrix. The basis
/// is sampled on the patch's own grid (size override), so any odd size works
/// for any sigma. `border_ignore` rows/cols on each side are excluded from both
/// the fit and the residual. Near-singular Gram matrices (condition > 1e12)
/// fall back to a small ridge, lambda = 1e-10 * trace / M.
PatchFit fit_patch(const Image& patch, double sigma, int order, double extent_k,
                   int border_ignore = 0);

/// Synthesizes the patch encoded by per-channel alphas (channels x M).
/// `size` = 0 derives the grid from filter_size(sigma, extent_k).
Image reconstruct(const RowMatrixXd& alphas, double sigma, int order,
                  double extent_k, int size = 0);

}  // namespace njet

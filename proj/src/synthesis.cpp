#include "njet/synthesis.hpp"

namespace njet {

SynthesizedFilters synthesize(const AlphaTensor& alphas, const BasisStack& basis) {
  require(alphas.out_channels > 0 && alphas.in_channels > 0,
          "synthesize: empty alpha tensor");
  require(alphas.values.rows() == alphas.out_channels * alphas.in_channels,
          "synthesize: alpha row count does not match channel dims");
  require(alphas.values.cols() == basis.count(),
          "synthesize: alpha coefficient count does not match basis count");

  SynthesizedFilters out;
  out.out_channels = alphas.out_channels;
  out.in_channels = alphas.in_channels;
  out.size = basis.size;
  out.filters.noalias() = alphas.values * basis.filters;
  out.dfilters_dsigma.noalias() = alphas.values * basis.dsigma;
  return out;
}

RowMatrixXd grad_alpha(const RowMatrixXd& upstream, const BasisStack& basis) {
  require(upstream.cols() == basis.filters.cols(),
          "grad_alpha: upstream pixel count does not match basis size");
  return upstream * basis.filters.transpose();
}

double grad_sigma(const RowMatrixXd& upstream, const SynthesizedFilters& synthesized) {
  require(upstream.rows() == synthesized.dfilters_dsigma.rows() &&
              upstream.cols() == synthesized.dfilters_dsigma.cols(),
          "grad_sigma: shape mismatch with synthesized filters");
  return upstream.cwiseProduct(synthesized.dfilters_dsigma).sum();
}

}  // namespace njet

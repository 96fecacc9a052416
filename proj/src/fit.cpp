#include "njet/fit.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace njet {

PatchFit fit_patch(const Image& patch, double sigma, int order, double extent_k,
                   int border_ignore) {
  require(patch.height == patch.width, "fit: patch must be square");
  require(patch.height % 2 == 1, "fit: patch size must be odd");
  require(border_ignore >= 0, "fit: border_ignore must be non-negative");
  const int s = static_cast<int>(patch.height);
  require(s - 2 * border_ignore >= 1, "fit: border leaves no pixels to evaluate");

  SampleOptions opts;
  opts.size_override = s;
  const BasisStack basis = sample_basis({order, sigma, extent_k}, opts);
  const Index m_count = basis.count();

  // Design matrix over the evaluated (non-border) pixels only.
  const int lo = border_ignore, hi = s - border_ignore;
  const Index pixels = Index(hi - lo) * (hi - lo);
  MatrixXd a(pixels, m_count);
  for (Index m = 0; m < m_count; ++m) {
    ConstGridMap f = basis.filter(m);
    Index p = 0;
    for (int y = lo; y < hi; ++y)
      for (int x = lo; x < hi; ++x, ++p) a(p, m) = f(y, x);
  }

  MatrixXd gram = a.transpose() * a;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(gram);
  const double lambda_max = eig.eigenvalues().maxCoeff();
  const double lambda_min = eig.eigenvalues().minCoeff();
  const double cond =
      lambda_min > 0.0 ? lambda_max / lambda_min : std::numeric_limits<double>::infinity();
  if (cond > 1e12) {
    // High orders at large sigma discretize to near-collinear filters.
    const double ridge = 1e-10 * gram.trace() / double(m_count);
    if (!(ridge > 0.0))
      throw std::runtime_error("fit: singular Gram matrix (condition estimate " +
                               std::to_string(cond) + ")");
    gram.diagonal().array() += ridge;
  }
  Eigen::LDLT<MatrixXd> solver(gram);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("fit: Gram factorization failed (condition estimate " +
                             std::to_string(cond) + ")");

  PatchFit fit;
  fit.alphas.resize(patch.channels, m_count);
  double sq_err = 0.0;
  for (Index c = 0; c < patch.channels; ++c) {
    VectorXd target(pixels);
    Index p = 0;
    for (int y = lo; y < hi; ++y)
      for (int x = lo; x < hi; ++x, ++p) target[p] = patch.at(c, y, x);
    const VectorXd alpha = solver.solve(a.transpose() * target);
    fit.alphas.row(c) = alpha.transpose();
    sq_err += (a * alpha - target).squaredNorm();
  }
  fit.residual = std::sqrt(sq_err / double(pixels * patch.channels));
  return fit;
}

Image reconstruct(const RowMatrixXd& alphas, double sigma, int order,
                  double extent_k, int size) {
  SampleOptions opts;
  opts.size_override = size;
  const BasisStack basis = sample_basis({order, sigma, extent_k}, opts);
  require(alphas.cols() == basis.count(), "reconstruct: alpha count mismatch");
  require(alphas.rows() >= 1, "reconstruct: need at least one channel");

  AlphaTensor tensor;
  tensor.out_channels = alphas.rows();
  tensor.in_channels = 1;
  tensor.values = alphas;
  const SynthesizedFilters filters = synthesize(tensor, basis);

  Image image;
  image.channels = alphas.rows();
  image.height = basis.size;
  image.width = basis.size;
  image.data.resize(image.channels * Index(basis.size) * basis.size);
  for (Index c = 0; c < image.channels; ++c) {
    GridMap plane(image.data.data() + c * Index(basis.size) * basis.size,
                  basis.size, basis.size);
    plane = filters.filter(c, 0);
  }
  return image;
}

}  // namespace njet

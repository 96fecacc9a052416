#include "njet/nn/conv2d.hpp"

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace njet {

namespace {

using StridedMap = Eigen::Map<RowMatrixXd, 0, Eigen::OuterStride<>>;
using ConstStridedMap = Eigen::Map<const RowMatrixXd, 0, Eigen::OuterStride<>>;

struct ConvGeometry {
  Index out_h, out_w;
  int pad;
  Index patch;  // im2col rows: in_channels * size * size
};

ConvGeometry check_geometry(const FeatureMap& input, const RowMatrixXd& filters,
                            Index out_channels, Index in_channels, int size,
                            Padding padding) {
  require(size >= 1 && size % 2 == 1, "conv2d: filter size must be odd");
  require(input.channels == in_channels, "conv2d: input channel mismatch");
  require(filters.rows() == out_channels * in_channels &&
              filters.cols() == Index(size) * size,
          "conv2d: filter tensor shape mismatch");
  ConvGeometry g;
  if (padding == Padding::Same) {
    g.pad = (size - 1) / 2;
    g.out_h = input.height;
    g.out_w = input.width;
  } else {
    g.pad = 0;
    if (size > input.height || size > input.width)
      throw std::invalid_argument("conv2d: filter larger than input in valid mode");
    g.out_h = input.height - size + 1;
    g.out_w = input.width - size + 1;
  }
  g.patch = in_channels * Index(size) * size;
  return g;
}

/// Patch matrix for output rows [y0, y1) of one batch item: row (c*s + u)*s + v,
/// column (y - y0)*out_w + x holds input(c, y + u - pad, x + v - pad) or zero.
void im2col(const FeatureMap& input, Index b, const ConvGeometry& g, int size,
            Index y0, Index y1, RowMatrixXd& col) {
  const Index w_in = input.width;
  for (Index c = 0; c < input.channels; ++c) {
    const double* plane = input.data.data() + input.offset(b, c);
    for (int u = 0; u < size; ++u)
      for (int v = 0; v < size; ++v) {
        double* row = col.row((c * size + u) * size + v).data();
        const Index x_lo = std::clamp<Index>(g.pad - v, 0, g.out_w);
        const Index x_hi = std::clamp<Index>(w_in + g.pad - v, x_lo, g.out_w);
        for (Index y = y0; y < y1; ++y) {
          double* seg = row + (y - y0) * g.out_w;
          const Index iy = y + u - g.pad;
          if (iy < 0 || iy >= input.height || x_lo >= x_hi) {
            std::fill(seg, seg + g.out_w, 0.0);
            continue;
          }
          std::fill(seg, seg + x_lo, 0.0);
          const double* src = plane + iy * w_in + (x_lo + v - g.pad);
          std::copy(src, src + (x_hi - x_lo), seg + x_lo);
          std::fill(seg + x_hi, seg + g.out_w, 0.0);
        }
      }
  }
}

/// Adjoint of im2col: scatter-adds dcol back into dinput.
void col2im(const RowMatrixXd& dcol, Index b, const ConvGeometry& g, int size,
            Index y0, Index y1, FeatureMap& dinput) {
  const Index w_in = dinput.width;
  for (Index c = 0; c < dinput.channels; ++c) {
    double* plane = dinput.data.data() + dinput.offset(b, c);
    for (int u = 0; u < size; ++u)
      for (int v = 0; v < size; ++v) {
        const double* row = dcol.row((c * size + u) * size + v).data();
        const Index x_lo = std::clamp<Index>(g.pad - v, 0, g.out_w);
        const Index x_hi = std::clamp<Index>(w_in + g.pad - v, x_lo, g.out_w);
        for (Index y = y0; y < y1; ++y) {
          const Index iy = y + u - g.pad;
          if (iy < 0 || iy >= dinput.height || x_lo >= x_hi) continue;
          const double* seg = row + (y - y0) * g.out_w + x_lo;
          double* dst = plane + iy * w_in + (x_lo + v - g.pad);
          for (Index i = 0; i < x_hi - x_lo; ++i) dst[i] += seg[i];
        }
      }
  }
}

Index chunk_rows(const ConvGeometry& g) {
  // Bound the im2col buffer to ~4 MB so large inputs do not blow up memory.
  const Index budget = (Index(4) << 20) / (8 * std::max<Index>(1, g.patch * g.out_w));
  return std::clamp<Index>(budget, 1, g.out_h);
}

}  // namespace

FeatureMap conv2d_forward(const FeatureMap& input, const RowMatrixXd& filters,
                          Index out_channels, Index in_channels, int size,
                          const VectorXd& bias, Padding padding) {
  const ConvGeometry g =
      check_geometry(input, filters, out_channels, in_channels, size, padding);
  require(bias.size() == out_channels, "conv2d: bias size mismatch");
  Eigen::Map<const RowMatrixXd> weight(filters.data(), out_channels, g.patch);

  FeatureMap out(input.batch, out_channels, g.out_h, g.out_w);
  const Index rows_per_chunk = chunk_rows(g);

#ifdef _OPENMP
#pragma omp parallel
#endif
  {
    RowMatrixXd col(g.patch, rows_per_chunk * g.out_w);
#ifdef _OPENMP
#pragma omp for schedule(static)
#endif
    for (Index b = 0; b < input.batch; ++b)
      for (Index y0 = 0; y0 < g.out_h; y0 += rows_per_chunk) {
        const Index y1 = std::min(g.out_h, y0 + rows_per_chunk);
        im2col(input, b, g, size, y0, y1, col);
        auto block = col.leftCols((y1 - y0) * g.out_w);
        StridedMap view(out.data.data() + out.offset(b, 0) + y0 * g.out_w,
                        out_channels, (y1 - y0) * g.out_w,
                        Eigen::OuterStride<>(g.out_h * g.out_w));
        view.noalias() = weight * block;
        view.colwise() += bias;
      }
  }
  return out;
}

Conv2dGrads conv2d_backward(const FeatureMap& upstream, const FeatureMap& input,
                            const RowMatrixXd& filters, Index out_channels,
                            Index in_channels, int size, Padding padding) {
  const ConvGeometry g =
      check_geometry(input, filters, out_channels, in_channels, size, padding);
  require(upstream.batch == input.batch && upstream.channels == out_channels &&
              upstream.height == g.out_h && upstream.width == g.out_w,
          "conv2d_backward: upstream shape mismatch");
  Eigen::Map<const RowMatrixXd> weight(filters.data(), out_channels, g.patch);

  Conv2dGrads grads;
  grads.dinput = FeatureMap::zeros_like(input);
  grads.dfilters = RowMatrixXd::Zero(filters.rows(), filters.cols());
  grads.dbias = VectorXd::Zero(out_channels);
  const Index rows_per_chunk = chunk_rows(g);

#ifdef _OPENMP
  const int n_threads = omp_get_max_threads();
#else
  const int n_threads = 1;
#endif
  std::vector<RowMatrixXd> dw_acc(n_threads, RowMatrixXd::Zero(out_channels, g.patch));
  std::vector<VectorXd> db_acc(n_threads, VectorXd::Zero(out_channels));

#ifdef _OPENMP
#pragma omp parallel
#endif
  {
#ifdef _OPENMP
    const int tid = omp_get_thread_num();
#else
    const int tid = 0;
#endif
    RowMatrixXd col(g.patch, rows_per_chunk * g.out_w);
    RowMatrixXd dcol(g.patch, rows_per_chunk * g.out_w);
#ifdef _OPENMP
#pragma omp for schedule(static)
#endif
    for (Index b = 0; b < input.batch; ++b) {
      for (Index y0 = 0; y0 < g.out_h; y0 += rows_per_chunk) {
        const Index y1 = std::min(g.out_h, y0 + rows_per_chunk);
        const Index n = (y1 - y0) * g.out_w;
        im2col(input, b, g, size, y0, y1, col);
        ConstStridedMap up(upstream.data.data() + upstream.offset(b, 0) + y0 * g.out_w,
                           out_channels, n, Eigen::OuterStride<>(g.out_h * g.out_w));
        dw_acc[tid].noalias() += up * col.leftCols(n).transpose();
        auto dblock = dcol.leftCols(n);
        dblock.noalias() = weight.transpose() * up;
        col2im(dcol, b, g, size, y0, y1, grads.dinput);
      }
      for (Index o = 0; o < out_channels; ++o)
        db_acc[tid][o] += upstream.plane(b, o).sum();
    }
  }

  Eigen::Map<RowMatrixXd> dweight(grads.dfilters.data(), out_channels, g.patch);
  for (int t = 0; t < n_threads; ++t) {
    dweight += dw_acc[t];
    grads.dbias += db_acc[t];
  }
  return grads;
}

}  // namespace njet

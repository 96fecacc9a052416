#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace njet {

using Index = Eigen::Index;

// Row-major dense matrix. Filter stacks keep one vectorized filter per row,
// so a row maps directly onto an s x s image without a stride.
using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixXd = Eigen::MatrixXd;
using VectorXd = Eigen::VectorXd;
using VectorXi = Eigen::VectorXi;
using VectorXf = Eigen::VectorXf;

using ConstGridMap = Eigen::Map<const RowMatrixXd>;
using GridMap = Eigen::Map<RowMatrixXd>;

/// Thrown when a derived filter size exceeds the configured hard cap.
/// Signals a runaway scale parameter during training.
class SizeCapError : public std::runtime_error {
public:
  SizeCapError(int size, int cap)
      : std::runtime_error("filter size " + std::to_string(size) +
                           " exceeds hard cap " + std::to_string(cap)),
        size_(size), cap_(cap) {}
  int size() const { return size_; }
  int cap() const { return cap_; }

private:
  int size_;
  int cap_;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace njet

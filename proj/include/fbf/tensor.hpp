#ifndef FBF_TENSOR_HPP
#define FBF_TENSOR_HPP

#include <Eigen/Core>
#include <vector>

#include "fbf/errors.hpp"

namespace fbf::ad {

/// Dense rank-1 or rank-2 tensor of doubles. A scalar is a rank-1 tensor of
/// extent 1. Storage is a row-major Eigen matrix; rank-1 tensors occupy one
/// row, so the flat buffer order always matches the logical row-major order.
class Tensor {
 public:
  using Storage =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Tensor() = default;

  static Tensor scalar(double v);
  static Tensor vector(const Eigen::VectorXd& v);
  static Tensor matrix(const Eigen::MatrixXd& m);
  static Tensor zeros(const std::vector<Eigen::Index>& shape);
  /// Wraps existing storage. The storage extents must agree with the shape:
  /// 1 x n for rank-1 of extent n, r x c for rank-2.
  static Tensor with_shape(std::vector<Eigen::Index> shape, Storage data);

  int rank() const { return static_cast<int>(shape_.size()); }
  const std::vector<Eigen::Index>& shape() const { return shape_; }
  Eigen::Index size() const { return data_.size(); }
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

  Storage& data() { return data_; }
  const Storage& data() const { return data_; }

  double scalar_value() const;
  Eigen::VectorXd as_vector() const;
  Eigen::MatrixXd as_matrix() const;

  bool all_finite() const { return data_.allFinite(); }

 private:
  std::vector<Eigen::Index> shape_;
  Storage data_;
};

}  // namespace fbf::ad

#endif  // FBF_TENSOR_HPP

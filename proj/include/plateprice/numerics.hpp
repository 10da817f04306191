#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "plateprice/error.hpp"

namespace plateprice {

/// Dense row-major matrix of doubles. The single tensor type used for
/// weights, activations and gradients throughout the project.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;  // row-major, rows * cols entries

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  std::size_t size() const { return data.size(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
  bool all_finite() const;

  static Matrix identity(std::size_t n);
};

using RowMajorMat =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline Eigen::Map<RowMajorMat> emap(Matrix& m) {
  return {m.data.data(), static_cast<Eigen::Index>(m.rows),
          static_cast<Eigen::Index>(m.cols)};
}
inline Eigen::Map<const RowMajorMat> emap(const Matrix& m) {
  return {m.data.data(), static_cast<Eigen::Index>(m.rows),
          static_cast<Eigen::Index>(m.cols)};
}

/// a * b. Throws DataError naming both shapes on a dimension mismatch.
Matrix matmul(const Matrix& a, const Matrix& b);

/// Elementwise max(0, x).
Matrix relu(const Matrix& x);

/// L2 norm over all entries of all matrices.
double global_norm(const std::vector<const Matrix*>& grads);

/// Scales every entry so the joint L2 norm does not exceed `threshold`.
/// Returns the applied scale (1 when already within the threshold). Throws
/// NumericError identifying the offending block on non-finite entries.
/// `names`, when given, must parallel `grads` and is used in error messages.
double clip_global_norm(const std::vector<Matrix*>& grads, double threshold,
                        const std::vector<std::string>& names = {});

/// Central-difference gradient (f(x+h*e_i) - f(x-h*e_i)) / 2h. Test oracle
/// for backpropagation; independent of any analytic gradient path.
std::vector<double> finite_diff_gradient(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& x, double h);

/// Deterministic xoshiro256++ generator. Identical seeds produce identical
/// draw sequences on every platform: all distributions below are built from
/// integer arithmetic plus exactly specified double conversions, never from
/// std::<random> distributions (whose output is implementation-defined).
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed);

  std::uint64_t next();
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// Standard normal via Box-Muller.
  double normal();
  /// Uniform integer in [0, bound). Unbiased (Lemire rejection).
  std::uint64_t below(std::uint64_t bound);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::array<std::uint64_t, 4> state_{};
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace plateprice

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

namespace mapest {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// wrap into [0, 2π)
inline double wrap_angle(double a) {
  double r = std::fmod(a, kTwoPi);
  if (r < 0) r += kTwoPi;
  if (r >= kTwoPi) r = 0.0;
  return r;
}

// wrap into [-π, π)
inline double wrap_diff(double a) {
  double r = wrap_angle(a + kPi) - kPi;
  return r;
}

// Dense rank-3 array, index (a, i, j), row-major in the last index.
class Array3 {
 public:
  Array3() = default;
  Array3(int n0, int n1, int n2) : n0_(n0), n1_(n1), n2_(n2), d_(std::size_t(n0) * n1 * n2, 0.0) {}

  double& operator()(int a, int i, int j) { return d_[(std::size_t(a) * n1_ + i) * n2_ + j]; }
  double operator()(int a, int i, int j) const { return d_[(std::size_t(a) * n1_ + i) * n2_ + j]; }

  int dim0() const { return n0_; }
  int dim1() const { return n1_; }
  int dim2() const { return n2_; }

  void set_zero() { std::fill(d_.begin(), d_.end(), 0.0); }
  double squared_norm() const {
    double s = 0;
    for (double x : d_) s += x * x;
    return s;
  }
  double max_abs() const {
    double s = 0;
    for (double x : d_) s = std::max(s, std::abs(x));
    return s;
  }

  // slice a: n1 x n2 matrix
  Mat slice(int a) const {
    Mat m(n1_, n2_);
    for (int i = 0; i < n1_; ++i)
      for (int j = 0; j < n2_; ++j) m(i, j) = (*this)(a, i, j);
    return m;
  }

  // v_a = sum_ij A(a,i,j) x_i y_j
  Vec contract(const Vec& x, const Vec& y) const {
    Vec out = Vec::Zero(n0_);
    for (int a = 0; a < n0_; ++a)
      for (int i = 0; i < n1_; ++i)
        for (int j = 0; j < n2_; ++j) out(a) += (*this)(a, i, j) * x(i) * y(j);
    return out;
  }

 private:
  int n0_ = 0, n1_ = 0, n2_ = 0;
  std::vector<double> d_;
};

// Dense rank-4 array, index (a, b, c, d).
class Array4 {
 public:
  Array4() = default;
  explicit Array4(int n) : n_(n), d_(std::size_t(n) * n * n * n, 0.0) {}
  Array4(int n0, int n) : n0_(n0), n_(n), d_(std::size_t(n0) * n * n * n, 0.0) {}

  double& operator()(int a, int b, int c, int d) { return d_[idx(a, b, c, d)]; }
  double operator()(int a, int b, int c, int d) const { return d_[idx(a, b, c, d)]; }
  int dim0() const { return n0_ < 0 ? n_ : n0_; }
  int dim() const { return n_; }

 private:
  std::size_t idx(int a, int b, int c, int d) const {
    return ((std::size_t(a) * n_ + b) * n_ + c) * n_ + d;
  }
  int n0_ = -1;
  int n_ = 0;
  std::vector<double> d_;
};

// G^{-1/2} for a symmetric positive definite matrix.
inline Mat inverse_sqrt_spd(const Mat& g) {
  Eigen::SelfAdjointEigenSolver<Mat> es(g);
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
         es.eigenvectors().transpose();
}

inline Mat sqrt_spd(const Mat& g) {
  Eigen::SelfAdjointEigenSolver<Mat> es(g);
  return es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace mapest

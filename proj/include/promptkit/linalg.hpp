#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "promptkit/errors.hpp"

namespace promptkit {

using Vec = std::vector<double>;

// Dense row-major matrix. The stub models and search code only need
// row access, mat-vec products and cosine lookups, so this stays minimal.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  const double* row(std::size_t r) const { return data_.data() + r * cols_; }
  double* row(std::size_t r) { return data_.data() + r * cols_; }

  Vec row_vec(std::size_t r) const {
    return Vec(row(r), row(r) + cols_);
  }

  void set_row(std::size_t r, const Vec& v) {
    if (v.size() != cols_)
      throw ValidationError("row assignment width mismatch");
    for (std::size_t c = 0; c < cols_; ++c) (*this)(r, c) = v[c];
  }

  // y = M x
  Vec matvec(const Vec& x) const {
    if (x.size() != cols_) throw ValidationError("matvec width mismatch");
    Vec y(rows_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r) {
      const double* p = row(r);
      double acc = 0.0;
      for (std::size_t c = 0; c < cols_; ++c) acc += p[c] * x[c];
      y[r] = acc;
    }
    return y;
  }

  // y = M^T x
  Vec matvec_transposed(const Vec& x) const {
    if (x.size() != rows_) throw ValidationError("matvec_transposed mismatch");
    Vec y(cols_, 0.0);
    for (std::size_t r = 0; r < rows_; ++r) {
      const double* p = row(r);
      const double xr = x[r];
      for (std::size_t c = 0; c < cols_; ++c) y[c] += p[c] * xr;
    }
    return y;
  }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

inline double dot(const Vec& a, const Vec& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double dot(const double* a, const Vec& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < b.size(); ++i) acc += a[i] * b[i];
  return acc;
}

inline double norm2(const Vec& a) { return std::sqrt(dot(a, a)); }

inline void axpy(double alpha, const Vec& x, Vec& y) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

inline void scale(Vec& x, double alpha) {
  for (double& v : x) v *= alpha;
}

// cosine(a, row r of m); caller guards against zero norms.
inline double cosine_to_row(const Vec& a, const Matrix& m, std::size_t r) {
  double ab = 0.0, bb = 0.0;
  const double* p = m.row(r);
  for (std::size_t c = 0; c < m.cols(); ++c) {
    ab += a[c] * p[c];
    bb += p[c] * p[c];
  }
  const double na = norm2(a);
  return ab / (na * std::sqrt(bb));
}

inline double squared_distance_to_row(const Vec& a, const Matrix& m,
                                      std::size_t r) {
  double acc = 0.0;
  const double* p = m.row(r);
  for (std::size_t c = 0; c < m.cols(); ++c) {
    const double d = a[c] - p[c];
    acc += d * d;
  }
  return acc;
}

// Numerically stable log-softmax over raw scores.
inline Vec log_softmax(const Vec& logits) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double v : logits) mx = std::max(mx, v);
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - mx);
  const double lse = mx + std::log(sum);
  Vec out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

}  // namespace promptkit

#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

namespace jamdet {

/// Dense row-major matrix of doubles. Sized for desk-scale models
/// (hidden layers of tens of units), so plain loops are fine.
struct Mat {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

  double& operator()(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }

  void zero() { std::fill(a.begin(), a.end(), 0.0); }

  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

/// y = M x
inline std::vector<double> matvec(const Mat& m, const std::vector<double>& x) {
  assert(static_cast<int>(x.size()) == m.cols);
  std::vector<double> y(m.rows, 0.0);
  for (int r = 0; r < m.rows; ++r) {
    double acc = 0.0;
    const double* row = &m.a[static_cast<std::size_t>(r) * m.cols];
    for (int c = 0; c < m.cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
  return y;
}

/// y = M^T x
inline std::vector<double> matvec_t(const Mat& m, const std::vector<double>& x) {
  assert(static_cast<int>(x.size()) == m.rows);
  std::vector<double> y(m.cols, 0.0);
  for (int r = 0; r < m.rows; ++r) {
    const double* row = &m.a[static_cast<std::size_t>(r) * m.cols];
    for (int c = 0; c < m.cols; ++c) y[c] += row[c] * x[r];
  }
  return y;
}

/// M += scale * u v^T
inline void add_outer(Mat& m, const std::vector<double>& u, const std::vector<double>& v,
                      double scale = 1.0) {
  assert(static_cast<int>(u.size()) == m.rows && static_cast<int>(v.size()) == m.cols);
  for (int r = 0; r < m.rows; ++r) {
    double* row = &m.a[static_cast<std::size_t>(r) * m.cols];
    const double s = scale * u[r];
    for (int c = 0; c < m.cols; ++c) row[c] += s * v[c];
  }
}

inline void axpy(std::vector<double>& y, const std::vector<double>& x, double scale) {
  assert(y.size() == x.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += scale * x[i];
}

}  // namespace jamdet

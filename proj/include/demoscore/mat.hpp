#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "demoscore/errors.hpp"

namespace demoscore {

// Dense row-major matrix of 64-bit floats.
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  const double* row(std::size_t r) const { return data.data() + r * cols; }
  double* row(std::size_t r) { return data.data() + r * cols; }

  std::size_t size() const { return data.size(); }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }

  void fill(double v) {
    for (auto& x : data) x = v;
  }
};

// y = A x
inline void matvec(const Mat& a, const double* x, double* y) {
  for (std::size_t r = 0; r < a.rows; ++r) {
    const double* w = a.row(r);
    double s = 0.0;
    for (std::size_t c = 0; c < a.cols; ++c) s += w[c] * x[c];
    y[r] = s;
  }
}

// y = A^T x
inline void matvec_t(const Mat& a, const double* x, double* y) {
  for (std::size_t c = 0; c < a.cols; ++c) y[c] = 0.0;
  for (std::size_t r = 0; r < a.rows; ++r) {
    const double* w = a.row(r);
    double xr = x[r];
    for (std::size_t c = 0; c < a.cols; ++c) y[c] += w[c] * xr;
  }
}

}  // namespace demoscore

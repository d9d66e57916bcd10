#pragma once

#include <cmath>
#include <initializer_list>
#include <vector>

#include "hgcn/tensor.hpp"

namespace test {

// Mirrors the dyadic-rational fill in tests/reference/common.py.
inline hgcn::Tensor patt(std::int64_t rows, std::int64_t cols, long a, long b, long c, long m,
                         double s) {
  hgcn::Tensor t({rows, cols});
  for (std::int64_t i = 0; i < rows; ++i)
    for (std::int64_t j = 0; j < cols; ++j)
      t.at(i, j) = static_cast<double>((a * i + b * j + c) % m - m / 2) / s;
  return t;
}

inline hgcn::Tensor patt1(std::int64_t n, long a, long c, long m, double s) {
  hgcn::Tensor t({n});
  for (std::int64_t i = 0; i < n; ++i)
    t.data[i] = static_cast<double>((a * i + c) % m - m / 2) / s;
  return t;
}

inline hgcn::Tensor mat(std::initializer_list<std::initializer_list<double>> rows) {
  const std::int64_t r = static_cast<std::int64_t>(rows.size());
  const std::int64_t c = static_cast<std::int64_t>(rows.begin()->size());
  hgcn::Tensor t({r, c});
  std::int64_t i = 0;
  for (const auto& row : rows)
    for (double v : row) t.data[i++] = v;
  return t;
}

inline hgcn::Tensor vec(std::initializer_list<double> xs) {
  hgcn::Tensor t({static_cast<std::int64_t>(xs.size())});
  std::int64_t i = 0;
  for (double v : xs) t.data[i++] = v;
  return t;
}

inline double max_diff(const hgcn::Tensor& a, const hgcn::Tensor& b) {
  return hgcn::max_abs_diff(a, b);
}

}  // namespace test

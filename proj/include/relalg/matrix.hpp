#pragma once

// Small dense matrices of Scalars. Determinants use cofactor expansion: the
// systems handled here have at most a handful of rows and the entries are
// polynomials, so fraction-free elimination would buy nothing.

#include <stdexcept>
#include <vector>

#include "relalg/expr.hpp"

namespace relalg {

using ScalarMatrix = std::vector<std::vector<Scalar>>;

inline ScalarMatrix minor_matrix(const ScalarMatrix& m, std::size_t row, std::size_t col) {
  ScalarMatrix out;
  out.reserve(m.size() - 1);
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (i == row) continue;
    std::vector<Scalar> r;
    r.reserve(m.size() - 1);
    for (std::size_t j = 0; j < m[i].size(); ++j) {
      if (j != col) r.push_back(m[i][j]);
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline Scalar determinant(const ScalarMatrix& m) {
  const std::size_t n = m.size();
  for (const auto& row : m) {
    if (row.size() != n) throw std::invalid_argument("determinant of a non-square matrix");
  }
  if (n == 0) return Scalar(1);
  if (n == 1) return m[0][0];
  if (n == 2) return m[0][0] * m[1][1] - m[0][1] * m[1][0];
  Scalar det;
  for (std::size_t j = 0; j < n; ++j) {
    if (m[0][j].is_zero()) continue;
    Scalar term = m[0][j] * determinant(minor_matrix(m, 0, j));
    det += (j % 2 == 0) ? term : -term;
  }
  return det;
}

// Classical adjugate: adj(m) * m = det(m) * I.
inline ScalarMatrix adjugate(const ScalarMatrix& m) {
  const std::size_t n = m.size();
  ScalarMatrix adj(n, std::vector<Scalar>(n));
  if (n == 1) {
    adj[0][0] = Scalar(1);
    return adj;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      Scalar c = determinant(minor_matrix(m, i, j));
      adj[j][i] = ((i + j) % 2 == 0) ? c : -c;
    }
  }
  return adj;
}

}  // namespace relalg

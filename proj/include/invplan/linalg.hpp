#pragma once

// Small dense linear algebra for low-dimensional geometry (d <= ~16):
// row-major matrices, symmetric Jacobi eigensolver, LU determinant.

#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace invplan {

struct Mat {
  int rows = 0, cols = 0;
  std::vector<double> a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

  double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
  double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

  static Mat identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
};

inline double dot(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

inline double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

inline double dist2(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double d = x[i] - y[i];
    s += d * d;
  }
  return std::sqrt(s);
}

// Symmetric eigendecomposition by cyclic Jacobi. Eigenvalues descending,
// eigenvectors as columns of V.
inline void jacobi_eigen_sym(Mat A, std::vector<double>& evals, Mat& V) {
  int n = A.rows;
  assert(A.cols == n);
  V = Mat::identity(n);
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += A(p, q) * A(p, q);
    if (off < 1e-300) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        double apq = A(p, q);
        if (std::fabs(apq) < 1e-300) continue;
        double theta = (A(q, q) - A(p, p)) / (2.0 * apq);
        double t = (theta >= 0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (int k = 0; k < n; ++k) {
          double akp = A(k, p), akq = A(k, q);
          A(k, p) = c * akp - s * akq;
          A(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          double apk = A(p, k), aqk = A(q, k);
          A(p, k) = c * apk - s * aqk;
          A(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          double vkp = V(k, p), vkq = V(k, q);
          V(k, p) = c * vkp - s * vkq;
          V(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  evals.resize(n);
  for (int i = 0; i < n; ++i) evals[i] = A(i, i);
  // selection sort, descending, carrying columns along
  for (int i = 0; i < n; ++i) {
    int best = i;
    for (int j = i + 1; j < n; ++j)
      if (evals[j] > evals[best]) best = j;
    if (best != i) {
      std::swap(evals[i], evals[best]);
      for (int k = 0; k < n; ++k) std::swap(V(k, i), V(k, best));
    }
  }
}

// Determinant via LU with partial pivoting.
inline double lu_det(Mat A) {
  int n = A.rows;
  assert(A.cols == n);
  double det = 1.0;
  for (int k = 0; k < n; ++k) {
    int piv = k;
    for (int i = k + 1; i < n; ++i)
      if (std::fabs(A(i, k)) > std::fabs(A(piv, k))) piv = i;
    if (piv != k) {
      for (int j = 0; j < n; ++j) std::swap(A(k, j), A(piv, j));
      det = -det;
    }
    double akk = A(k, k);
    if (akk == 0.0) return 0.0;
    det *= akk;
    for (int i = k + 1; i < n; ++i) {
      double f = A(i, k) / akk;
      for (int j = k; j < n; ++j) A(i, j) -= f * A(k, j);
    }
  }
  return det;
}

} // namespace invplan

#ifndef GRAPHHEAT_LINALG_HPP
#define GRAPHHEAT_LINALG_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <numeric>
#include <string>
#include <vector>

#include "graphheat/error.hpp"

namespace graphheat {

// Symmetric sparse matrix in compressed-row form; both triangles stored.
class CsrMatrix {
public:
  CsrMatrix() = default;
  CsrMatrix(std::size_t n, std::vector<std::size_t> row_ptr, std::vector<std::size_t> cols,
            std::vector<double> vals)
      : n_(n), row_ptr_(std::move(row_ptr)), cols_(std::move(cols)), vals_(std::move(vals)) {}

  std::size_t rows() const noexcept { return n_; }
  std::size_t nonzeros() const noexcept { return vals_.size(); }
  const std::vector<std::size_t>& row_ptr() const noexcept { return row_ptr_; }
  const std::vector<std::size_t>& cols() const noexcept { return cols_; }
  const std::vector<double>& vals() const noexcept { return vals_; }

  double at(std::size_t i, std::size_t j) const {
    for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
      if (cols_[k] == j)
        return vals_[k];
    return 0.0;
  }

  void multiply(const std::vector<double>& x, std::vector<double>& y) const {
    y.assign(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      double acc = 0.0;
      for (std::size_t k = row_ptr_[i]; k < row_ptr_[i + 1]; ++k)
        acc += vals_[k] * x[cols_[k]];
      y[i] = acc;
    }
  }

  std::vector<double> diagonal() const {
    std::vector<double> d(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i)
      d[i] = at(i, i);
    return d;
  }

  // a * this + diag(shift)
  CsrMatrix scaled_plus_diagonal(double a, const std::vector<double>& shift) const {
    CsrMatrix out = *this;
    for (auto& v : out.vals_)
      v *= a;
    for (std::size_t i = 0; i < n_; ++i) {
      bool found = false;
      for (std::size_t k = out.row_ptr_[i]; k < out.row_ptr_[i + 1]; ++k)
        if (out.cols_[k] == i) {
          out.vals_[k] += shift[i];
          found = true;
        }
      if (!found)
        throw error("scaled_plus_diagonal: missing diagonal entry in row " + std::to_string(i));
    }
    return out;
  }

private:
  std::size_t n_ = 0;
  std::vector<std::size_t> row_ptr_, cols_;
  std::vector<double> vals_;
};

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    s += a[i] * b[i];
  return s;
}

struct CgResult {
  std::size_t iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

// Jacobi-preconditioned conjugate gradient. `x` holds the initial guess on
// entry and the solution on exit. Stops once ||b - Ax|| <= tol ||b||.
inline CgResult conjugate_gradient(const CsrMatrix& A, const std::vector<double>& b,
                                   std::vector<double>& x, double tol = 1e-12,
                                   std::size_t max_iter = 0) {
  const std::size_t n = A.rows();
  if (max_iter == 0)
    max_iter = 10 * n + 100;
  x.resize(n, 0.0);
  CgResult res;
  const double bnorm = std::sqrt(dot(b, b));
  if (bnorm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    res.converged = true;
    return res;
  }
  std::vector<double> minv = A.diagonal();
  for (auto& v : minv)
    v = v > 0.0 ? 1.0 / v : 1.0;

  std::vector<double> r(n), z(n), p(n), Ap(n);
  A.multiply(x, Ap);
  for (std::size_t i = 0; i < n; ++i)
    r[i] = b[i] - Ap[i];
  for (std::size_t i = 0; i < n; ++i)
    z[i] = minv[i] * r[i];
  p = z;
  double rz = dot(r, z);
  double rnorm = std::sqrt(dot(r, r));
  while (rnorm > tol * bnorm && res.iterations < max_iter) {
    A.multiply(p, Ap);
    const double alpha = rz / dot(p, Ap);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * Ap[i];
    }
    for (std::size_t i = 0; i < n; ++i)
      z[i] = minv[i] * r[i];
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i)
      p[i] = z[i] + beta * p[i];
    rnorm = std::sqrt(dot(r, r));
    ++res.iterations;
  }
  res.relative_residual = rnorm / bnorm;
  res.converged = rnorm <= tol * bnorm;
  return res;
}

// Reverse Cuthill-McKee ordering of the sparsity graph of A. perm[new] = old.
inline std::vector<std::size_t> reverse_cuthill_mckee(const CsrMatrix& A) {
  const std::size_t n = A.rows();
  const auto& rp = A.row_ptr();
  const auto& cols = A.cols();
  std::vector<std::size_t> deg(n);
  for (std::size_t i = 0; i < n; ++i)
    deg[i] = rp[i + 1] - rp[i];
  std::vector<std::size_t> order;
  order.reserve(n);
  std::vector<char> seen(n, 0);
  std::vector<std::size_t> by_degree(n);
  std::iota(by_degree.begin(), by_degree.end(), 0);
  std::stable_sort(by_degree.begin(), by_degree.end(),
                   [&](std::size_t a, std::size_t b) { return deg[a] < deg[b]; });
  std::vector<std::size_t> nbrs;
  for (std::size_t start : by_degree) {
    if (seen[start])
      continue;
    std::deque<std::size_t> queue{start};
    seen[start] = 1;
    while (!queue.empty()) {
      std::size_t v = queue.front();
      queue.pop_front();
      order.push_back(v);
      nbrs.clear();
      for (std::size_t k = rp[v]; k < rp[v + 1]; ++k)
        if (!seen[cols[k]]) {
          seen[cols[k]] = 1;
          nbrs.push_back(cols[k]);
        }
      std::stable_sort(nbrs.begin(), nbrs.end(),
                       [&](std::size_t a, std::size_t b) { return deg[a] < deg[b]; });
      for (auto u : nbrs)
        queue.push_back(u);
    }
  }
  std::reverse(order.begin(), order.end());
  return order;
}

// Envelope (skyline) Cholesky factorization A = L L^T of a symmetric
// positive definite matrix, in a bandwidth-reducing ordering.
class SkylineCholesky {
public:
  explicit SkylineCholesky(const CsrMatrix& A) : n_(A.rows()) {
    perm_ = reverse_cuthill_mckee(A);
    inv_.assign(n_, 0);
    for (std::size_t i = 0; i < n_; ++i)
      inv_[perm_[i]] = i;

    // first[i]: leftmost column of row i in the permuted lower triangle
    first_.assign(n_, 0);
    for (std::size_t i = 0; i < n_; ++i)
      first_[i] = i;
    const auto& rp = A.row_ptr();
    const auto& cols = A.cols();
    const auto& vals = A.vals();
    for (std::size_t old = 0; old < n_; ++old) {
      std::size_t i = inv_[old];
      for (std::size_t k = rp[old]; k < rp[old + 1]; ++k) {
        std::size_t j = inv_[cols[k]];
        if (j < i)
          first_[i] = std::min(first_[i], j);
      }
    }
    start_.assign(n_ + 1, 0);
    for (std::size_t i = 0; i < n_; ++i)
      start_[i + 1] = start_[i] + (i - first_[i] + 1);
    env_.assign(start_[n_], 0.0);
    for (std::size_t old = 0; old < n_; ++old) {
      std::size_t i = inv_[old];
      for (std::size_t k = rp[old]; k < rp[old + 1]; ++k) {
        std::size_t j = inv_[cols[k]];
        if (j <= i)
          entry(i, j) += vals[k];
      }
    }
    factor();
  }

  std::size_t envelope_size() const noexcept { return env_.size(); }

  std::vector<double> solve(const std::vector<double>& b) const {
    std::vector<double> y(n_);
    for (std::size_t i = 0; i < n_; ++i)
      y[i] = b[perm_[i]];
    // forward: L y = b
    for (std::size_t i = 0; i < n_; ++i) {
      double acc = y[i];
      const double* row = &env_[start_[i]];
      for (std::size_t j = first_[i]; j < i; ++j)
        acc -= row[j - first_[i]] * y[j];
      y[i] = acc / row[i - first_[i]];
    }
    // backward: L^T x = y
    for (std::size_t ii = n_; ii-- > 0;) {
      const double* row = &env_[start_[ii]];
      y[ii] /= row[ii - first_[ii]];
      const double yi = y[ii];
      for (std::size_t j = first_[ii]; j < ii; ++j)
        y[j] -= row[j - first_[ii]] * yi;
    }
    std::vector<double> x(n_);
    for (std::size_t i = 0; i < n_; ++i)
      x[perm_[i]] = y[i];
    return x;
  }

private:
  double& entry(std::size_t i, std::size_t j) { return env_[start_[i] + (j - first_[i])]; }

  void factor() {
    for (std::size_t i = 0; i < n_; ++i) {
      double* ri = &env_[start_[i]];
      const std::size_t fi = first_[i];
      for (std::size_t j = fi; j < i; ++j) {
        const double* rj = &env_[start_[j]];
        const std::size_t lo = std::max(fi, first_[j]);
        double acc = ri[j - fi];
        for (std::size_t k = lo; k < j; ++k)
          acc -= ri[k - fi] * rj[k - first_[j]];
        ri[j - fi] = acc / rj[j - first_[j]];
      }
      double diag = ri[i - fi];
      for (std::size_t k = fi; k < i; ++k)
        diag -= ri[k - fi] * ri[k - fi];
      if (!(diag > 0.0))
        throw error("skyline Cholesky: matrix is not positive definite (pivot " +
                    std::to_string(i) + ")");
      ri[i - fi] = std::sqrt(diag);
    }
  }

  std::size_t n_;
  std::vector<std::size_t> perm_, inv_, first_, start_;
  std::vector<double> env_;
};

} // namespace graphheat

#endif

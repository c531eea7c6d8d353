//
// Copyright 2026 The FairFed Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

// Small dense linear algebra for the symmetric positive (semi)definite
// matrices that appear as Gram matrices and ellipsoid metrics. Storage and
// factorizations are delegated to Eigen; this header pins the contracts
// (exact symmetry, PSD tolerance, error reporting) the rest of the library
// relies on.

#ifndef FAIRFED_NUMKIT_HPP_
#define FAIRFED_NUMKIT_HPP_

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <string>
#include <utility>

#include "fairfed/errors.hpp"

namespace fairfed {

using Vec = Eigen::VectorXd;

// Absolute tolerance on eigenvalues when deciding whether a matrix is PSD.
inline constexpr double kPsdTolerance = 1e-9;

// Dense symmetric matrix. Every constructor and mutator keeps
// entries(i, j) == entries(j, i) bit-for-bit.
class SymMat {
 public:
  SymMat() = default;

  // Throws InvariantError unless `m` is square and exactly symmetric.
  explicit SymMat(Eigen::MatrixXd m) : m_(std::move(m)) {
    if (m_.rows() != m_.cols()) {
      throw InvariantError("SymMat: matrix is not square");
    }
    for (Eigen::Index i = 0; i < m_.rows(); ++i) {
      for (Eigen::Index j = 0; j < i; ++j) {
        if (m_(i, j) != m_(j, i)) {
          throw InvariantError("SymMat: matrix is not exactly symmetric");
        }
      }
    }
  }

  static SymMat Zero(int d) { return SymMat(Eigen::MatrixXd::Zero(d, d), 0); }

  static SymMat Identity(int d, double scale = 1.0) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
    m.diagonal().setConstant(scale);
    return SymMat(std::move(m), 0);
  }

  // Copies the lower triangle onto the upper one.
  static SymMat FromLower(const Eigen::MatrixXd& m) {
    Eigen::MatrixXd out = m;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
      for (Eigen::Index j = i + 1; j < out.cols(); ++j) out(i, j) = out(j, i);
    }
    return SymMat(std::move(out), 0);
  }

  int dim() const { return static_cast<int>(m_.rows()); }
  const Eigen::MatrixXd& matrix() const { return m_; }
  double operator()(int i, int j) const { return m_(i, j); }

  SymMat& operator+=(const SymMat& other) {
    m_ += other.m_;
    return *this;
  }
  SymMat& operator-=(const SymMat& other) {
    m_ -= other.m_;
    return *this;
  }
  friend SymMat operator+(SymMat a, const SymMat& b) { return a += b; }
  friend SymMat operator-(SymMat a, const SymMat& b) { return a -= b; }

  void AddToDiagonal(double value) { m_.diagonal().array() += value; }

  SymMat Scaled(double factor) const { return SymMat(m_ * factor, 0); }

  bool operator==(const SymMat& other) const {
    return m_.rows() == other.m_.rows() && m_ == other.m_;
  }

 private:
  // Trusted constructor: caller guarantees exact symmetry.
  SymMat(Eigen::MatrixXd m, int) : m_(std::move(m)) {}

  Eigen::MatrixXd m_;
};

// Smallest eigenvalue of a symmetric matrix.
inline double min_eig(const SymMat& v) {
  if (v.dim() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(v.matrix(),
                                                        Eigen::EigenvaluesOnly);
  return solver.eigenvalues()(0);
}

// sqrt(v^T H v). H must be PSD; a quadratic form below -kPsdTolerance is
// reported as an invariant violation, tiny negative round-off is clamped.
inline double hnorm(const Vec& v, const SymMat& h) {
  const double q = v.dot(h.matrix() * v);
  if (q < -kPsdTolerance) {
    throw InvariantError("hnorm: negative quadratic form " + std::to_string(q) +
                         "; metric is not PSD");
  }
  return q > 0.0 ? std::sqrt(q) : 0.0;
}

// V + x x^T, computed entrywise so the result stays exactly symmetric.
inline SymMat rank_one_update(const SymMat& v, const Vec& x) {
  Eigen::MatrixXd m = v.matrix();
  const Eigen::Index d = m.rows();
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) m(i, j) += x(i) * x(j);
  }
  return SymMat::FromLower(m);
}

// Cholesky factorization of an SPD matrix, reused for repeated solves and
// inverse-metric norms within one round.
class SpdFactor {
 public:
  explicit SpdFactor(const SymMat& v) : llt_(v.matrix()) {
    if (llt_.info() != Eigen::Success) {
      throw SolverError("SpdFactor: matrix is not positive definite",
                        min_eig(v));
    }
    const auto diag = llt_.matrixLLT().diagonal();
    for (Eigen::Index i = 0; i < diag.size(); ++i) {
      if (!(diag(i) > 0.0) || !std::isfinite(diag(i))) {
        throw SolverError("SpdFactor: degenerate Cholesky pivot", min_eig(v));
      }
    }
  }

  int dim() const { return static_cast<int>(llt_.rows()); }

  Vec Solve(const Vec& b) const { return llt_.solve(b); }

  // ||x||_{V^{-1}} = ||L^{-1} x||_2.
  double InverseNorm(const Vec& x) const {
    return llt_.matrixL().solve(x).norm();
  }

  // Maps a point z of the unit-metric ball to V^{-1/2}-coordinates:
  // returns L^{-T} z, so that ||L^{-T} z||_V = ||z||_2.
  Vec FromWhitened(const Vec& z) const { return llt_.matrixU().solve(z); }

  double LogDet() const {
    const auto diag = llt_.matrixLLT().diagonal();
    double acc = 0.0;
    for (Eigen::Index i = 0; i < diag.size(); ++i) acc += std::log(diag(i));
    return 2.0 * acc;
  }

 private:
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

// Solves V theta = b for SPD V.
inline Vec solve_spd(const SymMat& v, const Vec& b) {
  return SpdFactor(v).Solve(b);
}

// ln det V for positive definite V.
inline double logdet(const SymMat& v) { return SpdFactor(v).LogDet(); }

}  // namespace fairfed

#endif  // FAIRFED_NUMKIT_HPP_

#pragma once

// Kernel evaluation, single- and multi-task Gram assembly, and the small set
// of dense matrix primitives the rest of the library is built on. Everything
// here is header-only and templated on the scalar type.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "mtsafe/errors.hpp"

namespace mtsafe {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Base-kernel hyperparameters (signal variance, ARD lengthscales, noise
/// variance), shared by every task.
template <typename Scalar>
struct BasicHyperparams {
  Scalar signal_variance{1};
  VectorX<Scalar> lengthscales;
  Scalar noise_variance{0};

  Eigen::Index dim() const { return lengthscales.size(); }

  /// Diagonal jitter added before any Gram factorization.
  Scalar jitter() const { return Scalar(1e-8) * signal_variance; }

  void validate() const {
    if (!(signal_variance > Scalar(0))) throw std::invalid_argument("signal_variance must be positive");
    if (lengthscales.size() == 0) throw std::invalid_argument("lengthscales must be nonempty");
    if (!(lengthscales.array() > Scalar(0)).all())
      throw std::invalid_argument("lengthscales must be positive");
    if (!(noise_variance >= Scalar(0))) throw std::invalid_argument("noise_variance must be nonnegative");
  }
};

/// Unit-diagonal, symmetric, strictly positive definite task correlation
/// matrix with off-diagonal entries in [0, 1).
template <typename Scalar>
class BasicCorrelationMatrix {
 public:
  using Matrix = MatrixX<Scalar>;

  static constexpr double kSymmetryTol = 1e-12;

  explicit BasicCorrelationMatrix(const Matrix& entries) : entries_(entries) {
    const Eigen::Index u = entries_.rows();
    if (u < 1 || entries_.cols() != u) throw std::invalid_argument("correlation matrix must be square and nonempty");
    for (Eigen::Index i = 0; i < u; ++i) {
      if (std::abs(entries_(i, i) - Scalar(1)) > Scalar(kSymmetryTol))
        throw std::invalid_argument("correlation matrix must have unit diagonal");
      entries_(i, i) = Scalar(1);
      for (Eigen::Index j = i + 1; j < u; ++j) {
        if (std::abs(entries_(i, j) - entries_(j, i)) > Scalar(kSymmetryTol))
          throw std::invalid_argument("correlation matrix must be symmetric");
        const Scalar r = (entries_(i, j) + entries_(j, i)) / Scalar(2);
        if (!(r >= Scalar(0) && r < Scalar(1)))
          throw std::invalid_argument("correlation off-diagonals must lie in [0, 1)");
        entries_(i, j) = entries_(j, i) = r;
      }
    }
    if (u > 1) {
      Eigen::SelfAdjointEigenSolver<Matrix> eig(entries_, Eigen::EigenvaluesOnly);
      if (!(eig.eigenvalues().minCoeff() > Scalar(0)))
        throw std::invalid_argument("correlation matrix must be positive definite");
    }
  }

  static BasicCorrelationMatrix identity(Eigen::Index size) {
    return BasicCorrelationMatrix(Matrix::Identity(size, size));
  }

  /// All off-diagonals equal to `r`.
  static BasicCorrelationMatrix uniform(Eigen::Index size, Scalar r) {
    Matrix m = Matrix::Constant(size, size, r);
    m.diagonal().setOnes();
    return BasicCorrelationMatrix(m);
  }

  Eigen::Index size() const { return entries_.rows(); }
  const Matrix& matrix() const { return entries_; }
  Scalar operator()(Eigen::Index i, Eigen::Index j) const { return entries_(i, j); }

  friend bool operator==(const BasicCorrelationMatrix& a, const BasicCorrelationMatrix& b) {
    return a.entries_ == b.entries_;
  }

 private:
  Matrix entries_;
};

/// Points tagged with the task they belong to; one point per row.
template <typename Scalar>
struct BasicTaggedPoints {
  MatrixX<Scalar> points;
  std::vector<std::size_t> tasks;

  Eigen::Index size() const { return points.rows(); }
  Eigen::Index dim() const { return points.cols(); }
};

/// Assembled multi-task Gram matrix with its task-major block layout.
template <typename Scalar>
struct BasicGramMatrix {
  MatrixX<Scalar> assembled;
  std::vector<Eigen::Index> offsets;  // offsets[t] = first row of task t; offsets.back() = total

  std::size_t num_tasks() const { return offsets.size() - 1; }
  Eigen::Index task_size(std::size_t t) const { return offsets[t + 1] - offsets[t]; }

  auto block(std::size_t t, std::size_t t2) const {
    return assembled.block(offsets[t], offsets[t2], task_size(t), task_size(t2));
  }
};

using Hyperparams = BasicHyperparams<double>;
using CorrelationMatrix = BasicCorrelationMatrix<double>;
using TaggedPoints = BasicTaggedPoints<double>;
using GramMatrix = BasicGramMatrix<double>;

// ---------------------------------------------------------------------------
// Kernels

template <typename DerivedA, typename DerivedB, typename Scalar>
Scalar se_kernel(const Eigen::MatrixBase<DerivedA>& x, const Eigen::MatrixBase<DerivedB>& x2,
                 const BasicHyperparams<Scalar>& hp) {
  if (x.size() != hp.dim() || x2.size() != hp.dim())
    throw std::invalid_argument("se_kernel: input dimension does not match lengthscales");
  Scalar r2(0);
  for (Eigen::Index k = 0; k < hp.dim(); ++k) {
    const Scalar d = (x(k) - x2(k)) / hp.lengthscales(k);
    r2 += d * d;
  }
  return hp.signal_variance * std::exp(Scalar(-0.5) * r2);
}

template <typename DerivedA, typename DerivedB, typename Scalar>
MatrixX<Scalar> gram(const Eigen::MatrixBase<DerivedA>& X, const Eigen::MatrixBase<DerivedB>& X2,
                     const BasicHyperparams<Scalar>& hp) {
  const Eigen::Index d = hp.dim();
  if ((X.rows() > 0 && X.cols() != d) || (X2.rows() > 0 && X2.cols() != d))
    throw std::invalid_argument("gram: input dimension does not match lengthscales");
  if (X.rows() == 0 || X2.rows() == 0) return MatrixX<Scalar>(X.rows(), X2.rows());
  const MatrixX<Scalar> A = X * hp.lengthscales.cwiseInverse().asDiagonal();
  const MatrixX<Scalar> B = X2 * hp.lengthscales.cwiseInverse().asDiagonal();
  MatrixX<Scalar> K(A.rows(), B.rows());
  for (Eigen::Index j = 0; j < B.rows(); ++j) {
    for (Eigen::Index i = 0; i < A.rows(); ++i) {
      K(i, j) = hp.signal_variance * std::exp(Scalar(-0.5) * (A.row(i) - B.row(j)).squaredNorm());
    }
  }
  return K;
}

/// Cross covariance between two tagged point sets under the multi-task
/// kernel corr(t, t') * k(x, x').
template <typename Scalar>
MatrixX<Scalar> multi_task_gram(const BasicTaggedPoints<Scalar>& a, const BasicTaggedPoints<Scalar>& b,
                                const BasicCorrelationMatrix<Scalar>& corr, const BasicHyperparams<Scalar>& hp) {
  const auto u = static_cast<std::size_t>(corr.size());
  for (auto t : a.tasks)
    if (t >= u) throw std::invalid_argument("multi_task_gram: task index exceeds correlation size");
  for (auto t : b.tasks)
    if (t >= u) throw std::invalid_argument("multi_task_gram: task index exceeds correlation size");
  MatrixX<Scalar> K = gram(a.points, b.points, hp);
  for (Eigen::Index j = 0; j < K.cols(); ++j)
    for (Eigen::Index i = 0; i < K.rows(); ++i) K(i, j) *= corr(a.tasks[i], b.tasks[j]);
  return K;
}

/// Block Gram matrix over per-task input sets, stacked task-major.
template <typename Scalar>
BasicGramMatrix<Scalar> multi_task_gram(const std::vector<MatrixX<Scalar>>& task_inputs,
                                        const BasicCorrelationMatrix<Scalar>& corr,
                                        const BasicHyperparams<Scalar>& hp) {
  const std::size_t u = task_inputs.size();
  if (u != static_cast<std::size_t>(corr.size()))
    throw std::invalid_argument("multi_task_gram: task count does not match correlation size");
  BasicGramMatrix<Scalar> G;
  G.offsets.assign(u + 1, 0);
  for (std::size_t t = 0; t < u; ++t) G.offsets[t + 1] = G.offsets[t] + task_inputs[t].rows();
  G.assembled.setZero(G.offsets.back(), G.offsets.back());
  for (std::size_t t = 0; t < u; ++t) {
    for (std::size_t t2 = 0; t2 < u; ++t2) {
      if (task_inputs[t].rows() == 0 || task_inputs[t2].rows() == 0) continue;
      G.assembled.block(G.offsets[t], G.offsets[t2], task_inputs[t].rows(), task_inputs[t2].rows()) =
          corr(t, t2) * gram(task_inputs[t], task_inputs[t2], hp);
    }
  }
  return G;
}

// ---------------------------------------------------------------------------
// Matrix primitives

/// Pencil (a, b) -> largest eigenvalue of a^{-1} b with `a` factorized once,
/// for scanning many `b` against a fixed `a`. Computes the top eigenvalue of
/// the symmetric matrix L^{-1} b L^{-T} where a = L L^T.
template <typename Scalar>
class GeneralizedMaxEigen {
 public:
  using Matrix = MatrixX<Scalar>;

  template <typename Derived>
  explicit GeneralizedMaxEigen(const Eigen::MatrixBase<Derived>& a) {
    if (a.rows() != a.cols()) throw std::invalid_argument("max_gen_eig: matrices must be square");
    Eigen::SelfAdjointEigenSolver<Matrix> a_eig(a.derived(), Eigen::EigenvaluesOnly);
    if (!(a_eig.eigenvalues().minCoeff() >= Scalar(1e-12)))
      throw NumericalError("max_gen_eig: first matrix is numerically singular");
    llt_.compute(a.derived());
    if (llt_.info() != Eigen::Success) throw NumericalError("max_gen_eig: Cholesky factorization failed");
  }

  template <typename Derived>
  Scalar operator()(const Eigen::MatrixBase<Derived>& b) const {
    if (b.rows() != llt_.rows() || b.cols() != llt_.rows())
      throw std::invalid_argument("max_gen_eig: matrices must be of equal size");
    Matrix M = llt_.matrixL().solve(b.derived());
    M = llt_.matrixL().solve(M.transpose()).eval();
    M = (Scalar(0.5) * (M + M.transpose())).eval();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(M, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().maxCoeff();
  }

 private:
  Eigen::LLT<Matrix> llt_;
};

/// h(a, b) = max eig a^{-1} b.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar max_gen_eig(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  if (a.rows() != b.rows()) throw std::invalid_argument("max_gen_eig: matrices must be of equal size");
  return GeneralizedMaxEigen<typename DerivedA::Scalar>(a)(b);
}

template <typename Scalar>
Scalar max_gen_eig(const BasicCorrelationMatrix<Scalar>& a, const BasicCorrelationMatrix<Scalar>& b) {
  return max_gen_eig(a.matrix(), b.matrix());
}

template <typename Derived>
typename Derived::Scalar min_sym_eig(const Eigen::MatrixBase<Derived>& M) {
  using Matrix = MatrixX<typename Derived::Scalar>;
  const Matrix S = typename Derived::Scalar(0.5) * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(S, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

/// True iff the symmetrized matrix has min eigenvalue >= -tol.
template <typename Derived>
bool is_psd(const Eigen::MatrixBase<Derived>& M, typename Derived::Scalar tol) {
  if (M.rows() != M.cols()) throw std::invalid_argument("is_psd: matrix must be square");
  if (M.rows() == 0) return true;
  return min_sym_eig(M) >= -tol;
}

/// Solves A P + P A^T + Q = 0 for a Hurwitz A (Bartels-Stewart on the
/// complex Schur form of A).
template <typename DerivedA, typename DerivedQ>
MatrixX<typename DerivedA::Scalar> solve_lyapunov(const Eigen::MatrixBase<DerivedA>& A,
                                                  const Eigen::MatrixBase<DerivedQ>& Q) {
  using Scalar = typename DerivedA::Scalar;
  using Complex = std::complex<Scalar>;
  using CMatrix = MatrixX<Complex>;
  const Eigen::Index n = A.rows();
  if (A.cols() != n || Q.rows() != n || Q.cols() != n)
    throw std::invalid_argument("solve_lyapunov: dimension mismatch");
  if (n == 0) return MatrixX<Scalar>();

  Eigen::ComplexSchur<MatrixX<Scalar>> schur(A.derived());
  if (schur.info() != Eigen::Success) throw NumericalError("solve_lyapunov: Schur decomposition failed");
  const CMatrix& T = schur.matrixT();
  const CMatrix& U = schur.matrixU();
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(T(i, i).real() < Scalar(0))) throw std::invalid_argument("solve_lyapunov: A is not stable");

  // T Y + Y T^H = -F with Y = U^H P U and F = U^H Q U; T^H is lower
  // triangular, so columns resolve from the last one backwards.
  const CMatrix F = U.adjoint() * Q.derived().template cast<Complex>() * U;
  CMatrix Y = CMatrix::Zero(n, n);
  for (Eigen::Index j = n - 1; j >= 0; --j) {
    VectorX<Complex> rhs = -F.col(j);
    for (Eigen::Index k = j + 1; k < n; ++k) rhs -= std::conj(T(j, k)) * Y.col(k);
    CMatrix S = T;
    S.diagonal().array() += std::conj(T(j, j));
    Y.col(j) = S.template triangularView<Eigen::Upper>().solve(rhs);
  }
  MatrixX<Scalar> P = (U * Y * U.adjoint()).real();
  return Scalar(0.5) * (P + P.transpose());
}

}  // namespace mtsafe

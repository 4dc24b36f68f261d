#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include "polygan/error.hpp"

namespace polygan {

using Vector = std::vector<double>;

/// Row-major dense matrix of doubles.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  /// Builds a matrix from nested rows; all rows must have equal length.
  static DenseMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static DenseMatrix from_rows(const std::vector<std::vector<double>>& rows);
  static DenseMatrix identity(std::size_t n);
  static DenseMatrix diagonal(std::span<const double> diag);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  DenseMatrix transpose() const;
  bool all_finite() const noexcept;
  double trace() const;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
Vector matvec(const DenseMatrix& a, std::span<const double> x);
DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix scale(const DenseMatrix& a, double s);
double max_abs(std::span<const double> v) noexcept;

/// Symmetric positive semi-definite matrix. The eigendecomposition is computed
/// once at construction (it is also the PSD check) and reused by spd_sqrt.
class SpdMatrix {
 public:
  /// Throws NotSymmetric when |S - S^T| exceeds 1e-12 anywhere and
  /// NegativeEigenvalue when an eigenvalue is below -1e-10.
  explicit SpdMatrix(DenseMatrix s);

  static SpdMatrix identity(std::size_t n) { return SpdMatrix(DenseMatrix::identity(n)); }
  static SpdMatrix scaled_identity(std::size_t n, double v);

  std::size_t dim() const noexcept { return matrix_.rows(); }
  const DenseMatrix& matrix() const noexcept { return matrix_; }
  /// Descending eigenvalues.
  const Vector& eigenvalues() const noexcept { return eigenvalues_; }
  /// Eigenvectors stored as columns, matching eigenvalues().
  const DenseMatrix& eigenvectors() const noexcept { return eigenvectors_; }

 private:
  DenseMatrix matrix_;
  Vector eigenvalues_;
  DenseMatrix eigenvectors_;
};

struct EigenDecomposition {
  Vector values;        // descending
  DenseMatrix vectors;  // columns
};

inline constexpr double kSymmetryTolerance = 1e-12;
inline constexpr double kNegativeEigenvalueTolerance = 1e-10;
inline constexpr double kPivotRatio = 1e-12;
inline constexpr int kMaxJacobiSweeps = 100;

/// Solves A x = b by LU with partial pivoting. Throws SingularMatrix when a
/// pivot drops below 1e-12 times the largest entry of A.
Vector lu_solve(const DenseMatrix& a, std::span<const double> b);

/// Cyclic Jacobi eigensolver for symmetric matrices. Throws NoConvergence
/// after 100 sweeps.
EigenDecomposition sym_eigen(const DenseMatrix& s);
inline EigenDecomposition sym_eigen(const SpdMatrix& s) {
  return {s.eigenvalues(), s.eigenvectors()};
}

/// Principal square root V diag(sqrt(l)) V^T. Eigenvalues in [-1e-10, 0) are
/// clamped to zero; anything more negative raises NegativeEigenvalue.
SpdMatrix spd_sqrt(const SpdMatrix& s);

/// Counter-based generator: output i is a SplitMix64 finalizer applied to
/// seed + i * golden-ratio increment, so streams are reproducible bit for bit.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64() noexcept;
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Standard normal via Box-Muller; the second value of each pair is cached.
  double normal() noexcept;

  /// Independent stream keyed by (seed, stream). Does not advance this one.
  SeededRng derive(std::uint64_t stream) const noexcept;

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

/// count x n matrix of standard normal draws.
DenseMatrix sample_standard_normal(SeededRng& rng, std::size_t count, std::size_t n);

/// Precomputes the covariance root once so repeated draws are cheap.
class GaussianSampler {
 public:
  GaussianSampler(Vector mean, const SpdMatrix& cov);

  std::size_t dim() const noexcept { return mean_.size(); }
  const Vector& mean() const noexcept { return mean_; }

  DenseMatrix sample(SeededRng& rng, std::size_t count) const;
  /// Writes one draw into out (length dim()).
  void sample_into(SeededRng& rng, std::span<double> out) const;

 private:
  Vector mean_;
  DenseMatrix root_;
};

/// Rows are i.i.d. N(mean, cov); deterministic in the rng state.
DenseMatrix sample_gaussian(SeededRng& rng, std::span<const double> mean, const SpdMatrix& cov,
                            std::size_t count);

}  // namespace polygan

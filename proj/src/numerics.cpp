#include "polygan/numerics.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace polygan {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMajor> view(const DenseMatrix& m) {
  return {m.data().data(), static_cast<Eigen::Index>(m.rows()),
          static_cast<Eigen::Index>(m.cols())};
}

Eigen::Map<RowMajor> view(DenseMatrix& m) {
  return {m.data().data(), static_cast<Eigen::Index>(m.rows()),
          static_cast<Eigen::Index>(m.cols())};
}

std::string shape(const DenseMatrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw Error(ErrorKind::ShapeMismatch, "entry count " + std::to_string(data_.size()) +
                                              " does not match " + std::to_string(rows) + "x" +
                                              std::to_string(cols));
  }
}

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  std::vector<std::vector<double>> nested;
  nested.reserve(rows.size());
  for (const auto& r : rows) nested.emplace_back(r);
  return from_rows(nested);
}

DenseMatrix DenseMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return {};
  const std::size_t cols = rows.front().size();
  DenseMatrix out(rows.size(), cols);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != cols) throw Error(ErrorKind::ShapeMismatch, "ragged rows");
    std::copy(rows[i].begin(), rows[i].end(), out.row(i).begin());
  }
  return out;
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
  return out;
}

DenseMatrix DenseMatrix::diagonal(std::span<const double> diag) {
  DenseMatrix out(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) out(i, i) = diag[i];
  return out;
}

DenseMatrix DenseMatrix::transpose() const {
  DenseMatrix out(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) out(j, i) = (*this)(i, j);
  return out;
}

bool DenseMatrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double DenseMatrix::trace() const {
  if (rows_ != cols_) throw Error(ErrorKind::ShapeMismatch, "trace of " + shape(*this));
  double t = 0.0;
  for (std::size_t i = 0; i < rows_; ++i) t += (*this)(i, i);
  return t;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) {
    throw Error(ErrorKind::ShapeMismatch, "matmul " + shape(a) + " * " + shape(b));
  }
  DenseMatrix out(a.rows(), b.cols());
  view(out).noalias() = view(a) * view(b);
  return out;
}

Vector matvec(const DenseMatrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) {
    throw Error(ErrorKind::ShapeMismatch,
                "matvec " + shape(a) + " * vector of length " + std::to_string(x.size()));
  }
  Vector out(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto r = a.row(i);
    out[i] = std::inner_product(r.begin(), r.end(), x.begin(), 0.0);
  }
  return out;
}

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "add " + shape(a) + " + " + shape(b));
  }
  DenseMatrix out = a;
  auto o = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bd[i];
  return out;
}

DenseMatrix scale(const DenseMatrix& a, double s) {
  DenseMatrix out = a;
  for (double& v : out.data()) v *= s;
  return out;
}

double max_abs(std::span<const double> v) noexcept {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// ---------------------------------------------------------------------------
// LU

Vector lu_solve(const DenseMatrix& a, std::span<const double> b) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw Error(ErrorKind::ShapeMismatch, "lu_solve needs square A, got " + shape(a));
  if (b.size() != n) {
    throw Error(ErrorKind::ShapeMismatch, "lu_solve: A is " + shape(a) + " but b has length " +
                                              std::to_string(b.size()));
  }
  if (!a.all_finite()) throw Error(ErrorKind::InvalidArgument, "lu_solve: non-finite entry in A");

  DenseMatrix lu = a;
  Vector x(b.begin(), b.end());
  const double threshold = kPivotRatio * max_abs(a.data());
  if (n > 0 && threshold == 0.0) throw Error(ErrorKind::SingularMatrix, "A is the zero matrix");

  for (std::size_t k = 0; k < n; ++k) {
    std::size_t pivot = k;
    double best = std::abs(lu(k, k));
    for (std::size_t i = k + 1; i < n; ++i) {
      if (std::abs(lu(i, k)) > best) {
        best = std::abs(lu(i, k));
        pivot = i;
      }
    }
    if (best < threshold) {
      throw Error(ErrorKind::SingularMatrix, "pivot " + std::to_string(best) + " at column " +
                                                 std::to_string(k) + " below threshold");
    }
    if (pivot != k) {
      std::swap_ranges(lu.row(k).begin(), lu.row(k).end(), lu.row(pivot).begin());
      std::swap(x[k], x[pivot]);
    }
    const double diag = lu(k, k);
    const auto pivot_row = lu.row(k);
    for (std::size_t i = k + 1; i < n; ++i) {
      const double factor = lu(i, k) / diag;
      if (factor == 0.0) continue;
      auto r = lu.row(i);
      r[k] = factor;
      for (std::size_t j = k + 1; j < n; ++j) r[j] -= factor * pivot_row[j];
      x[i] -= factor * x[k];
    }
  }
  for (std::size_t k = n; k-- > 0;) {
    const auto r = lu.row(k);
    double s = x[k];
    for (std::size_t j = k + 1; j < n; ++j) s -= r[j] * x[j];
    x[k] = s / r[k];
  }
  return x;
}

// ---------------------------------------------------------------------------
// Jacobi eigensolver

EigenDecomposition sym_eigen(const DenseMatrix& s) {
  const std::size_t n = s.rows();
  if (s.cols() != n) throw Error(ErrorKind::ShapeMismatch, "sym_eigen needs square input");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(s(i, j) - s(j, i)) > kSymmetryTolerance)
        throw Error(ErrorKind::NotSymmetric, "sym_eigen input is not symmetric");

  DenseMatrix a = s;
  DenseMatrix v = DenseMatrix::identity(n);

  auto off_norm = [&] {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) acc += a(i, j) * a(i, j);
    return std::sqrt(2.0 * acc);
  };
  double frob = 0.0;
  for (double x : a.data()) frob += x * x;
  frob = std::sqrt(frob);
  const double tol = 1e-15 * frob;

  int sweep = 0;
  while (off_norm() > tol) {
    if (++sweep > kMaxJacobiSweeps) {
      throw Error(ErrorKind::NoConvergence, "Jacobi exceeded " +
                                                std::to_string(kMaxJacobiSweeps) + " sweeps");
    }
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - sn * vkq;
          v(k, q) = sn * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });
  EigenDecomposition out{Vector(n), DenseMatrix(n, n)};
  for (std::size_t c = 0; c < n; ++c) {
    out.values[c] = a(order[c], order[c]);
    for (std::size_t r = 0; r < n; ++r) out.vectors(r, c) = v(r, order[c]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// SpdMatrix

SpdMatrix::SpdMatrix(DenseMatrix s) : matrix_(std::move(s)) {
  if (matrix_.rows() != matrix_.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "SpdMatrix must be square, got " + shape(matrix_));
  }
  if (!matrix_.all_finite()) throw Error(ErrorKind::InvalidArgument, "non-finite covariance entry");
  auto eig = sym_eigen(matrix_);
  if (!eig.values.empty() && eig.values.back() < -kNegativeEigenvalueTolerance) {
    throw Error(ErrorKind::NegativeEigenvalue,
                "eigenvalue " + std::to_string(eig.values.back()) + " < 0");
  }
  eigenvalues_ = std::move(eig.values);
  eigenvectors_ = std::move(eig.vectors);
}

SpdMatrix SpdMatrix::scaled_identity(std::size_t n, double v) {
  return SpdMatrix(scale(DenseMatrix::identity(n), v));
}

SpdMatrix spd_sqrt(const SpdMatrix& s) {
  const std::size_t n = s.dim();
  const auto& values = s.eigenvalues();
  const auto& vecs = s.eigenvectors();
  DenseMatrix root(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    if (values[k] < -kNegativeEigenvalueTolerance) {
      throw Error(ErrorKind::NegativeEigenvalue, "eigenvalue " + std::to_string(values[k]));
    }
    const double sq = std::sqrt(std::max(values[k], 0.0));
    if (sq == 0.0) continue;
    for (std::size_t i = 0; i < n; ++i) {
      const double vi = vecs(i, k) * sq;
      for (std::size_t j = 0; j < n; ++j) root(i, j) += vi * vecs(j, k);
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double avg = 0.5 * (root(i, j) + root(j, i));
      root(i, j) = avg;
      root(j, i) = avg;
    }
  return SpdMatrix(std::move(root));
}

// ---------------------------------------------------------------------------
// Randomness

std::uint64_t SeededRng::next_u64() noexcept {
  ++counter_;
  return mix64(seed_ + counter_ * kGolden);
}

double SeededRng::uniform() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double SeededRng::normal() noexcept {
  if (has_cached_) {
    has_cached_ = false;
    return cached_normal_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * 3.14159265358979323846 * u2;
  cached_normal_ = radius * std::sin(angle);
  has_cached_ = true;
  return radius * std::cos(angle);
}

SeededRng SeededRng::derive(std::uint64_t stream) const noexcept {
  return SeededRng(mix64(seed_ ^ mix64(stream + kGolden)));
}

DenseMatrix sample_standard_normal(SeededRng& rng, std::size_t count, std::size_t n) {
  DenseMatrix out(count, n);
  for (double& v : out.data()) v = rng.normal();
  return out;
}

GaussianSampler::GaussianSampler(Vector mean, const SpdMatrix& cov)
    : mean_(std::move(mean)), root_(spd_sqrt(cov).matrix()) {
  if (cov.dim() != mean_.size()) {
    throw Error(ErrorKind::ShapeMismatch, "mean has length " + std::to_string(mean_.size()) +
                                              " but covariance is " + shape(cov.matrix()));
  }
}

void GaussianSampler::sample_into(SeededRng& rng, std::span<double> out) const {
  const std::size_t n = dim();
  double z[64];
  std::vector<double> big;
  double* zp = z;
  if (n > 64) {
    big.resize(n);
    zp = big.data();
  }
  for (std::size_t j = 0; j < n; ++j) zp[j] = rng.normal();
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = root_.row(i);
    double acc = mean_[i];
    for (std::size_t j = 0; j < n; ++j) acc += r[j] * zp[j];
    out[i] = acc;
  }
}

DenseMatrix GaussianSampler::sample(SeededRng& rng, std::size_t count) const {
  DenseMatrix out(count, dim());
  for (std::size_t i = 0; i < count; ++i) sample_into(rng, out.row(i));
  return out;
}

DenseMatrix sample_gaussian(SeededRng& rng, std::span<const double> mean, const SpdMatrix& cov,
                            std::size_t count) {
  return GaussianSampler(Vector(mean.begin(), mean.end()), cov).sample(rng, count);
}

}  // namespace polygan

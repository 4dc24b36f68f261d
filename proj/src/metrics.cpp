#include "polygan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace polygan {

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

void require_nonempty_same_width(const DenseMatrix& x, const DenseMatrix& y, const char* who) {
  if (x.rows() == 0 || y.rows() == 0) throw Error(ErrorKind::EmptyBatch, std::string(who));
  if (x.cols() != y.cols()) {
    throw Error(ErrorKind::ShapeMismatch, std::string(who) + ": sample dimensions differ");
  }
}

// Mean of k over all pairs (a_i, b_j); optionally adds scale * d/da_i of the
// pair sum into grad.
double kernel_mean(const DenseMatrix& a, const DenseMatrix& b, const MmdKernelSpec& k,
                   DenseMatrix* grad, double scale) {
  double total = 0.0;
  const std::size_t n = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto ai = a.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const auto bj = b.row(j);
      const double r2 = sq_dist(ai, bj);
      total += k.eval_sq(r2);
      if (grad) {
        const double g = scale * 2.0 * k.deriv_sq(r2);
        auto gi = grad->row(i);
        for (std::size_t d = 0; d < n; ++d) gi[d] += g * (ai[d] - bj[d]);
      }
    }
  }
  return total / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
}

}  // namespace

GaussianMoments estimate_moments(const DenseMatrix& x) {
  const std::size_t N = x.rows();
  const std::size_t n = x.cols();
  if (N < 2) throw Error(ErrorKind::EmptyBatch, "moment estimate needs at least two samples");
  Vector mean(n, 0.0);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t d = 0; d < n; ++d) mean[d] += x(i, d);
  for (double& m : mean) m /= static_cast<double>(N);
  DenseMatrix cov(n, n);
  for (std::size_t i = 0; i < N; ++i) {
    const auto r = x.row(i);
    for (std::size_t a = 0; a < n; ++a) {
      const double da = r[a] - mean[a];
      for (std::size_t b = a; b < n; ++b) cov(a, b) += da * (r[b] - mean[b]);
    }
  }
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a; b < n; ++b) {
      cov(a, b) /= static_cast<double>(N - 1);
      cov(b, a) = cov(a, b);
    }
  return {std::move(mean), SpdMatrix(std::move(cov))};
}

double w22_gaussian(const GaussianMoments& p, const GaussianMoments& q) {
  const std::size_t n = p.mean.size();
  if (q.mean.size() != n || p.cov.dim() != n || q.cov.dim() != n) {
    throw Error(ErrorKind::ShapeMismatch, "w22_gaussian: dimensions differ");
  }
  double mean_term = 0.0;
  for (std::size_t d = 0; d < n; ++d) {
    const double diff = p.mean[d] - q.mean[d];
    mean_term += diff * diff;
  }
  const SpdMatrix root_p = spd_sqrt(p.cov);
  DenseMatrix inner = matmul(matmul(root_p.matrix(), q.cov.matrix()), root_p.matrix());
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) {
      const double s = 0.5 * (inner(a, b) + inner(b, a));
      inner(a, b) = s;
      inner(b, a) = s;
    }
  const SpdMatrix cross = spd_sqrt(SpdMatrix(std::move(inner)));
  const double cov_term =
      p.cov.matrix().trace() + q.cov.matrix().trace() - 2.0 * cross.matrix().trace();
  return std::max(0.0, mean_term + cov_term);
}

std::vector<std::size_t> solve_assignment(const DenseMatrix& cost) {
  const std::size_t N = cost.rows();
  if (cost.cols() != N) throw Error(ErrorKind::SizeMismatch, "assignment needs a square matrix");
  if (N == 0) return {};
  // Shortest augmenting path with row/column potentials; index 0 is a sentinel.
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(N + 1, 0.0), v(N + 1, 0.0), minv(N + 1);
  std::vector<std::size_t> p(N + 1, 0), way(N + 1, 0);
  std::vector<char> used(N + 1);
  for (std::size_t i = 1; i <= N; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      const auto row = cost.row(i0 - 1);
      for (std::size_t j = 1; j <= N; ++j) {
        if (used[j]) continue;
        const double cur = row[j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= N; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assignment(N);
  for (std::size_t j = 1; j <= N; ++j) assignment[p[j] - 1] = j - 1;
  return assignment;
}

double w22_empirical(const DenseMatrix& x, const DenseMatrix& y) {
  if (x.rows() != y.rows()) {
    throw Error(ErrorKind::SizeMismatch, "w22_empirical: sample counts " +
                                             std::to_string(x.rows()) + " and " +
                                             std::to_string(y.rows()) + " differ");
  }
  require_nonempty_same_width(x, y, "w22_empirical");
  const std::size_t N = x.rows();
  DenseMatrix cost(N, N);
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j) cost(i, j) = sq_dist(x.row(i), y.row(j));
  const auto match = solve_assignment(cost);
  double total = 0.0;
  for (std::size_t i = 0; i < N; ++i) total += cost(i, match[i]);
  return total / static_cast<double>(N);
}

MmdFamily mmd_family_from_string(std::string_view s) {
  if (s == "rbfg" || s == "RBFG" || s == "rbf") return MmdFamily::Rbfg;
  if (s == "imq" || s == "IMQ") return MmdFamily::Imq;
  throw Error(ErrorKind::ConfigError, "unknown MMD kernel '" + std::string(s) + "'");
}

void MmdKernelSpec::validate() const {
  if (!(param > 0.0)) throw Error(ErrorKind::InvalidArgument, "MMD kernel parameter must be > 0");
}

double MmdKernelSpec::eval_sq(double r2) const noexcept {
  if (family == MmdFamily::Rbfg) return std::exp(-r2 / (2.0 * param * param));
  return param / (param + r2);
}

double MmdKernelSpec::deriv_sq(double r2) const noexcept {
  if (family == MmdFamily::Rbfg) return -std::exp(-r2 / (2.0 * param * param)) / (2.0 * param * param);
  const double d = param + r2;
  return -param / (d * d);
}

double mmd_sq(const DenseMatrix& x, const DenseMatrix& y, const MmdKernelSpec& k) {
  require_nonempty_same_width(x, y, "mmd_sq");
  k.validate();
  return kernel_mean(x, x, k, nullptr, 0.0) + kernel_mean(y, y, k, nullptr, 0.0) -
         2.0 * kernel_mean(x, y, k, nullptr, 0.0);
}

double mmd_sq_and_grad(const DenseMatrix& x, const DenseMatrix& y, const MmdKernelSpec& k,
                       DenseMatrix& grad_x) {
  require_nonempty_same_width(x, y, "mmd_sq");
  k.validate();
  grad_x = DenseMatrix(x.rows(), x.cols());
  const double bx = static_cast<double>(x.rows());
  const double by = static_cast<double>(y.rows());
  // d/dx_i of mean k(X,X) counts each pair twice (x_i on either side).
  const double xx = kernel_mean(x, x, k, &grad_x, 2.0 / (bx * bx));
  const double xy = kernel_mean(x, y, k, &grad_x, -2.0 / (bx * by));
  const double yy = kernel_mean(y, y, k, nullptr, 0.0);
  return xx + yy - 2.0 * xy;
}

Vector mode_coverage(const DenseMatrix& x, const DenseMatrix& modes, double radius) {
  if (!(radius > 0.0)) throw Error(ErrorKind::InvalidArgument, "radius must be positive");
  if (modes.rows() == 0) return {};
  if (x.cols() != modes.cols()) throw Error(ErrorKind::ShapeMismatch, "mode dimension");
  Vector counts(modes.rows(), 0.0);
  if (x.rows() == 0) return counts;
  const double r2 = radius * radius;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < modes.rows(); ++k) {
      const double d = sq_dist(x.row(i), modes.row(k));
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    if (best_d <= r2) counts[best] += 1.0;
  }
  for (double& c : counts) c /= static_cast<double>(x.rows());
  return counts;
}

}  // namespace polygan

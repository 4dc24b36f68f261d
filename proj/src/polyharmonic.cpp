#include "polygan/polyharmonic.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace polygan {

namespace {

double ipow(double x, int k) noexcept {
  if (k < 0) return 1.0 / ipow(x, -k);
  double result = 1.0;
  double base = x;
  while (k > 0) {
    if (k & 1) result *= base;
    base *= base;
    k >>= 1;
  }
  return result;
}

std::uint64_t multinomial(int m, const std::vector<int>& alpha) {
  // m!/alpha! as a product of binomials; every partial product is itself a
  // multinomial bounded by m! <= 20! < 2^63.
  std::uint64_t result = 1;
  int remaining = m;
  for (int a : alpha) {
    std::uint64_t binom = 1;
    for (int i = 1; i <= a; ++i) binom = binom * static_cast<std::uint64_t>(remaining - a + i) / i;
    result *= binom;
    remaining -= a;
  }
  return result;
}

void enumerate_into(std::size_t n, int m, std::size_t pos, std::vector<int>& current,
                    std::vector<MultiIndex>& out) {
  if (pos + 1 == n) {
    current[pos] = m;
    out.push_back({current, 0});
    return;
  }
  for (int a = m; a >= 0; --a) {
    current[pos] = a;
    enumerate_into(n, m - a, pos + 1, current, out);
  }
}

double checked_gamma(double x) {
  const double g = std::tgamma(x);
  if (!std::isfinite(g) || g == 0.0) {
    throw Error(ErrorKind::Overflow, "Gamma(" + std::to_string(x) + ") outside double range");
  }
  return g;
}

double factorial(int k) { return checked_gamma(static_cast<double>(k) + 1.0); }

}  // namespace

int MultiIndex::order() const noexcept {
  int s = 0;
  for (int a : alpha) s += a;
  return s;
}

double MultiIndex::factorial() const noexcept {
  double f = 1.0;
  for (int a : alpha)
    for (int i = 2; i <= a; ++i) f *= i;
  return f;
}

std::vector<MultiIndex> enumerate_multi_indices(std::size_t n, int m) {
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "dimension must be >= 1");
  if (m < 0) throw Error(ErrorKind::InvalidArgument, "order must be >= 0");
  if (m > kMaxMultinomialOrder) {
    throw Error(ErrorKind::Overflow,
                "order " + std::to_string(m) + " exceeds 64-bit multinomial range (max 20)");
  }
  std::vector<MultiIndex> out;
  std::vector<int> current(n, 0);
  enumerate_into(n, m, 0, current, out);
  for (auto& idx : out) idx.coefficient = multinomial(m, idx.alpha);
  return out;
}

double binomial(std::size_t a, std::size_t b) {
  if (b > a) return 0.0;
  double r = 1.0;
  for (std::size_t i = 1; i <= b; ++i) r = r * static_cast<double>(a - b + i) / static_cast<double>(i);
  return std::round(r);
}

double grad_norm_sq(const std::map<std::vector<int>, double>& partials, std::size_t n, int m) {
  double total = 0.0;
  for (const auto& idx : enumerate_multi_indices(n, m)) {
    const auto it = partials.find(idx.alpha);
    if (it == partials.end()) {
      std::string key;
      for (int a : idx.alpha) key += std::to_string(a) + ",";
      throw Error(ErrorKind::MissingIndex, "no partial supplied for alpha (" + key + ")");
    }
    total += static_cast<double>(idx.coefficient) * it->second * it->second;
  }
  return total;
}

// ---------------------------------------------------------------------------
// PolyKernel

PolyKernel::PolyKernel(int m, std::size_t n, double r_min)
    : PolyKernel(m, n, 2 * m - static_cast<int>(n), r_min) {
  if (m < 1) throw Error(ErrorKind::InvalidOrder, "gradient order m must be >= 1");
}

PolyKernel::PolyKernel(int m, std::size_t n, int k, double r_min)
    : m_(m), n_(n), k_(k), log_branch_(k >= 0 && n % 2 == 0), r_min_(r_min) {
  if (n == 0) throw Error(ErrorKind::InvalidArgument, "dimension must be >= 1");
  if (!(r_min > 0.0)) throw Error(ErrorKind::InvalidArgument, "r_min must be positive");
}

PolyKernel PolyKernel::with_exponent(int k, std::size_t n, double r_min) {
  return PolyKernel(0, n, k, r_min);
}

void PolyKernel::guard(double r) const {
  if (r < r_min_) {
    throw Error(ErrorKind::SingularRadius, "radius " + std::to_string(r) +
                                               " below guard for kernel exponent " +
                                               std::to_string(k_));
  }
}

double PolyKernel::eval(double r) const {
  if (k_ <= 0) guard(r);
  if (r == 0.0) return 0.0;
  const double p = ipow(r, k_);
  return log_branch_ ? p * std::log(r) : p;
}

double PolyKernel::eval_sq(double r2) const {
  if (k_ % 2 == 0) {
    if (k_ <= 0 && r2 < r_min_ * r_min_) guard(std::sqrt(r2));
    if (r2 == 0.0) return 0.0;
    const double p = ipow(r2, k_ / 2);
    return log_branch_ ? 0.5 * p * std::log(r2) : p;
  }
  return eval(std::sqrt(r2));
}

double PolyKernel::radial_factor(double r) const {
  if (k_ <= 2) guard(r);
  if (r == 0.0) return 0.0;
  const double p = ipow(r, k_ - 2);
  return log_branch_ ? p * (k_ * std::log(r) + 1.0) : k_ * p;
}

double PolyKernel::radial_factor_sq(double r2) const {
  if (k_ % 2 == 0) {
    if (k_ <= 2 && r2 < r_min_ * r_min_) guard(std::sqrt(r2));
    if (r2 == 0.0) return 0.0;
    const double p = ipow(r2, (k_ - 2) / 2);
    return log_branch_ ? p * (0.5 * k_ * std::log(r2) + 1.0) : k_ * p;
  }
  return radial_factor(std::sqrt(r2));
}

Vector kernel_grad(const PolyKernel& kernel, std::span<const double> x, std::span<const double> c) {
  if (x.size() != c.size() || x.size() != kernel.n()) {
    throw Error(ErrorKind::ShapeMismatch, "kernel_grad: point, center and kernel dimension differ");
  }
  Vector diff(x.size());
  double r2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    diff[i] = x[i] - c[i];
    r2 += diff[i] * diff[i];
  }
  const double g = kernel.radial_factor(std::sqrt(r2));
  for (double& d : diff) d *= g;
  return diff;
}

// ---------------------------------------------------------------------------
// Constants

KernelConstants compute_constants(int m, std::size_t n) {
  if (m < 1) throw Error(ErrorKind::InvalidOrder, "m must be >= 1");
  if (n < 1) throw Error(ErrorKind::InvalidArgument, "n must be >= 1");
  KernelConstants out;
  out.m = m;
  out.n = n;

  const double pow2 = std::ldexp(1.0, 2 - 2 * m);  // 2^{2-2m}
  const double fm1 = factorial(m - 1);
  if (n % 2 == 1) {
    const double tau = 0.5 * static_cast<double>(n);
    out.varrho = pow2 / fm1 * checked_gamma(2.0 - tau) / checked_gamma(m + 1.0 - tau);
  } else if (n == 2) {
    const double base = std::ldexp(1.0, 1 - m) / fm1;
    out.varrho = base * base;
  } else {
    const int tau = static_cast<int>(n / 2);
    if (m <= tau - 1) {
      // Negative-exponent range (k < 0). Also used at m = tau - 1 where the
      // alternative closed form would need (-1)!.
      const double sign = ((m - 1) % 2 == 0) ? 1.0 : -1.0;
      out.varrho = sign * pow2 / fm1 * factorial(tau - m - 1) / factorial(tau - 1);
    } else {
      out.varrho = -pow2 / (fm1 * factorial(tau - 2) * factorial(m - tau));
    }
  }
  const double sign_m = (m % 2 == 1) ? 1.0 : -1.0;  // (-1)^{m+1}
  out.xi = sign_m * out.varrho / 2.0;

  const double half = 0.5 * (static_cast<double>(n) + 1.0);
  const double log_eps = m * std::log(2.0 * static_cast<double>(n)) +
                         std::lgamma(2.0 * m + half) - std::lgamma(m + half);
  out.epsilon_bound = std::exp(log_eps);
  out.s_alpha = std::pow(static_cast<double>(n), m) / factorial(m);
  if (!std::isfinite(out.varrho) || !std::isfinite(out.epsilon_bound) ||
      !std::isfinite(out.s_alpha)) {
    throw Error(ErrorKind::Overflow, "kernel constants overflow for m=" + std::to_string(m) +
                                         ", n=" + std::to_string(n));
  }
  return out;
}

// ---------------------------------------------------------------------------
// PolyBasis

PolyBasis::PolyBasis(std::size_t n, int m) : n_(n), degree_(m - 1) {
  if (m < 1) throw Error(ErrorKind::InvalidOrder, "basis needs m >= 1");
  for (int d = 0; d <= degree_; ++d) {
    auto level = enumerate_multi_indices(n, d);
    terms_.insert(terms_.end(), level.begin(), level.end());
  }
}

void PolyBasis::eval_into(std::span<const double> x, std::span<double> out) const {
  for (std::size_t t = 0; t < terms_.size(); ++t) {
    double v = 1.0;
    const auto& alpha = terms_[t].alpha;
    for (std::size_t i = 0; i < n_; ++i) v *= ipow(x[i], alpha[i]);
    out[t] = v;
  }
}

Vector PolyBasis::eval(std::span<const double> x) const {
  if (x.size() != n_) throw Error(ErrorKind::ShapeMismatch, "basis_eval: point dimension mismatch");
  Vector out(terms_.size());
  eval_into(x, out);
  return out;
}

DenseMatrix PolyBasis::gradient(std::span<const double> x) const {
  if (x.size() != n_) throw Error(ErrorKind::ShapeMismatch, "basis gradient: dimension mismatch");
  DenseMatrix out(terms_.size(), n_);
  for (std::size_t t = 0; t < terms_.size(); ++t) {
    const auto& alpha = terms_[t].alpha;
    for (std::size_t j = 0; j < n_; ++j) {
      if (alpha[j] == 0) continue;
      double v = alpha[j] * ipow(x[j], alpha[j] - 1);
      for (std::size_t i = 0; i < n_; ++i)
        if (i != j) v *= ipow(x[i], alpha[i]);
      out(t, j) = v;
    }
  }
  return out;
}

}  // namespace polygan

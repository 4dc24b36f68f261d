#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "polygan/numerics.hpp"

namespace polygan {

/// Multi-index alpha over n coordinates. `coefficient` is the multinomial
/// m!/alpha! with m = |alpha|.
struct MultiIndex {
  std::vector<int> alpha;
  std::uint64_t coefficient = 1;

  int order() const noexcept;
  /// alpha! = prod alpha_i!
  double factorial() const noexcept;

  friend bool operator==(const MultiIndex&, const MultiIndex&) = default;
};

inline constexpr int kMaxMultinomialOrder = 20;

/// All alpha with |alpha| = m in descending lexicographic order, e.g.
/// (2,0), (1,1), (0,2) for n = 2, m = 2. Throws Overflow for m > 20.
std::vector<MultiIndex> enumerate_multi_indices(std::size_t n, int m);

/// Binomial coefficient C(a, b) as a double (exact for the small values used here).
double binomial(std::size_t a, std::size_t b);

/// sum_{|alpha| = m} (m!/alpha!) (d^alpha f)^2. `partials` maps alpha to the
/// partial derivative value; every order-m index of the given dimension must
/// be present (MissingIndex otherwise).
double grad_norm_sq(const std::map<std::vector<int>, double>& partials, std::size_t n, int m);

inline constexpr double kDefaultRadiusGuard = 1e-12;

/// Polyharmonic radial function psi_k with k = 2m - n:
///   r^k          if k < 0 or n odd
///   r^k ln r     if k >= 0 and n even
class PolyKernel {
 public:
  PolyKernel(int m, std::size_t n, double r_min = kDefaultRadiusGuard);

  /// Kernel of an explicit exponent in dimension n (used for psi_{-n}).
  static PolyKernel with_exponent(int k, std::size_t n, double r_min = kDefaultRadiusGuard);

  int m() const noexcept { return m_; }
  std::size_t n() const noexcept { return n_; }
  int k() const noexcept { return k_; }
  bool log_branch() const noexcept { return log_branch_; }
  double r_min() const noexcept { return r_min_; }
  /// True when psi grows with r on (0, inf): k > 0, or the k = 0 logarithm.
  bool increasing() const noexcept { return k_ > 0 || (k_ == 0 && log_branch_); }

  /// psi(r); psi(0) = 0 for k > 0. SingularRadius when k <= 0 and r < r_min.
  double eval(double r) const;
  /// Scalar g(r) with grad_x psi(|x - c|) = g(r) (x - c). Zero at r = 0 for k > 2.
  double radial_factor(double r) const;
  /// Same as radial_factor but takes r^2, saving the square root when possible.
  double radial_factor_sq(double r2) const;
  /// psi evaluated from r^2.
  double eval_sq(double r2) const;

 private:
  PolyKernel(int m, std::size_t n, int k, double r_min);
  void guard(double r) const;

  int m_;
  std::size_t n_;
  int k_;
  bool log_branch_;
  double r_min_;
};

inline double kernel_eval(const PolyKernel& kernel, double r) { return kernel.eval(r); }

/// Gradient of x -> psi(|x - c|).
Vector kernel_grad(const PolyKernel& kernel, std::span<const double> x, std::span<const double> c);

struct KernelConstants {
  int m = 1;
  std::size_t n = 1;
  double varrho = 0.0;
  double xi = 0.0;             // (-1)^{m+1} varrho / 2
  double epsilon_bound = 0.0;  // (2n)^m Gamma(2m + (n+1)/2) / Gamma(m + (n+1)/2)
  double s_alpha = 0.0;        // sum_{|alpha|=m} 1/alpha! = n^m / m!
};

/// Fundamental-solution constants for the polyharmonic operator of order m in
/// n dimensions. Throws Overflow if a Gamma evaluation leaves double range.
KernelConstants compute_constants(int m, std::size_t n);

/// Monomials of total degree <= m - 1 in n variables, graded by degree and
/// descending-lexicographic within a degree. The first term is always 1.
class PolyBasis {
 public:
  PolyBasis(std::size_t n, int m);

  std::size_t n() const noexcept { return n_; }
  int degree() const noexcept { return degree_; }
  std::size_t size() const noexcept { return terms_.size(); }
  const std::vector<MultiIndex>& terms() const noexcept { return terms_; }

  Vector eval(std::span<const double> x) const;
  void eval_into(std::span<const double> x, std::span<double> out) const;
  /// size() x n Jacobian of the monomials.
  DenseMatrix gradient(std::span<const double> x) const;

 private:
  std::size_t n_;
  int degree_;
  std::vector<MultiIndex> terms_;
};

inline Vector basis_eval(const PolyBasis& basis, std::span<const double> x) {
  return basis.eval(x);
}

}  // namespace polygan

#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "polygan/numerics.hpp"

namespace polygan {

struct GaussianMoments {
  Vector mean;
  SpdMatrix cov;
};

/// Sample mean and unbiased (N - 1) covariance of the rows of x.
GaussianMoments estimate_moments(const DenseMatrix& x);

/// |mu_p - mu_q|^2 + tr(S_p + S_q - 2 (S_p^{1/2} S_q S_p^{1/2})^{1/2}).
double w22_gaussian(const GaussianMoments& p, const GaussianMoments& q);

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method,
/// O(N^3)). Entry i of the result is the column assigned to row i.
std::vector<std::size_t> solve_assignment(const DenseMatrix& cost);

/// (1/N) min_pi sum_i |x_i - y_pi(i)|^2.
double w22_empirical(const DenseMatrix& x, const DenseMatrix& y);

enum class MmdFamily { Rbfg, Imq };

MmdFamily mmd_family_from_string(std::string_view s);

/// RBFG: exp(-r^2 / (2 sigma^2)); IMQ: C / (C + r^2).
struct MmdKernelSpec {
  MmdFamily family = MmdFamily::Rbfg;
  double param = 1.0;  // sigma for RBFG, C for IMQ

  void validate() const;
  double eval_sq(double r2) const noexcept;
  /// dk/d(r^2).
  double deriv_sq(double r2) const noexcept;
};

/// Biased V-statistic mean k(X,X) + mean k(Y,Y) - 2 mean k(X,Y).
double mmd_sq(const DenseMatrix& x, const DenseMatrix& y, const MmdKernelSpec& k);

/// mmd_sq together with its gradient with respect to every row of x.
double mmd_sq_and_grad(const DenseMatrix& x, const DenseMatrix& y, const MmdKernelSpec& k,
                       DenseMatrix& grad_x);

/// Fraction of samples whose nearest mode lies within `radius`, per mode. A
/// sample counts towards at most one mode, so the fractions sum to <= 1.
Vector mode_coverage(const DenseMatrix& x, const DenseMatrix& modes, double radius);

}  // namespace polygan

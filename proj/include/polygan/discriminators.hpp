#pragma once

#include <span>
#include <string>
#include <string_view>

#include "polygan/numerics.hpp"
#include "polygan/polyharmonic.hpp"

namespace polygan {

/// a labels fakes, b labels reals, c is the value the generator aims for.
struct ClassLabels {
  double a = -1.0;
  double b = 1.0;
  double c = 1.0;

  void validate() const;
};

inline constexpr double kDuplicateCenterDistance = 1e-10;
inline constexpr double kNegativeEnergyTolerance = 1e-8;
inline constexpr double kLambdaFloor = 1e-6;

/// Fitted interpolant D(x) = sum_i w_i psi(|x - c_i|) + P(x; v).
class LsRbfDiscriminator {
 public:
  LsRbfDiscriminator(PolyKernel kernel, DenseMatrix centers, Vector labels, Vector weights,
                     Vector poly_coeffs, double lambda_d, double c_k);

  const PolyKernel& kernel() const noexcept { return kernel_; }
  const PolyBasis& basis() const noexcept { return basis_; }
  const DenseMatrix& centers() const noexcept { return centers_; }
  const Vector& labels() const noexcept { return labels_; }
  const Vector& weights() const noexcept { return weights_; }
  const Vector& poly_coeffs() const noexcept { return poly_coeffs_; }
  double lambda_d() const noexcept { return lambda_d_; }
  double c_k() const noexcept { return c_k_; }

  double eval(std::span<const double> x) const;
  Vector grad_x(std::span<const double> x) const;
  /// Values (and optionally x-gradients, one row per point) for every row of xs.
  void evaluate(const DenseMatrix& xs, Vector* values, DenseMatrix* grads) const;

  /// {m, n, centers, weights, poly_coeffs, lambda_d, c_k} (labels included for reference).
  std::string to_json() const;
  static LsRbfDiscriminator from_json(std::string_view text);

 private:
  PolyKernel kernel_;
  PolyBasis basis_;
  DenseMatrix centers_;
  Vector labels_;
  Vector weights_;
  Vector poly_coeffs_;
  double lambda_d_;
  double c_k_;
};

/// Kernel matrix A_ij = psi(|c_i - c_j|).
DenseMatrix kernel_matrix(const PolyKernel& kernel, const DenseMatrix& centers);
/// Polynomial matrix B_il = p_l(c_i).
DenseMatrix poly_matrix(const PolyBasis& basis, const DenseMatrix& centers);

/// Solves [[A + (-1)^m lambda_d c_k I, B], [B^T, 0]] (w, v) = (y, 0).
LsRbfDiscriminator fit_ls_discriminator(const PolyKernel& kernel, const DenseMatrix& centers,
                                        const Vector& labels, double lambda_d,
                                        double c_k = 1.0);

inline double ls_eval(const LsRbfDiscriminator& d, std::span<const double> x) {
  return d.eval(x);
}

/// (-1)^m c_k w^T A w. NegativeEnergy if it comes out below -1e-8.
double ls_penalty_energy(const LsRbfDiscriminator& d);

/// D(x) = weight_scale * (sum_fake psi(|x - c_i|) - sum_real psi(|x - c_j|)).
class WRbfDiscriminator {
 public:
  WRbfDiscriminator(PolyKernel kernel, DenseMatrix fake_centers, DenseMatrix real_centers,
                    double weight_scale);

  const PolyKernel& kernel() const noexcept { return kernel_; }
  const DenseMatrix& fake_centers() const noexcept { return fake_; }
  const DenseMatrix& real_centers() const noexcept { return real_; }
  double weight_scale() const noexcept { return weight_scale_; }

  double eval(std::span<const double> x) const;
  Vector grad_x(std::span<const double> x) const;
  /// Batch form of eval/grad_x. If `skipped` is given, point-center pairs
  /// closer than r_min are omitted from the sums (and counted) rather than
  /// raising SingularRadius.
  void evaluate(const DenseMatrix& xs, Vector* values, DenseMatrix* grads,
                std::size_t* skipped = nullptr) const;

 private:
  PolyKernel kernel_;
  DenseMatrix fake_;
  DenseMatrix real_;
  double weight_scale_;
};

/// weight_scale = xi / (lambda_d N) with xi from compute_constants.
WRbfDiscriminator build_w_discriminator(const PolyKernel& kernel, const DenseMatrix& fake_centers,
                                        const DenseMatrix& real_centers, double lambda_d);

inline double w_eval(const WRbfDiscriminator& d, std::span<const double> x) { return d.eval(x); }
inline Vector w_grad_x(const WRbfDiscriminator& d, std::span<const double> x) {
  return d.grad_x(x);
}

/// Sample estimate of the upper bound on the optimal multiplier lambda_d,
/// floored at 1e-6:
///   |xi| eps / (M N sqrt(K)) * sqrt(m! s_alpha)
///     * sqrt(sum_l (sum_fake psi_{-n}(x_l - c_i) - sum_real psi_{-n}(x_l - c_j))^2)
double estimate_lambda_bound(const KernelConstants& constants, const DenseMatrix& fake_centers,
                             const DenseMatrix& real_centers, const DenseMatrix& eval_points,
                             double K);

}  // namespace polygan

#include "polygan/discriminators.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
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

void require_dim(std::span<const double> x, std::size_t n, const char* who) {
  if (x.size() != n) {
    throw Error(ErrorKind::ShapeMismatch, std::string(who) + ": point has dimension " +
                                              std::to_string(x.size()) + ", expected " +
                                              std::to_string(n));
  }
}

// Adds sign * sum_c psi(|x - c|) to *value and sign * sum_c grad to grad.
// With `skipped` set, pairs closer than r_min are left out and counted
// instead of raising SingularRadius.
void accumulate(const PolyKernel& kernel, const DenseMatrix& centers, std::span<const double> x,
                double sign, double* value, double* grad, std::size_t* skipped = nullptr) {
  const std::size_t n = x.size();
  const double guard2 = kernel.r_min() * kernel.r_min();
  for (std::size_t j = 0; j < centers.rows(); ++j) {
    const auto c = centers.row(j);
    const double r2 = sq_dist(x, c);
    if (skipped && r2 < guard2) {
      ++*skipped;
      continue;
    }
    if (value) *value += sign * kernel.eval_sq(r2);
    if (grad) {
      const double g = sign * kernel.radial_factor_sq(r2);
      for (std::size_t d = 0; d < n; ++d) grad[d] += g * (x[d] - c[d]);
    }
  }
}

}  // namespace

void ClassLabels::validate() const {
  if (a == b) throw Error(ErrorKind::InvalidArgument, "fake and real labels must differ");
  if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(c)) {
    throw Error(ErrorKind::InvalidArgument, "labels must be finite");
  }
}

// ---------------------------------------------------------------------------
// Poly-LSGAN

LsRbfDiscriminator::LsRbfDiscriminator(PolyKernel kernel, DenseMatrix centers, Vector labels,
                                       Vector weights, Vector poly_coeffs, double lambda_d,
                                       double c_k)
    : kernel_(kernel),
      basis_(kernel.n(), kernel.m()),
      centers_(std::move(centers)),
      labels_(std::move(labels)),
      weights_(std::move(weights)),
      poly_coeffs_(std::move(poly_coeffs)),
      lambda_d_(lambda_d),
      c_k_(c_k) {
  if (centers_.cols() != kernel_.n() || weights_.size() != centers_.rows() ||
      poly_coeffs_.size() != basis_.size()) {
    throw Error(ErrorKind::ShapeMismatch, "discriminator parts have inconsistent sizes");
  }
}

double LsRbfDiscriminator::eval(std::span<const double> x) const {
  require_dim(x, kernel_.n(), "ls_eval");
  double value = 0.0;
  for (std::size_t i = 0; i < centers_.rows(); ++i)
    value += weights_[i] * kernel_.eval_sq(sq_dist(x, centers_.row(i)));
  const Vector p = basis_.eval(x);
  for (std::size_t l = 0; l < p.size(); ++l) value += poly_coeffs_[l] * p[l];
  return value;
}

Vector LsRbfDiscriminator::grad_x(std::span<const double> x) const {
  require_dim(x, kernel_.n(), "ls_grad_x");
  const std::size_t n = kernel_.n();
  Vector grad(n, 0.0);
  for (std::size_t i = 0; i < centers_.rows(); ++i) {
    const auto c = centers_.row(i);
    const double g = weights_[i] * kernel_.radial_factor_sq(sq_dist(x, c));
    for (std::size_t d = 0; d < n; ++d) grad[d] += g * (x[d] - c[d]);
  }
  const DenseMatrix jac = basis_.gradient(x);
  for (std::size_t l = 0; l < jac.rows(); ++l)
    for (std::size_t d = 0; d < n; ++d) grad[d] += poly_coeffs_[l] * jac(l, d);
  return grad;
}

void LsRbfDiscriminator::evaluate(const DenseMatrix& xs, Vector* values, DenseMatrix* grads) const {
  if (xs.cols() != kernel_.n()) throw Error(ErrorKind::ShapeMismatch, "ls evaluate: width");
  if (values) values->assign(xs.rows(), 0.0);
  if (grads) *grads = DenseMatrix(xs.rows(), xs.cols());
  for (std::size_t p = 0; p < xs.rows(); ++p) {
    if (values) (*values)[p] = eval(xs.row(p));
    if (grads) {
      const Vector g = grad_x(xs.row(p));
      std::copy(g.begin(), g.end(), grads->row(p).begin());
    }
  }
}

std::string LsRbfDiscriminator::to_json() const {
  nlohmann::json j;
  j["m"] = kernel_.m();
  j["n"] = kernel_.n();
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < centers_.rows(); ++i)
    rows.emplace_back(centers_.row(i).begin(), centers_.row(i).end());
  j["centers"] = rows;
  j["labels"] = labels_;
  j["weights"] = weights_;
  j["poly_coeffs"] = poly_coeffs_;
  j["lambda_d"] = lambda_d_;
  j["c_k"] = c_k_;
  return j.dump();
}

LsRbfDiscriminator LsRbfDiscriminator::from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    const PolyKernel kernel(j.at("m").get<int>(), j.at("n").get<std::size_t>());
    const auto rows = j.at("centers").get<std::vector<std::vector<double>>>();
    DenseMatrix centers = rows.empty() ? DenseMatrix(0, kernel.n()) : DenseMatrix::from_rows(rows);
    Vector labels = j.contains("labels") ? j["labels"].get<Vector>() : Vector(centers.rows(), 0.0);
    return LsRbfDiscriminator(kernel, std::move(centers), std::move(labels),
                              j.at("weights").get<Vector>(), j.at("poly_coeffs").get<Vector>(),
                              j.at("lambda_d").get<double>(), j.at("c_k").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("discriminator json: ") + e.what());
  }
}

DenseMatrix kernel_matrix(const PolyKernel& kernel, const DenseMatrix& centers) {
  const std::size_t N = centers.rows();
  DenseMatrix a(N, N);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = i + 1; j < N; ++j) {
      const double v = kernel.eval_sq(sq_dist(centers.row(i), centers.row(j)));
      a(i, j) = v;
      a(j, i) = v;
    }
    a(i, i) = kernel.eval(0.0);
  }
  return a;
}

DenseMatrix poly_matrix(const PolyBasis& basis, const DenseMatrix& centers) {
  DenseMatrix b(centers.rows(), basis.size());
  for (std::size_t i = 0; i < centers.rows(); ++i) basis.eval_into(centers.row(i), b.row(i));
  return b;
}

LsRbfDiscriminator fit_ls_discriminator(const PolyKernel& kernel, const DenseMatrix& centers,
                                        const Vector& labels, double lambda_d, double c_k) {
  if (kernel.k() <= 0) {
    throw Error(ErrorKind::InvalidOrder,
                "least-squares discriminator needs 2m - n > 0, got " + std::to_string(kernel.k()));
  }
  if (centers.cols() != kernel.n()) throw Error(ErrorKind::ShapeMismatch, "center dimension");
  if (labels.size() != centers.rows()) throw Error(ErrorKind::ShapeMismatch, "label count");
  if (!(lambda_d >= 0.0)) throw Error(ErrorKind::InvalidArgument, "lambda_d must be >= 0");
  const std::size_t N = centers.rows();
  if (N == 0) throw Error(ErrorKind::EmptyBatch, "no centers");
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = i + 1; j < N; ++j)
      if (sq_dist(centers.row(i), centers.row(j)) <
          kDuplicateCenterDistance * kDuplicateCenterDistance) {
        throw Error(ErrorKind::DuplicateCenters, "centers " + std::to_string(i) + " and " +
                                                     std::to_string(j) + " coincide");
      }

  const PolyBasis basis(kernel.n(), kernel.m());
  const std::size_t L = basis.size();
  if (N < L) {
    throw Error(ErrorKind::RankDeficientB, std::to_string(N) + " centers cannot determine " +
                                               std::to_string(L) + " polynomial coefficients");
  }
  const DenseMatrix a = kernel_matrix(kernel, centers);
  const DenseMatrix b = poly_matrix(basis, centers);
  const double shift = (kernel.m() % 2 == 0 ? 1.0 : -1.0) * lambda_d * c_k;

  DenseMatrix sys(N + L, N + L);
  for (std::size_t i = 0; i < N; ++i) {
    for (std::size_t j = 0; j < N; ++j) sys(i, j) = a(i, j);
    sys(i, i) += shift;
    for (std::size_t l = 0; l < L; ++l) {
      sys(i, N + l) = b(i, l);
      sys(N + l, i) = b(i, l);
    }
  }
  Vector rhs(N + L, 0.0);
  std::copy(labels.begin(), labels.end(), rhs.begin());

  Vector sol;
  try {
    sol = lu_solve(sys, rhs);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::SingularMatrix) throw;
    throw Error(ErrorKind::RankDeficientB,
                "saddle system singular; centers may lie on a low-dimensional subspace");
  }
  Vector w(sol.begin(), sol.begin() + static_cast<std::ptrdiff_t>(N));
  Vector v(sol.begin() + static_cast<std::ptrdiff_t>(N), sol.end());
  return LsRbfDiscriminator(kernel, centers, labels, std::move(w), std::move(v), lambda_d, c_k);
}

double ls_penalty_energy(const LsRbfDiscriminator& d) {
  const DenseMatrix a = kernel_matrix(d.kernel(), d.centers());
  const Vector aw = matvec(a, d.weights());
  double quad = 0.0;
  for (std::size_t i = 0; i < aw.size(); ++i) quad += d.weights()[i] * aw[i];
  const double energy = (d.kernel().m() % 2 == 0 ? 1.0 : -1.0) * d.c_k() * quad;
  if (energy < -kNegativeEnergyTolerance) {
    throw Error(ErrorKind::NegativeEnergy, "gradient energy " + std::to_string(energy));
  }
  return energy;
}

// ---------------------------------------------------------------------------
// Poly-WGAN

WRbfDiscriminator::WRbfDiscriminator(PolyKernel kernel, DenseMatrix fake_centers,
                                     DenseMatrix real_centers, double weight_scale)
    : kernel_(kernel),
      fake_(std::move(fake_centers)),
      real_(std::move(real_centers)),
      weight_scale_(weight_scale) {
  if (fake_.rows() == 0 || real_.rows() == 0) throw Error(ErrorKind::EmptyBatch, "no centers");
  if (fake_.rows() != real_.rows()) {
    throw Error(ErrorKind::SizeMismatch, "fake and real center batches differ in size");
  }
  if (fake_.cols() != kernel_.n() || real_.cols() != kernel_.n()) {
    throw Error(ErrorKind::ShapeMismatch, "center dimension does not match kernel");
  }
  if (!fake_.all_finite() || !real_.all_finite()) {
    throw Error(ErrorKind::InvalidArgument, "non-finite center");
  }
  if (!std::isfinite(weight_scale_) || weight_scale_ == 0.0) {
    throw Error(ErrorKind::InvalidArgument, "weight scale must be finite and nonzero");
  }
}

double WRbfDiscriminator::eval(std::span<const double> x) const {
  require_dim(x, kernel_.n(), "w_eval");
  double value = 0.0;
  accumulate(kernel_, fake_, x, 1.0, &value, nullptr);
  accumulate(kernel_, real_, x, -1.0, &value, nullptr);
  return weight_scale_ * value;
}

Vector WRbfDiscriminator::grad_x(std::span<const double> x) const {
  require_dim(x, kernel_.n(), "w_grad_x");
  Vector grad(kernel_.n(), 0.0);
  accumulate(kernel_, fake_, x, 1.0, nullptr, grad.data());
  accumulate(kernel_, real_, x, -1.0, nullptr, grad.data());
  for (double& g : grad) g *= weight_scale_;
  return grad;
}

void WRbfDiscriminator::evaluate(const DenseMatrix& xs, Vector* values, DenseMatrix* grads,
                                 std::size_t* skipped) const {
  if (xs.cols() != kernel_.n()) throw Error(ErrorKind::ShapeMismatch, "w evaluate: width");
  if (values) values->assign(xs.rows(), 0.0);
  if (grads) *grads = DenseMatrix(xs.rows(), xs.cols());
  for (std::size_t p = 0; p < xs.rows(); ++p) {
    const auto x = xs.row(p);
    double v = 0.0;
    double* g = grads ? grads->row(p).data() : nullptr;
    accumulate(kernel_, fake_, x, 1.0, values ? &v : nullptr, g, skipped);
    accumulate(kernel_, real_, x, -1.0, values ? &v : nullptr, g, skipped);
    if (values) (*values)[p] = weight_scale_ * v;
    if (g)
      for (std::size_t d = 0; d < xs.cols(); ++d) g[d] *= weight_scale_;
  }
}

WRbfDiscriminator build_w_discriminator(const PolyKernel& kernel, const DenseMatrix& fake_centers,
                                        const DenseMatrix& real_centers, double lambda_d) {
  if (fake_centers.rows() == 0 || real_centers.rows() == 0) {
    throw Error(ErrorKind::EmptyBatch, "no centers");
  }
  if (!(lambda_d > 0.0)) throw Error(ErrorKind::InvalidArgument, "lambda_d must be positive");
  const KernelConstants kc = compute_constants(kernel.m(), kernel.n());
  const double scale = kc.xi / (lambda_d * static_cast<double>(fake_centers.rows()));
  return WRbfDiscriminator(kernel, fake_centers, real_centers, scale);
}

double estimate_lambda_bound(const KernelConstants& constants, const DenseMatrix& fake_centers,
                             const DenseMatrix& real_centers, const DenseMatrix& eval_points,
                             double K) {
  if (!(K > 0.0)) throw Error(ErrorKind::InvalidArgument, "constraint level K must be positive");
  if (eval_points.rows() == 0 || fake_centers.rows() == 0) {
    throw Error(ErrorKind::EmptyBatch, "empty center or evaluation set");
  }
  if (fake_centers.rows() != real_centers.rows()) {
    throw Error(ErrorKind::SizeMismatch, "fake and real center batches differ in size");
  }
  const std::size_t n = constants.n;
  const PolyKernel inv = PolyKernel::with_exponent(-static_cast<int>(n), n);
  double sum_sq = 0.0;
  for (std::size_t l = 0; l < eval_points.rows(); ++l) {
    double s = 0.0;
    accumulate(inv, fake_centers, eval_points.row(l), 1.0, &s, nullptr);
    accumulate(inv, real_centers, eval_points.row(l), -1.0, &s, nullptr);
    sum_sq += s * s;
  }
  const double M = static_cast<double>(eval_points.rows());
  const double N = static_cast<double>(fake_centers.rows());
  double m_fact = 1.0;
  for (int i = 2; i <= constants.m; ++i) m_fact *= i;
  const double bound = std::abs(constants.xi) * constants.epsilon_bound / (M * N * std::sqrt(K)) *
                       std::sqrt(m_fact * constants.s_alpha) * std::sqrt(sum_sq);
  if (!std::isfinite(bound)) throw Error(ErrorKind::Overflow, "lambda bound is not finite");
  return std::max(bound, kLambdaFloor);
}

}  // namespace polygan

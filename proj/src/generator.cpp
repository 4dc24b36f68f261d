#include "polygan/generator.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <string>

namespace polygan {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapC = Eigen::Map<const RowMajor>;
using Map = Eigen::Map<RowMajor>;

Map view(DenseMatrix& m) {
  return {m.data().data(), static_cast<Eigen::Index>(m.rows()),
          static_cast<Eigen::Index>(m.cols())};
}

double act(double x, Activation a) noexcept {
  if (x > 0.0) return x;
  return a == Activation::LeakyRelu ? kLeakySlope * x : 0.0;
}

// Subgradient 0 at the kink for ReLU.
double act_slope(double x, Activation a) noexcept {
  if (x > 0.0) return 1.0;
  return a == Activation::LeakyRelu ? kLeakySlope : 0.0;
}

}  // namespace

std::string_view to_string(Activation a) {
  return a == Activation::LeakyRelu ? "leaky_relu" : "relu";
}

Activation activation_from_string(std::string_view s) {
  if (s == "relu") return Activation::Relu;
  if (s == "leaky_relu" || s == "leaky-relu" || s == "leakyrelu") return Activation::LeakyRelu;
  throw Error(ErrorKind::ConfigError, "unknown activation '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// MlpGenerator

MlpGenerator::MlpGenerator(std::vector<std::size_t> sizes, Activation activation)
    : sizes_(std::move(sizes)), activation_(activation) {
  if (sizes_.size() < 2) throw Error(ErrorKind::InvalidArgument, "need at least two layer sizes");
  for (std::size_t s : sizes_)
    if (s == 0) throw Error(ErrorKind::InvalidArgument, "layer width must be positive");
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(total);
    total += sizes_[l + 1] * sizes_[l] + sizes_[l + 1];
  }
  params_.assign(total, 0.0);
  grads_.assign(total, 0.0);
}

MlpGenerator MlpGenerator::he_uniform(std::vector<std::size_t> sizes, Activation activation,
                                      SeededRng& rng) {
  MlpGenerator g(std::move(sizes), activation);
  for (std::size_t l = 0; l < g.num_layers(); ++l) {
    const double bound = std::sqrt(6.0 / static_cast<double>(g.sizes_[l]));
    for (double& w : g.weights(l)) w = bound * (2.0 * rng.uniform() - 1.0);
  }
  return g;
}

std::span<double> MlpGenerator::weights(std::size_t l) noexcept {
  return {params_.data() + offset(l), sizes_[l + 1] * sizes_[l]};
}
std::span<const double> MlpGenerator::weights(std::size_t l) const noexcept {
  return {params_.data() + offset(l), sizes_[l + 1] * sizes_[l]};
}
std::span<double> MlpGenerator::biases(std::size_t l) noexcept {
  return {params_.data() + offset(l) + sizes_[l + 1] * sizes_[l], sizes_[l + 1]};
}
std::span<const double> MlpGenerator::biases(std::size_t l) const noexcept {
  return {params_.data() + offset(l) + sizes_[l + 1] * sizes_[l], sizes_[l + 1]};
}

DenseMatrix MlpGenerator::run(const DenseMatrix& z, std::vector<DenseMatrix>* inputs,
                              std::vector<DenseMatrix>* pre) const {
  if (z.cols() != input_dim()) {
    throw Error(ErrorKind::ShapeMismatch, "generator input width " + std::to_string(z.cols()) +
                                              ", expected " + std::to_string(input_dim()));
  }
  if (z.rows() == 0) throw Error(ErrorKind::EmptyBatch, "empty noise batch");
  DenseMatrix h = z;
  const std::size_t L = num_layers();
  for (std::size_t l = 0; l < L; ++l) {
    const std::size_t in = sizes_[l];
    const std::size_t out = sizes_[l + 1];
    MapC W(params_.data() + offset(l), static_cast<Eigen::Index>(out),
           static_cast<Eigen::Index>(in));
    Eigen::Map<const Eigen::RowVectorXd> b(params_.data() + offset(l) + out * in,
                                           static_cast<Eigen::Index>(out));
    DenseMatrix y(h.rows(), out);
    view(y).noalias() = view(h) * W.transpose();
    view(y).rowwise() += b;
    if (inputs) (*inputs)[l] = std::move(h);
    if (l + 1 < L) {
      if (pre) (*pre)[l] = y;
      for (double& v : y.data()) v = act(v, activation_);
    }
    h = std::move(y);
  }
  return h;
}

DenseMatrix MlpGenerator::forward(const DenseMatrix& z) {
  inputs_.assign(num_layers(), DenseMatrix());
  pre_.assign(num_layers(), DenseMatrix());
  cached_ = false;
  DenseMatrix out = run(z, &inputs_, &pre_);
  cached_ = true;
  return out;
}

DenseMatrix MlpGenerator::predict(const DenseMatrix& z) const { return run(z, nullptr, nullptr); }

void MlpGenerator::backward(const DenseMatrix& upstream) {
  if (!cached_) throw Error(ErrorKind::StaleCache, "backward called without a forward pass");
  const std::size_t B = inputs_.front().rows();
  if (upstream.rows() != B || upstream.cols() != output_dim()) {
    throw Error(ErrorKind::StaleCache, "upstream gradient does not match the cached batch");
  }
  DenseMatrix delta = upstream;
  for (std::size_t l = num_layers(); l-- > 0;) {
    const std::size_t in = sizes_[l];
    const std::size_t out = sizes_[l + 1];
    Map gW(grads_.data() + offset(l), static_cast<Eigen::Index>(out),
           static_cast<Eigen::Index>(in));
    Eigen::Map<Eigen::RowVectorXd> gb(grads_.data() + offset(l) + out * in,
                                      static_cast<Eigen::Index>(out));
    gW.noalias() = view(delta).transpose() * view(inputs_[l]);
    gb = view(delta).colwise().sum();
    if (l == 0) break;
    MapC W(params_.data() + offset(l), static_cast<Eigen::Index>(out),
           static_cast<Eigen::Index>(in));
    DenseMatrix next(B, in);
    view(next).noalias() = view(delta) * W;
    const auto p = pre_[l - 1].data();
    auto nd = next.data();
    for (std::size_t i = 0; i < nd.size(); ++i) nd[i] *= act_slope(p[i], activation_);
    delta = std::move(next);
  }
}

void MlpGenerator::standardize_output(const DenseMatrix& z) {
  const DenseMatrix out = predict(z);
  const std::size_t B = out.rows();
  const std::size_t n = out.cols();
  if (B < 2) throw Error(ErrorKind::InvalidArgument, "calibration batch needs >= 2 rows");
  Vector mean(n, 0.0);
  for (std::size_t i = 0; i < B; ++i)
    for (std::size_t d = 0; d < n; ++d) mean[d] += out(i, d);
  for (double& m : mean) m /= static_cast<double>(B);
  DenseMatrix cov(n, n);
  for (std::size_t i = 0; i < B; ++i)
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b)
        cov(a, b) += (out(i, a) - mean[a]) * (out(i, b) - mean[b]);
  for (double& c : cov.data()) c /= static_cast<double>(B - 1);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < a; ++b) cov(a, b) = cov(b, a);

  const EigenDecomposition eig = sym_eigen(cov);
  const double top = eig.values.empty() ? 0.0 : eig.values.front();
  if (!(top > 0.0)) return;  // constant output; nothing to rescale
  // A = V diag(1/sqrt(l)) V^T, leaving numerically null directions unscaled.
  DenseMatrix a(n, n);
  for (std::size_t k = 0; k < n; ++k) {
    const double lam = eig.values[k];
    const double f = lam > 1e-12 * top ? 1.0 / std::sqrt(lam) : 1.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        a(i, j) += f * eig.vectors(i, k) * eig.vectors(j, k);
  }
  const std::size_t last = num_layers() - 1;
  const std::size_t in = sizes_[last];
  DenseMatrix w(n, in, Vector(weights(last).begin(), weights(last).end()));
  const DenseMatrix aw = matmul(a, w);
  std::copy(aw.data().begin(), aw.data().end(), weights(last).begin());
  Vector shifted(n);
  for (std::size_t d = 0; d < n; ++d) shifted[d] = biases(last)[d] - mean[d];
  const Vector nb = matvec(a, shifted);
  std::copy(nb.begin(), nb.end(), biases(last).begin());
  cached_ = false;
}

std::string MlpGenerator::to_json() const {
  nlohmann::json j;
  j["sizes"] = sizes_;
  j["activation"] = std::string(to_string(activation_));
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < num_layers(); ++l) {
    layers.push_back({{"weights", Vector(weights(l).begin(), weights(l).end())},
                      {"biases", Vector(biases(l).begin(), biases(l).end())}});
  }
  j["layers"] = layers;
  return j.dump();
}

MlpGenerator MlpGenerator::from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    MlpGenerator g(j.at("sizes").get<std::vector<std::size_t>>(),
                   activation_from_string(j.at("activation").get<std::string>()));
    const auto& layers = j.at("layers");
    if (layers.size() != g.num_layers()) {
      throw Error(ErrorKind::ConfigError, "checkpoint layer count mismatch");
    }
    for (std::size_t l = 0; l < g.num_layers(); ++l) {
      const auto w = layers[l].at("weights").get<Vector>();
      const auto b = layers[l].at("biases").get<Vector>();
      if (w.size() != g.weights(l).size() || b.size() != g.biases(l).size()) {
        throw Error(ErrorKind::ConfigError, "checkpoint layer " + std::to_string(l) + " shape");
      }
      std::copy(w.begin(), w.end(), g.weights(l).begin());
      std::copy(b.begin(), b.end(), g.biases(l).begin());
    }
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("checkpoint: ") + e.what());
  }
}

AffineGenerator AffineGenerator::identity(std::size_t n_in, std::size_t n_out) {
  AffineGenerator g(n_in, n_out);
  auto w = g.weights(0);
  for (std::size_t i = 0; i < std::min(n_in, n_out); ++i) w[i * n_in + i] = 1.0;
  return g;
}

DenseMatrix AffineGenerator::M() const {
  const auto w = weights(0);
  return DenseMatrix(output_dim(), input_dim(), Vector(w.begin(), w.end()));
}

Vector AffineGenerator::b() const {
  const auto b = biases(0);
  return Vector(b.begin(), b.end());
}

// ---------------------------------------------------------------------------
// Adam

AdamState::AdamState(std::size_t count, AdamConfig config)
    : config_(config), m_(count, 0.0), v_(count, 0.0) {
  if (!(config_.lr > 0.0)) throw Error(ErrorKind::InvalidArgument, "learning rate must be > 0");
}

void AdamState::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw Error(ErrorKind::ShapeMismatch, "adam: parameter/gradient size mismatch");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw Error(ErrorKind::NonFiniteGradient,
                  "non-finite gradient at iteration " + std::to_string(t_ + 1) + " (parameter " +
                      std::to_string(i) + ")");
    }
  }
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < grads.size(); ++i) {
    m_[i] = b1 * m_[i] + (1.0 - b1) * grads[i];
    v_[i] = b2 * v_[i] + (1.0 - b2) * grads[i] * grads[i];
    const double mhat = m_[i] / c1;
    const double vhat = v_[i] / c2;
    params[i] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
  }
}

// ---------------------------------------------------------------------------
// Generator losses

double w_orientation(const WRbfDiscriminator& d) {
  const double s = d.weight_scale() > 0.0 ? 1.0 : -1.0;
  return d.kernel().increasing() ? s : -s;
}

double generator_loss_and_grad(MlpGenerator& g, const DenseMatrix& z, const WRbfDiscriminator& d,
                               std::size_t* skipped) {
  const DenseMatrix x = g.forward(z);
  Vector values;
  DenseMatrix grads;
  d.evaluate(x, &values, &grads, skipped);
  const double B = static_cast<double>(x.rows());
  const double coef = -w_orientation(d) / B;
  double loss = 0.0;
  for (double v : values) loss += v;
  loss *= coef;
  for (double& v : grads.data()) v *= coef;
  g.backward(grads);
  return loss;
}

double ls_generator_loss_and_grad(MlpGenerator& g, const DenseMatrix& z,
                                  const LsRbfDiscriminator& d, double c) {
  const DenseMatrix x = g.forward(z);
  Vector values;
  DenseMatrix grads;
  d.evaluate(x, &values, &grads);
  const double B = static_cast<double>(x.rows());
  double loss = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double r = values[i] - c;
    loss += r * r;
    for (double& gx : grads.row(i)) gx *= 2.0 * r / B;
  }
  g.backward(grads);
  return loss / B;
}

}  // namespace polygan

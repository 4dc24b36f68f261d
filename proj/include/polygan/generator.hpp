#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "polygan/discriminators.hpp"
#include "polygan/numerics.hpp"

namespace polygan {

enum class Activation { Relu, LeakyRelu };

inline constexpr double kLeakySlope = 0.2;

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view s);

/// Dense feed-forward generator. Hidden layers use the chosen activation, the
/// last layer is linear. All weights and biases live in one flat buffer
/// (per layer: W as out x in row-major, then b), and gradients share that layout.
class MlpGenerator {
 public:
  /// Zero-initialised network with layer widths sizes[0] -> ... -> sizes.back().
  explicit MlpGenerator(std::vector<std::size_t> sizes, Activation activation = Activation::Relu);

  /// He-uniform weights (bound sqrt(6 / fan_in)), zero biases.
  static MlpGenerator he_uniform(std::vector<std::size_t> sizes, Activation activation,
                                 SeededRng& rng);

  const std::vector<std::size_t>& sizes() const noexcept { return sizes_; }
  Activation activation() const noexcept { return activation_; }
  std::size_t input_dim() const noexcept { return sizes_.front(); }
  std::size_t output_dim() const noexcept { return sizes_.back(); }
  std::size_t num_layers() const noexcept { return sizes_.size() - 1; }
  std::size_t param_count() const noexcept { return params_.size(); }

  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }
  std::span<double> grads() noexcept { return grads_; }
  std::span<const double> grads() const noexcept { return grads_; }

  std::span<double> weights(std::size_t layer) noexcept;
  std::span<const double> weights(std::size_t layer) const noexcept;
  std::span<double> biases(std::size_t layer) noexcept;
  std::span<const double> biases(std::size_t layer) const noexcept;

  /// Batch map z (B x input_dim) -> B x output_dim; caches activations for backward.
  DenseMatrix forward(const DenseMatrix& z);
  /// Same map without touching the cache.
  DenseMatrix predict(const DenseMatrix& z) const;
  /// Overwrites grads() with d(sum_i <upstream_i, G(z_i)>)/d(params) for the
  /// batch of the last forward. StaleCache if there is none or sizes differ.
  void backward(const DenseMatrix& upstream);

  /// Re-parameterises the last layer so that the output on `z` has zero mean
  /// and identity covariance.
  void standardize_output(const DenseMatrix& z);

  std::string to_json() const;
  static MlpGenerator from_json(std::string_view text);

 private:
  std::size_t offset(std::size_t layer) const noexcept { return offsets_[layer]; }
  DenseMatrix run(const DenseMatrix& z, std::vector<DenseMatrix>* inputs,
                  std::vector<DenseMatrix>* pre) const;

  std::vector<std::size_t> sizes_;
  Activation activation_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
  std::vector<double> grads_;
  // inputs_[l] is the input to layer l; pre_[l] its pre-activation.
  std::vector<DenseMatrix> inputs_;
  std::vector<DenseMatrix> pre_;
  bool cached_ = false;
};

/// x = M z + b, i.e. a network with no hidden layer.
class AffineGenerator : public MlpGenerator {
 public:
  AffineGenerator(std::size_t n_in, std::size_t n_out)
      : MlpGenerator({n_in, n_out}, Activation::Relu) {}

  /// M = [I 0] (or its transpose-shaped truncation), b = 0.
  static AffineGenerator identity(std::size_t n_in, std::size_t n_out);

  DenseMatrix M() const;
  Vector b() const;
};

struct AdamConfig {
  double lr = 0.002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class AdamState {
 public:
  AdamState(std::size_t count, AdamConfig config = {});

  std::size_t step_count() const noexcept { return t_; }
  const AdamConfig& config() const noexcept { return config_; }
  const Vector& first_moment() const noexcept { return m_; }
  const Vector& second_moment() const noexcept { return v_; }

  /// One bias-corrected update. NonFiniteGradient (naming the step index)
  /// leaves params and state untouched.
  void step(std::span<double> params, std::span<const double> grads);

 private:
  AdamConfig config_;
  std::size_t t_ = 0;
  Vector m_;
  Vector v_;
};

inline void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads) {
  state.step(params, grads);
}

/// +1 if the discriminator scores reals high, -1 if it scores fakes high.
/// Depends on the sign of the weight scale and on whether psi grows with r.
double w_orientation(const WRbfDiscriminator& d);

/// Generator loss -orientation * mean_i D(G(z_i)); descending it moves the
/// generated points towards the reals. Leaves parameter gradients in g.grads().
/// `skipped` (optional) makes coincident point-center pairs drop out of the
/// sums, see WRbfDiscriminator::evaluate.
double generator_loss_and_grad(MlpGenerator& g, const DenseMatrix& z, const WRbfDiscriminator& d,
                               std::size_t* skipped = nullptr);

/// mean_i (D(G(z_i)) - c)^2 with gradients in g.grads().
double ls_generator_loss_and_grad(MlpGenerator& g, const DenseMatrix& z,
                                  const LsRbfDiscriminator& d, double c);

}  // namespace polygan

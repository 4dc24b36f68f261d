#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "polygan/discriminators.hpp"
#include "polygan/generator.hpp"
#include "polygan/metrics.hpp"
#include "polygan/numerics.hpp"

namespace polygan {

// ---------------------------------------------------------------------------
// Targets

struct GmmComponent {
  double weight = 1.0;
  Vector mean;
  DenseMatrix cov;
};

struct TargetSpec {
  enum class Kind { Gaussian, GmmCircle, GmmCustom };

  Kind kind = Kind::Gaussian;
  // Gaussian
  Vector mean;
  DenseMatrix cov;
  // GmmCircle
  std::size_t components = 8;
  double radius = 1.0;
  double sigma = 0.02;
  // GmmCustom
  std::vector<GmmComponent> mixture;

  static TargetSpec gaussian(Vector mean, DenseMatrix cov);
  static TargetSpec gmm_circle(std::size_t components = 8, double radius = 1.0,
                               double sigma = 0.02);
  static TargetSpec gmm_custom(std::vector<GmmComponent> mixture);
  /// "wgan_gaussian" N(3.5 1, 1.25 I), "lsgan_gaussian" N(5 1, 1.5 I) (both 2-D),
  /// "gmm8" the unit-circle mixture.
  static TargetSpec preset(std::string_view name);

  std::size_t dim() const;
  bool is_gaussian() const noexcept { return kind == Kind::Gaussian; }
  /// Component means, one per row (the single mean for a Gaussian).
  DenseMatrix modes() const;
  /// Throws ConfigError on negative/unnormalised weights, non-PSD covariances
  /// or inconsistent dimensions.
  void validate() const;
};

inline constexpr double kWeightSumTolerance = 1e-9;

/// Draws from a target; component roots are factored once.
class TargetSampler {
 public:
  explicit TargetSampler(const TargetSpec& spec);

  std::size_t dim() const noexcept { return dim_; }
  DenseMatrix sample(SeededRng& rng, std::size_t count) const;

 private:
  std::size_t dim_;
  std::vector<double> cumulative_;
  std::vector<GaussianSampler> parts_;
};

DenseMatrix sample_target(const TargetSpec& spec, SeededRng& rng, std::size_t count);

// ---------------------------------------------------------------------------
// Configuration

enum class Algorithm { PolyLSGAN, PolyWGAN, GmmnRbfg, GmmnImq };
enum class LambdaMode { Fixed, Bound };

std::string_view to_string(Algorithm a);
Algorithm algorithm_from_string(std::string_view s);

struct GeneratorSpec {
  std::string kind = "mlp";  // "mlp" or "affine"
  std::size_t noise_dim = 100;
  std::vector<std::size_t> hidden{64, 32, 16};
  Activation activation = Activation::Relu;
  std::string init = "he_uniform";  // "he_uniform" or "identity" (affine only)
  /// Rescale the last layer at init so the output starts near N(0, I).
  bool standardize = true;
};

struct TrainConfig {
  Algorithm algorithm = Algorithm::PolyWGAN;
  std::size_t n = 2;
  std::optional<int> m;
  std::size_t rbf_centers = 100;
  std::size_t batch_size = 500;
  double generator_lr = 0.002;
  std::size_t iterations = 1000;
  std::size_t metric_cadence = 100;
  LambdaMode lambda_mode = LambdaMode::Fixed;
  double lambda_d = 1.0;
  double K = 1.0;
  std::uint64_t seed = 0;
  ClassLabels labels;
  double c_k = 1.0;
  MmdKernelSpec mmd;
  GeneratorSpec generator;
  /// 0 selects 10000 for Gaussian targets (moment W2) and 1000 for mixtures
  /// (empirical W2).
  std::size_t eval_samples = 0;
  /// When false wall_seconds is written as 0 so histories are byte-stable.
  bool timing = true;
  std::string outdir = "out";

  /// m, or the default: ceil(n/2), raised to the smallest m with 2m - n > 0
  /// for PolyLSGAN.
  int resolved_m() const;
  std::size_t resolved_eval_samples(const TargetSpec& target) const;
  /// ConfigError on invalid combinations (including 2m - n <= 0 for PolyLSGAN).
  void validate() const;
};

struct ExperimentConfig {
  TrainConfig train;
  TargetSpec target;
};

/// JSON document with the TrainConfig keys at top level and a "target" object.
ExperimentConfig parse_experiment(std::string_view json_text);
TargetSpec parse_target(std::string_view json_text);
std::string to_json(const TrainConfig& cfg);
std::string to_json(const TargetSpec& target);

// ---------------------------------------------------------------------------
// Runs

struct HistoryRecord {
  std::size_t iteration = 0;
  double w22 = 0.0;
  double wall_seconds = 0.0;
};

/// Non-fatal occurrences during training (e.g. a rank-deficient fit whose
/// update was skipped).
struct HistoryEvent {
  std::size_t iteration = 0;
  std::string kind;
  std::string message;
};

enum class RunStatus { Completed, Diverged, NumericalFailure, ConfigError };

std::string_view to_string(RunStatus s);

struct RunHistory {
  TrainConfig config;
  TargetSpec target;
  int m = 0;
  RunStatus status = RunStatus::Completed;
  std::string status_message;
  std::vector<HistoryRecord> records;
  std::vector<HistoryEvent> events;  // first kMaxStoredEvents only
  std::size_t event_count = 0;
  /// Generated-point/center pairs closer than r_min, left out of the loss.
  std::size_t excluded_pairs = 0;
  std::string checkpoint;     // generator JSON at the end of the run
  DenseMatrix final_samples;  // kFinalSampleCount generated points

  double initial_w22() const;
  double final_w22() const;
  /// w22 at the last record with iteration <= it.
  double w22_at(std::size_t it) const;
  /// "iteration,w22,wall_seconds" plus one line per record.
  std::string history_csv() const;
  std::string run_json() const;
};

inline constexpr std::size_t kFinalSampleCount = 2000;
inline constexpr std::size_t kMaxStoredEvents = 100;
inline constexpr double kDivergenceFactor = 10.0;
inline constexpr std::size_t kCalibrationSamples = 10000;

/// Builds the generator described by cfg.generator for output dimension cfg.n.
MlpGenerator make_generator(const TrainConfig& cfg, SeededRng& rng);

/// W2^2 of generator samples against the target: moment formula for a
/// Gaussian target, exact assignment for mixtures.
double evaluate_w22(const MlpGenerator& g, const TargetSpec& target, std::size_t samples,
                    SeededRng& rng);

RunHistory run_poly_wgan(const TrainConfig& cfg, const TargetSpec& target);
RunHistory run_poly_lsgan(const TrainConfig& cfg, const TargetSpec& target);
RunHistory run_gmmn(const TrainConfig& cfg, const TargetSpec& target);
/// Dispatches on cfg.algorithm.
RunHistory run_experiment(const TrainConfig& cfg, const TargetSpec& target);

/// One run per m with the shared seed; a failing m is recorded, not thrown.
std::vector<RunHistory> sweep_m(const TrainConfig& cfg, const TargetSpec& target,
                                const std::vector<int>& m_list);
/// "m,iteration,w22,wall_seconds".
std::string sweep_csv(const std::vector<RunHistory>& runs);

/// history.csv, samples_final.csv, run.json and generator.json under outdir.
void write_run_outputs(const RunHistory& run, const std::filesystem::path& outdir);

std::string matrix_csv(const DenseMatrix& m);

}  // namespace polygan

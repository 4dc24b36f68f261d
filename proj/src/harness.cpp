#include "polygan/harness.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>

namespace polygan {

using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

DenseMatrix matrix_from_json(const json& j) {
  return DenseMatrix::from_rows(j.get<std::vector<std::vector<double>>>());
}

json matrix_to_json(const DenseMatrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i)
    rows.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
  return rows;
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, const char* where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) {
      throw Error(ErrorKind::ConfigError,
                  std::string("unknown key '") + it.key() + "' in " + where);
    }
  }
}

DenseMatrix vstack(const DenseMatrix& a, const DenseMatrix& b) {
  DenseMatrix out(a.rows() + b.rows(), a.cols());
  std::copy(a.data().begin(), a.data().end(), out.data().begin());
  std::copy(b.data().begin(), b.data().end(),
            out.data().begin() + static_cast<std::ptrdiff_t>(a.data().size()));
  return out;
}

// Derived streams; keeping evaluation on its own stream means the metric
// cadence never perturbs the training trajectory.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kTrainStream = 2;
constexpr std::uint64_t kEvalStream = 3;

}  // namespace

// ---------------------------------------------------------------------------
// Targets

TargetSpec TargetSpec::gaussian(Vector mean, DenseMatrix cov) {
  TargetSpec t;
  t.kind = Kind::Gaussian;
  t.mean = std::move(mean);
  t.cov = std::move(cov);
  t.validate();
  return t;
}

TargetSpec TargetSpec::gmm_circle(std::size_t components, double radius, double sigma) {
  TargetSpec t;
  t.kind = Kind::GmmCircle;
  t.components = components;
  t.radius = radius;
  t.sigma = sigma;
  t.validate();
  return t;
}

TargetSpec TargetSpec::gmm_custom(std::vector<GmmComponent> mixture) {
  TargetSpec t;
  t.kind = Kind::GmmCustom;
  t.mixture = std::move(mixture);
  t.validate();
  return t;
}

TargetSpec TargetSpec::preset(std::string_view name) {
  if (name == "wgan_gaussian") {
    return gaussian({3.5, 3.5}, scale(DenseMatrix::identity(2), 1.25));
  }
  if (name == "lsgan_gaussian") return gaussian({5.0, 5.0}, scale(DenseMatrix::identity(2), 1.5));
  if (name == "gmm8") return gmm_circle();
  throw Error(ErrorKind::ConfigError, "unknown target preset '" + std::string(name) + "'");
}

std::size_t TargetSpec::dim() const {
  switch (kind) {
    case Kind::Gaussian: return mean.size();
    case Kind::GmmCircle: return 2;
    case Kind::GmmCustom: return mixture.empty() ? 0 : mixture.front().mean.size();
  }
  return 0;
}

DenseMatrix TargetSpec::modes() const {
  switch (kind) {
    case Kind::Gaussian: return DenseMatrix(1, mean.size(), mean);
    case Kind::GmmCircle: {
      DenseMatrix out(components, 2);
      for (std::size_t j = 0; j < components; ++j) {
        const double a = 2.0 * std::numbers::pi * static_cast<double>(j) /
                         static_cast<double>(components);
        out(j, 0) = radius * std::cos(a);
        out(j, 1) = radius * std::sin(a);
      }
      return out;
    }
    case Kind::GmmCustom: {
      DenseMatrix out(mixture.size(), dim());
      for (std::size_t j = 0; j < mixture.size(); ++j)
        std::copy(mixture[j].mean.begin(), mixture[j].mean.end(), out.row(j).begin());
      return out;
    }
  }
  return {};
}

void TargetSpec::validate() const {
  auto check_cov = [](const Vector& mu, const DenseMatrix& cov) {
    if (mu.empty()) throw Error(ErrorKind::ConfigError, "target mean is empty");
    if (cov.rows() != mu.size() || cov.cols() != mu.size()) {
      throw Error(ErrorKind::ConfigError, "target covariance shape does not match mean");
    }
    try {
      SpdMatrix check(cov);
    } catch (const Error& e) {
      throw Error(ErrorKind::ConfigError, std::string("target covariance: ") + e.what());
    }
  };
  switch (kind) {
    case Kind::Gaussian: check_cov(mean, cov); break;
    case Kind::GmmCircle:
      if (components == 0 || !(radius > 0.0) || !(sigma >= 0.0)) {
        throw Error(ErrorKind::ConfigError, "gmm_circle needs components > 0, radius > 0");
      }
      break;
    case Kind::GmmCustom: {
      if (mixture.empty()) throw Error(ErrorKind::ConfigError, "mixture has no components");
      double total = 0.0;
      for (const auto& c : mixture) {
        if (!(c.weight >= 0.0)) throw Error(ErrorKind::ConfigError, "negative mixture weight");
        if (c.mean.size() != mixture.front().mean.size()) {
          throw Error(ErrorKind::ConfigError, "mixture components differ in dimension");
        }
        check_cov(c.mean, c.cov);
        total += c.weight;
      }
      if (std::abs(total - 1.0) > kWeightSumTolerance) {
        throw Error(ErrorKind::ConfigError, "mixture weights sum to " + fmt(total));
      }
      break;
    }
  }
}

TargetSampler::TargetSampler(const TargetSpec& spec) : dim_(spec.dim()) {
  spec.validate();
  switch (spec.kind) {
    case TargetSpec::Kind::Gaussian:
      cumulative_ = {1.0};
      parts_.emplace_back(spec.mean, SpdMatrix(spec.cov));
      break;
    case TargetSpec::Kind::GmmCircle: {
      const DenseMatrix modes = spec.modes();
      const SpdMatrix cov = SpdMatrix::scaled_identity(2, spec.sigma * spec.sigma);
      for (std::size_t j = 0; j < modes.rows(); ++j) {
        cumulative_.push_back(static_cast<double>(j + 1) / static_cast<double>(modes.rows()));
        parts_.emplace_back(Vector(modes.row(j).begin(), modes.row(j).end()), cov);
      }
      break;
    }
    case TargetSpec::Kind::GmmCustom: {
      double acc = 0.0;
      for (const auto& c : spec.mixture) {
        acc += c.weight;
        cumulative_.push_back(acc);
        parts_.emplace_back(c.mean, SpdMatrix(c.cov));
      }
      cumulative_.back() = 1.0;
      break;
    }
  }
}

DenseMatrix TargetSampler::sample(SeededRng& rng, std::size_t count) const {
  DenseMatrix out(count, dim_);
  for (std::size_t i = 0; i < count; ++i) {
    std::size_t j = 0;
    if (parts_.size() > 1) {
      const double u = rng.uniform();
      j = static_cast<std::size_t>(
          std::upper_bound(cumulative_.begin(), cumulative_.end(), u) - cumulative_.begin());
      j = std::min(j, parts_.size() - 1);
    }
    parts_[j].sample_into(rng, out.row(i));
  }
  return out;
}

DenseMatrix sample_target(const TargetSpec& spec, SeededRng& rng, std::size_t count) {
  return TargetSampler(spec).sample(rng, count);
}

// ---------------------------------------------------------------------------
// Configuration

std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::PolyLSGAN: return "PolyLSGAN";
    case Algorithm::PolyWGAN: return "PolyWGAN";
    case Algorithm::GmmnRbfg: return "GMMN-RBFG";
    case Algorithm::GmmnImq: return "GMMN-IMQ";
  }
  return "?";
}

Algorithm algorithm_from_string(std::string_view s) {
  if (s == "PolyLSGAN") return Algorithm::PolyLSGAN;
  if (s == "PolyWGAN") return Algorithm::PolyWGAN;
  if (s == "GMMN-RBFG") return Algorithm::GmmnRbfg;
  if (s == "GMMN-IMQ") return Algorithm::GmmnImq;
  throw Error(ErrorKind::ConfigError, "unknown algorithm '" + std::string(s) + "'");
}

std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Completed: return "completed";
    case RunStatus::Diverged: return "diverged";
    case RunStatus::NumericalFailure: return "numerical_failure";
    case RunStatus::ConfigError: return "config_error";
  }
  return "?";
}

int TrainConfig::resolved_m() const {
  if (m) return *m;
  const int ni = static_cast<int>(n);
  if (algorithm == Algorithm::PolyLSGAN) return ni / 2 + 1;  // smallest m with 2m > n
  return (ni + 1) / 2;
}

std::size_t TrainConfig::resolved_eval_samples(const TargetSpec& target) const {
  if (eval_samples > 0) return eval_samples;
  return target.is_gaussian() ? 10000 : 1000;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::ConfigError, msg); };
  if (n == 0) fail("n must be positive");
  if (rbf_centers == 0) fail("rbf_centers must be positive");
  if (batch_size == 0) fail("batch_size must be positive");
  if (metric_cadence == 0) fail("metric_cadence must be positive");
  if (!(generator_lr > 0.0)) fail("generator_lr must be positive");
  const int mm = resolved_m();
  if (mm < 1) fail("m must be >= 1");
  if (mm > kMaxMultinomialOrder) fail("m must be <= 20");
  if (algorithm == Algorithm::PolyLSGAN && 2 * mm - static_cast<int>(n) <= 0) {
    fail("PolyLSGAN needs 2m - n > 0 (m=" + std::to_string(mm) + ", n=" + std::to_string(n) + ")");
  }
  if (algorithm == Algorithm::PolyLSGAN) {
    if (!(lambda_d >= 0.0)) fail("lambda_d must be >= 0");
    try {
      labels.validate();
    } catch (const Error& e) {
      fail(e.what());
    }
  } else if (!(lambda_d > 0.0)) {
    fail("lambda_d must be positive");
  }
  if (lambda_mode == LambdaMode::Bound && !(K > 0.0)) fail("K must be positive in bound mode");
  if (!(mmd.param > 0.0)) fail("mmd kernel parameter must be positive");
  if (generator.noise_dim == 0) fail("generator noise_dim must be positive");
  if (generator.kind != "mlp" && generator.kind != "affine") {
    fail("generator kind must be 'mlp' or 'affine'");
  }
  if (generator.init != "he_uniform" && generator.init != "identity") {
    fail("generator init must be 'he_uniform' or 'identity'");
  }
  if (generator.init == "identity" && generator.kind != "affine") {
    fail("identity init is only defined for the affine generator");
  }
  for (std::size_t h : generator.hidden)
    if (h == 0) fail("hidden widths must be positive");
}

namespace {

TargetSpec target_from_json(const json& j) {
  if (j.contains("preset")) {
    reject_unknown(j, {"preset"}, "target");
    return TargetSpec::preset(j.at("preset").get<std::string>());
  }
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "gaussian") {
    reject_unknown(j, {"kind", "mean", "cov"}, "target");
    return TargetSpec::gaussian(j.at("mean").get<Vector>(), matrix_from_json(j.at("cov")));
  }
  if (kind == "gmm_circle") {
    reject_unknown(j, {"kind", "components", "radius", "sigma"}, "target");
    return TargetSpec::gmm_circle(j.value("components", std::size_t{8}), j.value("radius", 1.0),
                                  j.value("sigma", 0.02));
  }
  if (kind == "gmm_custom") {
    reject_unknown(j, {"kind", "components"}, "target");
    std::vector<GmmComponent> mix;
    for (const auto& c : j.at("components")) {
      reject_unknown(c, {"weight", "mean", "cov"}, "mixture component");
      mix.push_back({c.at("weight").get<double>(), c.at("mean").get<Vector>(),
                     matrix_from_json(c.at("cov"))});
    }
    return TargetSpec::gmm_custom(std::move(mix));
  }
  throw Error(ErrorKind::ConfigError, "unknown target kind '" + kind + "'");
}

json target_to_json(const TargetSpec& t) {
  switch (t.kind) {
    case TargetSpec::Kind::Gaussian:
      return {{"kind", "gaussian"}, {"mean", t.mean}, {"cov", matrix_to_json(t.cov)}};
    case TargetSpec::Kind::GmmCircle:
      return {{"kind", "gmm_circle"},
              {"components", t.components},
              {"radius", t.radius},
              {"sigma", t.sigma}};
    case TargetSpec::Kind::GmmCustom: {
      json comps = json::array();
      for (const auto& c : t.mixture)
        comps.push_back({{"weight", c.weight}, {"mean", c.mean}, {"cov", matrix_to_json(c.cov)}});
      return {{"kind", "gmm_custom"}, {"components", comps}};
    }
  }
  return {};
}

json config_to_json(const TrainConfig& c) {
  json j;
  j["algorithm"] = std::string(to_string(c.algorithm));
  j["n"] = c.n;
  j["m"] = c.resolved_m();
  j["rbf_centers"] = c.rbf_centers;
  j["batch_size"] = c.batch_size;
  j["generator_lr"] = c.generator_lr;
  j["iterations"] = c.iterations;
  j["metric_cadence"] = c.metric_cadence;
  j["lambda_mode"] = c.lambda_mode == LambdaMode::Bound ? "bound" : "fixed";
  j["lambda_d"] = c.lambda_d;
  j["K"] = c.K;
  j["seed"] = c.seed;
  j["labels"] = {{"a", c.labels.a}, {"b", c.labels.b}, {"c", c.labels.c}};
  j["c_k"] = c.c_k;
  j["mmd"] = {{"kernel", c.mmd.family == MmdFamily::Rbfg ? "rbfg" : "imq"},
              {"param", c.mmd.param}};
  j["generator"] = {{"kind", c.generator.kind},
                    {"noise_dim", c.generator.noise_dim},
                    {"hidden", c.generator.hidden},
                    {"activation", std::string(to_string(c.generator.activation))},
                    {"init", c.generator.init},
                    {"standardize", c.generator.standardize}};
  j["eval_samples"] = c.eval_samples;
  j["timing"] = c.timing;
  j["outdir"] = c.outdir;
  return j;
}

TrainConfig config_from_json(const json& j) {
  reject_unknown(j,
                 {"algorithm", "n", "m", "rbf_centers", "batch_size", "generator_lr",
                  "iterations", "metric_cadence", "lambda_mode", "lambda_d", "K", "seed",
                  "labels", "c_k", "mmd", "generator", "eval_samples", "timing", "outdir",
                  "target"},
                 "config");
  TrainConfig c;
  if (j.contains("algorithm")) c.algorithm = algorithm_from_string(j["algorithm"].get<std::string>());
  c.n = j.value("n", c.n);
  if (j.contains("m") && !j["m"].is_null()) c.m = j["m"].get<int>();
  c.rbf_centers = j.value("rbf_centers", c.rbf_centers);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.generator_lr = j.value("generator_lr", c.generator_lr);
  c.iterations = j.value("iterations", c.iterations);
  c.metric_cadence = j.value("metric_cadence", c.metric_cadence);
  if (j.contains("lambda_mode")) {
    const auto mode = j["lambda_mode"].get<std::string>();
    if (mode == "fixed") c.lambda_mode = LambdaMode::Fixed;
    else if (mode == "bound") c.lambda_mode = LambdaMode::Bound;
    else throw Error(ErrorKind::ConfigError, "lambda_mode must be 'fixed' or 'bound'");
  }
  c.lambda_d = j.value("lambda_d", c.lambda_d);
  c.K = j.value("K", c.K);
  c.seed = j.value("seed", c.seed);
  if (j.contains("labels")) {
    const auto& l = j["labels"];
    reject_unknown(l, {"a", "b", "c"}, "labels");
    c.labels.a = l.value("a", c.labels.a);
    c.labels.b = l.value("b", c.labels.b);
    c.labels.c = l.value("c", c.labels.b);
  }
  c.c_k = j.value("c_k", c.c_k);
  if (j.contains("mmd")) {
    const auto& k = j["mmd"];
    reject_unknown(k, {"kernel", "param"}, "mmd");
    if (k.contains("kernel")) c.mmd.family = mmd_family_from_string(k["kernel"].get<std::string>());
    c.mmd.param = k.value("param", c.mmd.param);
  }
  if (j.contains("generator")) {
    const auto& g = j["generator"];
    reject_unknown(g, {"kind", "noise_dim", "hidden", "activation", "init", "standardize"},
                   "generator");
    c.generator.kind = g.value("kind", c.generator.kind);
    c.generator.noise_dim = g.value("noise_dim", c.generator.noise_dim);
    if (g.contains("hidden")) c.generator.hidden = g["hidden"].get<std::vector<std::size_t>>();
    if (g.contains("activation")) {
      c.generator.activation = activation_from_string(g["activation"].get<std::string>());
    }
    c.generator.init = g.value("init", c.generator.init);
    c.generator.standardize = g.value("standardize", c.generator.standardize);
  }
  c.eval_samples = j.value("eval_samples", c.eval_samples);
  c.timing = j.value("timing", c.timing);
  c.outdir = j.value("outdir", c.outdir);
  // GMMN algorithms pin the kernel family.
  if (c.algorithm == Algorithm::GmmnRbfg) c.mmd.family = MmdFamily::Rbfg;
  if (c.algorithm == Algorithm::GmmnImq) c.mmd.family = MmdFamily::Imq;
  return c;
}

}  // namespace

ExperimentConfig parse_experiment(std::string_view json_text) {
  try {
    const json j = json::parse(json_text);
    ExperimentConfig out;
    out.train = config_from_json(j);
    out.target = j.contains("target") ? target_from_json(j.at("target"))
                                      : TargetSpec::preset("wgan_gaussian");
    if (!j.contains("n")) out.train.n = out.target.dim();
    out.train.validate();
    if (out.target.dim() != out.train.n) {
      throw Error(ErrorKind::ConfigError, "config n = " + std::to_string(out.train.n) +
                                              " but target dimension is " +
                                              std::to_string(out.target.dim()));
    }
    return out;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigError, e.what());
  }
}

TargetSpec parse_target(std::string_view json_text) {
  try {
    return target_from_json(json::parse(json_text));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigError, e.what());
  }
}

std::string to_json(const TrainConfig& cfg) { return config_to_json(cfg).dump(2); }
std::string to_json(const TargetSpec& target) { return target_to_json(target).dump(2); }

// ---------------------------------------------------------------------------
// Run history

double RunHistory::initial_w22() const {
  return records.empty() ? std::numeric_limits<double>::quiet_NaN() : records.front().w22;
}

double RunHistory::final_w22() const {
  return records.empty() ? std::numeric_limits<double>::quiet_NaN() : records.back().w22;
}

double RunHistory::w22_at(std::size_t it) const {
  double v = std::numeric_limits<double>::quiet_NaN();
  for (const auto& r : records) {
    if (r.iteration > it) break;
    v = r.w22;
  }
  return v;
}

std::string RunHistory::history_csv() const {
  std::string out = "iteration,w22,wall_seconds\n";
  for (const auto& r : records)
    out += std::to_string(r.iteration) + "," + fmt(r.w22) + "," + fmt(r.wall_seconds) + "\n";
  return out;
}

std::string RunHistory::run_json() const {
  json j;
  j["config"] = config_to_json(config);
  j["config"]["m"] = m;
  j["target"] = target_to_json(target);
  j["status"] = std::string(to_string(status));
  if (!status_message.empty()) j["status_message"] = status_message;
  j["initial_w22"] = records.empty() ? json(nullptr) : json(initial_w22());
  j["final_w22"] = records.empty() ? json(nullptr) : json(final_w22());
  j["final_iteration"] = records.empty() ? 0 : records.back().iteration;
  json ev = json::array();
  for (const auto& e : events)
    ev.push_back({{"iteration", e.iteration}, {"kind", e.kind}, {"message", e.message}});
  j["events"] = ev;
  j["event_count"] = event_count;
  j["excluded_pairs"] = excluded_pairs;
  return j.dump(2);
}

std::string matrix_csv(const DenseMatrix& m) {
  std::string out;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t d = 0; d < m.cols(); ++d) {
      if (d) out += ",";
      out += fmt(m(i, d));
    }
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

MlpGenerator make_generator(const TrainConfig& cfg, SeededRng& rng) {
  const auto& spec = cfg.generator;
  std::vector<std::size_t> sizes{spec.noise_dim};
  if (spec.kind == "mlp") sizes.insert(sizes.end(), spec.hidden.begin(), spec.hidden.end());
  sizes.push_back(cfg.n);
  MlpGenerator g = (spec.init == "identity")
                       ? static_cast<MlpGenerator>(AffineGenerator::identity(spec.noise_dim, cfg.n))
                       : MlpGenerator::he_uniform(sizes, spec.activation, rng);
  if (spec.standardize) {
    g.standardize_output(sample_standard_normal(rng, kCalibrationSamples, spec.noise_dim));
  }
  return g;
}

double evaluate_w22(const MlpGenerator& g, const TargetSpec& target, std::size_t samples,
                    SeededRng& rng) {
  const DenseMatrix fake = g.predict(sample_standard_normal(rng, samples, g.input_dim()));
  if (!fake.all_finite()) return std::numeric_limits<double>::infinity();
  if (target.is_gaussian()) {
    return w22_gaussian(estimate_moments(fake), GaussianMoments{target.mean, SpdMatrix(target.cov)});
  }
  return w22_empirical(fake, sample_target(target, rng, samples));
}

namespace {

// One training update. Returns false if the update was skipped (the reason
// is already logged as an event).
using StepFn = std::function<bool(std::size_t iteration, MlpGenerator&, AdamState&, SeededRng&,
                                  RunHistory&)>;

void log_event(RunHistory& h, std::size_t it, std::string kind, std::string message) {
  ++h.event_count;
  if (h.events.size() < kMaxStoredEvents) h.events.push_back({it, std::move(kind), std::move(message)});
}

RunHistory train(const TrainConfig& cfg, const TargetSpec& target, const StepFn& step) {
  RunHistory h;
  h.config = cfg;
  h.target = target;
  try {
    cfg.validate();
    target.validate();
    if (target.dim() != cfg.n) {
      throw Error(ErrorKind::ConfigError, "target dimension does not match n");
    }
  } catch (const Error& e) {
    h.status = RunStatus::ConfigError;
    h.status_message = e.what();
    return h;
  }
  h.m = cfg.resolved_m();

  const SeededRng root(cfg.seed);
  SeededRng init_rng = root.derive(kInitStream);
  SeededRng train_rng = root.derive(kTrainStream);
  const SeededRng eval_root = root.derive(kEvalStream);
  const std::size_t eval_n = cfg.resolved_eval_samples(target);

  MlpGenerator g = make_generator(cfg, init_rng);
  AdamState adam(g.param_count(), AdamConfig{cfg.generator_lr});

  auto metric = [&](std::size_t it) {
    SeededRng r = eval_root.derive(it);
    return evaluate_w22(g, target, eval_n, r);
  };

  double elapsed = 0.0;
  std::size_t updates = 0;
  std::size_t it = 0;
  try {
    const double w0 = metric(0);
    h.records.push_back({0, w0, 0.0});
    for (it = 1; it <= cfg.iterations; ++it) {
      const auto t0 = std::chrono::steady_clock::now();
      if (step(it, g, adam, train_rng, h)) ++updates;
      const auto t1 = std::chrono::steady_clock::now();
      if (cfg.timing) elapsed += std::chrono::duration<double>(t1 - t0).count();

      if (it % cfg.metric_cadence == 0 || it == cfg.iterations) {
        const double w = metric(it);
        if (!std::isfinite(w) || w > kDivergenceFactor * w0) {
          h.status = RunStatus::Diverged;
          h.status_message = "W2 " + fmt(w) + " at iteration " + std::to_string(it) +
                             " exceeds " + fmt(kDivergenceFactor) + "x the initial value";
          break;
        }
        h.records.push_back({it, w, elapsed});
      }
    }
    if (h.status == RunStatus::Completed && cfg.iterations > 0 && updates == 0) {
      h.status = RunStatus::NumericalFailure;
      h.status_message = "no generator update succeeded";
    }
  } catch (const Error& e) {
    h.status = (e.kind() == ErrorKind::NonFiniteGradient) ? RunStatus::Diverged
                                                          : RunStatus::NumericalFailure;
    h.status_message = std::string(e.what()) + " (iteration " + std::to_string(it) + ")";
  }

  h.checkpoint = g.to_json();
  SeededRng final_rng = eval_root.derive(std::numeric_limits<std::uint64_t>::max());
  h.final_samples = g.predict(sample_standard_normal(final_rng, kFinalSampleCount, g.input_dim()));
  return h;
}

void check_loss(double loss, std::size_t it) {
  if (!std::isfinite(loss)) {
    throw Error(ErrorKind::NonFiniteGradient, "non-finite generator loss at iteration " +
                                                  std::to_string(it));
  }
}

}  // namespace

RunHistory run_poly_wgan(const TrainConfig& cfg_in, const TargetSpec& target) {
  TrainConfig cfg = cfg_in;
  cfg.algorithm = Algorithm::PolyWGAN;
  const int m = cfg.resolved_m();
  std::optional<TargetSampler> sampler;
  std::optional<PolyKernel> kernel;
  std::optional<KernelConstants> constants;
  return train(cfg, target, [&](std::size_t it, MlpGenerator& g, AdamState& adam, SeededRng& rng,
                                RunHistory& h) {
    if (!sampler) {
      sampler.emplace(target);
      kernel.emplace(m, cfg.n);
      constants = compute_constants(m, cfg.n);
    }
    const DenseMatrix z = sample_standard_normal(rng, cfg.batch_size, g.input_dim());
    const DenseMatrix zc = sample_standard_normal(rng, cfg.rbf_centers, g.input_dim());
    const DenseMatrix fake_c = g.predict(zc);
    const DenseMatrix real_c = sampler->sample(rng, cfg.rbf_centers);
    double lambda = cfg.lambda_d;
    if (cfg.lambda_mode == LambdaMode::Bound) {
      lambda = estimate_lambda_bound(*constants, fake_c, real_c, g.predict(z), cfg.K);
    }
    const WRbfDiscriminator d = build_w_discriminator(*kernel, fake_c, real_c, lambda);
    std::size_t skipped = 0;
    const double loss = generator_loss_and_grad(g, z, d, &skipped);
    if (skipped > 0) {
      h.excluded_pairs += skipped;
      log_event(h, it, "CoincidentCenter",
                std::to_string(skipped) + " point-center pairs within r_min left out of the loss");
    }
    check_loss(loss, it);
    adam.step(g.params(), g.grads());
    return true;
  });
}

RunHistory run_poly_lsgan(const TrainConfig& cfg_in, const TargetSpec& target) {
  TrainConfig cfg = cfg_in;
  cfg.algorithm = Algorithm::PolyLSGAN;
  const int m = cfg.resolved_m();
  std::optional<TargetSampler> sampler;
  std::optional<PolyKernel> kernel;
  Vector labels;
  return train(cfg, target, [&](std::size_t it, MlpGenerator& g, AdamState& adam, SeededRng& rng,
                                RunHistory& h) {
    if (!sampler) {
      sampler.emplace(target);
      kernel.emplace(m, cfg.n);
      labels.assign(cfg.rbf_centers, cfg.labels.a);
      labels.resize(2 * cfg.rbf_centers, cfg.labels.b);
    }
    const DenseMatrix z = sample_standard_normal(rng, cfg.batch_size, g.input_dim());
    const DenseMatrix zc = sample_standard_normal(rng, cfg.rbf_centers, g.input_dim());
    const DenseMatrix centers = vstack(g.predict(zc), sampler->sample(rng, cfg.rbf_centers));
    std::optional<LsRbfDiscriminator> d;
    try {
      d.emplace(fit_ls_discriminator(*kernel, centers, labels, cfg.lambda_d, cfg.c_k));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::RankDeficientB && e.kind() != ErrorKind::DuplicateCenters) throw;
      log_event(h, it, std::string(to_string(e.kind())), e.what());
      return false;
    }
    const double loss = ls_generator_loss_and_grad(g, z, *d, cfg.labels.c);
    check_loss(loss, it);
    adam.step(g.params(), g.grads());
    return true;
  });
}

RunHistory run_gmmn(const TrainConfig& cfg, const TargetSpec& target) {
  std::optional<TargetSampler> sampler;
  return train(cfg, target, [&](std::size_t it, MlpGenerator& g, AdamState& adam, SeededRng& rng,
                                RunHistory&) {
    if (!sampler) sampler.emplace(target);
    const DenseMatrix z = sample_standard_normal(rng, cfg.batch_size, g.input_dim());
    const DenseMatrix x = g.forward(z);
    const DenseMatrix y = sampler->sample(rng, cfg.batch_size);
    DenseMatrix grad;
    const double loss = mmd_sq_and_grad(x, y, cfg.mmd, grad);
    check_loss(loss, it);
    g.backward(grad);
    adam.step(g.params(), g.grads());
    return true;
  });
}

RunHistory run_experiment(const TrainConfig& cfg, const TargetSpec& target) {
  switch (cfg.algorithm) {
    case Algorithm::PolyLSGAN: return run_poly_lsgan(cfg, target);
    case Algorithm::PolyWGAN: return run_poly_wgan(cfg, target);
    case Algorithm::GmmnRbfg: {
      TrainConfig c = cfg;
      c.mmd.family = MmdFamily::Rbfg;
      return run_gmmn(c, target);
    }
    case Algorithm::GmmnImq: {
      TrainConfig c = cfg;
      c.mmd.family = MmdFamily::Imq;
      return run_gmmn(c, target);
    }
  }
  throw Error(ErrorKind::ConfigError, "unknown algorithm");
}

std::vector<RunHistory> sweep_m(const TrainConfig& cfg, const TargetSpec& target,
                                const std::vector<int>& m_list) {
  std::vector<RunHistory> out;
  for (int m : m_list) {
    TrainConfig c = cfg;
    c.m = m;
    out.push_back(run_experiment(c, target));
    out.back().m = m;
  }
  return out;
}

std::string sweep_csv(const std::vector<RunHistory>& runs) {
  std::string out = "m,iteration,w22,wall_seconds\n";
  for (const auto& r : runs)
    for (const auto& rec : r.records)
      out += std::to_string(r.m) + "," + std::to_string(rec.iteration) + "," + fmt(rec.w22) +
             "," + fmt(rec.wall_seconds) + "\n";
  return out;
}

void write_run_outputs(const RunHistory& run, const std::filesystem::path& outdir) {
  std::filesystem::create_directories(outdir);
  auto write = [&](const char* name, const std::string& text) {
    std::ofstream f(outdir / name, std::ios::binary);
    if (!f) throw Error(ErrorKind::ConfigError, "cannot write " + (outdir / name).string());
    f << text;
  };
  write("history.csv", run.history_csv());
  write("samples_final.csv", matrix_csv(run.final_samples));
  write("run.json", run.run_json() + "\n");
  write("generator.json", run.checkpoint + "\n");
}

}  // namespace polygan

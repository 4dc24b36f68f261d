// Command-line front end: run, sweep-m, eval.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "polygan/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;
constexpr int kExitNumerical = 4;

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw polygan::Error(polygan::ErrorKind::ConfigError, "cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int exit_code(polygan::RunStatus s) {
  switch (s) {
    case polygan::RunStatus::Completed: return kExitOk;
    case polygan::RunStatus::Diverged: return kExitDiverged;
    case polygan::RunStatus::NumericalFailure: return kExitNumerical;
    case polygan::RunStatus::ConfigError: return kExitConfig;
  }
  return kExitNumerical;
}

int exit_code(const polygan::Error& e) {
  using polygan::ErrorKind;
  switch (e.kind()) {
    case ErrorKind::ConfigError:
    case ErrorKind::InvalidArgument:
    case ErrorKind::InvalidOrder:
      return kExitConfig;
    case ErrorKind::NonFiniteGradient: return kExitDiverged;
    default: return kExitNumerical;
  }
}

std::vector<int> parse_m_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw polygan::Error(polygan::ErrorKind::ConfigError, "bad m list entry '" + item + "'");
    }
  }
  if (out.empty()) throw polygan::Error(polygan::ErrorKind::ConfigError, "empty m list");
  return out;
}

void report(const polygan::RunHistory& h) {
  std::cout << to_string(h.config.algorithm) << " m=" << h.m << " status=" << to_string(h.status);
  if (!h.records.empty()) {
    std::cout << " w22[0]=" << h.initial_w22() << " w22[" << h.records.back().iteration
              << "]=" << h.final_w22();
  }
  std::cout << "\n";
  if (!h.status_message.empty()) std::cerr << h.status_message << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-form polyharmonic GAN discriminators on synthetic targets"};
  app.require_subcommand(1);

  std::string config_path;
  std::string outdir;
  auto* run = app.add_subcommand("run", "Train one configuration");
  run->add_option("--config", config_path, "Experiment JSON")->required();
  run->add_option("--outdir", outdir, "Override the configured output directory");

  std::string m_list;
  auto* sweep = app.add_subcommand("sweep-m", "Train one run per gradient order m");
  sweep->add_option("--config", config_path, "Experiment JSON")->required();
  sweep->add_option("--m", m_list, "Comma-separated orders, e.g. 1,2,4,6")->required();
  sweep->add_option("--outdir", outdir, "Override the configured output directory");

  std::string checkpoint_path;
  std::string target_path;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
  auto* eval = app.add_subcommand("eval", "W2^2 of a saved generator against a target");
  eval->add_option("--checkpoint", checkpoint_path, "generator.json")->required();
  eval->add_option("--target", target_path, "Target JSON (or an experiment config)")->required();
  eval->add_option("--samples", samples, "Evaluation sample count (0 = default)");
  eval->add_option("--seed", seed, "Evaluation seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) {
      const auto exp = polygan::parse_experiment(read_file(config_path));
      const auto h = polygan::run_experiment(exp.train, exp.target);
      polygan::write_run_outputs(h, outdir.empty() ? exp.train.outdir : outdir);
      report(h);
      return exit_code(h.status);
    }
    if (*sweep) {
      const auto exp = polygan::parse_experiment(read_file(config_path));
      const auto ms = parse_m_list(m_list);
      const std::filesystem::path base = outdir.empty() ? exp.train.outdir : outdir;
      const auto runs = polygan::sweep_m(exp.train, exp.target, ms);
      for (const auto& h : runs) {
        polygan::write_run_outputs(h, base / ("m_" + std::to_string(h.m)));
        report(h);
      }
      std::filesystem::create_directories(base);
      std::ofstream(base / "sweep.csv", std::ios::binary) << polygan::sweep_csv(runs);
      return kExitOk;
    }
    if (*eval) {
      const auto g = polygan::MlpGenerator::from_json(read_file(checkpoint_path));
      const std::string text = read_file(target_path);
      const auto parsed = nlohmann::json::parse(text, nullptr, false);
      polygan::TargetSpec target;
      if (!parsed.is_discarded() && parsed.contains("target")) {
        target = polygan::parse_experiment(text).target;
      } else {
        target = polygan::parse_target(text);
      }
      if (target.dim() != g.output_dim()) {
        throw polygan::Error(polygan::ErrorKind::ConfigError,
                             "generator output dimension does not match the target");
      }
      polygan::TrainConfig defaults;
      defaults.eval_samples = samples;
      polygan::SeededRng rng(seed);
      const double w = polygan::evaluate_w22(g, target, defaults.resolved_eval_samples(target), rng);
      std::cout << "{\"w22\": " << w << "}\n";
      return kExitOk;
    }
  } catch (const polygan::Error& e) {
    std::cerr << e.what() << "\n";
    return exit_code(e);
  }
  return kExitOk;
}

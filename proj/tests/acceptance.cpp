// Acceptance checks. Prints one PASS/FAIL line per criterion and mirrors the
// lines to acceptance_results.txt in the working directory. Exit status is the
// number of failed criteria. POLYGAN_ACCEPTANCE_ONLY="1,2,10" restricts the run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "polygan/harness.hpp"

using namespace polygan;

namespace {

// Tolerances and budgets.
constexpr int kInterpProblems = 50;
constexpr std::size_t kInterpMaxCenters = 30;
constexpr double kInterpResidualTol = 1e-8;
constexpr double kInterpSeconds = 5.0;
constexpr double kSeparation = 0.1;  // "general position": pairwise distance in [-2, 2]^n

constexpr double kCubicTol = 1e-10;

constexpr int kGradKernelCases = 100;
constexpr int kGradMlpCases = 20;
constexpr double kGradRelTol = 1e-4;
constexpr double kGradSeconds = 10.0;

constexpr std::size_t kBruteForceMaxN = 7;
constexpr double kBruteForceTol = 1e-12;  // same optimum, different summation order
constexpr std::size_t kW2SampleN = 2000;
constexpr double kW2RelTol = 0.10;

constexpr std::size_t kSeeds = 5;
constexpr std::size_t kGaussianIterations = 20000;
constexpr double kGaussianW2 = 0.1;
constexpr double kInitialW2 = 24.5279;  // 24.5 + 2 (2.25 - 2 sqrt(1.25))
constexpr double kInitialRelTol = 0.05;
constexpr double kRunSeconds = 600.0;

constexpr std::size_t kGmmIterations = 30000;
constexpr double kGmmW2 = 0.05;
constexpr double kGmmModeFraction = 0.05;
constexpr double kGmmRadius = 0.1;

constexpr std::size_t kSweepIterations = 3000;

constexpr double kFixedPointTol = 1e-12;

std::ofstream g_results;
int g_failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  char line[1024];
  std::snprintf(line, sizeof line, "%s [%d] %s: %s", pass ? "PASS" : "FAIL", id, name.c_str(),
                detail.c_str());
  std::puts(line);
  std::fflush(stdout);
  g_results << line << "\n";
  g_results.flush();
  if (!pass) ++g_failures;
}

void progress(const std::string& msg) {
  std::printf("  .. %s\n", msg.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size();
  return k % 2 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
}

// Final W2 for ranking; a run that did not complete ranks as +inf.
double score(const RunHistory& h) {
  if (h.status != RunStatus::Completed || h.records.empty()) return std::numeric_limits<double>::infinity();
  return h.final_w22();
}

std::string list(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : " ") + fmt("%.4g", x);
  return "[" + s + "]";
}

DenseMatrix separated_centers(SeededRng& rng, std::size_t N, std::size_t n) {
  DenseMatrix c(N, n);
  std::size_t got = 0;
  while (got < N) {
    for (std::size_t d = 0; d < n; ++d) c(got, d) = 4 * rng.uniform() - 2;
    bool ok = true;
    for (std::size_t j = 0; j < got && ok; ++j) {
      double s = 0;
      for (std::size_t d = 0; d < n; ++d) s += (c(got, d) - c(j, d)) * (c(got, d) - c(j, d));
      ok = s >= kSeparation * kSeparation;
    }
    got += ok;
  }
  return c;
}

// ---------------------------------------------------------------------------

void criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  SeededRng rng(101);
  double max_resid = 0, max_btw = 0;
  for (int p = 0; p < kInterpProblems; ++p) {
    const std::size_t n = 1 + p % 2;
    const int m = (n == 1) ? 1 + (p / 2) % 3 : 2 + (p / 2) % 2;
    const PolyKernel kernel(m, n);
    const std::size_t L = PolyBasis(n, m).size();
    const std::size_t N = L + 1 + static_cast<std::size_t>(rng.uniform() * (kInterpMaxCenters - L));
    const auto centers = separated_centers(rng, N, n);
    Vector y(N);
    for (auto& v : y) v = rng.uniform() < 0.5 ? -1.0 : 1.0;
    const auto d = fit_ls_discriminator(kernel, centers, y, 0.0);
    for (std::size_t i = 0; i < N; ++i) max_resid = std::max(max_resid, std::abs(d.eval(centers.row(i)) - y[i]));
    const auto B = poly_matrix(d.basis(), centers);
    for (std::size_t l = 0; l < B.cols(); ++l) {
      double s = 0;
      for (std::size_t i = 0; i < N; ++i) s += B(i, l) * d.weights()[i];
      max_btw = std::max(max_btw, std::abs(s));
    }
  }
  const double secs = seconds_since(t0);
  report(1, "Poly-LSGAN exactness", max_resid <= kInterpResidualTol && max_btw <= kInterpResidualTol && secs < kInterpSeconds,
         std::to_string(kInterpProblems) + " problems, max label residual " + fmt("%.2e", max_resid) +
             ", max |B^T w| " + fmt("%.2e", max_btw) + " (tol 1e-8), " + fmt("%.2f", secs) + " s (< 5 s)");
}

void criterion_2() {
  DenseMatrix c(3, 1);
  c(0, 0) = -1;
  c(1, 0) = 0;
  c(2, 0) = 1;
  const auto d = fit_ls_discriminator(PolyKernel(2, 1), c, Vector{1, 0, 1}, 0.0);
  const Vector w{0.25, -0.5, 0.25}, v{-0.5, 0.0};
  double err = 0;
  for (std::size_t i = 0; i < 3; ++i) err = std::max(err, std::abs(d.weights()[i] - w[i]));
  for (std::size_t i = 0; i < 2; ++i) err = std::max(err, std::abs(d.poly_coeffs()[i] - v[i]));
  report(2, "cubic spline oracle", err <= kCubicTol,
         "max |coefficient error| " + fmt("%.2e", err) + " (tol 1e-10)");
}

void criterion_3() {
  bool ok = true;
  int checked = 0;
  for (std::size_t n = 1; n <= 6; ++n)
    for (int m = 0; m <= 6; ++m) {
      std::uint64_t sum = 0, nm = 1;
      for (const auto& a : enumerate_multi_indices(n, m)) sum += a.coefficient;
      for (int i = 0; i < m; ++i) nm *= n;
      ok = ok && sum == nm;
      ++checked;
    }
  report(3, "multinomial identity", ok, std::to_string(checked) + " (n, m) pairs with n <= 6, m <= 6, exact");
}

void criterion_4() {
  const auto t0 = std::chrono::steady_clock::now();
  SeededRng rng(404);
  double worst_kernel = 0;
  for (int c = 0; c < kGradKernelCases; ++c) {
    const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform() * 6);
    const int m = 1 + static_cast<int>(rng.uniform() * 4);
    const PolyKernel k(m, n);
    Vector ctr(n), dir(n);
    double norm = 0;
    for (std::size_t i = 0; i < n; ++i) {
      ctr[i] = rng.normal();
      dir[i] = rng.normal();
      norm += dir[i] * dir[i];
    }
    norm = std::sqrt(norm);
    const double r = 0.1 + rng.uniform() * 9.9;
    Vector x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = ctr[i] + r * dir[i] / norm;
    const auto g = kernel_grad(k, x, ctr);
    auto psi = [&](const Vector& p) {
      double s = 0;
      for (std::size_t j = 0; j < n; ++j) s += (p[j] - ctr[j]) * (p[j] - ctr[j]);
      return k.eval(std::sqrt(s));
    };
    const double h = 1e-5 * r;
    double gnorm = 0, enorm = 0;
    for (std::size_t i = 0; i < n; ++i) {
      Vector xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      const double fd = (psi(xp) - psi(xm)) / (2 * h);
      enorm = std::max(enorm, std::abs(fd - g[i]));
      gnorm = std::max(gnorm, std::abs(g[i]));
    }
    worst_kernel = std::max(worst_kernel, enorm / gnorm);
  }

  double worst_mlp = 0;
  for (int c = 0; c < kGradMlpCases; ++c) {
    const Activation act = c % 2 ? Activation::LeakyRelu : Activation::Relu;
    const std::vector<std::size_t> sizes = c < 4 ? std::vector<std::size_t>{100, 64, 32, 16, 2}
                                                 : std::vector<std::size_t>{5, 8, 6, 1 + std::size_t(c % 3)};
    auto g = MlpGenerator::he_uniform(sizes, act, rng);
    for (auto& p : g.params()) p += 0.01 * rng.normal();
    const auto z = sample_standard_normal(rng, 4, g.input_dim());
    const auto u = sample_standard_normal(rng, 4, g.output_dim());
    g.forward(z);
    g.backward(u);
    const std::vector<double> analytic(g.grads().begin(), g.grads().end());
    auto pair = [&] {
      const auto out = g.predict(z);
      return std::inner_product(out.data().begin(), out.data().end(), u.data().begin(), 0.0);
    };
    auto p = g.params();
    double enorm = 0, gnorm = 0;
    for (std::size_t i = 0; i < p.size(); i += 1 + p.size() / 200) {
      const double keep = p[i];
      p[i] = keep + 1e-6;
      const double fp = pair();
      p[i] = keep - 1e-6;
      const double fm = pair();
      p[i] = keep;
      enorm = std::max(enorm, std::abs((fp - fm) / 2e-6 - analytic[i]));
      gnorm = std::max(gnorm, std::abs(analytic[i]));
    }
    worst_mlp = std::max(worst_mlp, enorm / gnorm);
  }
  const double secs = seconds_since(t0);
  report(4, "gradient fidelity", worst_kernel <= kGradRelTol && worst_mlp <= kGradRelTol && secs < kGradSeconds,
         "kernel_grad worst rel err " + fmt("%.2e", worst_kernel) + " over 100 cases, MLP backward " +
             fmt("%.2e", worst_mlp) + " over 20 cases (tol 1e-4), " + fmt("%.2f", secs) + " s (< 10 s)");
}

double brute_force_w22(const DenseMatrix& x, const DenseMatrix& y) {
  std::vector<std::size_t> perm(x.rows());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0;
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t d = 0; d < x.cols(); ++d) s += std::pow(x(i, d) - y(perm[i], d), 2);
    best = std::min(best, s / static_cast<double>(x.rows()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

void criterion_5() {
  SeededRng rng(505);
  double worst_brute = 0;
  for (std::size_t N = 1; N <= kBruteForceMaxN; ++N)
    for (int t = 0; t < 10; ++t) {
      const std::size_t n = 1 + t % 4;
      const auto x = sample_standard_normal(rng, N, n);
      auto y = sample_standard_normal(rng, N, n);
      worst_brute = std::max(worst_brute, std::abs(w22_empirical(x, y) - brute_force_w22(x, y)));
    }

  double worst_rel = 0;
  std::string per_dim;
  for (std::size_t n = 1; n <= 4; ++n) {
    // random pair: means N(0, I), covariances A A^T / n + 0.25 I
    auto random_gaussian = [&] {
      Vector mu(n);
      for (auto& v : mu) v = rng.normal();
      const auto a = sample_standard_normal(rng, n, n);
      auto cov = scale(matmul(a, a.transpose()), 1.0 / n);
      for (std::size_t i = 0; i < n; ++i) cov(i, i) += 0.25;
      return GaussianMoments{mu, SpdMatrix(cov)};
    };
    const auto p = random_gaussian();
    const auto q = random_gaussian();
    const double exact = w22_gaussian(p, q);
    double avg = 0;
    for (std::size_t s = 0; s < kSeeds; ++s) {
      const auto x = sample_gaussian(rng, p.mean, p.cov, kW2SampleN);
      const auto y = sample_gaussian(rng, q.mean, q.cov, kW2SampleN);
      avg += w22_empirical(x, y) / kSeeds;
    }
    const double rel = std::abs(avg - exact) / exact;
    worst_rel = std::max(worst_rel, rel);
    per_dim += (per_dim.empty() ? "" : ", ") + ("n=" + std::to_string(n) + " " + fmt("%.3f", avg) + " vs " + fmt("%.3f", exact));
  }
  report(5, "W2 oracle agreement", worst_brute <= kBruteForceTol && worst_rel <= kW2RelTol,
         "brute force N <= 7 max diff " + fmt("%.1e", worst_brute) + "; N=2000 5-seed mean vs closed form (" +
             per_dim + "), worst rel " + fmt("%.3f", worst_rel) + " (tol 0.10)");
}

TrainConfig gaussian_config(Algorithm a, std::uint64_t seed, std::size_t iterations, std::size_t cadence) {
  TrainConfig c;
  c.algorithm = a;
  c.seed = seed;
  c.iterations = iterations;
  c.metric_cadence = cadence;
  return c;
}

std::vector<RunHistory> g_poly_gaussian;  // shared by criteria 6 and 9

void criterion_6() {
  const auto target = TargetSpec::preset("wgan_gaussian");
  std::vector<double> finals, initials, secs;
  for (std::size_t s = 1; s <= kSeeds; ++s) {
    const auto t0 = std::chrono::steady_clock::now();
    auto h = run_poly_wgan(gaussian_config(Algorithm::PolyWGAN, s, kGaussianIterations, 1000), target);
    secs.push_back(seconds_since(t0));
    finals.push_back(score(h));
    initials.push_back(h.records.empty() ? NAN : h.records.front().w22);
    progress("Poly-WGAN 2-D Gaussian seed " + std::to_string(s) + ": " + std::string(to_string(h.status)) +
             ", final W2 " + fmt("%.4g", finals.back()) + ", " + fmt("%.0f", secs.back()) + " s");
    g_poly_gaussian.push_back(std::move(h));
  }
  bool init_ok = true;
  for (double w : initials) init_ok = init_ok && std::abs(w - kInitialW2) <= kInitialRelTol * kInitialW2;
  const double med = median(finals);
  const double slowest = *std::max_element(secs.begin(), secs.end());
  report(6, "2-D Gaussian learning", init_ok && med <= kGaussianW2 && slowest <= kRunSeconds,
         "median final W2 at 20k " + fmt("%.4g", med) + " (<= 0.1), finals " + list(finals) + "; initial W2 " +
             list(initials) + " (24.53 +- 5%); slowest run " + fmt("%.0f", slowest) + " s (<= 600 s)");
}

void criterion_7() {
  const auto target = TargetSpec::preset("gmm8");
  const auto modes = target.modes();
  std::vector<double> finals, min_cov;
  for (std::size_t s = 1; s <= kSeeds; ++s) {
    TrainConfig c = gaussian_config(Algorithm::PolyWGAN, s, kGmmIterations, 3000);
    c.generator.activation = Activation::LeakyRelu;
    const auto t0 = std::chrono::steady_clock::now();
    const auto h = run_poly_wgan(c, target);
    finals.push_back(score(h));
    const auto cov = mode_coverage(h.final_samples, modes, kGmmRadius);
    min_cov.push_back(*std::min_element(cov.begin(), cov.end()));
    progress("Poly-WGAN GMM-8 seed " + std::to_string(s) + ": " + std::string(to_string(h.status)) + ", final W2 " +
             fmt("%.4g", finals.back()) + ", min mode fraction " + fmt("%.3f", min_cov.back()) + ", " +
             fmt("%.0f", seconds_since(t0)) + " s");
  }
  const double med_w2 = median(finals);
  const double med_cov = median(min_cov);
  report(7, "GMM-8 mode coverage", med_w2 < kGmmW2 && med_cov >= kGmmModeFraction,
         "median final empirical W2 at 30k " + fmt("%.4g", med_w2) + " (< 0.05), finals " + list(finals) +
             "; median smallest per-mode fraction " + fmt("%.3f", med_cov) + " (>= 0.05), per seed " + list(min_cov));
}

std::vector<double> sweep_medians(const TargetSpec& target, std::size_t n, const std::vector<int>& ms,
                                  std::string& detail) {
  std::vector<double> med;
  for (int m : ms) {
    std::vector<double> finals;
    for (std::size_t s = 1; s <= kSeeds; ++s) {
      TrainConfig c = gaussian_config(Algorithm::PolyWGAN, s, kSweepIterations, 500);
      c.n = n;
      const auto runs = sweep_m(c, target, {m});
      finals.push_back(score(runs.front()));
    }
    med.push_back(median(finals));
    detail += " m=" + std::to_string(m) + " " + fmt("%.4g", med.back()) + " " + list(finals) + ";";
    progress("sweep n=" + std::to_string(n) + " m=" + std::to_string(m) + " median " + fmt("%.4g", med.back()));
  }
  return med;
}

void criterion_8() {
  std::string d2 = "n=2:", d6 = "n=6:";
  const auto m2 = sweep_medians(TargetSpec::preset("wgan_gaussian"), 2, {1, 4, 6}, d2);
  const auto t6 = TargetSpec::gaussian(Vector(6, 3.5), scale(DenseMatrix::identity(6), 1.25));
  const auto m6 = sweep_medians(t6, 6, {1, 3, 5}, d6);
  const bool ok2 = m2[0] <= m2[1] && m2[0] <= m2[2];
  const bool ok6 = m6[1] <= m6[0] && m6[1] <= m6[2];
  report(8, "m-sweep ordering", ok2 && ok6,
         "5-seed median final W2 at 3k iterations (non-completed runs count as inf): " + d2 + " " + d6);
}

void criterion_9() {
  const auto target = TargetSpec::preset("wgan_gaussian");
  std::vector<double> poly;
  for (const auto& h : g_poly_gaussian) poly.push_back(score(h));
  std::string detail = "Poly-WGAN median " + fmt("%.4g", median(poly)) + " " + list(poly);
  bool ok = true;
  for (auto a : {Algorithm::GmmnRbfg, Algorithm::GmmnImq}) {
    std::vector<double> finals;
    for (std::size_t s = 1; s <= kSeeds; ++s) {
      const auto h = run_experiment(gaussian_config(a, s, kGaussianIterations, 1000), target);
      finals.push_back(score(h));
      progress(std::string(to_string(a)) + " seed " + std::to_string(s) + ": final W2 " + fmt("%.4g", finals.back()));
    }
    ok = ok && median(poly) <= median(finals);
    detail += "; " + std::string(to_string(a)) + " median " + fmt("%.4g", median(finals)) + " " + list(finals);
  }
  report(9, "baseline dominance", ok, "final W2 at 20k iterations: " + detail);
}

void criterion_10() {
  SeededRng rng(1010);
  double worst = 0;
  for (int m = 1; m <= 3; ++m) {
    const auto centers = sample_standard_normal(rng, 100, 2);
    const auto d = build_w_discriminator(PolyKernel(m, 2), centers, centers, 1.0);
    const auto pts = scale(sample_standard_normal(rng, 100, 2), 3.0);
    Vector values;
    DenseMatrix grads;
    d.evaluate(pts, &values, &grads);
    worst = std::max({worst, max_abs(values), max_abs(grads.data())});
    auto g = MlpGenerator::he_uniform({100, 64, 32, 16, 2}, Activation::Relu, rng);
    const double loss = generator_loss_and_grad(g, sample_standard_normal(rng, 100, 100), d);
    worst = std::max({worst, std::abs(loss), max_abs(g.grads())});
  }
  report(10, "fixed point", worst <= kFixedPointTol,
         "max |D|, |grad_x D|, |loss|, |dloss/dtheta| over 100 points, m = 1..3: " + fmt("%.2e", worst) +
             " (tol 1e-12)");
}

void criterion_11() {
  const auto root = std::filesystem::temp_directory_path() / "polygan_acceptance_determinism";
  std::filesystem::remove_all(root);
  auto c = gaussian_config(Algorithm::PolyWGAN, 11, 300, 50);
  c.timing = false;
  const auto target = TargetSpec::preset("wgan_gaussian");
  write_run_outputs(run_experiment(c, target), root / "a");
  write_run_outputs(run_experiment(c, target), root / "b");
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
  };
  const auto a = slurp(root / "a" / "history.csv");
  const auto b = slurp(root / "b" / "history.csv");
  report(11, "determinism", !a.empty() && a == b,
         "two runs (seed 11, 300 iterations) wrote " + std::to_string(a.size()) + " and " + std::to_string(b.size()) +
             " byte history.csv files, " + (a == b ? "identical" : "different"));
  std::filesystem::remove_all(root);
}

}  // namespace

int main() {
  g_results.open("acceptance_results.txt");
  const std::vector<std::function<void()>> criteria{criterion_1, criterion_2, criterion_3, criterion_4,
                                                    criterion_5, criterion_6, criterion_7, criterion_8,
                                                    criterion_9, criterion_10, criterion_11};
  std::vector<bool> enabled(criteria.size(), true);
  if (const char* only = std::getenv("POLYGAN_ACCEPTANCE_ONLY")) {
    std::fill(enabled.begin(), enabled.end(), false);
    std::stringstream ss(only);
    std::string item;
    while (std::getline(ss, item, ','))
      if (const int id = std::atoi(item.c_str()); id >= 1 && id <= static_cast<int>(criteria.size()))
        enabled[static_cast<std::size_t>(id - 1)] = true;
  }
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!enabled[i]) continue;
    try {
      criteria[i]();
    } catch (const std::exception& e) {
      report(static_cast<int>(i + 1), "criterion", false, std::string("exception: ") + e.what());
    }
  }
  std::printf("%d of %zu criteria failed, %.0f s\n", g_failures, criteria.size(), seconds_since(t0));
  return g_failures;
}

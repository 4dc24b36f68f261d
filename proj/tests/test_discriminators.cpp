#include <gtest/gtest.h>

#include <cmath>

#include "polygan/discriminators.hpp"

using namespace polygan;

namespace {

template <class F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::ConfigError;
}

DenseMatrix column(std::initializer_list<double> v) {
  DenseMatrix m(v.size(), 1);
  std::size_t i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

LsRbfDiscriminator cubic_fit(double c_k = 1.0) {
  return fit_ls_discriminator(PolyKernel(2, 1), column({-1, 0, 1}), Vector{1, 0, 1}, 0.0, c_k);
}

// Uniform in [-2, 2]^n with pairwise separation >= 0.1; clustered centers make
// the interpolant itself ill-conditioned.
DenseMatrix separated_centers(SeededRng& rng, std::size_t N, std::size_t n) {
  DenseMatrix c(N, n);
  std::size_t got = 0;
  while (got < N) {
    for (std::size_t d = 0; d < n; ++d) c(got, d) = 4 * rng.uniform() - 2;
    bool ok = true;
    for (std::size_t j = 0; j < got && ok; ++j) {
      double s = 0;
      for (std::size_t d = 0; d < n; ++d) s += (c(got, d) - c(j, d)) * (c(got, d) - c(j, d));
      ok = s >= 0.01;
    }
    got += ok;
  }
  return c;
}

}  // namespace

TEST(LsFit, CubicSplineOracle) {
  const auto d = cubic_fit();
  const Vector w{0.25, -0.5, 0.25}, v{-0.5, 0.0};
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(d.weights()[i], w[i], 1e-10);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(d.poly_coeffs()[i], v[i], 1e-10);
  EXPECT_NEAR(d.eval(Vector{0.0}), 0.0, 1e-12);
  EXPECT_NEAR(d.eval(Vector{1.0}), 1.0, 1e-12);
  EXPECT_NEAR(d.eval(Vector{-1.0}), 1.0, 1e-12);
}

TEST(LsFit, CubicSplineAgainstDirectSolve) {
  // the 5x5 KKT system assembled by hand and solved independently
  const auto k = DenseMatrix::from_rows({{0, 1, 8, 1, -1},
                                         {1, 0, 1, 1, 0},
                                         {8, 1, 0, 1, 1},
                                         {1, 1, 1, 0, 0},
                                         {-1, 0, 1, 0, 0}});
  const auto sol = lu_solve(k, Vector{1, 0, 1, 0, 0});
  const auto d = cubic_fit();
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(d.weights()[i], sol[i], 1e-12);
  for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(d.poly_coeffs()[i], sol[3 + i], 1e-12);
}

TEST(LsFit, ConstantLabels) {
  SeededRng rng(3);
  const auto centers = sample_standard_normal(rng, 12, 2);
  const auto d = fit_ls_discriminator(PolyKernel(2, 2), centers, Vector(12, 0.7), 0.0);
  for (double w : d.weights()) EXPECT_NEAR(w, 0.0, 1e-10);
  EXPECT_NEAR(d.poly_coeffs()[0], 0.7, 1e-10);
  for (std::size_t i = 1; i < d.poly_coeffs().size(); ++i) EXPECT_NEAR(d.poly_coeffs()[i], 0.0, 1e-10);
  EXPECT_NEAR(d.eval(Vector{5.0, -3.0}), 0.7, 1e-9);
}

TEST(LsFit, InterpolatesRandomProblems) {
  SeededRng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 1 + trial % 2;
    const int m = (n == 1) ? 1 + trial % 3 : 2 + trial % 2;
    const std::size_t N = 10 + static_cast<std::size_t>(trial);
    const auto centers = separated_centers(rng, N, n);
    Vector y(N);
    for (auto& v : y) v = rng.uniform() < 0.5 ? -1.0 : 1.0;
    const auto d = fit_ls_discriminator(PolyKernel(m, n), centers, y, 0.0);
    for (std::size_t i = 0; i < N; ++i) EXPECT_NEAR(d.eval(centers.row(i)), y[i], 1e-8);
    const auto b = poly_matrix(d.basis(), centers);
    for (std::size_t l = 0; l < b.cols(); ++l) {
      double s = 0;
      for (std::size_t i = 0; i < N; ++i) s += b(i, l) * d.weights()[i];
      EXPECT_NEAR(s, 0.0, 1e-8);
    }
  }
}

TEST(LsFit, Errors) {
  // collinear centers in the plane cannot determine a linear polynomial
  const auto line = DenseMatrix::from_rows({{0, 0}, {1, 1}, {2, 2}});
  EXPECT_EQ(kind_of([&] { fit_ls_discriminator(PolyKernel(2, 2), line, Vector{1, -1, 1}, 0.0); }),
            ErrorKind::RankDeficientB);
  // fewer centers than polynomial terms
  EXPECT_EQ(kind_of([] {
              fit_ls_discriminator(PolyKernel(3, 2), DenseMatrix::from_rows({{0, 0}, {1, 0}}),
                                   Vector{1, -1}, 0.0);
            }),
            ErrorKind::RankDeficientB);
  EXPECT_EQ(kind_of([] { fit_ls_discriminator(PolyKernel(2, 1), column({0, 1, 1}), Vector{1, 2, 3}, 0.0); }),
            ErrorKind::DuplicateCenters);
  EXPECT_EQ(kind_of([] { fit_ls_discriminator(PolyKernel(2, 2), column({0, 1}), Vector{1, 2}, 0.0); }),
            ErrorKind::ShapeMismatch);
  EXPECT_EQ(kind_of([] {
              fit_ls_discriminator(PolyKernel(1, 2), DenseMatrix::from_rows({{0, 0}, {1, 0}, {0, 1}}),
                                   Vector{1, 2, 3}, 0.0);
            }),
            ErrorKind::InvalidOrder);
}

TEST(LsFit, SmoothingShrinksResiduals) {
  SeededRng rng(5);
  const auto centers = sample_standard_normal(rng, 20, 2);
  Vector y(20);
  for (auto& v : y) v = rng.normal();
  const PolyKernel k(2, 2);
  const auto exact = fit_ls_discriminator(k, centers, y, 0.0);
  const auto smooth = fit_ls_discriminator(k, centers, y, 1.0);
  double resid = 0;
  for (std::size_t i = 0; i < 20; ++i) resid += std::abs(smooth.eval(centers.row(i)) - y[i]);
  EXPECT_GT(resid, 1e-3);
  EXPECT_LT(ls_penalty_energy(smooth), ls_penalty_energy(exact));
}

TEST(LsEnergy, Examples) {
  const auto d = cubic_fit();
  EXPECT_NEAR(ls_penalty_energy(d), 0.5, 1e-12);

  const auto zero = LsRbfDiscriminator(PolyKernel(2, 1), column({-1, 0, 1}), Vector{1, 1, 1},
                                       Vector{0, 0, 0}, Vector{1, 0}, 0.0, 1.0);
  EXPECT_EQ(ls_penalty_energy(zero), 0.0);
  EXPECT_DOUBLE_EQ(zero.eval(Vector{3.3}), 1.0);

  const auto twice = fit_ls_discriminator(PolyKernel(2, 1), column({-1, 0, 1}), Vector{2, 0, 2}, 0.0);
  EXPECT_NEAR(ls_penalty_energy(twice), 4 * ls_penalty_energy(d), 1e-12);
}

TEST(LsEnergy, MatchesQuadrature) {
  // With psi = r^3 in 1-D, D'' = 6 sum_i w_i |x - c_i| and vanishes outside
  // the hull, so int (D'')^2 = 12 w^T A w.
  const auto d = cubic_fit(12.0);
  auto d2 = [&](double x) {
    double s = 0;
    for (std::size_t i = 0; i < 3; ++i) s += d.weights()[i] * std::abs(x - d.centers()(i, 0));
    return 6 * s;
  };
  const int steps = 20000;  // Simpson on [-1, 1], exact for the piecewise quadratic
  const double h = 2.0 / steps;
  double q = d2(-1) * d2(-1) + d2(1) * d2(1);
  for (int i = 1; i < steps; ++i) {
    const double v = d2(-1 + i * h);
    q += (i % 2 ? 4 : 2) * v * v;
  }
  q *= h / 3;
  EXPECT_NEAR(q, 6.0, 1e-9);
  EXPECT_NEAR(ls_penalty_energy(d), q, 1e-9);
}

TEST(LsDiscriminator, GradientFiniteDifferences) {
  SeededRng rng(23);
  const auto centers = sample_standard_normal(rng, 15, 2);
  Vector y(15);
  for (auto& v : y) v = rng.normal();
  const auto d = fit_ls_discriminator(PolyKernel(3, 2), centers, y, 0.1);
  for (int t = 0; t < 10; ++t) {
    const Vector x{rng.normal(), rng.normal()};
    const auto g = d.grad_x(x);
    for (std::size_t j = 0; j < 2; ++j) {
      Vector xp = x, xm = x;
      xp[j] += 1e-6;
      xm[j] -= 1e-6;
      EXPECT_NEAR(g[j], (d.eval(xp) - d.eval(xm)) / 2e-6, 1e-6 * std::max(1.0, std::abs(g[j])));
    }
  }
  Vector values;
  DenseMatrix grads;
  d.evaluate(centers, &values, &grads);
  for (std::size_t i = 0; i < 15; ++i) {
    EXPECT_NEAR(values[i], d.eval(centers.row(i)), 1e-12);
    const auto g = d.grad_x(centers.row(i));
    EXPECT_NEAR(grads(i, 0), g[0], 1e-12);
    EXPECT_NEAR(grads(i, 1), g[1], 1e-12);
  }
}

TEST(LsDiscriminator, JsonRoundTrip) {
  const auto d = cubic_fit(3.0);
  const auto e = LsRbfDiscriminator::from_json(d.to_json());
  EXPECT_EQ(e.weights(), d.weights());
  EXPECT_EQ(e.poly_coeffs(), d.poly_coeffs());
  EXPECT_EQ(e.centers(), d.centers());
  EXPECT_EQ(e.c_k(), 3.0);
  EXPECT_EQ(e.eval(Vector{0.3}), d.eval(Vector{0.3}));
  EXPECT_EQ(kind_of([] { LsRbfDiscriminator::from_json("{\"m\": 2"); }), ErrorKind::ConfigError);
}

TEST(WDiscriminator, WeightScale) {
  const auto d = build_w_discriminator(PolyKernel(1, 1), column({0}), column({1}), 1.0);
  EXPECT_DOUBLE_EQ(d.weight_scale(), 0.5);
  const auto h = build_w_discriminator(PolyKernel(1, 1), column({0}), column({1}), 2.0);
  EXPECT_DOUBLE_EQ(h.weight_scale(), 0.25);
}

TEST(WDiscriminator, OneDimensionalValues) {
  const auto d = build_w_discriminator(PolyKernel(1, 1), column({0}), column({1}), 1.0);
  const double c = d.weight_scale();
  EXPECT_DOUBLE_EQ(w_eval(d, Vector{0.5}), 0.0);
  EXPECT_DOUBLE_EQ(w_eval(d, Vector{0.0}), -c);
  EXPECT_DOUBLE_EQ(w_eval(d, Vector{1.0}), c);
  EXPECT_DOUBLE_EQ(w_grad_x(d, Vector{0.5})[0], 2 * c);
  const auto swapped = build_w_discriminator(PolyKernel(1, 1), column({1}), column({0}), 1.0);
  for (double x : {-1.0, 0.2, 0.7, 3.0}) EXPECT_DOUBLE_EQ(w_eval(swapped, Vector{x}), -w_eval(d, Vector{x}));
}

TEST(WDiscriminator, IdenticalSetsCancel) {
  SeededRng rng(31);
  const auto centers = sample_standard_normal(rng, 40, 3);
  const auto d = build_w_discriminator(PolyKernel(2, 3), centers, centers, 1.0);
  for (int t = 0; t < 50; ++t) {
    const Vector x{3 * rng.normal(), 3 * rng.normal(), 3 * rng.normal()};
    EXPECT_LE(std::abs(w_eval(d, x)), 1e-12);
    for (double g : w_grad_x(d, x)) EXPECT_LE(std::abs(g), 1e-12);
  }
}

TEST(WDiscriminator, MirrorSymmetry) {
  // fakes and reals each symmetric about the x-axis: no vertical gradient on it
  const auto fake = DenseMatrix::from_rows({{0, 1}, {0, -1}});
  const auto real = DenseMatrix::from_rows({{2, 0.5}, {2, -0.5}});
  const auto d = build_w_discriminator(PolyKernel(1, 2), fake, real, 1.0);
  for (double x : {-1.0, 0.5, 1.0, 4.0}) EXPECT_NEAR(w_grad_x(d, Vector{x, 0.0})[1], 0.0, 1e-15);
}

TEST(WDiscriminator, GradientFiniteDifferences) {
  SeededRng rng(41);
  for (int m = 1; m <= 3; ++m) {
    const PolyKernel k(m, 2);
    const auto fake = sample_standard_normal(rng, 20, 2);
    auto real = sample_standard_normal(rng, 20, 2);
    const auto d = build_w_discriminator(k, fake, real, 1.0);
    for (int t = 0; t < 5; ++t) {
      const Vector x{2 * rng.normal(), 2 * rng.normal()};
      const auto g = w_grad_x(d, x);
      for (std::size_t j = 0; j < 2; ++j) {
        Vector xp = x, xm = x;
        xp[j] += 1e-6;
        xm[j] -= 1e-6;
        EXPECT_NEAR(g[j], (w_eval(d, xp) - w_eval(d, xm)) / 2e-6, 1e-5 * std::max(1.0, std::abs(g[j])));
      }
    }
  }
}

TEST(WDiscriminator, SkippedPairs) {
  const auto fake = DenseMatrix::from_rows({{0, 0}, {1, 0}});
  const auto real = DenseMatrix::from_rows({{3, 3}, {4, 3}});
  const auto d = build_w_discriminator(PolyKernel(1, 2), fake, real, 1.0);
  EXPECT_EQ(kind_of([&] { w_eval(d, Vector{0, 0}); }), ErrorKind::SingularRadius);
  std::size_t skipped = 0;
  Vector values;
  DenseMatrix grads;
  d.evaluate(DenseMatrix::from_rows({{0, 0}, {2, 2}}), &values, &grads, &skipped);
  EXPECT_EQ(skipped, 1u);
  // the coincident fake drops out at (0, 0)
  const double expect = d.weight_scale() * (std::log(1.0) - std::log(std::sqrt(18.0)) -
                                            std::log(std::sqrt(25.0)));
  EXPECT_NEAR(values[0], expect, 1e-12);
  EXPECT_NEAR(values[1], w_eval(d, Vector{2, 2}), 1e-12);
}

TEST(WDiscriminator, Errors) {
  const PolyKernel k(1, 1);
  EXPECT_EQ(kind_of([&] { build_w_discriminator(k, DenseMatrix(0, 1), column({1}), 1.0); }),
            ErrorKind::EmptyBatch);
  EXPECT_EQ(kind_of([&] { build_w_discriminator(k, column({0, 1}), column({1}), 1.0); }),
            ErrorKind::SizeMismatch);
  EXPECT_EQ(kind_of([&] {
              build_w_discriminator(k, DenseMatrix::from_rows({{0, 1}}), DenseMatrix::from_rows({{0, 1}}), 1.0);
            }),
            ErrorKind::ShapeMismatch);
}

TEST(LambdaBound, Examples) {
  const auto c = compute_constants(1, 1);
  EXPECT_DOUBLE_EQ(estimate_lambda_bound(c, column({0}), column({2}), column({1}), 1.0), kLambdaFloor);
  SeededRng rng(2);
  const auto s = sample_standard_normal(rng, 10, 1);
  EXPECT_DOUBLE_EQ(estimate_lambda_bound(c, s, s, column({0.123, 4.0}), 1.0), kLambdaFloor);

  const auto fake = column({0.0, 0.3});
  const auto real = column({2.0, 2.5});
  const auto eval = column({1.0, -0.7, 3.1});
  const double b1 = estimate_lambda_bound(c, fake, real, eval, 1.0);
  const double b2 = estimate_lambda_bound(c, fake, real, eval, 2.0);
  EXPECT_GT(b1, kLambdaFloor);
  EXPECT_NEAR(b2, b1 / std::sqrt(2.0), 1e-14 * b1);
  EXPECT_EQ(kind_of([&] { estimate_lambda_bound(c, fake, real, eval, 0.0); }), ErrorKind::InvalidArgument);
}

TEST(LambdaBound, HandValue) {
  // n=1, m=1: |xi| eps / (M N) * sqrt(m! s_alpha) * sqrt(sum_l (1/|x-f| - 1/|x-r|)^2)
  const auto c = compute_constants(1, 1);
  const double inner = 1.0 / 1.0 - 1.0 / 2.0;  // x = 1, fake 0, real 3
  const double expect = 0.5 * c.epsilon_bound / (1.0 * 1.0) * std::sqrt(1.0 * 1.0) * std::abs(inner);
  EXPECT_NEAR(estimate_lambda_bound(c, column({0}), column({3}), column({1}), 1.0), expect, 1e-14);
}

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "levyavg/error.hpp"
#include "levyavg/model.hpp"

using namespace levyavg;

namespace {

SlowFastModel with_overrides(const nlohmann::json& j) { return load_model(j); }

}  // namespace

TEST(Benchmark, ValuesAtOrigin) {
  const auto m = builtin_benchmark();
  const double x[] = {0.0}, y[] = {0.0};
  const auto v = eval_coefficients(m, x, y);
  EXPECT_EQ(v.f[0], 0.0);
  EXPECT_EQ(v.F[0], 0.0);
}

TEST(Benchmark, FastDriftAtOne) {
  const auto m = builtin_benchmark();
  const double x[] = {1.0}, y[] = {0.0};
  EXPECT_NEAR(eval_coefficients(m, x, y).F[0], 0.76159415595576, 1e-13);
}

TEST(Benchmark, SlowJumpCoefficient) {
  const auto m = builtin_benchmark();
  const double x[] = {std::numbers::pi / 2}, y[] = {0.0};
  EXPECT_NEAR(eval_coefficients(m, x, y, 0.5).h[0], 0.05, 1e-15);
}

TEST(Benchmark, FrozenDriftIsLinear) {
  const auto m = builtin_benchmark();
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(gen), y = u(gen);
    EXPECT_NEAR(-m.space.eigenvalue(0) * y + m.coeffs.F(x, y), std::tanh(x) - 2.0 * y, 1e-14);
  }
}

TEST(Benchmark, MonotonicityIdentity) {
  const auto m = builtin_benchmark();
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 10000; ++i) {
    const double x = u(gen), y1 = u(gen), y2 = u(gen);
    const double lhs = (m.coeffs.F(x, y1) - m.coeffs.F(x, y2)) * (y1 - y2);
    EXPECT_NEAR(lhs, -(y1 - y2) * (y1 - y2), 1e-12);
  }
}

TEST(EvalCoefficients, DeterministicAndPure) {
  const auto m = builtin_benchmark();
  const double x[] = {0.7}, y[] = {-0.4};
  const auto a = eval_coefficients(m, x, y, 0.2);
  const auto b = eval_coefficients(m, x, y, 0.2);
  EXPECT_EQ(a.f, b.f);
  EXPECT_EQ(a.H, b.H);
  EXPECT_EQ(x[0], 0.7);
}

TEST(EvalCoefficients, NonFiniteRaisesCoefficientError) {
  const auto m = with_overrides({{"f", "log(x)"}});
  const double x[] = {-1.0}, y[] = {0.0};
  try {
    eval_coefficients(m, x, y);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCoefficientError);
  }
}

TEST(EvalCoefficients, SizeMismatchRejected) {
  const auto m = builtin_benchmark();
  const double x[] = {0.0, 1.0}, y[] = {0.0, 1.0};
  EXPECT_THROW(eval_coefficients(m, x, y), Error);
}

TEST(LoadModel, Builtins) {
  for (const auto& name : builtin_model_names()) {
    const auto m = load_model("builtin:" + name);
    EXPECT_EQ(m.name, name);
    EXPECT_NO_THROW(m.validate());
  }
  EXPECT_EQ(load_model("builtin:benchmark-laplacian16").dim(), 16);
  EXPECT_TRUE(load_model("builtin:benchmark-nojump").nu2.empty());
  EXPECT_FALSE(load_model("builtin:benchmark-yfree").coeffs.f_depends_on_y);
  EXPECT_THROW(load_model("builtin:nope"), Error);
}

TEST(LoadModel, ExpressionOverrides) {
  const auto m = load_model(R"({"base": "benchmark", "F": "tanh(x) - 3*y", "epsilon": 0.25, "x0": 2})");
  EXPECT_DOUBLE_EQ(m.coeffs.F(0.5, 1.0), std::tanh(0.5) - 3.0);
  EXPECT_DOUBLE_EQ(m.epsilon, 0.25);
  EXPECT_EQ(m.x0, std::vector<double>{2.0});
  EXPECT_DOUBLE_EQ(m.coeffs.f(0.1, 0.2), std::sin(0.3));
}

TEST(LoadModel, SpaceBroadcastsStates) {
  const auto m = load_model(R"({"space": {"kind": "explicit", "eigenvalues": [1, 4, 9]}, "x0": 0.5})");
  EXPECT_EQ(m.dim(), 3);
  EXPECT_EQ(m.x0, (std::vector<double>{0.5, 0.5, 0.5}));
  EXPECT_EQ(m.y0, (std::vector<double>{0.0, 0.0, 0.0}));
}

TEST(LoadModel, FromFile) {
  const auto path = std::filesystem::temp_directory_path() / "levyavg_model_test.json";
  std::ofstream(path) << R"({"name": "filed", "g": "0"})";
  const auto m = load_model(path.string());
  EXPECT_EQ(m.name, "filed");
  EXPECT_EQ(m.coeffs.g(1.0), 0.0);
  std::filesystem::remove(path);
}

TEST(LoadModel, Errors) {
  EXPECT_THROW(load_model(R"({"f": "sin(x"})"), Error);
  EXPECT_THROW(load_model(R"({"epsilon": 0})"), Error);
  EXPECT_THROW(load_model(R"({"x0": [1, 2]})"), Error);
  EXPECT_THROW(load_model("/definitely/not/here.json"), Error);
}

TEST(LoadModel, ConfigRoundTripPreservesCoefficients) {
  const auto m = builtin_benchmark();
  const auto back = load_model(m.to_config());
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    const double x = u(gen), y = u(gen), z = u(gen) / 6.0;
    EXPECT_EQ(back.coeffs.f(x, y), m.coeffs.f(x, y));
    EXPECT_EQ(back.coeffs.g(x), m.coeffs.g(x));
    EXPECT_EQ(back.coeffs.h(x, z), m.coeffs.h(x, z));
    EXPECT_EQ(back.coeffs.F(x, y), m.coeffs.F(x, y));
    EXPECT_EQ(back.coeffs.G(x, y), m.coeffs.G(x, y));
    EXPECT_EQ(back.coeffs.H(x, y, z), m.coeffs.H(x, y, z));
  }
  EXPECT_EQ(back.to_config().dump(), [&] {
    auto c = m.to_config();
    c["name"] = back.name;
    return c.dump();
  }());
}

// --- hypotheses ---------------------------------------------------------------

TEST(Hypotheses, BenchmarkPassesWithMargins) {
  const auto rep = verify_hypotheses(builtin_benchmark(), {-3.0, 3.0}, 10000, 1);
  const auto f = rep.flags();
  EXPECT_TRUE(f.h1);
  EXPECT_TRUE(f.h2);
  EXPECT_TRUE(f.h3);
  EXPECT_TRUE(f.h4);
  EXPECT_TRUE(f.f_bounded);
  EXPECT_GT(rep.kappa_hat, 0.5);
  EXPECT_GT(rep.eta_hat, 0.5);
  EXPECT_EQ(rep.non_finite_quotients, 0u);
}

TEST(Hypotheses, AntiDissipativeFastDriftFlagged) {
  const auto rep = verify_hypotheses(with_overrides({{"F", "y"}}), {-3.0, 3.0}, 10000, 1);
  EXPECT_LE(rep.beta2_hat, 0.0);
  EXPECT_FALSE(rep.flags().h1);
}

TEST(Hypotheses, UnboundedSlowDriftFlagged) {
  const auto rep = verify_hypotheses(with_overrides({{"f", "x"}}), {-10.0, 10.0}, 10000, 1);
  EXPECT_FALSE(rep.flags().f_bounded);
  EXPECT_FALSE(rep.flags().h3);
}

TEST(Hypotheses, DeclaredBoundRespected) {
  const auto bad = with_overrides({{"f", "2*sin(x+y)"}, {"constants", {{"f_bound", 1.0}}}});
  EXPECT_FALSE(verify_hypotheses(bad, {-3.0, 3.0}, 2000, 1).flags().f_bounded);
  const auto ok = with_overrides({{"f", "2*sin(x+y)"}, {"constants", {{"f_bound", 2.0}}}});
  EXPECT_TRUE(verify_hypotheses(ok, {-3.0, 3.0}, 2000, 1).flags().f_bounded);
}

TEST(Hypotheses, FlagsMonotoneInTolerance) {
  for (const auto& m : {builtin_benchmark(), with_overrides({{"F", "y"}}), with_overrides({{"f", "x"}}),
                        with_overrides({{"F", "0.9*y"}})}) {
    const auto rep = verify_hypotheses(m, {-3.0, 3.0}, 2000, 2);
    double prev_tol = 0.0;
    auto prev = rep.flags(prev_tol);
    for (double tol : {1e-3, 1e-2, 0.1, 1.0, 10.0}) {
      const auto f = rep.flags(tol);
      EXPECT_TRUE(!prev.h1 || f.h1);
      EXPECT_TRUE(!prev.h2 || f.h2);
      EXPECT_TRUE(!prev.h3 || f.h3);
      EXPECT_TRUE(!prev.h4 || f.h4);
      EXPECT_TRUE(!prev.f_bounded || f.f_bounded);
      prev = f;
    }
  }
}

TEST(Hypotheses, StableUnderDoublingSamples) {
  const auto a = verify_hypotheses(builtin_benchmark(), {-3.0, 3.0}, 10000, 5);
  const auto b = verify_hypotheses(builtin_benchmark(), {-3.0, 3.0}, 20000, 5);
  auto close = [](double u, double v) { return std::abs(u - v) <= 0.05 * std::max(std::abs(u), std::abs(v)) + 1e-12; };
  EXPECT_TRUE(close(a.beta2_hat, b.beta2_hat));
  EXPECT_TRUE(close(a.beta4_hat, b.beta4_hat));
  EXPECT_TRUE(close(a.kappa_hat, b.kappa_hat));
  EXPECT_TRUE(close(a.eta_hat, b.eta_hat));
  for (int i = 0; i < 5; ++i) EXPECT_TRUE(close(a.c_hat[i], b.c_hat[i])) << "C" << i + 1;
  EXPECT_TRUE(close(a.f_sup, b.f_sup));
}

TEST(Hypotheses, Deterministic) {
  const auto a = verify_hypotheses(builtin_benchmark(), {-3.0, 3.0}, 1000, 9);
  const auto b = verify_hypotheses(builtin_benchmark(), {-3.0, 3.0}, 1000, 9);
  EXPECT_EQ(a.to_json(), b.to_json());
}

TEST(Hypotheses, BadArgumentsRejected) {
  EXPECT_THROW(verify_hypotheses(builtin_benchmark(), {1.0, 1.0}, 100, 1), Error);
  EXPECT_THROW(verify_hypotheses(builtin_benchmark(), {-1.0, 1.0}, 1, 1), Error);
}

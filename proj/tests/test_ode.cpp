#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "acumen/ode.hpp"
#include "acumen/rng.hpp"
#include "acumen/tape.hpp"

using namespace acumen;

namespace {

const auto decay_field = [](double, std::span<const double> z, std::span<const double>,
                            std::span<double> dz) { dz[0] = -z[0]; };

}  // namespace

TEST_CASE("rk4 reproduces exp(-1)") {
  const double z0 = 1.0;
  const auto y = integrate_rk4<double>(decay_field, std::span<const double>(&z0, 1), 0.0, 1.0, 100);
  CHECK(y[0] == doctest::Approx(std::exp(-1.0)).epsilon(0).scale(1).epsilon(1e-6));
  CHECK(std::abs(y[0] - 0.3678794) < 1e-6);
}

TEST_CASE("zero field is the identity") {
  auto field = [](double, std::span<const double>, std::span<const double>,
                  std::span<double> dz) { dz[0] = 0.0; dz[1] = 0.0; };
  const std::vector<double> z0{3.5, -2.25};
  const auto y = integrate_rk4<double>(field, std::span<const double>(z0), 2.0, 7.0, 17);
  CHECK(y[0] == 3.5);
  CHECK(y[1] == -2.25);
}

TEST_CASE("harmonic oscillator closes after one period and conserves energy") {
  auto field = [](double, std::span<const double> z, std::span<const double>,
                  std::span<double> dz) {
    dz[0] = z[1];
    dz[1] = -z[0];
  };
  std::vector<double> z{1.0, 0.0};
  const int n = 400;
  const double h = 2.0 * std::numbers::pi / n;
  for (int k = 0; k < n; ++k) {
    z = integrate_rk4<double>(field, std::span<const double>(z), k * h, (k + 1) * h, 1);
    CHECK(std::abs(z[0] * z[0] + z[1] * z[1] - 1.0) < 1e-5);
  }
  CHECK(std::abs(z[0] - 1.0) < 1e-5);
  CHECK(std::abs(z[1]) < 1e-5);
}

TEST_CASE("rk4 halving-step error ratio sits near 16") {
  const double z0 = 1.0;
  const double exact = std::exp(-1.0);
  auto err = [&](int n) {
    return std::abs(
        integrate_rk4<double>(decay_field, std::span<const double>(&z0, 1), 0.0, 1.0, n)[0] -
        exact);
  };
  for (int n : {10, 20, 40}) {
    const double ratio = err(n) / err(2 * n);
    CHECK(ratio >= 12.0);
    CHECK(ratio <= 20.0);
  }
}

TEST_CASE("adaptive solver honours its tolerance") {
  const double z0 = 1.0;
  std::vector<RealizedStep> steps;
  const auto y = integrate_dopri(decay_field, std::span<const double>(&z0, 1), 0.0, 1.0, 1e-8,
                                 1e-8, nullptr, &steps);
  CHECK(std::abs(y[0] - std::exp(-1.0)) < 1e-6);
  CHECK(!steps.empty());
  // replaying the realized discretization reproduces the trajectory exactly
  const auto y2 = integrate_dopri_replay<double>(decay_field, std::span<const double>(&z0, 1),
                                                 steps);
  CHECK(y2[0] == y[0]);
}

TEST_CASE("fixed solver is bit-deterministic") {
  auto field = [](double t, std::span<const double> z, std::span<const double>,
                  std::span<double> dz) { dz[0] = std::sin(t) - 0.3 * z[0]; };
  const double z0 = 0.25;
  const auto a = integrate_rk4<double>(field, std::span<const double>(&z0, 1), 0.0, 3.0, 57);
  const auto b = integrate_rk4<double>(field, std::span<const double>(&z0, 1), 0.0, 3.0, 57);
  CHECK(a[0] == b[0]);
}

TEST_CASE("finite-time blow-up raises integration-diverged") {
  auto field = [](double, std::span<const double> z, std::span<const double>,
                  std::span<double> dz) { dz[0] = z[0] * z[0]; };
  const double z0 = 1.0;
  CHECK_THROWS_AS(
      (void)integrate_rk4<double>(field, std::span<const double>(&z0, 1), 0.0, 2.0, 40),
      IntegrationDivergedError);
}

TEST_CASE("a field rough at every scale underflows the adaptive step") {
  // hash of the time bits: discontinuous no matter how small the step, so
  // the error estimate never shrinks and the controller runs out of steps
  auto field = [](double t, std::span<const double>, std::span<const double>,
                  std::span<double> dz) {
    dz[0] = 1e9 * (2.0 * unit_from_bits(mix64(std::bit_cast<std::uint64_t>(t))) - 1.0);
  };
  const double z0 = 0.0;
  CHECK_THROWS_AS((void)integrate_dopri(field, std::span<const double>(&z0, 1), 0.0, 1.0,
                                        1e-10, 1e-12),
                  StepUnderflowError);
}

TEST_CASE("gradient through the solve matches the analytic sensitivity") {
  // dz/dt = theta * z, z(0) = 1, loss = z(1): dL/dtheta = e^theta
  Tape tape;
  Ad theta = make_leaf(tape, 0.5);
  auto field = [&](double, std::span<const Ad> z, std::span<const double>,
                   std::span<Ad> dz) { dz[0] = theta * z[0]; };
  std::vector<Ad> z0{make_const(tape, 1.0)};
  const auto y = integrate_rk4<Ad>(field, std::span<const Ad>(z0), 0.0, 1.0, 64);
  const auto grad = tape.gradient(y[0].idx, 1);
  CHECK(std::abs(grad[0] - std::exp(0.5)) < 1e-4);
  CHECK(grad[0] == doctest::Approx(1.6487).epsilon(1e-4));

  // central finite differences as the independent oracle
  auto solve = [](double th) {
    auto f = [&](double, std::span<const double> z, std::span<const double>,
                 std::span<double> dz) { dz[0] = th * z[0]; };
    const double s = 1.0;
    return integrate_rk4<double>(f, std::span<const double>(&s, 1), 0.0, 1.0, 64)[0];
  };
  const double h = 1e-5;
  const double fd = (solve(0.5 + h) - solve(0.5 - h)) / (2.0 * h);
  CHECK(std::abs(grad[0] - fd) < 1e-4);
}

TEST_CASE("loss independent of the parameter has an exactly zero gradient") {
  Tape tape;
  Ad theta = make_leaf(tape, 0.8);
  auto field = [&](double, std::span<const Ad> z, std::span<const double>,
                   std::span<Ad> dz) { dz[0] = z[0] * (-1.0); };
  std::vector<Ad> z0{make_const(tape, 2.0)};
  const auto y = integrate_rk4<Ad>(field, std::span<const Ad>(z0), 0.0, 1.0, 16);
  const auto grad = tape.gradient(y[0].idx, 1);
  CHECK(grad[0] == 0.0);
  (void)theta;
}

TEST_CASE("taped adaptive replay differentiates the frozen step sequence") {
  auto dfield = [](double, std::span<const double> z, std::span<const double>,
                   std::span<double> dz) { dz[0] = 0.5 * z[0]; };
  const double z0 = 1.0;
  std::vector<RealizedStep> steps;
  (void)integrate_dopri(dfield, std::span<const double>(&z0, 1), 0.0, 1.0, 1e-9, 1e-9, nullptr,
                        &steps);

  Tape tape;
  Ad theta = make_leaf(tape, 0.5);
  auto field = [&](double, std::span<const Ad> z, std::span<const double>,
                   std::span<Ad> dz) { dz[0] = theta * z[0]; };
  std::vector<Ad> za{make_const(tape, 1.0)};
  const auto y = integrate_dopri_replay<Ad>(field, std::span<const Ad>(za), steps);
  const auto grad = tape.gradient(y[0].idx, 1);
  CHECK(std::abs(grad[0] - std::exp(0.5)) < 1e-6);
}

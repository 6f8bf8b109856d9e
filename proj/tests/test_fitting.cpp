#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "photocool/error.hpp"
#include "photocool/fitting.hpp"

using namespace photocool;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::io_error;
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("dataset parsing") {
  std::istringstream ok("# comment\npower_w,temperature_k\n0.001,250\n0.002,200 # trailing\n\n0.003,150\n");
  auto rows = parse_dataset(ok);
  REQUIRE(rows.size() == 3);
  CHECK(rows[1].temperature == 200.0);
  CHECK_FALSE(rows[1].sigma.has_value());
  CHECK(rows[2].line == 6);

  std::istringstream sig("power_w,temperature_k,sigma_k\n0.001,250,5\n0.002,200,4\n0.003,150,3\n");
  rows = parse_dataset(sig);
  CHECK(rows[0].sigma.value() == 5.0);

  std::istringstream bad_header("power,temp\n1,2\n");
  CHECK(kind_of([&] { parse_dataset(bad_header); }) == ErrorKind::parse_error);
  std::istringstream bad_number("power_w,temperature_k\n0.001,abc\n");
  const auto msg = message_of([&] {
    std::istringstream in("power_w,temperature_k\n0.001,abc\n");
    parse_dataset(in);
  });
  CHECK(msg.find("line 2") != std::string::npos);
  CHECK(kind_of([&] { parse_dataset(bad_number); }) == ErrorKind::parse_error);
}

TEST_CASE("dataset validation") {
  Dataset d;
  d.device = fixtures::metzger_like();
  auto rows_from = [](const char* text) {
    std::istringstream in(text);
    return parse_dataset(in);
  };
  d.rows = rows_from("power_w,temperature_k\n0.003,150\n0.001,250\n0.002,200\n");
  validate(d);
  CHECK(d.rows.size() == 3);
  CHECK(d.rows.front().power == 0.001);  // sorted

  d.rows = rows_from("power_w,temperature_k\n0.001,250\n-0.002,200\n0.003,150\n");
  CHECK(kind_of([&] { validate(d); }) == ErrorKind::validation_error);
  CHECK(message_of([&] { validate(d); }).find("line 3") != std::string::npos);

  d.rows = rows_from("power_w,temperature_k\n0.001,250\n0.002,200\n0.002,190\n");
  CHECK(message_of([&] { validate(d); }).find("duplicate abscissa") != std::string::npos);

  d.rows = rows_from("power_w,temperature_k\n0.001,250\n0.002,200\n");
  CHECK(kind_of([&] { validate(d); }) == ErrorKind::validation_error);

  d.rows = rows_from("power_w,temperature_k\n0.001,250\n0.002,0\n0.003,150\n");
  CHECK(kind_of([&] { validate(d); }) == ErrorKind::validation_error);
}

TEST_CASE("mode temperature prediction") {
  const SystemParams p = fixtures::metzger_like();
  CHECK(predict_mode_temperature(p, 0.0) == doctest::Approx(300.0).epsilon(1e-12));
  double prev = predict_mode_temperature(p, 1e-5);
  CHECK(prev < 300.0);
  for (double power = 2e-5; power < 0.025; power *= 1.5) {
    const double t = predict_mode_temperature(p, power);
    CHECK(t < prev);
    prev = t;
  }
  CHECK(predict_mode_temperature(p, 0.022) == doctest::Approx(32.0).epsilon(0.1));
}

TEST_CASE("noiseless recovery") {
  const SystemParams p = fixtures::metzger_like();
  auto data = synthesize_dataset(p, fixtures::metzger_powers(), 0.0, 1);
  FitOptions o;
  o.initial_chi = 1e-5;
  const auto r = fit(data, o);
  CHECK(r.chi == doctest::Approx(2e-5).epsilon(1e-6));
  CHECK(r.names == std::vector<std::string>{"chi"});
  CHECK(r.noise_population == doctest::Approx(occupation_budget(p).noise_population).epsilon(1e-6));
  CHECK(r.noise_population == doctest::Approx(1.4e4).epsilon(0.05));
}

TEST_CASE("round trip over the chi range") {
  SystemParams p = fixtures::metzger_like();
  for (double chi : {1e-7, 1e-6, 1e-5, 1e-4, 1e-3}) {
    p.cantilever.deformation_coefficient = chi;
    // Keep the largest gradient at the same stability margin.
    std::vector<double> powers;
    for (double w : fixtures::metzger_powers()) powers.push_back(w * 2e-5 / chi);
    auto data = synthesize_dataset(p, powers, 0.0, 1);
    FitOptions o;
    o.initial_chi = 1.5 * chi;
    const auto r = fit(data, o);
    CHECK(r.chi == doctest::Approx(chi).epsilon(1e-6));
  }
}

TEST_CASE("row order does not matter") {
  const SystemParams p = fixtures::metzger_like();
  auto data = synthesize_dataset(p, fixtures::metzger_powers(), 0.02, 5);
  const auto a = fit(data);
  std::mt19937_64 rng(3);
  std::shuffle(data.rows.begin(), data.rows.end(), rng);
  const auto b = fit(data);
  CHECK(a.chi == b.chi);
  double na = 0.0, nb = 0.0;
  for (double r : a.log_residuals) na += r * r;
  for (double r : b.log_residuals) nb += r * r;
  CHECK(na == nb);
}

TEST_CASE("noisy recovery") {
  const SystemParams p = fixtures::metzger_like();
  const auto study = recovery_study(p, fixtures::metzger_powers(), 0.02, 20, 99, 2);
  REQUIRE(study.chi_hat.size() == 20);
  CHECK(study.median_relative_error < 0.05);
  const auto again = recovery_study(p, fixtures::metzger_powers(), 0.02, 20, 99, 1);
  CHECK(again.chi_hat == study.chi_hat);
}

TEST_CASE("sigma column sets the weights") {
  const SystemParams p = fixtures::metzger_like();
  auto data = synthesize_dataset(p, fixtures::metzger_powers(), 0.02, 8);
  for (auto& row : data.rows) row.sigma = 0.02 * row.temperature;
  const auto r = fit(data);
  CHECK(r.chi2_per_dof > 0.1);
  CHECK(r.chi2_per_dof < 5.0);
  CHECK(std::sqrt(r.covariance[0][0]) / r.chi == doctest::Approx(0.02 / std::sqrt(10.0)).epsilon(0.5));
}

TEST_CASE("averaging factor identifiability") {
  SystemParams p = fixtures::metzger_like();
  auto data = synthesize_dataset(p, fixtures::metzger_powers(), 0.02, 11);
  FitOptions o;
  o.free = FitFree::chi_epsilon;
  const auto r = fit(data, o);
  REQUIRE(r.names.size() == 2);
  CHECK(r.epsilon >= 1.0);
  CHECK(r.epsilon <= 4.0);
  if (std::abs(r.correlation[0][1]) > 0.95) CHECK(r.weakly_identifiable);
  // The heating is a tiny correction here, so epsilon is not constrained.
  CHECK(std::sqrt(r.covariance[1][1]) > 3.0);
  CHECK(r.weakly_identifiable);

  // chi alone is well determined on the same data.
  const auto single = fit(data);
  CHECK_FALSE(single.weakly_identifiable);
}

TEST_CASE("underdetermined and divergent fits") {
  const SystemParams p = fixtures::metzger_like();
  auto data = synthesize_dataset(p, {0.005, 0.01, 0.015}, 0.0, 1);
  FitOptions o;
  o.free = FitFree::chi_epsilon_loss;
  CHECK(kind_of([&] { fit(data, o); }) == ErrorKind::underdetermined);

  // A guess that puts the largest power beyond the stability bound.
  FitOptions far;
  far.initial_chi = 1e-3;
  CHECK(kind_of([&] { fit(data, far); }) == ErrorKind::fit_diverged);

  FitOptions few;
  few.max_iterations = 1;
  few.initial_chi = 1e-7;
  CHECK(kind_of([&] { fit(data, few); }) == ErrorKind::fit_diverged);
}

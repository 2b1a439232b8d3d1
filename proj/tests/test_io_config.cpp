#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "mousse/errors.hpp"
#include "mousse/run_config.hpp"
#include "mousse/stream_io.hpp"

using namespace mousse;

TEST_SUITE("io_config") {
  TEST_CASE("format_double round-trips exactly") {
    std::mt19937_64 rng(71);
    std::uniform_real_distribution<double> exponent(-300.0, 300.0);
    std::normal_distribution<double> mantissa;
    bool exact = true;
    for (int i = 0; i < 20000; ++i) {
      const double v = mantissa(rng) * std::pow(10.0, exponent(rng));
      exact = exact && std::stod(format_double(v)) == v;
    }
    CHECK(exact);
    CHECK(format_double(0.1) == "0.1");
    CHECK(format_double(-2.0) == "-2");
  }

  TEST_CASE("stream rows round-trip with NaN marking missing entries") {
    Observation obs;
    obs.t = 4;
    obs.omega = {0, 2, 3};
    obs.values = Eigen::Vector3d(0.125, -1e-7, 3.0);
    std::stringstream buffer;
    write_stream_header(buffer, 5);
    write_complete_row(buffer, Eigen::VectorXd::LinSpaced(5, 0.0, 1.0));
    write_observation_row(buffer, obs, 5);
    CHECK(buffer.str() == "D=5\n0,0.25,0.5,0.75,1\n0.125,NaN,-1e-07,3,NaN\n");

    StreamReader reader(buffer);
    CHECK(reader.ambient_dim() == 5);
    const auto first = reader.next(1);
    REQUIRE(first);
    CHECK(first->is_complete(5));
    const auto second = reader.next(2);
    REQUIRE(second);
    CHECK(second->t == 2);
    CHECK(second->omega == obs.omega);
    CHECK(second->values == obs.values);
    CHECK_FALSE(reader.next(3));
  }

  TEST_CASE("the reader scales values, skips blank lines and accepts CRLF") {
    std::stringstream in("D=3\r\n\n1, 2 ,NaN\r\nNaN,NaN,NaN\n");
    StreamReader reader(in, 10.0);
    const auto row = reader.next(1);
    REQUIRE(row);
    CHECK(row->values == Eigen::Vector2d(10.0, 20.0));
    const auto empty = reader.next(2);
    REQUIRE(empty);
    CHECK(empty->omega.empty());
    CHECK(reader.line() == 4);
  }

  TEST_CASE("malformed streams report the line number") {
    auto read_all = [](const std::string& text) {
      std::stringstream in(text);
      StreamReader reader(in);
      for (std::size_t t = 1; reader.next(t); ++t) {
      }
    };
    CHECK_THROWS_AS(read_all(""), DataError);
    CHECK_THROWS_AS(read_all("dim=3\n"), DataError);
    CHECK_THROWS_AS(read_all("D=0\n"), DataError);
    CHECK_THROWS_WITH_AS(read_all("D=2\n1,2\n1,x\n"), doctest::Contains("line 3"), DataError);
    CHECK_THROWS_WITH_AS(read_all("D=2\n1,2,3\n"), doctest::Contains("line 2"), DataError);
    CHECK_THROWS_AS(read_all("D=2\n1\n"), DataError);
    CHECK_THROWS_AS(read_all("D=2\n1,inf\n"), DataError);
    CHECK_THROWS_AS(read_all("D=2\n1,\n"), DataError);
  }

  TEST_CASE("config text round-trips through dump and parse") {
    const RunConfig cfg = parse_config(R"(
# jump stream with a tuned tree
manifold.kind = bump
manifold.dim=64
manifold.schedule=jump
manifold.gamma0=3e-4
manifold.jump=0.07
manifold.change_time=150
manifold.noise_var=1e-3
manifold.missing_frac=0.25
mousse.d=1
mousse.alpha=0.95
mousse.tolerance=0.2
mousse.mu=0.05
mousse.tracker=grouse
mousse.update_policy=all
mousse.residual_average=average
detector.window=40
detector.warmup=10
detector.n_burn=30
detector.threshold=4.25
detector.policy=stop
horizon=500
n_init=120
seed=99
)");
    CHECK(cfg.manifold.ambient_dim() == 64);
    CHECK(cfg.manifold.change_time() == std::optional<std::size_t>{150});
    CHECK(cfg.mousse.alpha == 0.95);
    CHECK(std::holds_alternative<Grouse>(cfg.mousse.tracker));
    CHECK(cfg.mousse.residual_average == ResidualAverage::Average);
    CHECK(cfg.detector.threshold == std::optional<double>{4.25});
    CHECK(cfg.detector.warmup == 10);
    CHECK(cfg.detector.policy == AlarmPolicy::Stop);
    CHECK(cfg.seed == 99);
    const std::string dumped = dump_config(cfg);
    CHECK(dump_config(parse_config(dumped)) == dumped);
  }

  TEST_CASE("defaults round-trip and keep the sum recursion") {
    const RunConfig cfg;
    CHECK(cfg.mousse.residual_average == ResidualAverage::Sum);
    CHECK(dump_config(parse_config(dump_config(cfg))) == dump_config(cfg));
    RunConfig chirp;
    apply_setting(chirp, "manifold.kind", "chirp");
    apply_setting(chirp, "manifold.chirp_rate", "0.2");
    CHECK(dump_config(parse_config(dump_config(chirp))) == dump_config(chirp));
  }

  TEST_CASE("bad settings are rejected") {
    RunConfig cfg;
    CHECK_THROWS_AS(apply_setting(cfg, "mousse.unknown", "1"), ConfigError);
    CHECK_THROWS_AS(apply_setting(cfg, "mousse.alpha", "fast"), ConfigError);
    CHECK_THROWS_AS(apply_setting(cfg, "mousse.tracker", "svd"), ConfigError);
    CHECK_THROWS_AS(apply_setting(cfg, "manifold.jump", "0.1"), ConfigError);
    CHECK_THROWS_AS(parse_config("horizon"), ConfigError);
    CHECK_THROWS_AS(parse_config("seed=-3"), ConfigError);
  }

  TEST_CASE("removing the change keeps the pre-change drift") {
    ManifoldSpec spec;
    spec.manifold = BumpManifold{100, JumpGamma{2e-4, 0.05, 200, 0.6}};
    const ManifoldSpec null = without_change(spec);
    CHECK_FALSE(null.change_time().has_value());
    const auto& gamma = std::get<BumpManifold>(null.manifold).gamma;
    for (std::size_t t : {1, 199, 200, 1500, 2800})
      CHECK(gamma_at(gamma, t) == doctest::Approx(0.6 - 2e-4 * static_cast<double>(t)));
  }
}

#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "coharq/analytic.hpp"
#include "coharq/experiments.hpp"

using namespace coharq;

namespace {

ProtocolConfig two_users(Scheme scheme, double power, int rounds = 2, int antennas = 1) {
  ProtocolConfig c;
  c.max_rounds = rounds;
  c.rates = {1.0, 1.0};
  c.power = power;
  c.scheme = scheme;
  c.fading.lambdas = {1.0, 1.0};
  c.fading.tx_antennas = antennas;
  c.fading.rx_antennas = antennas;
  return c;
}

std::string csv(const std::vector<ResultRow>& rows) {
  std::ostringstream out;
  write_csv(out, rows);
  return out.str();
}

}  // namespace

TEST_CASE("axis and list parsing") {
  CHECK(parse_axis("0:2:6") == std::vector<double>{0, 2, 4, 6});
  CHECK(parse_axis("0.25:0.25:1").size() == 4);
  CHECK(parse_axis("0:0.1:1").size() == 11);
  CHECK(parse_axis("1,3,7") == std::vector<double>{1, 3, 7});
  CHECK(parse_axis("5") == std::vector<double>{5});
  CHECK_THROWS_AS(parse_axis("0:0:3"), ConfigError);
  CHECK_THROWS_AS(parse_axis("3:1:0"), ConfigError);
  CHECK_THROWS_AS(parse_axis("1:2"), ConfigError);
  CHECK_THROWS_AS(parse_list("1,x"), ConfigError);
}

TEST_CASE("CSV round trip") {
  ResultRow a;
  a.snr_db = 2.5;
  a.scheme = "rtd";
  a.policy = "coord";
  a.metric = "event[A1~B2]";
  a.mc_value = 0.1 + 1e-17;
  a.mc_ci95 = 1.0 / 3.0;
  a.analytic_value = 0.123456789012345678;
  a.trials = 12345;
  a.seed = 7;
  ResultRow b = a;
  b.snr_db = std::numeric_limits<double>::quiet_NaN();
  b.user = 1;
  b.analytic_value.reset();
  b.mc_value = std::numeric_limits<double>::quiet_NaN();
  const std::vector<ResultRow> rows{a, b};
  const std::string text = csv(rows);
  CHECK(text.rfind(std::string(kCsvHeader) + "\n", 0) == 0);
  CHECK(text.find(",all,") != std::string::npos);
  CHECK(text.find(",nan,") != std::string::npos);
  std::istringstream in(text);
  CHECK(read_csv(in) == rows);

  std::istringstream bad_header("snr,scheme\n");
  CHECK_THROWS_AS(read_csv(bad_header), ConfigError);
  std::istringstream short_line(std::string(kCsvHeader) + "\n1,rtd,coord\n");
  CHECK_THROWS_AS(read_csv(short_line), ConfigError);
  b.metric = "a,b";
  CHECK_THROWS_AS(csv({b}), ContractViolation);
}

TEST_CASE("config files") {
  std::istringstream in(R"(# two runs
[coord-inr]
scheme = inr
policy = coord
k = 2
m = 3
lambdas = 1, 2
rates = 1.5
snr-db = 0:5:10   # three points
trials = 5000

[three]
k = 3
policy = random-split
rate_grid = 0.5:0.5:1
command = optimize
)");
  const auto sections = parse_config_file(in);
  REQUIRE(sections.size() == 2);
  const auto& a = sections[0];
  CHECK(a.name == "coord-inr");
  CHECK(a.scheme == Scheme::Inr);
  CHECK(a.max_rounds == 3);
  CHECK(a.snr_db == std::vector<double>{0, 5, 10});
  CHECK(a.trials == 5000);
  const auto p = a.protocol(10.0);
  CHECK(p.rates == std::vector<double>{1.5, 1.5});
  CHECK(p.fading.lambdas == std::vector<double>{1.0, 2.0});
  CHECK(p.power == doctest::Approx(10.0));
  CHECK(sections[1].policy == PolicyKind::RandomSplit);
  CHECK(sections[1].command == "optimize");

  std::istringstream orphan("k = 2\n");
  CHECK_THROWS_AS(parse_config_file(orphan), ConfigError);
  std::istringstream unknown("[x]\ncolour = red\n");
  CHECK_THROWS_AS(parse_config_file(unknown), ConfigError);
  ExperimentConfig c;
  c.users = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);  // full coordination needs two users
  c.lambdas = {1.0, 2.0};
  CHECK_THROWS_AS(c.protocol(0.0), ConfigError);
}

TEST_CASE("sweep command produces one row per target and point") {
  ExperimentConfig c;
  c.snr_db = {0.0, 6.0};
  c.trials = 4000;
  const auto rows = run_experiment(c);
  // Mean and per-user outage, mean per-packet outage, per-packet outage and
  // throughput per user, total throughput, fairness and nine terminal events.
  CHECK(rows.size() == 2 * (4 + 4 + 1 + 1 + 9));
  for (const auto& r : rows) {
    CHECK(r.analytic_value.has_value());
    CHECK(r.trials == 4000);
  }
}

TEST_CASE("rate optimization") {
  SUBCASE("a single candidate is returned as is") {
    const auto choice = optimize_rates(two_users(Scheme::Rtd, 10.0), {PolicyKind::FullCoordination},
                                       {{1.0, 2.0}});
    CHECK(choice.rates == std::vector<double>{1.0, 2.0});
    CHECK(choice.analytic);
  }
  SUBCASE("vanishing power favours the smallest rate") {
    const auto grid = rate_grid_product({0.1, 1.0, 5.0}, 2);
    CHECK(grid.size() == 9);
    for (Scheme scheme : {Scheme::Rtd, Scheme::Inr}) {
      const auto choice =
          optimize_rates(two_users(scheme, 1e-3), {PolicyKind::FullCoordination}, grid);
      CHECK(choice.rates == std::vector<double>{0.1, 0.1});
    }
    const auto mimo = optimize_rates(two_users(Scheme::Inr, 1e-3, 2, 2),
                                     {PolicyKind::FullCoordination}, grid, {3000, 1});
    CHECK(!mimo.analytic);
    CHECK(mimo.rates == std::vector<double>{0.1, 0.1});
  }
  SUBCASE("the analytic optimum dominates every candidate") {
    const auto config = two_users(Scheme::Inr, 10.0);
    const AllocationPolicy policy{PolicyKind::FullCoordination};
    const auto grid = rate_grid_product(parse_axis("0.5:0.5:4"), 2);
    const auto choice = optimize_rates(config, policy, grid);
    auto setup = analytic::TwoUserSetup::from_config(config, policy);
    for (const auto& r : grid) {
      setup.rate_a = r[0];
      setup.rate_b = r[1];
      CHECK(analytic::PacketDistribution(setup).throughput() <= choice.throughput * (1 + 1e-12));
    }
  }
  SUBCASE("three users are optimized on recorded realizations") {
    ProtocolConfig c;
    c.users = 3;
    c.rates = {1.0, 1.0, 1.0};
    c.power = 10.0;
    c.fading.lambdas = {1.0, 1.0, 1.0};
    const auto grid = rate_grid_product({0.5, 1.5}, 3);
    const AllocationPolicy policy{PolicyKind::RandomSplit};
    const auto choice = optimize_rates(c, policy, grid, {4000, 2});
    CHECK(!choice.analytic);
    c.rates = choice.rates;
    const auto direct = estimate(c, policy, 4000, 2).at({TargetKind::Throughput, -1, {}});
    CHECK(direct.point == doctest::Approx(choice.throughput).epsilon(1e-12));
  }
  CHECK_THROWS_AS(optimize_rates(two_users(Scheme::Rtd, 1.0), {PolicyKind::FullCoordination}, {}),
                  ConfigError);
}

TEST_CASE("rate tables reproduce direct simulation") {
  for (Scheme scheme : {Scheme::Rtd, Scheme::Inr}) {
    for (PolicyKind kind : {PolicyKind::FullCoordination, PolicyKind::NonCoordinated}) {
      for (int antennas : {1, 2}) {
        auto c = two_users(scheme, 5.0, 3, antennas);
        const AllocationPolicy policy{kind};
        const TwoUserRateTables tables(c, policy, 3000, 11);
        for (const auto& rates : {std::vector<double>{0.5, 2.0}, std::vector<double>{3.0, 1.0}}) {
          c.rates = rates;
          CHECK(tables.outcomes(rates) == simulate(c, policy, 3000, 11));
        }
      }
    }
  }
}

TEST_CASE("presets") {
  CHECK(preset_names().size() == 4);
  CHECK_THROWS_AS(run_preset("fig9", {}), ConfigError);
  PresetOptions o;
  o.trials = 3000;
  o.seed = 5;
  const auto first = run_preset("fig1b", o);
  CHECK(!first.empty());
  CHECK(csv(first) == csv(run_preset("fig1b", o)));
  o.threads = 3;
  CHECK(csv(first) == csv(run_preset("fig1b", o)));

  o.trials = 2000;
  o.snr_db = parse_axis("0:5:15");
  const auto fig2 = run_preset("fig2", o);
  CHECK(!fig2.empty());
  for (const auto& r : fig2) {
    CHECK(r.k == 3);
    if (r.metric.rfind("energy_gain_db", 0) == 0) CHECK(std::isfinite(r.mc_value));
  }
}

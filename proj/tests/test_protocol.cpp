#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "coharq/analytic.hpp"
#include "coharq/protocol.hpp"

using namespace coharq;

namespace {

ProtocolConfig two_users(Scheme scheme = Scheme::Rtd, double power = 10.0) {
  ProtocolConfig c;
  c.rates = {1.0, 1.0};
  c.power = power;
  c.scheme = scheme;
  c.fading.lambdas = {1.0, 1.0};
  return c;
}

SlotDraws gains(std::vector<double> g) {
  SlotDraws d;
  for (std::size_t b = 0; b < g.size(); ++b) d.gains.push_back({static_cast<int>(b), 0, g[b]});
  return d;
}

}  // namespace

TEST_CASE("policy_allocate examples") {
  const Substream random(1, 0, StreamKind::Policy);
  SUBCASE("no failed users: every band returns to its owner") {
    CHECK(policy_allocate({}, {0, 1}, 2, {PolicyKind::FullCoordination}) == BandAssignment{0, 1});
    CHECK(policy_allocate({}, {}, 2, {PolicyKind::FullCoordination}) == BandAssignment{-1, -1});
  }
  SUBCASE("full coordination gives both bands to the single failed user") {
    CHECK(policy_allocate({1}, {0, 1}, 2, {PolicyKind::FullCoordination}) == BandAssignment{1, 1});
    CHECK(policy_allocate({0}, {0, 1}, 2, {PolicyKind::FullCoordination}) == BandAssignment{0, 0});
    CHECK_THROWS_AS(policy_allocate({1}, {0, 1, 2}, 3, {PolicyKind::FullCoordination}), ConfigError);
  }
  SUBCASE("non-coordinated bands never change hands") {
    CHECK(policy_allocate({1}, {0, 1}, 2, {PolicyKind::NonCoordinated}) == BandAssignment{-1, 1});
  }
  SUBCASE("a lone failed user of three receives all bands") {
    CHECK(policy_allocate({2}, {0, 1, 2}, 3, {PolicyKind::RandomSplit}, &random) ==
          BandAssignment{2, 2, 2});
  }
  SUBCASE("round robin deals cyclically from the lowest failed user") {
    CHECK(policy_allocate({1, 3}, {0, 1, 2, 3, 4}, 5, {PolicyKind::RoundRobin}) ==
          BandAssignment{1, 1, 3, 3, 1});
  }
  SUBCASE("random split with two failed users of three is uniform") {
    int first_gets_two = 0;
    const int n = 20000;
    for (int t = 0; t < n; ++t) {
      const Substream s(5, static_cast<std::uint64_t>(t), StreamKind::Policy);
      const auto a = policy_allocate({1, 2}, {0, 1, 2}, 3, {PolicyKind::RandomSplit}, &s, 1);
      REQUIRE(a[1] == 1);
      REQUIRE(a[2] == 2);
      REQUIRE((a[0] == 1 || a[0] == 2));
      if (a[0] == 1) ++first_gets_two;
    }
    const double p = static_cast<double>(first_gets_two) / n;
    CHECK(std::abs(p - 0.5) < 3.0 * std::sqrt(0.25 / n));
  }
  CHECK_THROWS_AS(policy_allocate({1}, {0, 1}, 2, {PolicyKind::RandomSplit}), ContractViolation);
  CHECK_THROWS_AS(policy_allocate({1, 1}, {0, 1}, 2, {PolicyKind::RoundRobin}), ContractViolation);
  CHECK(parse_policy("random-split") == PolicyKind::RandomSplit);
  CHECK_THROWS_AS(parse_policy("greedy"), ConfigError);
}

TEST_CASE("advance_slot follows the two-user timeline") {
  const auto config = two_users();
  const AllocationPolicy coord{PolicyKind::FullCoordination};
  const Substream policy_stream(1, 0, StreamKind::Policy);
  const double strong = 10.0;  // log(1 + 100) > 1
  const double weak = 0.01;    // log(1 + 0.1) < 1

  SUBCASE("A decodes, B fails: both bands of slot 2 serve B") {
    auto ledger = make_ledger(config);
    advance_slot(ledger, gains({strong, weak}), config, coord, policy_stream);
    CHECK(ledger.users[0].status == UserStatus::Decoded);
    CHECK(ledger.users[1].status == UserStatus::Active);
    CHECK(ledger.assignment == BandAssignment{1, 1});
    advance_slot(ledger, gains({weak, weak}), config, coord, policy_stream);
    CHECK(ledger.users[1].accumulator.copies() == 3);
    CHECK(ledger.users[1].status == UserStatus::Outage);
    CHECK_FALSE(ledger.any_active());
  }
  SUBCASE("both decode: a new packet starts for each") {
    auto ledger = make_ledger(config);
    advance_slot(ledger, gains({strong, strong}), config, coord, policy_stream);
    CHECK_FALSE(ledger.any_active());
    CHECK(ledger.assignment == BandAssignment{0, 1});
  }
  SUBCASE("both fail: each retransmits in its own band") {
    auto ledger = make_ledger(config);
    advance_slot(ledger, gains({weak, weak}), config, coord, policy_stream);
    CHECK(ledger.assignment == BandAssignment{0, 1});
    CHECK(ledger.users[0].status == UserStatus::Active);
  }
  SUBCASE("assignments breaking the invariants are rejected") {
    auto ledger = make_ledger(config);
    advance_slot(ledger, gains({strong, weak}), config, coord, policy_stream);
    ledger.assignment = {0, 1};
    CHECK_THROWS_AS(advance_slot(ledger, gains({weak, weak}), config, coord, policy_stream),
                    ProtocolError);
    ledger.assignment = {-1, 1};
    CHECK_THROWS_AS(advance_slot(ledger, gains({weak, weak}), config, coord, policy_stream),
                    ProtocolError);
    auto other = make_ledger(config);
    other.assignment = {1, 1};
    CHECK_THROWS_AS(advance_slot(other, gains({weak, weak}), config,
                                 AllocationPolicy{PolicyKind::NonCoordinated}, policy_stream),
                    ProtocolError);
  }
}

TEST_CASE("packet outcomes: trivial regimes and invariants") {
  SUBCASE("M = 1 never retransmits") {
    auto c = two_users();
    c.max_rounds = 1;
    PacketSimulator sim(c, {PolicyKind::FullCoordination});
    for (std::uint64_t t = 0; t < 2000; ++t) {
      const auto& o = sim.run(3, t);
      REQUIRE(o.slots_consumed == 1);
      for (int r : o.decode_round) REQUIRE((r == 1 || r == kOutage));
    }
  }
  SUBCASE("zero rates decode in round one") {
    auto c = two_users();
    c.rates = {0.0, 0.0};
    for (std::uint64_t t = 0; t < 1000; ++t) {
      const auto o = run_packet(c, {PolicyKind::FullCoordination}, 1, t);
      REQUIRE(o.decode_round == std::vector<int>{1, 1});
      REQUIRE(o.nats_delivered == std::vector<double>{0.0, 0.0});
    }
  }
  SUBCASE("outcome bookkeeping, conservation and determinism") {
    for (PolicyKind kind : {PolicyKind::RandomSplit, PolicyKind::RoundRobin, PolicyKind::NonCoordinated}) {
      ProtocolConfig c;
      c.users = 4;
      c.max_rounds = 3;
      c.rates = {1.0, 2.0, 0.5, 1.5};
      c.power = 2.0;
      c.scheme = Scheme::Inr;
      c.fading.lambdas = {1.0, 0.5, 2.0, 1.0};
      const AllocationPolicy policy{kind};
      PacketSimulator sim(c, policy);
      for (std::uint64_t t = 0; t < 3000; ++t) {
        const auto o = sim.run(17, t);
        REQUIRE(o.slots_consumed <= c.max_rounds);
        for (std::size_t k = 0; k < 4; ++k) {
          const bool ok = o.decode_round[k] != kOutage;
          REQUIRE(o.nats_delivered[k] == (ok ? c.rates[k] : 0.0));
          REQUIRE(o.rounds_used[k] == (ok ? o.decode_round[k] : c.max_rounds));
        }
        const auto again = run_packet(c, policy, 17, t);
        REQUIRE(again.decode_round == o.decode_round);
      }
      // Conservation: a coordinated epoch never idles a band while anyone is active.
      std::ostringstream trace_text;
      TraceWriter trace(trace_text);
      for (std::uint64_t t = 0; t < 200; ++t) sim.run(17, t, &trace);
      std::istringstream lines(trace_text.str());
      std::string line;
      while (std::getline(lines, line)) {
        const bool idle = line.find(",-1,") != std::string::npos;
        if (policy.coordinated()) REQUIRE_FALSE(idle);
      }
    }
  }
}

TEST_CASE("trace lines carry the documented fields") {
  const auto c = two_users();
  PacketSimulator sim(c, {PolicyKind::FullCoordination});
  std::ostringstream out;
  TraceWriter trace(out);
  trace.header();
  sim.run(1, 0, &trace);
  std::istringstream in(out.str());
  std::string header;
  std::getline(in, header);
  CHECK(header == "trial,slot,band,user,scheme,decoded_users,failed_users");
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    ++lines;
    CHECK(std::count(line.begin(), line.end(), ',') == 6);
    CHECK(line.rfind("0,", 0) == 0);
  }
  CHECK(lines % 2 == 0);
  CHECK(lines >= 2);
}

TEST_CASE("non-coordinated users behave like isolated single-user HARQ") {
  // Independent oracle: a single link with its own generator.
  for (Scheme scheme : {Scheme::Rtd, Scheme::Inr}) {
    auto c = two_users(scheme, 3.0);
    c.max_rounds = 3;
    c.fading.lambdas = {1.0, 2.0};
    const int n = 200000;
    int outages_sim = 0;
    PacketSimulator sim(c, {PolicyKind::NonCoordinated});
    for (int t = 0; t < n; ++t) {
      if (sim.run(23, static_cast<std::uint64_t>(t)).decode_round[1] == kOutage) ++outages_sim;
    }
    std::mt19937_64 rng(99);
    std::exponential_distribution<double> gain(2.0);
    int outages_ref = 0;
    for (int t = 0; t < n; ++t) {
      double snr_sum = 0.0, mi = 0.0;
      bool ok = false;
      for (int r = 0; r < c.max_rounds && !ok; ++r) {
        const double snr = gain(rng) * c.power;
        snr_sum += snr;
        mi += std::log1p(snr);
        ok = (scheme == Scheme::Rtd ? std::log1p(snr_sum) : mi) >= 1.0;
      }
      if (!ok) ++outages_ref;
    }
    const double p1 = static_cast<double>(outages_sim) / n;
    const double p2 = static_cast<double>(outages_ref) / n;
    const double se = std::sqrt(p1 * (1 - p1) / n + p2 * (1 - p2) / n);
    CHECK(std::abs(p1 - p2) < 3.0 * se);
  }
}

TEST_CASE("first-round event frequency matches (1 - alpha) beta gamma") {
  const auto c = two_users();
  PacketSimulator sim(c, {PolicyKind::FullCoordination});
  const int n = 1000000;
  // Ratio of sums with a delta-method standard error.
  double sy = 0, sx = 0, syy = 0, sxy = 0, sxx = 0;
  for (int t = 0; t < n; ++t) {
    const auto& o = sim.run(31, static_cast<std::uint64_t>(t));
    const double x = o.slots_consumed;
    const double y = o.decode_round[0] == 1 && o.decode_round[1] != 1 ? 1.0 : 0.0;
    sy += y;
    sx += x;
    syy += y * y;
    sxy += x * y;
    sxx += x * x;
  }
  const double freq = sy / sx;
  const double se = std::sqrt(syy - 2 * freq * sxy + freq * freq * sxx) / sx;
  const auto th = analytic::ThresholdPair::from_rates(1.0, 1.0, 10.0);
  const auto [alpha, beta] = analytic::alpha_beta(th, {1.0, 1.0});
  const double expected = (1 - alpha) * beta * analytic::gamma_norm(alpha, beta);
  CHECK(std::abs(freq - expected) < 3.0 * se);
}

TEST_CASE("record and replay reproduce run") {
  for (bool mimo : {false, true}) {
    auto c = two_users(Scheme::Rtd, 2.0);
    if (mimo) {
      c.fading.tx_antennas = 2;
      c.fading.rx_antennas = 2;
    }
    c.max_rounds = 3;
    PacketSimulator sim(c, {PolicyKind::FullCoordination});
    for (std::uint64_t t = 0; t < 500; ++t) {
      const auto slots = sim.record(8, t);
      const auto replayed = sim.replay(slots, 8, t).decode_round;
      REQUIRE(sim.run(8, t).decode_round == replayed);
    }
    CHECK_THROWS_AS(sim.replay({}, 8, 0), ContractViolation);
  }
}

TEST_CASE("configuration validation") {
  auto c = two_users();
  c.rates = {1.0};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = two_users();
  c.power = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = two_users();
  c.fading.lambdas = {1.0, 1.0, 1.0};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = two_users();
  c.rates = {-1.0, 1.0};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  ProtocolConfig three;
  three.users = 3;
  three.rates = {1, 1, 1};
  three.fading.lambdas = {1, 1, 1};
  CHECK_THROWS_AS(PacketSimulator(three, {PolicyKind::FullCoordination}), ConfigError);
}

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "coharq/fading.hpp"
#include "coharq/rng.hpp"

using namespace coharq;

namespace {

// Kolmogorov-Smirnov statistic of a sample against a continuous CDF.
template <typename Cdf>
double ks_statistic(std::vector<double> xs, Cdf cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

}  // namespace

TEST_CASE("philox matches the published known-answer vectors") {
  using B = Philox4x32::Block;
  CHECK(Philox4x32::generate({0, 0, 0, 0}, {0, 0}) ==
        B{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(Philox4x32::generate({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff},
                             {0xffffffff, 0xffffffff}) ==
        B{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(Philox4x32::generate({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344},
                             {0xa4093822, 0x299f31d0}) ==
        B{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("substream addresses are distinct and bounded") {
  const Substream s(7, 3, StreamKind::Fading);
  const Substream other_kind(7, 3, StreamKind::Policy);
  const Substream other_trial(7, 4, StreamKind::Fading);
  CHECK(s.block(0, 0, 0) != s.block(1, 0, 0));
  CHECK(s.block(0, 0, 0) != s.block(0, 1, 0));
  CHECK(s.block(0, 0, 0) != s.block(0, 0, 1));
  CHECK(s.block(0, 0, 0) != other_kind.block(0, 0, 0));
  CHECK(s.block(0, 0, 0) != other_trial.block(0, 0, 0));
  CHECK(s.block(2, 5, 9) == Substream(7, 3, StreamKind::Fading).block(2, 5, 9));
  CHECK_THROWS_AS(s.block(Substream::kMaxBand, 0, 0), std::out_of_range);
  CHECK_THROWS_AS(s.block(0, Substream::kMaxSlot, 0), std::out_of_range);
  CHECK_THROWS_AS(s.block(0, 0, Substream::kMaxIndex), std::out_of_range);
  for (std::uint64_t t = 0; t < 1000; ++t) {
    const auto u = Substream(1, t, StreamKind::Fading).uniforms(0, 0, 0);
    CHECK(u[0] > 0.0);
    CHECK(u[0] <= 1.0);
    CHECK(u[1] >= 0.0);
    CHECK(u[1] < 1.0);
  }
}

TEST_CASE("gain draws: exponential mean, CDF and support") {
  FadingProfile p{{1.0, 2.0}};
  const int n = 1000000;
  double sum = 0.0;
  int below = 0;
  for (int t = 0; t < n; ++t) {
    const Substream s(11, static_cast<std::uint64_t>(t), StreamKind::Fading);
    const auto g1 = sample_gain(p, 0, 0, s);
    const auto g2 = sample_gain(p, 1, 0, s);
    REQUIRE(g1.gain >= 0.0);
    REQUIRE(g2.gain >= 0.0);
    sum += g1.gain;
    if (g2.gain < 0.5) ++below;
  }
  CHECK(sum / n == doctest::Approx(1.0).epsilon(0.01));
  CHECK(static_cast<double>(below) / n == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(0.005));
}

TEST_CASE("gain draws pass a Kolmogorov-Smirnov test at the 1% level") {
  for (double lambda : {0.5, 1.0, 3.0}) {
    FadingProfile p{{lambda}};
    std::vector<double> xs;
    const int n = 100000;
    for (int t = 0; t < n; ++t) {
      xs.push_back(sample_gain(p, 0, 2, Substream(5, static_cast<std::uint64_t>(t), StreamKind::Fading)).gain);
    }
    const double d = ks_statistic(xs, [lambda](double x) { return -std::expm1(-lambda * x); });
    CHECK(d < 1.628 / std::sqrt(static_cast<double>(n)));
  }
}

TEST_CASE("gains at consecutive slots are uncorrelated") {
  FadingProfile p{{1.0}};
  const int n = 200000;
  std::vector<double> g(n);
  for (int t = 0; t < n; ++t) g[t] = sample_gain(p, 0, t % 1000, Substream(3, t / 1000, StreamKind::Fading)).gain;
  double mean = 0.0;
  for (double v : g) mean += v / n;
  double num = 0.0, den = 0.0;
  for (int t = 0; t < n; ++t) {
    den += (g[t] - mean) * (g[t] - mean);
    if (t + 1 < n) num += (g[t] - mean) * (g[t + 1] - mean);
  }
  CHECK(std::abs(num / den) < 3.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("matrix draws: SISO reduction and second moments") {
  FadingProfile siso{{1.0}};
  for (std::uint64_t t = 0; t < 100; ++t) {
    const Substream s(9, t, StreamKind::Fading);
    const auto h = sample_matrix(siso, 0, 1, s);
    CHECK(std::norm(h.h(0, 0)) == doctest::Approx(sample_gain(siso, 0, 1, s).gain).epsilon(1e-12));
  }
  FadingProfile two{{1.0}, 2, 2};
  FadingProfile tall{{2.0}, 2, 1};
  const int n = 1000000;
  double frob = 0.0, entry = 0.0;
  std::complex<double> cross = 0.0;
  for (int t = 0; t < n; ++t) {
    const Substream s(13, static_cast<std::uint64_t>(t), StreamKind::Fading);
    const auto h = sample_matrix(two, 0, 0, s).h;
    frob += h.squaredNorm();
    cross += h(0, 0) * h(0, 1);
    const auto h2 = sample_matrix(tall, 0, 0, s).h;
    CHECK(h2.rows() == 1);
    CHECK(h2.cols() == 2);
    entry += std::norm(h2(0, 0));
  }
  CHECK(frob / n == doctest::Approx(4.0).epsilon(0.05 / 4));
  CHECK(entry / n == doctest::Approx(0.5).epsilon(0.01));
  // Circular symmetry: E[h h'] = 0 for distinct entries.
  CHECK(std::abs(cross / static_cast<double>(n)) < 0.01);
}

TEST_CASE("fading profile validation") {
  CHECK_THROWS_AS((FadingProfile{{}}.validate()), ConfigError);
  CHECK_THROWS_AS((FadingProfile{{1.0, 0.0}}.validate()), ConfigError);
  CHECK_THROWS_AS((FadingProfile{{1.0}, 0, 1}.validate()), ConfigError);
  CHECK_NOTHROW((FadingProfile{{1.0, 2.0}}.validate()));
  FadingProfile p{{1.0}};
  const Substream s(1, 0, StreamKind::Fading);
  CHECK_THROWS_AS(sample_gain(p, 1, 0, s), ConfigError);
  CHECK_THROWS_AS(sample_gain(p, -1, 0, s), ConfigError);
}

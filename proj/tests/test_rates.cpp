#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>

#include "coharq/rates.hpp"

using namespace coharq;

namespace {

// log det(I + c H H^*) from the eigenvalues of the stacked H H^*.
double eigen_log_det(const std::vector<ComplexMatrix>& hs, double scale) {
  const auto rows = hs.front().rows();
  const auto cols = hs.front().cols();
  ComplexMatrix stacked(rows * static_cast<Eigen::Index>(hs.size()), cols);
  for (std::size_t i = 0; i < hs.size(); ++i) {
    stacked.block(static_cast<Eigen::Index>(i) * rows, 0, rows, cols) = hs[i];
  }
  const ComplexMatrix outer = stacked * stacked.adjoint();
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(outer);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) {
    sum += std::log1p(scale * std::max(0.0, solver.eigenvalues()(i)));
  }
  return sum;
}

ComplexMatrix random_matrix(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> n(0.0, std::sqrt(0.5));
  ComplexMatrix h(rows, cols);
  for (int a = 0; a < rows; ++a)
    for (int b = 0; b < cols; ++b) h(a, b) = {n(rng), n(rng)};
  return h;
}

}  // namespace

TEST_CASE("u_rtd and u_inr direct evaluations") {
  CHECK(u_rtd(std::vector<double>{1.0}) == doctest::Approx(std::log(2.0)));
  CHECK(u_rtd(std::vector<double>{1.0, 3.0}) == doctest::Approx(0.5 * std::log(5.0)));
  CHECK(u_rtd(std::vector<double>{0.0, 0.0, 0.0}) == 0.0);
  CHECK(u_inr(std::vector<double>{1.0, 3.0}) == doctest::Approx(0.5 * (std::log(2.0) + std::log(4.0))));
  for (double x : {0.0, 0.3, 7.0}) CHECK(u_inr(std::vector<double>{x}) == u_rtd(std::vector<double>{x}));
  CHECK(u_inr(std::vector<double>{1.0, 1.0}) == doctest::Approx(0.693147).epsilon(1e-5));
  CHECK(u_rtd(std::vector<double>{1.0, 1.0}) == doctest::Approx(0.549306).epsilon(1e-5));
  CHECK_THROWS_AS(u_rtd(std::vector<double>{}), ContractViolation);
  CHECK_THROWS_AS(u_inr(std::vector<double>{}), ContractViolation);
}

TEST_CASE("decode_success boundary and zero rate") {
  AccumulationState rtd{Scheme::Rtd, {std::exp(1.0) - 1.0}, {}, 1};
  CHECK(decode_success(rtd, 1.0));
  AccumulationState inr{Scheme::Inr, {0.5, 0.5}, {}, 2};
  CHECK_FALSE(decode_success(inr, 1.0));
  AccumulationState small{Scheme::Rtd, {0.5, 0.5}, {}, 2};
  CHECK(decode_success(small, 0.0));
}

TEST_CASE("INR accumulates at least as much as RTD and both are monotone") {
  std::mt19937_64 rng(4);
  std::exponential_distribution<double> e(0.3);
  std::uniform_int_distribution<int> len(1, 6);
  for (int i = 0; i < 10000; ++i) {
    std::vector<double> terms(static_cast<std::size_t>(len(rng)));
    for (auto& t : terms) t = e(rng);
    REQUIRE(u_inr(terms) >= u_rtd(terms) - 1e-15);
    const double before_rtd = u_rtd(terms) * static_cast<double>(terms.size());
    const double before_inr = u_inr(terms) * static_cast<double>(terms.size());
    terms.push_back(e(rng) + 1e-9);
    REQUIRE(u_rtd(terms) * static_cast<double>(terms.size()) > before_rtd);
    REQUIRE(u_inr(terms) * static_cast<double>(terms.size()) > before_inr);
  }
}

TEST_CASE("decode_success is monotone in the rate") {
  AccumulationState s{Scheme::Inr, {0.7, 2.0, 0.1}, {}, 3};
  bool failed = false;
  for (double r = 0.0; r < 4.0; r += 0.01) {
    const bool ok = decode_success(s, r);
    if (failed) REQUIRE_FALSE(ok);
    if (!ok) failed = true;
  }
  CHECK(failed);
}

TEST_CASE("MIMO rates: reductions and identities") {
  ComplexMatrix one(1, 1);
  one(0, 0) = 1.0;
  CHECK(mimo_rate_rtd({{one}, 1.0, 1}) == doctest::Approx(std::log(2.0)));
  const ComplexMatrix eye = ComplexMatrix::Identity(2, 2);
  CHECK(mimo_rate_rtd({{eye}, 2.0, 2}) == doctest::Approx(2.0 * std::log(2.0)));
  CHECK(mimo_rate_inr({{eye, eye}, 2.0, 2}) == doctest::Approx(2.0 * std::log(2.0)));

  std::mt19937_64 rng(8);
  for (int i = 0; i < 50; ++i) {
    const auto h1 = random_matrix(rng, 2, 2);
    const auto h2 = random_matrix(rng, 2, 2);
    const double p = 5.0;
    CHECK(2.0 * mimo_rate_rtd({{h1, h2}, p, 2}) ==
          doctest::Approx(eigen_log_det({h1, h2}, p / 2)).epsilon(1e-10));
    CHECK(mimo_rate_inr({{h1}, p, 2}) == doctest::Approx(mimo_rate_rtd({{h1}, p, 2})).epsilon(1e-12));
    CHECK(2.0 * mimo_rate_inr({{h1, h2}, p, 2}) ==
          doctest::Approx(eigen_log_det({h1}, p / 2) + eigen_log_det({h2}, p / 2)).epsilon(1e-10));
    const auto tall = random_matrix(rng, 3, 2);
    CHECK(mimo_rate_rtd({{tall}, p, 2}) == doctest::Approx(eigen_log_det({tall}, p / 2)).epsilon(1e-10));
  }

  // Scalar links: MIMO formulas reduce to the SISO ones.
  std::vector<ComplexMatrix> scalars;
  std::vector<double> snrs;
  for (double g : {0.3, 1.7, 0.05}) {
    ComplexMatrix h(1, 1);
    h(0, 0) = std::sqrt(g);
    scalars.push_back(h);
    snrs.push_back(g * 4.0);
  }
  CHECK(mimo_rate_rtd({scalars, 4.0, 1}) == doctest::Approx(u_rtd(snrs)));
  CHECK(mimo_rate_inr({scalars, 4.0, 1}) == doctest::Approx(u_inr(snrs)));

  // Diagonal channels split into parallel eigen-channels.
  ComplexMatrix d = ComplexMatrix::Zero(2, 2);
  d(0, 0) = std::sqrt(2.0);
  d(1, 1) = std::sqrt(0.5);
  ComplexMatrix d2 = ComplexMatrix::Zero(2, 2);
  d2(0, 0) = 1.0;
  d2(1, 1) = std::sqrt(3.0);
  const double p = 2.0;  // P/u = 1
  CHECK(2.0 * mimo_rate_rtd({{d, d2}, p, 2}) ==
        doctest::Approx(std::log1p(2.0 + 1.0) + std::log1p(0.5 + 3.0)));

  CHECK_THROWS_AS(mimo_rate_rtd({{}, 1.0, 1}), ContractViolation);
  CHECK_THROWS_AS(mimo_rate_rtd({{eye, one}, 1.0, 2}), ContractViolation);
  CHECK_THROWS_AS(mimo_rate_inr({{eye}, 1.0, 3}), ContractViolation);
}

TEST_CASE("RateAccumulator agrees with the state formulas") {
  for (Scheme scheme : {Scheme::Rtd, Scheme::Inr}) {
    RateAccumulator acc(scheme, 3.0);
    acc.add_gain(0.2);
    acc.add_gain(1.1);
    const std::vector<double> snrs{0.6, 3.3};
    const double expected = scheme == Scheme::Rtd ? 2.0 * u_rtd(snrs) : 2.0 * u_inr(snrs);
    CHECK(acc.accumulated_nats() == doctest::Approx(expected));
    CHECK(acc.copies() == 2);
    CHECK(accumulated_nats(acc.state()) == doctest::Approx(expected));
    acc.reset();
    CHECK(acc.accumulated_nats() == 0.0);
    CHECK(acc.decoded(0.0));
  }
  std::mt19937_64 rng(2);
  for (Scheme scheme : {Scheme::Rtd, Scheme::Inr}) {
    RateAccumulator acc(scheme, 4.0, 2, 3);
    std::vector<ComplexMatrix> hs;
    for (int i = 0; i < 3; ++i) {
      hs.push_back(random_matrix(rng, 3, 2));
      acc.add_matrix(hs.back());
    }
    const double expected = scheme == Scheme::Rtd ? 3.0 * mimo_rate_rtd({hs, 4.0, 2})
                                                  : 3.0 * mimo_rate_inr({hs, 4.0, 2});
    CHECK(acc.accumulated_nats() == doctest::Approx(expected).epsilon(1e-12));
  }
  RateAccumulator siso(Scheme::Rtd, 1.0);
  CHECK_THROWS_AS(siso.add_matrix(ComplexMatrix::Identity(2, 2)), ContractViolation);
  RateAccumulator mimo(Scheme::Rtd, 1.0, 2, 2);
  CHECK_THROWS_AS(mimo.add_gain(1.0), ContractViolation);
  CHECK(parse_scheme("inr") == Scheme::Inr);
  CHECK_THROWS_AS(parse_scheme("harq"), ConfigError);
}

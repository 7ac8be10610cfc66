#include "coharq/analytic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "coharq/special_functions.hpp"

namespace coharq::analytic {

ThresholdPair ThresholdPair::from_rates(double rate_a, double rate_b, double power) {
  if (!(power > 0.0)) throw ContractViolation("thresholds: power must be positive");
  if (!(rate_a >= 0.0) || !(rate_b >= 0.0)) throw ContractViolation("thresholds: negative rate");
  return {std::expm1(rate_a) / power, std::expm1(rate_b) / power};
}

namespace {

void check_lambdas(const Lambdas& l) {
  if (!(l.band_1 > 0.0) || !(l.band_2 > 0.0)) {
    throw ContractViolation("fading parameters must be positive");
  }
}

// Relative gap below which the distinct-lambda closed forms lose too many
// digits to cancellation.
constexpr double kNearEqualGap = 1e-4;

bool nearly_equal(double x, double y) {
  return std::abs(x - y) <= kNearEqualGap * std::max(x, y);
}

// Pr(S < y) for S = n Exp(l1) + m Exp(l2), by one-dimensional quadrature of
// the Gamma(n, l1) density against the Gamma(m, l2) CDF.
double mixed_gamma_cdf_quadrature(int n, int m, const Lambdas& l, double y) {
  auto integrand = [&](double s) {
    return gamma_pdf(n, l.band_1, s) * gamma_cdf(m, l.band_2, y - s);
  };
  double error = 0.0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      integrand, 0.0, y, 15, 1e-14, &error);
  return std::clamp(value, 0.0, 1.0);
}

double mixed_gamma_cdf(int n, int m, const Lambdas& l, double power, double y) {
  if (!(y > 0.0)) return 0.0;
  if (n == 0) return gamma_cdf(m, l.band_2, y);
  if (m == 0) return gamma_cdf(n, l.band_1, y);
  if (l.band_1 == l.band_2) return gamma_cdf(n + m, l.band_1, y);
  if (!nearly_equal(l.band_1, l.band_2)) {
    const auto pf = PartialFractionExpansion::make(n, m, l, power);
    // Keep the expansion only while its cancellation error stays below 1e-12.
    if (pf.max_abs_coefficient() * (n + m) * 1e-16 < 1e-12) {
      return std::clamp(pf.sum_cdf(y), 0.0, 1.0);
    }
  }
  return mixed_gamma_cdf_quadrature(n, m, l, y);
}

}  // namespace

std::pair<double, double> alpha_beta(const ThresholdPair& thresholds, const Lambdas& lambdas) {
  check_lambdas(lambdas);
  return {-std::expm1(-lambdas.band_1 * thresholds.c_a),
          -std::expm1(-lambdas.band_2 * thresholds.c_b)};
}

double gamma_norm(double alpha, double beta) {
  if (!(alpha >= 0.0 && alpha <= 1.0 && beta >= 0.0 && beta <= 1.0)) {
    throw ContractViolation("gamma_norm: probabilities outside [0, 1]");
  }
  return 1.0 / (1.0 + alpha + beta - alpha * beta);
}

double erlang2_cdf(double lambda, double c) {
  if (!(c > 0.0)) return 0.0;
  const double lc = lambda * c;
  return -std::expm1(-lc) - lc * std::exp(-lc);
}

double phi_coordinated(const ThresholdPair& thresholds, const Lambdas& lambdas) {
  check_lambdas(lambdas);
  const double c = thresholds.c_b;
  if (!(c > 0.0)) return 0.0;
  const double l1 = lambdas.band_1;
  const double l2 = lambdas.band_2;
  if (l1 == l2) return gamma_cdf(3.0, l1, c);
  if (nearly_equal(l1, l2)) return mixed_gamma_cdf_quadrature(1, 2, lambdas, c);
  const double e1 = std::exp(-l1 * c);
  const double e2 = std::exp(-l2 * c);
  return -std::expm1(-l1 * c) + (e2 - e1) / (l2 / l1 - 1.0) + c * e2 / (1.0 / l1 - 1.0 / l2) +
         l1 * l2 / ((l1 - l2) * (l1 - l2)) * (e2 - e1);
}

double outage_b_rtd_closed(const ThresholdPair& thresholds, const Lambdas& lambdas) {
  const auto [alpha, beta] = alpha_beta(thresholds, lambdas);
  const double gamma = gamma_norm(alpha, beta);
  return gamma * alpha * erlang2_cdf(lambdas.band_2, thresholds.c_b) +
         gamma * (1.0 - alpha) * phi_coordinated(thresholds, lambdas);
}

PartialFractionExpansion PartialFractionExpansion::make(int n, int m, const Lambdas& lambdas,
                                                        double power) {
  check_lambdas(lambdas);
  if (n < 1 || m < 1) throw ContractViolation("partial fractions need n, m >= 1");
  if (lambdas.band_1 == lambdas.band_2) {
    throw ContractViolation("partial fractions need distinct fading parameters");
  }
  PartialFractionExpansion pf;
  pf.n = n;
  pf.m = m;
  pf.lambda_1 = lambdas.band_1;
  pf.lambda_2 = lambdas.band_2;
  pf.power = power;
  const double r12 = lambdas.band_1 / lambdas.band_2;
  const double r21 = lambdas.band_2 / lambdas.band_1;
  auto binom = [](int top, int k) {
    return std::exp(std::lgamma(top + 1.0) - std::lgamma(k + 1.0) - std::lgamma(top - k + 1.0));
  };
  for (int k = 1; k <= n; ++k) {
    pf.a.push_back(std::pow(-r12, n - k) * std::round(binom(n + m - k - 1, n - k)) *
                   std::pow(1.0 - r12, -(n + m - k)));
  }
  for (int k = 1; k <= m; ++k) {
    pf.b.push_back(std::pow(-r21, m - k) * std::round(binom(n + m - k - 1, m - k)) *
                   std::pow(1.0 - r21, -(n + m - k)));
  }
  return pf;
}

double PartialFractionExpansion::reconstruct(double s) const {
  const double u1 = 1.0 + power * s / lambda_1;
  const double u2 = 1.0 + power * s / lambda_2;
  double sum = 0.0;
  for (int k = 1; k <= n; ++k) sum += a[static_cast<std::size_t>(k - 1)] * std::pow(u1, -k);
  for (int k = 1; k <= m; ++k) sum += b[static_cast<std::size_t>(k - 1)] * std::pow(u2, -k);
  return sum;
}

double PartialFractionExpansion::target(double s) const {
  return std::pow(1.0 + power * s / lambda_1, -n) * std::pow(1.0 + power * s / lambda_2, -m);
}

double PartialFractionExpansion::sum_cdf(double y) const {
  if (!(y > 0.0)) return 0.0;
  double sum = 0.0;
  for (int k = 1; k <= n; ++k) sum += a[static_cast<std::size_t>(k - 1)] * gamma_cdf(k, lambda_1, y);
  for (int k = 1; k <= m; ++k) sum += b[static_cast<std::size_t>(k - 1)] * gamma_cdf(k, lambda_2, y);
  return sum;
}

double PartialFractionExpansion::max_abs_coefficient() const {
  double best = 0.0;
  for (double v : a) best = std::max(best, std::abs(v));
  for (double v : b) best = std::max(best, std::abs(v));
  return best;
}

double cdf_rtd_sum(int n, int m, const Lambdas& lambdas, double power, double x) {
  if (n < 0 || m < 0 || n + m < 1) throw ContractViolation("cdf_rtd_sum: need n + m >= 1");
  check_lambdas(lambdas);
  if (!(power > 0.0)) throw ContractViolation("cdf_rtd_sum: power must be positive");
  if (!(x > 0.0)) return 0.0;
  // The Gamma arguments carry the 1/P scaling of theta = g P.
  const double y = std::expm1(x) / power;
  return mixed_gamma_cdf(n, m, lambdas, power, y);
}

namespace {

// One INR copy Z = log(1 + P g), g ~ Exp(lambda).
struct InrTerm {
  double rate;  // lambda / P

  double cdf(double z) const { return -std::expm1(-rate * std::expm1(z)); }
  double pdf(double z) const { return rate * std::exp(z - rate * std::expm1(z)); }
  double tail(double z) const { return std::exp(-rate * std::expm1(z)); }
};

// Trapezoidal convolution of the terms on N intervals of [0, x]; returns the
// CDF of the sum at x.
double convolve_trapezoid(const std::vector<InrTerm>& terms, double x, int intervals) {
  const double h = x / intervals;
  const auto points = static_cast<std::size_t>(intervals) + 1;
  std::vector<double> cdf(points);
  std::vector<double> next(points);
  std::vector<double> density(points);
  for (std::size_t i = 0; i < points; ++i) cdf[i] = terms.front().cdf(h * static_cast<double>(i));

  for (std::size_t t = 1; t < terms.size(); ++t) {
    for (std::size_t i = 0; i < points; ++i) density[i] = terms[t].pdf(h * static_cast<double>(i));
    const bool last = t + 1 == terms.size();
    const std::size_t first = last ? points - 1 : 0;
    for (std::size_t i = first; i < points; ++i) {
      // cdf[0] == 0, so the s = z_i endpoint drops out.
      double sum = 0.5 * density[0] * cdf[i];
      for (std::size_t j = 1; j < i; ++j) sum += density[j] * cdf[i - j];
      next[i] = h * sum;
    }
    if (last) return next[points - 1];
    std::swap(cdf, next);
  }
  return cdf[points - 1];
}

}  // namespace

double cdf_inr_sum(int n, int m, const Lambdas& lambdas, double power, double x) {
  if (n < 0 || m < 0 || n + m < 1) throw ContractViolation("cdf_inr_sum: need n + m >= 1");
  check_lambdas(lambdas);
  if (!(power > 0.0)) throw ContractViolation("cdf_inr_sum: power must be positive");
  if (!(x > 0.0)) return 0.0;

  std::vector<InrTerm> terms;
  terms.insert(terms.end(), static_cast<std::size_t>(n), InrTerm{lambdas.band_1 / power});
  terms.insert(terms.end(), static_cast<std::size_t>(m), InrTerm{lambdas.band_2 / power});
  if (terms.size() == 1) return terms.front().cdf(x);

  // If every term already exceeds x / count with negligible probability, the
  // sum is below x up to that union bound.
  const double share = x / static_cast<double>(terms.size());
  double tail_bound = 0.0;
  for (const auto& t : terms) tail_bound += t.tail(share);
  if (tail_bound < 1e-17) return 1.0;

  constexpr double kTolerance = 1e-9;
  constexpr int kMaxIntervals = 1 << 13;
  int intervals = 128;
  double coarse = convolve_trapezoid(terms, x, intervals);
  double previous = coarse;
  double estimate = coarse;
  while (intervals < kMaxIntervals) {
    intervals *= 2;
    const double fine = convolve_trapezoid(terms, x, intervals);
    estimate = fine + (fine - coarse) / 3.0;
    if (intervals > 256 && std::abs(estimate - previous) < kTolerance) break;
    previous = estimate;
    coarse = fine;
  }
  return std::clamp(estimate, 0.0, 1.0);
}

double accumulation_cdf(Scheme scheme, int n, int m, const Lambdas& lambdas, double power,
                        double rate) {
  if (n + m == 0) return 1.0;  // nothing received yet: never decoded
  return scheme == Scheme::Rtd ? cdf_rtd_sum(n, m, lambdas, power, rate)
                               : cdf_inr_sum(n, m, lambdas, power, rate);
}

double CdfCache::get(Scheme scheme, int n, int m, const Lambdas& lambdas, double power,
                     double rate) {
  const auto key = std::make_tuple(static_cast<int>(scheme), n, m, lambdas.band_1,
                                   lambdas.band_2, power, rate);
  if (auto it = values_.find(key); it != values_.end()) return it->second;
  const double v = accumulation_cdf(scheme, n, m, lambdas, power, rate);
  values_.emplace(key, v);
  return v;
}

TwoUserSetup TwoUserSetup::from_config(const ProtocolConfig& config,
                                       const AllocationPolicy& policy) {
  config.validate();
  if (config.users != 2) throw ConfigError("analytic model covers two users");
  if (!config.fading.siso()) throw ConfigError("analytic model covers SISO links");
  TwoUserSetup s;
  s.scheme = config.scheme;
  s.coordinated = policy.coordinated();
  s.max_rounds = config.max_rounds;
  s.rate_a = config.rates[0];
  s.rate_b = config.rates[1];
  s.lambdas = {config.fading.lambdas[0], config.fading.lambdas[1]};
  s.power = config.power;
  return s;
}

PacketDistribution::PacketDistribution(const TwoUserSetup& setup, CdfCache* cache)
    : setup_(setup) {
  const int rounds = setup.max_rounds;
  if (rounds < 1) throw ContractViolation("max_rounds must be >= 1");
  check_lambdas(setup.lambdas);
  const auto size = static_cast<std::size_t>(rounds) + 1;
  table_.assign(size, std::vector<double>(size, 0.0));

  // Pr(user not decoded after k own copies plus `donated` copies of the
  // partner's band). Copies of band 1 have lambda_1, of band 2 lambda_2.
  auto cdf = [&](int n1, int n2, double rate) {
    return cache != nullptr ? cache->get(setup.scheme, n1, n2, setup.lambdas, setup.power, rate)
                            : accumulation_cdf(setup.scheme, n1, n2, setup.lambdas, setup.power, rate);
  };
  auto not_decoded_a = [&](int own, int donated) { return cdf(own, donated, setup.rate_a); };
  auto not_decoded_b = [&](int own, int donated) { return cdf(donated, own, setup.rate_b); };
  // Marginal: decodes at round k with own copies only.
  std::vector<double> own_a(size);
  std::vector<double> own_b(size);
  for (int k = 0; k <= rounds; ++k) {
    own_a[static_cast<std::size_t>(k)] = not_decoded_a(k, 0);
    own_b[static_cast<std::size_t>(k)] = not_decoded_b(k, 0);
  }
  auto first_decode = [&](const std::vector<double>& own, int k) {
    return own[static_cast<std::size_t>(k - 1)] - own[static_cast<std::size_t>(k)];
  };
  // Copies donated to the late user: one per slot after the early user decoded.
  auto donated = [&](int slots, int early_round) {
    return setup.coordinated ? std::max(0, slots - early_round) : 0;
  };

  // A's gains before its decoding round and B's accumulation (own band plus
  // band-1 copies after A decoded) use disjoint draws, hence the products.
  for (int n = 1; n <= rounds; ++n) {
    const double pa = first_decode(own_a, n);
    for (int m = n; m <= rounds; ++m) {
      const double before = not_decoded_b(m - 1, donated(m - 1, n));
      const double after = not_decoded_b(m, donated(m, n));
      table_[static_cast<std::size_t>(n)][static_cast<std::size_t>(m)] = pa * (before - after);
    }
    table_[static_cast<std::size_t>(n)][kOutage] = pa * not_decoded_b(rounds, donated(rounds, n));
  }
  for (int m = 1; m <= rounds; ++m) {
    const double pb = first_decode(own_b, m);
    for (int n = m + 1; n <= rounds; ++n) {
      const double before = not_decoded_a(n - 1, donated(n - 1, m));
      const double after = not_decoded_a(n, donated(n, m));
      table_[static_cast<std::size_t>(n)][static_cast<std::size_t>(m)] = pb * (before - after);
    }
    table_[kOutage][static_cast<std::size_t>(m)] = pb * not_decoded_a(rounds, donated(rounds, m));
  }
  table_[kOutage][kOutage] = own_a[static_cast<std::size_t>(rounds)] *
                             own_b[static_cast<std::size_t>(rounds)];
}

double PacketDistribution::packet(int round_a, int round_b) const {
  const int rounds = setup_.max_rounds;
  if (round_a < 0 || round_a > rounds || round_b < 0 || round_b > rounds) {
    throw ContractViolation("packet: round out of range");
  }
  return table_[static_cast<std::size_t>(round_a)][static_cast<std::size_t>(round_b)];
}

double PacketDistribution::total() const {
  double sum = 0.0;
  for (const auto& row : table_) sum += std::accumulate(row.begin(), row.end(), 0.0);
  return sum;
}

double PacketDistribution::expected_slots() const {
  const int rounds = setup_.max_rounds;
  double sum = 0.0;
  for (int n = 0; n <= rounds; ++n) {
    for (int m = 0; m <= rounds; ++m) {
      const int slots = std::max(n == kOutage ? rounds : n, m == kOutage ? rounds : m);
      sum += slots * packet(n, m);
    }
  }
  return sum;
}

double PacketDistribution::decode_probability(int user) const {
  return 1.0 - outage_probability(user);
}

double PacketDistribution::outage_probability(int user) const {
  const int rounds = setup_.max_rounds;
  double sum = 0.0;
  for (int k = 0; k <= rounds; ++k) sum += user == 0 ? packet(kOutage, k) : packet(k, kOutage);
  return sum;
}

double PacketDistribution::expected_rounds(int user) const {
  const int rounds = setup_.max_rounds;
  double sum = 0.0;
  for (int n = 0; n <= rounds; ++n) {
    for (int m = 0; m <= rounds; ++m) {
      const int own = user == 0 ? n : m;
      sum += (own == kOutage ? rounds : own) * packet(n, m);
    }
  }
  return sum;
}

double PacketDistribution::outage_per_slot(int user) const {
  const double denom = setup_.coordinated ? expected_slots() : expected_rounds(user);
  return outage_probability(user) / denom;
}

double PacketDistribution::user_throughput(int user) const {
  const double rate = user == 0 ? setup_.rate_a : setup_.rate_b;
  const double denom = setup_.coordinated ? expected_slots() : expected_rounds(user);
  return rate * decode_probability(user) / denom;
}

double PacketDistribution::throughput() const { return user_throughput(0) + user_throughput(1); }

double PacketDistribution::event_probability(int round_a, int round_b) const {
  return gamma() * packet(round_a, round_b);
}

std::string terminal_label(int round_a, int round_b, int max_rounds) {
  auto part = [max_rounds](char user, int round) {
    return round == kOutage ? "~" + std::string(1, user) + std::to_string(max_rounds)
                            : std::string(1, user) + std::to_string(round);
  };
  return part('A', round_a) + part('B', round_b);
}

std::string first_round_label(bool a_decoded, bool b_decoded) {
  return std::string(a_decoded ? "A1" : "~A1") + (b_decoded ? "B1" : "~B1");
}

double EventProbabilities::per_slot(const std::string& label) const {
  if (auto it = terminal.find(label); it != terminal.end()) return gamma * it->second;
  if (auto it = first_round.find(label); it != first_round.end()) return gamma * it->second;
  throw ContractViolation("unknown event label " + label);
}

std::map<std::string, double> EventProbabilities::slot_partition() const {
  if (max_rounds != 2) throw ContractViolation("slot partition is defined for M = 2");
  std::map<std::string, double> out;
  for (const auto& [label, p] : first_round) out[label] = gamma * p;
  for (const auto& [label, p] : terminal) {
    if (label != "A1B1") out[label] = gamma * p;
  }
  return out;
}

EventProbabilities event_probabilities(const TwoUserSetup& setup) {
  const PacketDistribution dist(setup);
  EventProbabilities ev;
  ev.max_rounds = setup.max_rounds;
  const auto thresholds = ThresholdPair::from_rates(setup.rate_a, setup.rate_b, setup.power);
  if (setup.scheme == Scheme::Rtd) {
    std::tie(ev.alpha, ev.beta) = alpha_beta(thresholds, setup.lambdas);
  } else {
    ev.alpha = accumulation_cdf(setup.scheme, 1, 0, setup.lambdas, setup.power, setup.rate_a);
    ev.beta = accumulation_cdf(setup.scheme, 0, 1, setup.lambdas, setup.power, setup.rate_b);
  }
  ev.gamma = dist.gamma();
  for (int n = 0; n <= setup.max_rounds; ++n) {
    for (int m = 0; m <= setup.max_rounds; ++m) {
      ev.terminal[terminal_label(n, m, setup.max_rounds)] = dist.packet(n, m);
    }
  }
  for (bool a : {true, false}) {
    for (bool b : {true, false}) {
      ev.first_round[first_round_label(a, b)] =
          (a ? 1.0 - ev.alpha : ev.alpha) * (b ? 1.0 - ev.beta : ev.beta);
    }
  }
  return ev;
}

double event_probability_general(int round_a, int round_b, const TwoUserSetup& setup) {
  if (round_a < 1 || round_a > setup.max_rounds || round_b < 1 || round_b > setup.max_rounds) {
    throw ContractViolation("event_probability_general: rounds must lie in 1..M");
  }
  return PacketDistribution(setup).event_probability(round_a, round_b);
}

double throughput_closed(const EventProbabilities& events, double rate_a, double rate_b) {
  double total = 0.0;
  double a_success = 0.0;
  double b_success = 0.0;
  for (const auto& [label, p] : events.terminal) {
    total += p;
    const auto b_pos = label.find('B');
    if (label.front() == 'A') a_success += p;
    if (label[b_pos - 1] != '~') b_success += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw ConsistencyError("terminal event probabilities sum to " + std::to_string(total));
  }
  return events.gamma * (rate_a * a_success + rate_b * b_success);
}

int diversity_gain(int helpers, int max_rounds) {
  if (helpers < 0 || max_rounds < 1) throw ContractViolation("diversity_gain: bad arguments");
  return (helpers + 1) * (max_rounds - 1) + 1;
}

}  // namespace coharq::analytic

#pragma once

#include <map>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "coharq/protocol.hpp"
#include "coharq/rates.hpp"

namespace coharq::analytic {

/// Gain thresholds C = (e^R - 1) / P: a single copy decodes iff g >= C.
struct ThresholdPair {
  double c_a = 0.0;
  double c_b = 0.0;

  static ThresholdPair from_rates(double rate_a, double rate_b, double power);
};

struct Lambdas {
  double band_1 = 1.0;  // user A's own band
  double band_2 = 1.0;  // user B's own band
};

/// alpha = Pr(A fails round 1), beta = Pr(B fails round 1).
std::pair<double, double> alpha_beta(const ThresholdPair& thresholds, const Lambdas& lambdas);

/// Probability that a slot starts a new packet (K = M = 2):
/// 1 / (1 + alpha + beta - alpha beta).
double gamma_norm(double alpha, double beta);

/// Pr(g2 + g2' + g1' < C_B): two copies from band 2 and one from band 1.
/// Closed form for distinct lambdas, Erlang-3 CDF when they coincide, and the
/// cancellation-free numerical route when they are nearly equal.
double phi_coordinated(const ThresholdPair& thresholds, const Lambdas& lambdas);

/// Erlang-2 CDF 1 - e^{-l c} - l c e^{-l c}.
double erlang2_cdf(double lambda, double c);

/// Per-slot outage frequency of user B for K = M = 2, RTD, full coordination:
/// gamma alpha Erlang2(lambda_2, C_B) + gamma (1 - alpha) Phi.
double outage_b_rtd_closed(const ThresholdPair& thresholds, const Lambdas& lambdas);

/// Partial fractions of (1 + Ps/l1)^{-n} (1 + Ps/l2)^{-m}:
/// sum_k a_k (1 + Ps/l1)^{-k} + sum_k b_k (1 + Ps/l2)^{-k}. Requires l1 != l2.
struct PartialFractionExpansion {
  int n = 0;
  int m = 0;
  double lambda_1 = 1.0;
  double lambda_2 = 1.0;
  double power = 1.0;
  std::vector<double> a;  // a[k-1] multiplies (1 + Ps/l1)^{-k}
  std::vector<double> b;

  static PartialFractionExpansion make(int n, int m, const Lambdas& lambdas, double power);

  double reconstruct(double s) const;
  double target(double s) const;
  /// Pr(S < y) for S = n Exp(l1) + m Exp(l2) variables, as a sum of Gamma CDFs.
  double sum_cdf(double y) const;
  double max_abs_coefficient() const;
};

/// Pr(log(1 + P S) < x), S = sum of n Exp(l1) and m Exp(l2) gains (RTD).
double cdf_rtd_sum(int n, int m, const Lambdas& lambdas, double power, double x);

/// Pr(sum of n log(1 + P g1) plus m log(1 + P g2) < x) (INR), by iterated
/// trapezoidal convolution on a uniform grid with Richardson extrapolation,
/// refined until successive estimates agree to 1e-9.
double cdf_inr_sum(int n, int m, const Lambdas& lambdas, double power, double x);

/// Dispatches to cdf_rtd_sum / cdf_inr_sum; zero copies give probability 1.
double accumulation_cdf(Scheme scheme, int n, int m, const Lambdas& lambdas, double power,
                        double rate);

/// Memo of accumulation_cdf keyed by all of its arguments; lets rate
/// searches reuse the per-user CDF values across rate pairs.
class CdfCache {
 public:
  double get(Scheme scheme, int n, int m, const Lambdas& lambdas, double power, double rate);
  std::size_t size() const { return values_.size(); }

 private:
  std::map<std::tuple<int, int, int, double, double, double, double>, double> values_;
};

/// Two-user SISO deployment evaluated analytically.
struct TwoUserSetup {
  Scheme scheme = Scheme::Rtd;
  bool coordinated = true;
  int max_rounds = 2;
  double rate_a = 1.0;
  double rate_b = 1.0;
  Lambdas lambdas;
  double power = 1.0;

  /// Requires K = 2, SISO, and a policy that donates to the single failed
  /// user (any coordinated kind behaves identically for K = 2).
  static TwoUserSetup from_config(const ProtocolConfig& config, const AllocationPolicy& policy);
};

/// Joint law of the terminal rounds (n, m) of one packet; index 0 is outage.
class PacketDistribution {
 public:
  explicit PacketDistribution(const TwoUserSetup& setup, CdfCache* cache = nullptr);

  const TwoUserSetup& setup() const { return setup_; }
  /// Per-packet probability; rounds in 1..M or kOutage.
  double packet(int round_a, int round_b) const;
  double total() const;

  /// E[slots per packet epoch] and gamma = 1 / E[slots].
  double expected_slots() const;
  double gamma() const { return 1.0 / expected_slots(); }

  double decode_probability(int user) const;   // per packet
  double outage_probability(int user) const;   // per packet
  /// Expected rounds a user is active per packet.
  double expected_rounds(int user) const;

  /// Outage events per slot. Coordinated: outage / E[slots]. Non-coordinated
  /// users run independent HARQ processes: outage / E[rounds of that user].
  double outage_per_slot(int user) const;
  double user_throughput(int user) const;
  double throughput() const;
  double fairness() const { return user_throughput(0) / user_throughput(1); }

  /// gamma * Pr(A_n B_m): the per-slot frequency of terminal event (n, m).
  double event_probability(int round_a, int round_b) const;

 private:
  TwoUserSetup setup_;
  std::vector<std::vector<double>> table_;  // (M+1) x (M+1)
};

/// Labels: "A1B1", "A1~B2" (B in outage after M = 2 rounds), "~A2~B2", ...
std::string terminal_label(int round_a, int round_b, int max_rounds);
std::string first_round_label(bool a_decoded, bool b_decoded);

/// Event algebra of one packet. `terminal` holds per-packet probabilities of
/// the terminal events (summing to 1) and `first_round` those of the
/// round-1 outcomes; per-slot frequencies are gamma times these.
struct EventProbabilities {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 1.0;
  int max_rounds = 2;
  std::map<std::string, double> terminal;
  std::map<std::string, double> first_round;

  double per_slot(const std::string& label) const;
  /// Per-slot algebra: the round-1 labels plus the terminal labels of packets
  /// that used more than one slot. Sums to 1.
  std::map<std::string, double> slot_partition() const;
};

EventProbabilities event_probabilities(const TwoUserSetup& setup);

/// gamma * Pr(A_n B_m) for rounds in 1..M.
double event_probability_general(int round_a, int round_b, const TwoUserSetup& setup);

/// Sum of R_u over the per-slot frequencies of events where u decodes.
/// Throws ConsistencyError when the terminal probabilities do not sum to 1.
double throughput_closed(const EventProbabilities& events, double rate_a, double rate_b);

/// (J + 1)(M - 1) + 1.
int diversity_gain(int helpers, int max_rounds);

}  // namespace coharq::analytic

#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "coharq/protocol.hpp"

namespace coharq {

enum class TargetKind {
  Outage,              // outage events per slot
  OutagePerPacket,     // Pr(outage) per packet
  Throughput,          // sum over users of delivered nats per slot
  UserThroughput,
  Fairness,            // eta_A / eta_B (K = 2)
  EventProb,           // per-slot frequency of a labelled event (K = 2)
  EventProbPerPacket,  // per-packet probability of a labelled event (K = 2)
  Slope
};

/// What an estimate refers to. `user` is -1 for aggregates (the mean over
/// users for outage targets).
struct Target {
  TargetKind kind = TargetKind::Outage;
  int user = -1;
  std::string label;

  /// CSV metric name, e.g. "outage", "event[A1~B2]".
  std::string metric() const;
  auto operator<=>(const Target&) const = default;
};

struct EstimateWithCI {
  double point = 0.0;
  std::uint64_t trials = 0;
  double half_width_95 = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  Target target;
  bool defined = true;  // false for a fairness ratio with eta_B == 0

  double standard_error() const { return half_width_95 / 1.96; }
};

/// Bernoulli CI: normal approximation, Wilson score interval when
/// successes < 30 (and for n p(1-p) that small the normal interval degenerates).
EstimateWithCI bernoulli_estimate(std::uint64_t successes, std::uint64_t trials, Target target);

/// Exact counts of per-packet outcome tuples (decode round of every user,
/// kOutage for a failure). Everything else is derived from the tuples, so
/// merging partial histograms in any order gives identical results.
class OutcomeHistogram {
 public:
  OutcomeHistogram() = default;
  OutcomeHistogram(int users, int max_rounds);

  int users() const { return users_; }
  int max_rounds() const { return max_rounds_; }
  std::uint64_t trials() const { return trials_; }

  void add(const std::vector<int>& decode_round);
  void merge(const OutcomeHistogram& other);

  /// Calls f(tuple, count) for every observed tuple in ascending code order.
  void for_each(const std::function<void(const std::vector<int>&, std::uint64_t)>& f) const;

  std::uint64_t count(const std::vector<int>& decode_round) const;
  std::uint64_t outages(int user) const;  // user -1: summed over users

  bool operator==(const OutcomeHistogram& other) const;

 private:
  std::uint64_t encode(const std::vector<int>& decode_round) const;
  std::vector<int> decode(std::uint64_t code) const;

  int users_ = 0;
  int max_rounds_ = 0;
  std::uint64_t trials_ = 0;
  bool dense_ = true;
  std::vector<std::uint64_t> dense_counts_;
  std::unordered_map<std::uint64_t, std::uint64_t> sparse_counts_;
};

/// Slots the epoch occupies and rounds a user is active, from the tuple.
int tuple_slots(const std::vector<int>& decode_round, int max_rounds);
int tuple_rounds(int decode_round, int max_rounds);

struct EstimateOptions {
  int threads = 0;                  // 0: hardware concurrency
  std::uint64_t first_trial = 0;    // trial indices first_trial .. first_trial + n - 1
};

/// Runs n_trials packets and returns their outcome histogram. Bit-identical
/// for every thread count.
OutcomeHistogram simulate(const ProtocolConfig& config, const AllocationPolicy& policy,
                          std::uint64_t n_trials, std::uint64_t master_seed,
                          const EstimateOptions& options = {});

/// Per-slot quantities follow the analytic conventions: coordinated
/// policies divide by the slots of the shared epoch, non-coordinated users
/// run independent HARQ processes and divide by their own rounds.
struct EstimateBundle {
  OutcomeHistogram histogram;
  std::map<Target, EstimateWithCI> values;

  const EstimateWithCI& at(const Target& target) const;
};

/// All targets derivable from a histogram; event targets only for K = 2.
EstimateBundle summarize(const OutcomeHistogram& histogram, const ProtocolConfig& config,
                         const AllocationPolicy& policy);

EstimateBundle estimate(const ProtocolConfig& config, const AllocationPolicy& policy,
                        std::uint64_t n_trials, std::uint64_t master_seed,
                        const EstimateOptions& options = {});

/// Closed-form counterparts of the summarize() targets for K = 2 SISO
/// deployments; empty otherwise.
std::map<Target, double> analytic_targets(const ProtocolConfig& config,
                                          const AllocationPolicy& policy);

inline constexpr std::uint64_t kOutageFloor = 10;

struct SweepOptions {
  int threads = 0;
  /// Adaptive trials: keep doubling the trial count at a point until the
  /// summed outage count reaches min_outages or max_trials is reached.
  std::uint64_t min_outages = 0;
  std::uint64_t max_trials = 0;
  bool with_analytic = true;
  /// Drop the remaining (higher-SNR) points once a point ends with fewer than
  /// kOutageFloor outages; under common random numbers they can only have fewer.
  bool stop_when_unresolvable = false;
};

struct SweepPoint {
  double snr_db = 0.0;
  EstimateBundle estimates;
  std::map<Target, double> analytic;
};

struct SweepResult {
  std::vector<double> axis;
  std::vector<SweepPoint> points;
};

double db_to_linear(double db);

/// Every point reuses master_seed, so trial t sees the same fading draws at
/// every SNR and outage is monotone in P trial by trial.
SweepResult sweep(const ProtocolConfig& config_template, const AllocationPolicy& policy,
                  const std::vector<double>& snr_points_db, std::uint64_t n_trials,
                  std::uint64_t master_seed, const SweepOptions& options = {});

/// Least-squares slope of log10(outage per slot) against log10(P) over the
/// points whose outage lies within `top_decades` decades of the smallest
/// resolvable outage. Points with fewer than kOutageFloor observed outages
/// are not resolvable. Returns the raw (negative) slope. Throws FitError with
/// fewer than three points in the window.
double fit_diversity_slope(const SweepResult& sweep, int user, double top_decades);

/// SNR at which the outage curve crosses epsilon, by linear interpolation of
/// log10(outage) in dB between the bracketing points. Throws FitError when
/// the curve does not cross.
double snr_at_outage(const std::vector<double>& snr_db, const std::vector<double>& outage,
                     double epsilon);

/// SNR_a(epsilon) - SNR_b(epsilon) in dB on the per-slot outage of `user`.
double energy_gain_at_outage(const SweepResult& sweep_a, const SweepResult& sweep_b,
                             double epsilon, int user = -1);

}  // namespace coharq

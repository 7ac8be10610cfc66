#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "coharq/montecarlo.hpp"
#include "coharq/protocol.hpp"

namespace coharq {

/// One run as described on the command line or in a config file section.
struct ExperimentConfig {
  std::string name;             // section name in config files
  std::string command = "sweep";  // sweep | optimize | preset
  std::string preset;
  Scheme scheme = Scheme::Rtd;
  PolicyKind policy = PolicyKind::FullCoordination;
  int users = 2;
  int max_rounds = 2;
  std::vector<double> lambdas{1.0, 1.0};
  int tx_antennas = 1;  // u
  int rx_antennas = 1;  // v
  std::vector<double> rates{1.0, 1.0};
  std::vector<double> rate_grid;  // per-user candidate values for optimize
  std::vector<double> snr_db;  // empty: preset default (presets) or 0 dB
  std::uint64_t trials = 100000;
  std::uint64_t seed = 1;
  std::string output;  // empty: stdout
  int threads = 0;
  std::uint64_t min_outages = 0;
  std::uint64_t max_trials = 0;

  /// Protocol parameters at one SNR point. A single lambda or rate is
  /// broadcast to every user.
  ProtocolConfig protocol(double snr_db) const;
  void validate() const;  // throws ConfigError
};

/// "a:step:b" (inclusive), "a,b,c" or a single number.
std::vector<double> parse_axis(const std::string& text);
std::vector<double> parse_list(const std::string& text);

/// Flat key/value file. Lines "[name]" open a section, "key = value" set a
/// field of the current section, '#' starts a comment. Keys mirror the
/// ExperimentConfig fields (k, m, lambdas, u, v, rates, rate_grid, snr_db,
/// trials, seed, output, ...).
std::vector<ExperimentConfig> parse_config_file(std::istream& in);
void apply_setting(ExperimentConfig& config, const std::string& key, const std::string& value);

struct ResultRow {
  double snr_db = 0.0;
  std::string scheme;
  std::string policy;
  int k = 2;
  int m = 2;
  int user = -1;  // -1 is written as "all"
  std::string metric;
  double mc_value = 0.0;
  double mc_ci95 = 0.0;
  std::optional<double> analytic_value;
  std::uint64_t trials = 0;
  std::uint64_t seed = 0;

  /// Field-wise equality, treating NaN as equal to NaN.
  bool operator==(const ResultRow& other) const;
};

inline constexpr const char* kCsvHeader =
    "snr_db,scheme,policy,k,m,user,metric,mc_value,mc_ci95,analytic_value,trials,seed";

void write_csv(std::ostream& out, const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_csv(std::istream& in);  // throws ConfigError on malformed input

/// Rows for selected targets at every sweep point.
std::vector<ResultRow> rows_from_sweep(const SweepResult& sweep, const ProtocolConfig& config,
                                       const AllocationPolicy& policy,
                                       const std::vector<Target>& targets, std::uint64_t seed);

struct RateChoice {
  std::vector<double> rates;
  double throughput = 0.0;
  double half_width_95 = 0.0;  // 0 for analytic evaluations
  bool analytic = false;
  std::uint64_t trials = 0;
};

struct OptimizeOptions {
  std::uint64_t trials = 20000;  // simulation path only
  std::uint64_t seed = 1;
};

/// Maximizes total throughput over the candidate rate vectors; ties go to the
/// smaller rate sum. Analytic for K = 2 SISO, otherwise by simulation on one
/// common set of recorded fading realizations.
RateChoice optimize_rates(const ProtocolConfig& config, const AllocationPolicy& policy,
                          const std::vector<std::vector<double>>& grid,
                          const OptimizeOptions& options = {});

/// Cartesian product of per-user candidate values.
std::vector<std::vector<double>> rate_grid_product(const std::vector<double>& values, int users);

/// Outcome tuples of K = 2 trials for arbitrary rates, computed from
/// per-trial accumulation tables instead of re-running the protocol.
class TwoUserRateTables {
 public:
  TwoUserRateTables(const ProtocolConfig& config, const AllocationPolicy& policy,
                    std::uint64_t trials, std::uint64_t seed);
  OutcomeHistogram outcomes(const std::vector<double>& rates) const;

 private:
  int rounds_ = 0;
  bool coordinated_ = false;
  std::uint64_t trials_ = 0;
  // own[(t * 2 + u) * M + k - 1]: nats of user u after k own copies.
  std::vector<double> own_;
  // helped[((t * 2 + u) * M + j) * M + k - 1]: nats after k own copies and
  // the partner's band from slot j (partner decoded in round j) up to slot k - 1.
  std::vector<double> helped_;
};

struct PresetOptions {
  std::uint64_t trials = 1000000;
  std::uint64_t seed = 42;
  int threads = 0;
  std::optional<std::vector<double>> snr_db;
  std::uint64_t optimize_trials = 20000;
  std::optional<std::vector<double>> rate_grid;
};

/// Configuration of one outage curve of the diversity preset.
struct CurveSpec {
  Scheme scheme = Scheme::Rtd;
  PolicyKind policy = PolicyKind::FullCoordination;
  int users = 2;
  int max_rounds = 2;
  double rate = 1.0;
  std::vector<double> snr_db;
  std::uint64_t max_trials = 0;  // per point; 0 means 100x the base count
};

/// Sweep used for outage-curve presets: adaptive trials (aiming at 100
/// outages per point, capped at max_trials), stopping once the curve falls
/// below the resolvability floor.
SweepResult outage_curve(const CurveSpec& curve, const PresetOptions& options);

/// Default SNR axis (dB) of the outage-curve presets.
std::vector<double> diversity_axis();

std::vector<std::string> preset_names();
/// Throws ConfigError for unknown names.
std::vector<ResultRow> run_preset(const std::string& name, const PresetOptions& options);

/// Executes one config-file section or CLI invocation.
std::vector<ResultRow> run_experiment(const ExperimentConfig& config);

}  // namespace coharq

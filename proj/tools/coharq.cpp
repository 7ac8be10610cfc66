// coharq: command-line front end for the coordinated HARQ simulator.

#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "coharq/analytic.hpp"
#include "coharq/experiments.hpp"

namespace {

using namespace coharq;

constexpr int kExitConfig = 2;
constexpr int kExitFit = 3;

struct ScenarioFlags {
  std::string scheme = "rtd";
  std::string policy = "coord";
  int k = 2;
  int m = 2;
  std::string lambdas = "1";
  int u = 1;
  int v = 1;
  std::string rates = "1";
  std::string snr_db;
  std::uint64_t trials = 100000;
  std::uint64_t seed = 1;
  int threads = 0;
  std::string out;
};

void add_scenario_flags(CLI::App* app, ScenarioFlags& f) {
  app->add_option("--scheme", f.scheme, "rtd or inr")->capture_default_str();
  app->add_option("--policy", f.policy, "noncoord, coord, random-split or round-robin")
      ->capture_default_str();
  app->add_option("--k", f.k, "number of users")->capture_default_str();
  app->add_option("--m", f.m, "maximum rounds per packet")->capture_default_str();
  app->add_option("--lambdas", f.lambdas, "fading parameter per band (one value broadcasts)")
      ->capture_default_str();
  app->add_option("--u", f.u, "transmit antennas")->capture_default_str();
  app->add_option("--v", f.v, "receive antennas")->capture_default_str();
  app->add_option("--rates", f.rates, "initial rate per user, nats per channel use")
      ->capture_default_str();
  app->add_option("--snr-db", f.snr_db, "SNR axis in dB: start:step:stop or a,b,c");
  app->add_option("--trials", f.trials, "Monte Carlo trials per point")->capture_default_str();
  app->add_option("--seed", f.seed, "master seed")->capture_default_str();
  app->add_option("--threads", f.threads, "worker threads (0: all cores)")->capture_default_str();
  app->add_option("--out", f.out, "output CSV (default: stdout)");
}

ExperimentConfig to_config(const ScenarioFlags& f, const std::string& command) {
  ExperimentConfig c;
  c.command = command;
  c.scheme = parse_scheme(f.scheme);
  c.policy = parse_policy(f.policy);
  c.users = f.k;
  c.max_rounds = f.m;
  c.lambdas = parse_list(f.lambdas);
  c.tx_antennas = f.u;
  c.rx_antennas = f.v;
  c.rates = parse_list(f.rates);
  if (!f.snr_db.empty()) c.snr_db = parse_axis(f.snr_db);
  c.trials = f.trials;
  c.seed = f.seed;
  c.threads = f.threads;
  c.output = f.out;
  return c;
}

void emit(const std::vector<ResultRow>& rows, const std::string& path) {
  if (path.empty() || path == "-") {
    write_csv(std::cout, rows);
    return;
  }
  std::ofstream file(path);
  if (!file) throw ConfigError("cannot open " + path + " for writing");
  write_csv(file, rows);
}

void write_trace(const ExperimentConfig& c, const std::string& path, std::uint64_t trials) {
  std::ofstream file(path);
  if (!file) throw ConfigError("cannot open " + path + " for writing");
  const auto config = c.protocol(c.snr_db.empty() ? 0.0 : c.snr_db.front());
  PacketSimulator sim(config, AllocationPolicy{c.policy});
  TraceWriter trace(file);
  trace.header();
  for (std::uint64_t t = 0; t < trials; ++t) sim.run(c.seed, t, &trace);
}

int analytic_op(const std::string& op, int n, int m, const std::string& lambdas_text,
                double power, double x, double rate_a, double rate_b, const std::string& scheme_text,
                const std::string& policy_text, int rounds, int helpers) {
  const auto l = parse_list(lambdas_text);
  const analytic::Lambdas lambdas{l.at(0), l.size() > 1 ? l[1] : l[0]};
  std::cout << std::setprecision(17);
  if (op == "cdf-rtd") {
    std::cout << analytic::cdf_rtd_sum(n, m, lambdas, power, x) << '\n';
  } else if (op == "cdf-inr") {
    std::cout << analytic::cdf_inr_sum(n, m, lambdas, power, x) << '\n';
  } else if (op == "phi") {
    const auto t = analytic::ThresholdPair::from_rates(rate_a, rate_b, power);
    std::cout << analytic::phi_coordinated(t, lambdas) << '\n';
  } else if (op == "outage-b") {
    const auto t = analytic::ThresholdPair::from_rates(rate_a, rate_b, power);
    std::cout << analytic::outage_b_rtd_closed(t, lambdas) << '\n';
  } else if (op == "partial-fractions") {
    const auto pf = analytic::PartialFractionExpansion::make(n, m, lambdas, power);
    for (std::size_t k = 0; k < pf.a.size(); ++k) std::cout << "a" << k + 1 << ',' << pf.a[k] << '\n';
    for (std::size_t k = 0; k < pf.b.size(); ++k) std::cout << "b" << k + 1 << ',' << pf.b[k] << '\n';
  } else if (op == "diversity") {
    std::cout << analytic::diversity_gain(helpers, rounds) << '\n';
  } else if (op == "events" || op == "throughput") {
    analytic::TwoUserSetup s;
    s.scheme = parse_scheme(scheme_text);
    s.coordinated = parse_policy(policy_text) != PolicyKind::NonCoordinated;
    s.max_rounds = rounds;
    s.rate_a = rate_a;
    s.rate_b = rate_b;
    s.lambdas = lambdas;
    s.power = power;
    const analytic::PacketDistribution dist(s);
    if (op == "throughput") {
      std::cout << "throughput," << dist.throughput() << '\n'
                << "user_throughput_a," << dist.user_throughput(0) << '\n'
                << "user_throughput_b," << dist.user_throughput(1) << '\n'
                << "outage_a," << dist.outage_per_slot(0) << '\n'
                << "outage_b," << dist.outage_per_slot(1) << '\n';
    } else {
      const auto ev = analytic::event_probabilities(s);
      std::cout << "label,per_packet,per_slot\n";
      for (const auto& [label, p] : ev.terminal) std::cout << label << ',' << p << ',' << ev.gamma * p << '\n';
    }
  } else {
    throw ConfigError("unknown analytic op '" + op +
                      "' (cdf-rtd, cdf-inr, phi, outage-b, partial-fractions, events, throughput, "
                      "diversity)");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coordinated HARQ over Rayleigh block fading: simulation and analysis"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run a figure preset");
  std::string preset;
  PresetOptions preset_options;
  std::string preset_out;
  std::string preset_snr;
  std::string preset_grid;
  run->add_option("--preset", preset, "fig1a, fig1b, fig1c or fig2")->required();
  run->add_option("--trials", preset_options.trials, "base trials per point")->capture_default_str();
  run->add_option("--seed", preset_options.seed, "master seed")->capture_default_str();
  run->add_option("--threads", preset_options.threads, "worker threads (0: all cores)");
  run->add_option("--optimize-trials", preset_options.optimize_trials,
                  "trials behind simulated rate searches")->capture_default_str();
  run->add_option("--snr-db", preset_snr, "override the preset SNR axis");
  run->add_option("--grid", preset_grid, "override the fig1c per-user rate grid");
  run->add_option("--out", preset_out, "output CSV (default: stdout)");

  ScenarioFlags sweep_flags;
  std::string trace_path;
  std::uint64_t trace_trials = 10;
  std::uint64_t min_outages = 0;
  std::uint64_t max_trials = 0;
  auto* sweep = app.add_subcommand("sweep", "outage, throughput and event estimates over SNR");
  add_scenario_flags(sweep, sweep_flags);
  sweep->add_option("--min-outages", min_outages, "adaptive trials: target outage count");
  sweep->add_option("--max-trials", max_trials, "adaptive trials: cap per point");
  sweep->add_option("--trace", trace_path, "write a per-slot protocol trace at the first SNR point");
  sweep->add_option("--trace-trials", trace_trials, "packets in the trace")->capture_default_str();

  ScenarioFlags opt_flags;
  std::string grid_text = "0.25:0.25:8";
  auto* optimize = app.add_subcommand("optimize", "exhaustive rate search maximizing throughput");
  add_scenario_flags(optimize, opt_flags);
  optimize->add_option("--grid", grid_text, "per-user rate values")->capture_default_str();

  std::string op;
  int an_n = 1, an_m = 1, an_rounds = 2, an_helpers = 1;
  std::string an_lambdas = "1";
  double an_power = 1.0, an_x = 1.0, an_ra = 1.0, an_rb = 1.0;
  std::string an_snr;
  std::string an_scheme = "rtd", an_policy = "coord";
  auto* analytic_cmd = app.add_subcommand("analytic", "evaluate a closed form directly");
  analytic_cmd->add_option("--op", op, "cdf-rtd, cdf-inr, phi, outage-b, partial-fractions, "
                                       "events, throughput, diversity")->required();
  analytic_cmd->add_option("--n", an_n, "copies from band 1")->capture_default_str();
  analytic_cmd->add_option("--m", an_m, "copies from band 2")->capture_default_str();
  analytic_cmd->add_option("--lambdas", an_lambdas, "lambda_1[,lambda_2]")->capture_default_str();
  analytic_cmd->add_option("--power", an_power, "linear transmit power")->capture_default_str();
  analytic_cmd->add_option("--snr-db", an_snr, "transmit power in dB (overrides --power)");
  analytic_cmd->add_option("--x", an_x, "CDF argument, nats")->capture_default_str();
  analytic_cmd->add_option("--rate-a", an_ra, "rate of user A")->capture_default_str();
  analytic_cmd->add_option("--rate-b", an_rb, "rate of user B")->capture_default_str();
  analytic_cmd->add_option("--scheme", an_scheme, "rtd or inr")->capture_default_str();
  analytic_cmd->add_option("--policy", an_policy, "coord or noncoord")->capture_default_str();
  analytic_cmd->add_option("--rounds", an_rounds, "maximum rounds M")->capture_default_str();
  analytic_cmd->add_option("--helpers", an_helpers, "helping users J")->capture_default_str();

  std::string batch_file;
  auto* batch = app.add_subcommand("batch", "run every section of a key/value config file");
  batch->add_option("file", batch_file, "config file")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) {
      if (!preset_snr.empty()) preset_options.snr_db = parse_axis(preset_snr);
      if (!preset_grid.empty()) preset_options.rate_grid = parse_axis(preset_grid);
      emit(run_preset(preset, preset_options), preset_out);
    } else if (*sweep) {
      auto c = to_config(sweep_flags, "sweep");
      c.min_outages = min_outages;
      c.max_trials = max_trials;
      c.validate();
      if (!trace_path.empty()) write_trace(c, trace_path, trace_trials);
      emit(run_experiment(c), c.output);
    } else if (*optimize) {
      auto c = to_config(opt_flags, "optimize");
      c.rate_grid = parse_axis(grid_text);
      emit(run_experiment(c), c.output);
    } else if (*analytic_cmd) {
      if (!an_snr.empty()) an_power = db_to_linear(std::stod(an_snr));
      return analytic_op(op, an_n, an_m, an_lambdas, an_power, an_x, an_ra, an_rb, an_scheme,
                         an_policy, an_rounds, an_helpers);
    } else if (*batch) {
      std::ifstream in(batch_file);
      const auto sections = parse_config_file(in);
      if (sections.empty()) throw ConfigError("no sections in " + batch_file);
      for (const auto& s : sections) {
        std::cerr << "running [" << s.name << "]\n";
        emit(run_experiment(s), s.output);
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ContractViolation& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const FitError& e) {
    std::cerr << "fit error: " << e.what() << '\n';
    return kExitFit;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

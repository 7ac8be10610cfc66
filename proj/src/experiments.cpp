#include "coharq/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include "coharq/analytic.hpp"

namespace coharq {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(item);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double to_double(const std::string& text) {
  const std::string t = trim(text);
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size()) throw ConfigError("not a number: '" + text + "'");
  return v;
}

long long to_integer(const std::string& text) {
  const std::string t = trim(text);
  char* end = nullptr;
  const long long v = std::strtoll(t.c_str(), &end, 10);
  if (t.empty() || end != t.c_str() + t.size()) {
    // Accept 1e6-style counts when they are exact integers.
    const double d = to_double(t);
    if (d != std::floor(d) || std::abs(d) > 9e18) throw ConfigError("not an integer: '" + text + "'");
    return static_cast<long long>(d);
  }
  return v;
}

std::uint64_t to_count(const std::string& text) {
  const long long v = to_integer(text);
  if (v < 0) throw ConfigError("expected a nonnegative count, got '" + text + "'");
  return static_cast<std::uint64_t>(v);
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.17g", v);
  return buffer;
}

std::vector<double> broadcast(const std::vector<double>& values, int users, const char* what) {
  if (values.size() == 1) return std::vector<double>(static_cast<std::size_t>(users), values[0]);
  if (static_cast<int>(values.size()) != users) {
    throw ConfigError(std::string("expected 1 or ") + std::to_string(users) + " " + what +
                      ", got " + std::to_string(values.size()));
  }
  return values;
}

bool same_double(double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); }

ProtocolConfig curve_config(const CurveSpec& c) {
  ProtocolConfig config;
  config.users = c.users;
  config.max_rounds = c.max_rounds;
  config.rates.assign(static_cast<std::size_t>(c.users), c.rate);
  config.scheme = c.scheme;
  config.fading.lambdas.assign(static_cast<std::size_t>(c.users), 1.0);
  return config;
}

}  // namespace

ProtocolConfig ExperimentConfig::protocol(double snr) const {
  if (users < 1) throw ConfigError("number of users must be >= 1");
  ProtocolConfig c;
  c.users = users;
  c.max_rounds = max_rounds;
  c.rates = broadcast(rates, users, "rates");
  c.power = db_to_linear(snr);
  c.scheme = scheme;
  c.fading.lambdas = broadcast(lambdas, users, "lambdas");
  c.fading.tx_antennas = tx_antennas;
  c.fading.rx_antennas = rx_antennas;
  return c;
}

void ExperimentConfig::validate() const {
  if (command != "sweep" && command != "optimize" && command != "preset") {
    throw ConfigError("unknown command '" + command + "' (expected sweep, optimize or preset)");
  }
  if (command == "preset") {
    if (preset.empty()) throw ConfigError("preset command needs a preset name");
    return;
  }
  if (trials < 1) throw ConfigError("trials must be >= 1");
  for (std::size_t i = 1; i < snr_db.size(); ++i) {
    if (!(snr_db[i] > snr_db[i - 1])) throw ConfigError("SNR axis must be strictly increasing");
  }
  protocol(snr_db.empty() ? 0.0 : snr_db.front()).validate();
  if (policy == PolicyKind::FullCoordination && users != 2) {
    throw ConfigError("full coordination is defined for two users; use random-split or round-robin");
  }
  if (command == "optimize" && rate_grid.empty()) {
    throw ConfigError("optimize needs a nonempty rate grid");
  }
  for (double r : rate_grid) {
    if (!(r >= 0.0)) throw ConfigError("rate grid values must be >= 0");
  }
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split(text, ',')) out.push_back(to_double(item));
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

std::vector<double> parse_axis(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.size() == 1) return parse_list(text);
  if (parts.size() != 3) throw ConfigError("range must look like start:step:stop, got '" + text + "'");
  const double start = to_double(parts[0]);
  const double step = to_double(parts[1]);
  const double stop = to_double(parts[2]);
  if (!(step > 0.0) || !(stop >= start)) throw ConfigError("bad range '" + text + "'");
  const auto count = static_cast<long long>(std::floor((stop - start) / step + 1e-9)) + 1;
  if (count > 1000000) throw ConfigError("range '" + text + "' has too many points");
  std::vector<double> out;
  for (long long i = 0; i < count; ++i) out.push_back(start + static_cast<double>(i) * step);
  return out;
}

void apply_setting(ExperimentConfig& c, const std::string& raw_key, const std::string& raw_value) {
  std::string key = trim(raw_key);
  std::replace(key.begin(), key.end(), '-', '_');
  const std::string value = trim(raw_value);
  if (key == "command") c.command = value;
  else if (key == "preset") c.preset = value;
  else if (key == "scheme") c.scheme = parse_scheme(value);
  else if (key == "policy") c.policy = parse_policy(value);
  else if (key == "k" || key == "users") c.users = static_cast<int>(to_integer(value));
  else if (key == "m" || key == "max_rounds") c.max_rounds = static_cast<int>(to_integer(value));
  else if (key == "lambdas") c.lambdas = parse_list(value);
  else if (key == "u" || key == "tx_antennas") c.tx_antennas = static_cast<int>(to_integer(value));
  else if (key == "v" || key == "rx_antennas") c.rx_antennas = static_cast<int>(to_integer(value));
  else if (key == "rates") c.rates = parse_list(value);
  else if (key == "rate_grid" || key == "grid") c.rate_grid = parse_axis(value);
  else if (key == "snr_db") c.snr_db = parse_axis(value);
  else if (key == "trials") c.trials = to_count(value);
  else if (key == "seed") c.seed = to_count(value);
  else if (key == "output" || key == "out") c.output = value;
  else if (key == "threads") c.threads = static_cast<int>(to_integer(value));
  else if (key == "min_outages") c.min_outages = to_count(value);
  else if (key == "max_trials") c.max_trials = to_count(value);
  else throw ConfigError("unknown key '" + raw_key + "'");
}

std::vector<ExperimentConfig> parse_config_file(std::istream& in) {
  std::vector<ExperimentConfig> sections;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": bad section header");
      sections.emplace_back();
      sections.back().name = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    if (sections.empty()) throw ConfigError("line " + std::to_string(line_no) + ": setting outside a section");
    try {
      apply_setting(sections.back(), line.substr(0, eq), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return sections;
}

bool ResultRow::operator==(const ResultRow& o) const {
  const bool analytic_equal =
      analytic_value.has_value() == o.analytic_value.has_value() &&
      (!analytic_value || same_double(*analytic_value, *o.analytic_value));
  return same_double(snr_db, o.snr_db) && scheme == o.scheme && policy == o.policy && k == o.k &&
         m == o.m && user == o.user && metric == o.metric && same_double(mc_value, o.mc_value) &&
         same_double(mc_ci95, o.mc_ci95) && analytic_equal && trials == o.trials && seed == o.seed;
}

void write_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << kCsvHeader << '\n';
  for (const auto& r : rows) {
    for (const auto* text : {&r.scheme, &r.policy, &r.metric}) {
      if (text->find(',') != std::string::npos || text->find('\n') != std::string::npos) {
        throw ContractViolation("CSV field contains a separator: " + *text);
      }
    }
    out << format_double(r.snr_db) << ',' << r.scheme << ',' << r.policy << ',' << r.k << ','
        << r.m << ',' << (r.user < 0 ? std::string("all") : std::to_string(r.user)) << ','
        << r.metric << ',' << format_double(r.mc_value) << ',' << format_double(r.mc_ci95) << ','
        << (r.analytic_value ? format_double(*r.analytic_value) : std::string()) << ','
        << r.trials << ',' << r.seed << '\n';
  }
}

std::vector<ResultRow> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != kCsvHeader) {
    throw ConfigError("CSV header mismatch");
  }
  std::vector<ResultRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 12) {
      throw ConfigError("CSV line " + std::to_string(line_no) + ": expected 12 fields");
    }
    ResultRow r;
    r.snr_db = to_double(f[0]);
    r.scheme = f[1];
    r.policy = f[2];
    r.k = static_cast<int>(to_integer(f[3]));
    r.m = static_cast<int>(to_integer(f[4]));
    r.user = f[5] == "all" ? -1 : static_cast<int>(to_integer(f[5]));
    r.metric = f[6];
    r.mc_value = to_double(f[7]);
    r.mc_ci95 = to_double(f[8]);
    if (!f[9].empty()) r.analytic_value = to_double(f[9]);
    r.trials = to_count(f[10]);
    r.seed = to_count(f[11]);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ResultRow> rows_from_sweep(const SweepResult& sweep, const ProtocolConfig& config,
                                       const AllocationPolicy& policy,
                                       const std::vector<Target>& targets, std::uint64_t seed) {
  std::vector<ResultRow> rows;
  for (const auto& p : sweep.points) {
    for (const auto& t : targets) {
      const auto it = p.estimates.values.find(t);
      if (it == p.estimates.values.end()) continue;
      ResultRow r;
      r.snr_db = p.snr_db;
      r.scheme = std::string(to_string(config.scheme));
      r.policy = std::string(to_string(policy.kind));
      r.k = config.users;
      r.m = config.max_rounds;
      r.user = t.user;
      r.metric = t.metric();
      r.mc_value = it->second.defined ? it->second.point : kNaN;
      r.mc_ci95 = it->second.defined ? it->second.half_width_95 : kNaN;
      if (const auto a = p.analytic.find(t); a != p.analytic.end()) r.analytic_value = a->second;
      r.trials = it->second.trials;
      r.seed = seed;
      rows.push_back(std::move(r));
    }
  }
  return rows;
}

std::vector<std::vector<double>> rate_grid_product(const std::vector<double>& values, int users) {
  if (values.empty()) throw ConfigError("rate grid is empty");
  if (users < 1) throw ConfigError("number of users must be >= 1");
  const double cells = std::pow(static_cast<double>(values.size()), users);
  if (cells > 5e6) throw ConfigError("rate grid too large for exhaustive search");
  std::vector<std::vector<double>> out(1);
  for (int k = 0; k < users; ++k) {
    std::vector<std::vector<double>> next;
    for (const auto& prefix : out) {
      for (double v : values) {
        next.push_back(prefix);
        next.back().push_back(v);
      }
    }
    out = std::move(next);
  }
  return out;
}

TwoUserRateTables::TwoUserRateTables(const ProtocolConfig& config, const AllocationPolicy& policy,
                                     std::uint64_t trials, std::uint64_t seed)
    : rounds_(config.max_rounds), coordinated_(policy.coordinated()), trials_(trials) {
  if (config.users != 2) throw ContractViolation("rate tables cover two users");
  const PacketSimulator sim(config, policy);
  const auto m = static_cast<std::size_t>(rounds_);
  own_.assign(trials * 2 * m, 0.0);
  helped_.assign(trials * 2 * m * m, 0.0);
  RateAccumulator acc(config.scheme, config.power, config.fading.tx_antennas,
                      config.fading.rx_antennas);
  for (std::uint64_t t = 0; t < trials; ++t) {
    const auto slots = sim.record(seed, t);
    for (std::size_t u = 0; u < 2; ++u) {
      const std::size_t partner = 1 - u;
      const std::size_t base = (t * 2 + u) * m;
      acc.reset();
      for (std::size_t k = 1; k <= m; ++k) {
        acc.add(slots[k - 1].effects[u]);
        own_[base + k - 1] = acc.accumulated_nats();
      }
      for (std::size_t j = 1; j < m; ++j) {
        acc.reset();
        for (std::size_t k = 1; k <= m; ++k) {
          acc.add(slots[k - 1].effects[u]);
          if (k > j) acc.add(slots[k - 1].effects[partner]);
          helped_[(base + j) * m + k - 1] = acc.accumulated_nats();
        }
      }
    }
  }
}

OutcomeHistogram TwoUserRateTables::outcomes(const std::vector<double>& rates) const {
  if (rates.size() != 2) throw ContractViolation("rate tables cover two users");
  const auto m = static_cast<std::size_t>(rounds_);
  OutcomeHistogram hist(2, rounds_);
  std::vector<int> tuple(2);
  for (std::uint64_t t = 0; t < trials_; ++t) {
    int own_round[2];
    for (std::size_t u = 0; u < 2; ++u) {
      own_round[u] = kOutage;
      const double* row = &own_[(t * 2 + u) * m];
      for (std::size_t k = 1; k <= m; ++k) {
        if (row[k - 1] >= rates[u]) {
          own_round[u] = static_cast<int>(k);
          break;
        }
      }
      tuple[u] = own_round[u];
    }
    if (coordinated_) {
      const int ea = own_round[0] == kOutage ? rounds_ + 1 : own_round[0];
      const int eb = own_round[1] == kOutage ? rounds_ + 1 : own_round[1];
      if (ea != eb) {
        const std::size_t early = ea < eb ? 0 : 1;
        const std::size_t late = 1 - early;
        const auto j = static_cast<std::size_t>(own_round[early]);
        const double* row = &helped_[((t * 2 + late) * m + j) * m];
        tuple[late] = kOutage;
        for (std::size_t k = j + 1; k <= m; ++k) {
          if (row[k - 1] >= rates[late]) {
            tuple[late] = static_cast<int>(k);
            break;
          }
        }
      }
    }
    hist.add(tuple);
  }
  return hist;
}

namespace {

double rate_sum(const std::vector<double>& r) {
  double s = 0.0;
  for (double v : r) s += v;
  return s;
}

// True when candidate (value, rates) beats the incumbent.
bool better(double value, const std::vector<double>& rates, const RateChoice& best) {
  if (best.rates.empty()) return true;
  const double scale = std::max({std::abs(value), std::abs(best.throughput), 1e-300});
  if (value > best.throughput + 1e-12 * scale) return true;
  if (value < best.throughput - 1e-12 * scale) return false;
  return rate_sum(rates) < rate_sum(best.rates);
}

}  // namespace

RateChoice optimize_rates(const ProtocolConfig& config, const AllocationPolicy& policy,
                          const std::vector<std::vector<double>>& grid,
                          const OptimizeOptions& options) {
  if (grid.empty()) throw ConfigError("rate grid is empty");
  for (const auto& rates : grid) {
    ProtocolConfig probe = config;
    probe.rates = rates;
    probe.validate();
  }
  RateChoice best;

  if (config.users == 2 && config.fading.siso()) {
    analytic::CdfCache cache;
    auto setup = analytic::TwoUserSetup::from_config(config, policy);
    for (const auto& rates : grid) {
      setup.rate_a = rates[0];
      setup.rate_b = rates[1];
      const double value = analytic::PacketDistribution(setup, &cache).throughput();
      if (better(value, rates, best)) {
        best.rates = rates;
        best.throughput = value;
      }
    }
    best.analytic = true;
    return best;
  }

  if (options.trials < 1) throw ConfigError("optimization needs at least one trial");
  auto consider = [&](const OutcomeHistogram& hist, const std::vector<double>& rates) {
    ProtocolConfig at = config;
    at.rates = rates;
    const auto bundle = summarize(hist, at, policy);
    const auto& e = bundle.at({TargetKind::Throughput, -1, {}});
    if (better(e.point, rates, best)) {
      best.rates = rates;
      best.throughput = e.point;
      best.half_width_95 = e.half_width_95;
    }
  };
  if (config.users == 2) {
    const TwoUserRateTables tables(config, policy, options.trials, options.seed);
    for (const auto& rates : grid) consider(tables.outcomes(rates), rates);
  } else {
    PacketSimulator sim(config, policy);
    std::vector<std::vector<SlotDraws>> recorded;
    recorded.reserve(options.trials);
    for (std::uint64_t t = 0; t < options.trials; ++t) recorded.push_back(sim.record(options.seed, t));
    for (const auto& rates : grid) {
      sim.set_rates(rates);
      OutcomeHistogram hist(config.users, config.max_rounds);
      for (std::uint64_t t = 0; t < options.trials; ++t) {
        hist.add(sim.replay(recorded[t], options.seed, t).decode_round);
      }
      consider(hist, rates);
    }
  }
  best.trials = options.trials;
  return best;
}

std::vector<double> diversity_axis() {
  // Coordinated curves fall below the resolvability floor near 23 dB and the
  // sweep stops there; non-coordinated curves need the full range.
  return parse_axis("0:1:30");
}

SweepResult outage_curve(const CurveSpec& curve, const PresetOptions& options) {
  const ProtocolConfig config = curve_config(curve);
  SweepOptions sweep_options;
  sweep_options.threads = options.threads;
  sweep_options.min_outages = 100;
  sweep_options.max_trials = curve.max_trials > 0 ? curve.max_trials : 100 * options.trials;
  sweep_options.stop_when_unresolvable = true;
  return sweep(config, AllocationPolicy{curve.policy}, curve.snr_db, options.trials, options.seed,
               sweep_options);
}

std::vector<std::string> preset_names() { return {"fig1a", "fig1b", "fig1c", "fig2"}; }

namespace {

ResultRow summary_row(const std::string& scheme, const std::string& policy, int k, int m,
                      const std::string& metric, double value, std::optional<double> analytic,
                      std::uint64_t trials, std::uint64_t seed) {
  ResultRow r;
  r.snr_db = kNaN;
  r.scheme = scheme;
  r.policy = policy;
  r.k = k;
  r.m = m;
  r.metric = metric;
  r.mc_value = value;
  r.mc_ci95 = kNaN;
  r.analytic_value = analytic;
  r.trials = trials;
  r.seed = seed;
  return r;
}

std::uint64_t total_trials(const SweepResult& s) {
  std::uint64_t n = 0;
  for (const auto& p : s.points) n += p.estimates.histogram.trials();
  return n;
}

std::vector<Target> outage_targets(int users) {
  std::vector<Target> t{{TargetKind::Outage, -1, {}}, {TargetKind::OutagePerPacket, -1, {}}};
  for (int k = 0; k < users; ++k) t.push_back({TargetKind::Outage, k, {}});
  return t;
}

std::vector<ResultRow> preset_fig1a(const PresetOptions& o) {
  std::vector<ResultRow> rows;
  for (Scheme scheme : {Scheme::Rtd, Scheme::Inr}) {
    for (int m : {2, 3}) {
      for (PolicyKind policy : {PolicyKind::FullCoordination, PolicyKind::NonCoordinated}) {
        CurveSpec spec{scheme, policy, 2, m, 1.0, o.snr_db.value_or(diversity_axis()), 0};
        const auto s = outage_curve(spec, o);
        const auto config = curve_config(spec);
        auto part = rows_from_sweep(s, config, AllocationPolicy{policy}, outage_targets(2), o.seed);
        rows.insert(rows.end(), part.begin(), part.end());
        const int helpers = policy == PolicyKind::NonCoordinated ? 0 : 1;
        try {
          const double slope = fit_diversity_slope(s, -1, 2.0);
          rows.push_back(summary_row(std::string(to_string(scheme)),
                                     std::string(to_string(policy)), 2, m, "diversity_slope",
                                     -slope, analytic::diversity_gain(helpers, m), total_trials(s),
                                     o.seed));
        } catch (const FitError& e) {
          std::cerr << "fig1a: no slope for " << to_string(scheme) << '/' << to_string(policy)
                    << " M=" << m << ": " << e.what() << '\n';
        }
      }
    }
  }
  return rows;
}

std::vector<ResultRow> preset_fig1b(const PresetOptions& o) {
  std::vector<ResultRow> rows;
  const double snr = o.snr_db && !o.snr_db->empty() ? o.snr_db->front() : 10.0;
  for (Scheme scheme : {Scheme::Rtd, Scheme::Inr}) {
    for (PolicyKind policy : {PolicyKind::FullCoordination, PolicyKind::NonCoordinated}) {
      for (double lambda2 : {1.0, 2.0, 4.0, 8.0}) {
        ProtocolConfig config;
        config.rates = {1.0, 1.0};
        config.power = db_to_linear(snr);
        config.scheme = scheme;
        config.fading.lambdas = {1.0, lambda2};
        const AllocationPolicy pol{policy};
        const auto b = estimate(config, pol, o.trials, o.seed, {o.threads, 0});
        const auto analytic = analytic_targets(config, pol);
        const Target fairness{TargetKind::Fairness, -1, {}};
        const auto& e = b.at(fairness);
        ResultRow r;
        r.snr_db = snr;
        r.scheme = std::string(to_string(scheme));
        r.policy = std::string(to_string(policy));
        r.metric = "fairness[lambda2=" + format_double(lambda2) + "]";
        r.mc_value = e.defined ? e.point : kNaN;
        r.mc_ci95 = e.defined ? e.half_width_95 : kNaN;
        if (const auto it = analytic.find(fairness); it != analytic.end()) r.analytic_value = it->second;
        r.trials = e.trials;
        r.seed = o.seed;
        rows.push_back(std::move(r));
      }
    }
  }
  return rows;
}

std::vector<ResultRow> preset_fig1c(const PresetOptions& o) {
  std::vector<ResultRow> rows;
  const auto axis = o.snr_db.value_or(parse_axis("0:2:30"));
  const auto values = o.rate_grid.value_or(parse_axis("0.25:0.25:16"));
  const auto grid = rate_grid_product(values, 2);
  for (int antennas : {1, 2}) {
    const std::string suffix = antennas == 1 ? "" : "_mimo2x2";
    for (PolicyKind policy : {PolicyKind::FullCoordination, PolicyKind::NonCoordinated}) {
      const AllocationPolicy pol{policy};
      for (double snr : axis) {
        ProtocolConfig config;
        config.rates = {1.0, 1.0};
        config.power = db_to_linear(snr);
        config.scheme = Scheme::Inr;
        config.fading.lambdas = {1.0, 1.0};
        config.fading.tx_antennas = antennas;
        config.fading.rx_antennas = antennas;
        const auto choice = optimize_rates(config, pol, grid, {o.optimize_trials, o.seed});
        ResultRow r;
        r.snr_db = snr;
        r.scheme = "inr";
        r.policy = std::string(to_string(policy));
        r.metric = "throughput_opt" + suffix;
        r.seed = o.seed;
        if (choice.analytic) {
          config.rates = choice.rates;
          const auto e = estimate(config, pol, o.trials, o.seed, {o.threads, 0})
                             .at({TargetKind::Throughput, -1, {}});
          r.mc_value = e.point;
          r.mc_ci95 = e.half_width_95;
          r.analytic_value = choice.throughput;
          r.trials = o.trials;
        } else {
          r.mc_value = choice.throughput;
          r.mc_ci95 = choice.half_width_95;
          r.trials = choice.trials;
        }
        rows.push_back(r);
        for (int k = 0; k < 2; ++k) {
          ResultRow rate_row = r;
          rate_row.user = k;
          rate_row.metric = "rate_opt" + suffix;
          rate_row.mc_value = choice.rates[static_cast<std::size_t>(k)];
          rate_row.mc_ci95 = 0.0;
          rate_row.analytic_value.reset();
          if (choice.analytic) rate_row.analytic_value = rate_row.mc_value;
          rows.push_back(rate_row);
        }
      }
    }
  }
  return rows;
}

std::vector<ResultRow> preset_fig2(const PresetOptions& o) {
  std::vector<ResultRow> rows;
  const auto axis = o.snr_db.value_or(parse_axis("0:1:30"));
  for (Scheme scheme : {Scheme::Rtd, Scheme::Inr}) {
    for (double rate : {1.0, 2.0}) {
      std::map<PolicyKind, SweepResult> curves;
      for (PolicyKind policy : {PolicyKind::RandomSplit, PolicyKind::NonCoordinated}) {
        CurveSpec spec{scheme, policy, 3, 2, rate, axis, 10 * o.trials};
        curves[policy] = outage_curve(spec, o);
        auto part = rows_from_sweep(curves[policy], curve_config(spec), AllocationPolicy{policy},
                                    outage_targets(3), o.seed);
        for (auto& r : part) r.metric += "[R=" + format_double(rate) + "]";
        rows.insert(rows.end(), part.begin(), part.end());
      }
      try {
        const double gain = energy_gain_at_outage(curves[PolicyKind::NonCoordinated],
                                                  curves[PolicyKind::RandomSplit], 1e-4);
        rows.push_back(summary_row(std::string(to_string(scheme)), "noncoord-vs-random-split", 3, 2,
                                   "energy_gain_db[R=" + format_double(rate) + ",eps=1e-4]", gain,
                                   std::nullopt,
                                   total_trials(curves[PolicyKind::NonCoordinated]) +
                                       total_trials(curves[PolicyKind::RandomSplit]),
                                   o.seed));
      } catch (const FitError& e) {
        std::cerr << "fig2: no energy gain for " << to_string(scheme) << " R=" << rate << ": "
                  << e.what() << '\n';
      }
    }
  }
  return rows;
}

}  // namespace

std::vector<ResultRow> run_preset(const std::string& name, const PresetOptions& options) {
  if (options.trials < 1) throw ConfigError("trials must be >= 1");
  if (name == "fig1a") return preset_fig1a(options);
  if (name == "fig1b") return preset_fig1b(options);
  if (name == "fig1c") return preset_fig1c(options);
  if (name == "fig2") return preset_fig2(options);
  throw ConfigError("unknown preset '" + name + "' (expected fig1a, fig1b, fig1c or fig2)");
}

std::vector<ResultRow> run_experiment(const ExperimentConfig& c) {
  c.validate();
  if (c.command == "preset") {
    PresetOptions o;
    o.trials = c.trials;
    o.seed = c.seed;
    o.threads = c.threads;
    if (!c.snr_db.empty()) o.snr_db = c.snr_db;
    if (!c.rate_grid.empty()) o.rate_grid = c.rate_grid;
    return run_preset(c.preset, o);
  }
  const std::vector<double> axis = c.snr_db.empty() ? std::vector<double>{0.0} : c.snr_db;
  const AllocationPolicy policy{c.policy};
  if (c.command == "optimize") {
    std::vector<ResultRow> rows;
    const auto grid = rate_grid_product(c.rate_grid, c.users);
    for (double snr : axis) {
      const auto config = c.protocol(snr);
      const auto choice = optimize_rates(config, policy, grid, {c.trials, c.seed});
      ResultRow r;
      r.snr_db = snr;
      r.scheme = std::string(to_string(c.scheme));
      r.policy = std::string(to_string(c.policy));
      r.k = c.users;
      r.m = c.max_rounds;
      r.metric = "throughput_opt";
      r.mc_value = choice.analytic ? kNaN : choice.throughput;
      r.mc_ci95 = choice.analytic ? kNaN : choice.half_width_95;
      if (choice.analytic) r.analytic_value = choice.throughput;
      r.trials = choice.trials;
      r.seed = c.seed;
      rows.push_back(r);
      for (int k = 0; k < c.users; ++k) {
        ResultRow rate_row = r;
        rate_row.user = k;
        rate_row.metric = "rate_opt";
        rate_row.mc_value = choice.rates[static_cast<std::size_t>(k)];
        rate_row.mc_ci95 = 0.0;
        rate_row.analytic_value.reset();
        rows.push_back(rate_row);
      }
    }
    return rows;
  }
  const auto config = c.protocol(axis.front());
  SweepOptions options;
  options.threads = c.threads;
  options.min_outages = c.min_outages;
  options.max_trials = c.max_trials;
  const auto s = sweep(config, policy, axis, c.trials, c.seed, options);
  std::vector<Target> targets = outage_targets(c.users);
  for (int k = 0; k < c.users; ++k) {
    targets.push_back({TargetKind::OutagePerPacket, k, {}});
    targets.push_back({TargetKind::UserThroughput, k, {}});
  }
  targets.push_back({TargetKind::Throughput, -1, {}});
  if (c.users == 2) {
    targets.push_back({TargetKind::Fairness, -1, {}});
    for (int n = 0; n <= c.max_rounds; ++n) {
      for (int m = 0; m <= c.max_rounds; ++m) {
        targets.push_back({TargetKind::EventProb, -1, analytic::terminal_label(n, m, c.max_rounds)});
      }
    }
  }
  return rows_from_sweep(s, config, policy, targets, c.seed);
}

}  // namespace coharq

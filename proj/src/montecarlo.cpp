#include "coharq/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <thread>

#include "coharq/analytic.hpp"

namespace coharq {

std::string Target::metric() const {
  switch (kind) {
    case TargetKind::Outage: return "outage";
    case TargetKind::OutagePerPacket: return "outage_per_packet";
    case TargetKind::Throughput: return "throughput";
    case TargetKind::UserThroughput: return "user_throughput";
    case TargetKind::Fairness: return "fairness";
    case TargetKind::EventProb: return "event[" + label + "]";
    case TargetKind::EventProbPerPacket: return "event_per_packet[" + label + "]";
    case TargetKind::Slope: return "slope";
  }
  return "unknown";
}

EstimateWithCI bernoulli_estimate(std::uint64_t successes, std::uint64_t trials, Target target) {
  if (trials == 0) throw ContractViolation("estimate needs at least one trial");
  constexpr double z = 1.96;
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  EstimateWithCI e;
  e.point = p;
  e.trials = trials;
  e.target = std::move(target);
  if (successes < 30) {
    const double centre = (p + z * z / (2 * n)) / (1 + z * z / n);
    const double spread = z / (1 + z * z / n) * std::sqrt(p * (1 - p) / n + z * z / (4 * n * n));
    e.lower = std::max(0.0, centre - spread);
    e.upper = std::min(1.0, centre + spread);
    e.half_width_95 = 0.5 * (e.upper - e.lower);
  } else {
    e.half_width_95 = z * std::sqrt(p * (1 - p) / n);
    e.lower = std::max(0.0, p - e.half_width_95);
    e.upper = std::min(1.0, p + e.half_width_95);
  }
  return e;
}

OutcomeHistogram::OutcomeHistogram(int users, int max_rounds)
    : users_(users), max_rounds_(max_rounds) {
  if (users < 1 || max_rounds < 1) throw ContractViolation("histogram: bad dimensions");
  double cells = std::pow(static_cast<double>(max_rounds) + 1.0, users);
  if (cells > 1.8e19) throw ContractViolation("histogram: outcome space too large");
  dense_ = cells <= 65536.0;
  if (dense_) dense_counts_.assign(static_cast<std::size_t>(cells), 0);
}

std::uint64_t OutcomeHistogram::encode(const std::vector<int>& decode_round) const {
  if (static_cast<int>(decode_round.size()) != users_) {
    throw ContractViolation("histogram: tuple size mismatch");
  }
  std::uint64_t code = 0;
  for (int k = users_ - 1; k >= 0; --k) {
    const int r = decode_round[static_cast<std::size_t>(k)];
    if (r < 0 || r > max_rounds_) throw ContractViolation("histogram: round out of range");
    code = code * static_cast<std::uint64_t>(max_rounds_ + 1) + static_cast<std::uint64_t>(r);
  }
  return code;
}

std::vector<int> OutcomeHistogram::decode(std::uint64_t code) const {
  std::vector<int> tuple(static_cast<std::size_t>(users_));
  for (auto& r : tuple) {
    r = static_cast<int>(code % static_cast<std::uint64_t>(max_rounds_ + 1));
    code /= static_cast<std::uint64_t>(max_rounds_ + 1);
  }
  return tuple;
}

void OutcomeHistogram::add(const std::vector<int>& decode_round) {
  const auto code = encode(decode_round);
  if (dense_) {
    ++dense_counts_[code];
  } else {
    ++sparse_counts_[code];
  }
  ++trials_;
}

void OutcomeHistogram::merge(const OutcomeHistogram& other) {
  if (other.users_ != users_ || other.max_rounds_ != max_rounds_) {
    throw ContractViolation("histogram: merging different shapes");
  }
  if (dense_) {
    for (std::size_t i = 0; i < dense_counts_.size(); ++i) dense_counts_[i] += other.dense_counts_[i];
  } else {
    for (const auto& [code, c] : other.sparse_counts_) sparse_counts_[code] += c;
  }
  trials_ += other.trials_;
}

void OutcomeHistogram::for_each(
    const std::function<void(const std::vector<int>&, std::uint64_t)>& f) const {
  if (dense_) {
    for (std::size_t i = 0; i < dense_counts_.size(); ++i) {
      if (dense_counts_[i] > 0) f(decode(i), dense_counts_[i]);
    }
    return;
  }
  std::vector<std::pair<std::uint64_t, std::uint64_t>> sorted(sparse_counts_.begin(),
                                                              sparse_counts_.end());
  std::sort(sorted.begin(), sorted.end());
  for (const auto& [code, c] : sorted) f(decode(code), c);
}

std::uint64_t OutcomeHistogram::count(const std::vector<int>& decode_round) const {
  const auto code = encode(decode_round);
  if (dense_) return dense_counts_[code];
  const auto it = sparse_counts_.find(code);
  return it == sparse_counts_.end() ? 0 : it->second;
}

std::uint64_t OutcomeHistogram::outages(int user) const {
  std::uint64_t total = 0;
  for_each([&](const std::vector<int>& t, std::uint64_t c) {
    for (int k = 0; k < users_; ++k) {
      if ((user < 0 || user == k) && t[static_cast<std::size_t>(k)] == kOutage) total += c;
    }
  });
  return total;
}

bool OutcomeHistogram::operator==(const OutcomeHistogram& other) const {
  if (users_ != other.users_ || max_rounds_ != other.max_rounds_ || trials_ != other.trials_) {
    return false;
  }
  bool equal = true;
  for_each([&](const std::vector<int>& t, std::uint64_t c) {
    if (other.count(t) != c) equal = false;
  });
  return equal;
}

int tuple_rounds(int decode_round, int max_rounds) {
  return decode_round == kOutage ? max_rounds : decode_round;
}

int tuple_slots(const std::vector<int>& decode_round, int max_rounds) {
  int slots = 0;
  for (int r : decode_round) slots = std::max(slots, tuple_rounds(r, max_rounds));
  return slots;
}

OutcomeHistogram simulate(const ProtocolConfig& config, const AllocationPolicy& policy,
                          std::uint64_t n_trials, std::uint64_t master_seed,
                          const EstimateOptions& options) {
  config.validate();
  if (n_trials < 1) throw ContractViolation("simulate: n_trials must be >= 1");
  std::uint64_t workers = options.threads > 0
                              ? static_cast<std::uint64_t>(options.threads)
                              : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n_trials);

  std::vector<OutcomeHistogram> partial(workers, OutcomeHistogram(config.users, config.max_rounds));
  std::vector<std::exception_ptr> errors(workers);
  auto work = [&](std::uint64_t w) {
    try {
      PacketSimulator sim(config, policy);
      const std::uint64_t begin = options.first_trial + n_trials * w / workers;
      const std::uint64_t end = options.first_trial + n_trials * (w + 1) / workers;
      for (std::uint64_t t = begin; t < end; ++t) {
        partial[w].add(sim.run(master_seed, t).decode_round);
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::uint64_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  OutcomeHistogram total(config.users, config.max_rounds);
  for (const auto& h : partial) total.merge(h);
  return total;
}

namespace {

// Per-trial numerator/denominator pair of a ratio-of-means estimator.
using Feature = std::function<double(const std::vector<int>&)>;

struct Ratio {
  Feature numerator;
  Feature denominator;
};

// sum_j w_j (sum y_j / sum x_j) with a delta-method standard error.
EstimateWithCI ratio_combination(const OutcomeHistogram& h, const std::vector<Ratio>& ratios,
                                 const std::vector<double>& weights, Target target) {
  const double n = static_cast<double>(h.trials());
  std::vector<double> ys(ratios.size(), 0.0);
  std::vector<double> xs(ratios.size(), 0.0);
  h.for_each([&](const std::vector<int>& t, std::uint64_t c) {
    for (std::size_t j = 0; j < ratios.size(); ++j) {
      ys[j] += static_cast<double>(c) * ratios[j].numerator(t);
      xs[j] += static_cast<double>(c) * ratios[j].denominator(t);
    }
  });
  std::vector<double> r(ratios.size());
  double point = 0.0;
  for (std::size_t j = 0; j < ratios.size(); ++j) {
    r[j] = ys[j] / xs[j];
    point += weights[j] * r[j];
  }
  double var = 0.0;
  h.for_each([&](const std::vector<int>& t, std::uint64_t c) {
    double psi = 0.0;
    for (std::size_t j = 0; j < ratios.size(); ++j) {
      psi += weights[j] * (ratios[j].numerator(t) - r[j] * ratios[j].denominator(t)) /
             (xs[j] / n);
    }
    var += static_cast<double>(c) * psi * psi;
  });
  EstimateWithCI e;
  e.point = point;
  e.trials = h.trials();
  e.half_width_95 = 1.96 * std::sqrt(var) / n;
  e.lower = point - e.half_width_95;
  e.upper = point + e.half_width_95;
  e.target = std::move(target);
  return e;
}

EstimateWithCI fairness_estimate(const OutcomeHistogram& h, const Ratio& a, const Ratio& b) {
  const double n = static_cast<double>(h.trials());
  double ya = 0, xa = 0, yb = 0, xb = 0;
  h.for_each([&](const std::vector<int>& t, std::uint64_t c) {
    const double w = static_cast<double>(c);
    ya += w * a.numerator(t);
    xa += w * a.denominator(t);
    yb += w * b.numerator(t);
    xb += w * b.denominator(t);
  });
  EstimateWithCI e;
  e.trials = h.trials();
  e.target = {TargetKind::Fairness, -1, {}};
  const double eta_a = ya / xa;
  const double eta_b = yb / xb;
  if (eta_b == 0.0) {
    e.defined = false;
    e.point = std::numeric_limits<double>::quiet_NaN();
    e.half_width_95 = std::numeric_limits<double>::quiet_NaN();
    e.lower = e.upper = e.point;
    return e;
  }
  double var = 0.0;
  h.for_each([&](const std::vector<int>& t, std::uint64_t c) {
    const double psi = (a.numerator(t) - eta_a * a.denominator(t)) / (xa / n) / eta_b -
                       eta_a / (eta_b * eta_b) * (b.numerator(t) - eta_b * b.denominator(t)) /
                           (xb / n);
    var += static_cast<double>(c) * psi * psi;
  });
  e.point = eta_a / eta_b;
  e.half_width_95 = 1.96 * std::sqrt(var) / n;
  e.lower = e.point - e.half_width_95;
  e.upper = e.point + e.half_width_95;
  return e;
}

}  // namespace

const EstimateWithCI& EstimateBundle::at(const Target& target) const {
  const auto it = values.find(target);
  if (it == values.end()) throw ContractViolation("no estimate for " + target.metric());
  return it->second;
}

EstimateBundle summarize(const OutcomeHistogram& histogram, const ProtocolConfig& config,
                         const AllocationPolicy& policy) {
  if (histogram.trials() == 0) throw ContractViolation("summarize: empty histogram");
  EstimateBundle bundle;
  bundle.histogram = histogram;
  auto& out = bundle.values;
  const int users = config.users;
  const int rounds = config.max_rounds;
  const bool shared = policy.coordinated();

  auto denominator = [&](int k) -> Feature {
    if (shared) return [rounds](const std::vector<int>& t) { return double(tuple_slots(t, rounds)); };
    return [rounds, k](const std::vector<int>& t) {
      return double(tuple_rounds(t[static_cast<std::size_t>(k)], rounds));
    };
  };
  auto outage_of = [](int k) -> Feature {
    return [k](const std::vector<int>& t) { return t[static_cast<std::size_t>(k)] == kOutage ? 1.0 : 0.0; };
  };
  auto nats_of = [&](int k) -> Feature {
    const double rate = config.rates[static_cast<std::size_t>(k)];
    return [k, rate](const std::vector<int>& t) {
      return t[static_cast<std::size_t>(k)] == kOutage ? 0.0 : rate;
    };
  };

  std::vector<Ratio> outage_ratios;
  std::vector<Ratio> nats_ratios;
  for (int k = 0; k < users; ++k) {
    outage_ratios.push_back({outage_of(k), denominator(k)});
    nats_ratios.push_back({nats_of(k), denominator(k)});
    const Target per_slot{TargetKind::Outage, k, {}};
    out[per_slot] = ratio_combination(histogram, {outage_ratios.back()}, {1.0}, per_slot);
    const Target per_packet{TargetKind::OutagePerPacket, k, {}};
    out[per_packet] = bernoulli_estimate(histogram.outages(k), histogram.trials(), per_packet);
    const Target thr{TargetKind::UserThroughput, k, {}};
    out[thr] = ratio_combination(histogram, {nats_ratios.back()}, {1.0}, thr);
  }
  const std::vector<double> mean_weights(static_cast<std::size_t>(users), 1.0 / users);
  const Target mean_outage{TargetKind::Outage, -1, {}};
  out[mean_outage] = ratio_combination(histogram, outage_ratios, mean_weights, mean_outage);
  const Target mean_packet{TargetKind::OutagePerPacket, -1, {}};
  out[mean_packet] = ratio_combination(
      histogram,
      std::vector<Ratio>(1, Ratio{[&](const std::vector<int>& t) {
                                    double s = 0;
                                    for (int r : t) s += r == kOutage ? 1.0 : 0.0;
                                    return s / users;
                                  },
                                  [](const std::vector<int>&) { return 1.0; }}),
      {1.0}, mean_packet);
  const Target total{TargetKind::Throughput, -1, {}};
  out[total] = ratio_combination(histogram, nats_ratios,
                                 std::vector<double>(static_cast<std::size_t>(users), 1.0), total);

  if (users == 2) {
    out[{TargetKind::Fairness, -1, {}}] = fairness_estimate(histogram, nats_ratios[0], nats_ratios[1]);
    const Feature slots = [rounds](const std::vector<int>& t) { return double(tuple_slots(t, rounds)); };
    const Feature one = [](const std::vector<int>&) { return 1.0; };
    auto add_event = [&](const std::string& label, Feature indicator) {
      const Target slot_target{TargetKind::EventProb, -1, label};
      out[slot_target] = ratio_combination(histogram, {Ratio{indicator, slots}}, {1.0}, slot_target);
      const Target packet_target{TargetKind::EventProbPerPacket, -1, label};
      std::uint64_t hits = 0;
      histogram.for_each([&](const std::vector<int>& t, std::uint64_t c) {
        if (indicator(t) > 0.0) hits += c;
      });
      out[packet_target] = bernoulli_estimate(hits, histogram.trials(), packet_target);
    };
    for (int n = 0; n <= rounds; ++n) {
      for (int m = 0; m <= rounds; ++m) {
        add_event(analytic::terminal_label(n, m, rounds), [n, m](const std::vector<int>& t) {
          return t[0] == n && t[1] == m ? 1.0 : 0.0;
        });
      }
    }
    for (bool a : {true, false}) {
      for (bool b : {true, false}) {
        add_event(analytic::first_round_label(a, b), [a, b](const std::vector<int>& t) {
          return (t[0] == 1) == a && (t[1] == 1) == b ? 1.0 : 0.0;
        });
      }
    }
  }
  return bundle;
}

EstimateBundle estimate(const ProtocolConfig& config, const AllocationPolicy& policy,
                        std::uint64_t n_trials, std::uint64_t master_seed,
                        const EstimateOptions& options) {
  return summarize(simulate(config, policy, n_trials, master_seed, options), config, policy);
}

std::map<Target, double> analytic_targets(const ProtocolConfig& config,
                                          const AllocationPolicy& policy) {
  std::map<Target, double> out;
  if (config.users != 2 || !config.fading.siso()) return out;
  const auto setup = analytic::TwoUserSetup::from_config(config, policy);
  const analytic::PacketDistribution dist(setup);
  for (int k = 0; k < 2; ++k) {
    out[{TargetKind::Outage, k, {}}] = dist.outage_per_slot(k);
    out[{TargetKind::OutagePerPacket, k, {}}] = dist.outage_probability(k);
    out[{TargetKind::UserThroughput, k, {}}] = dist.user_throughput(k);
  }
  out[{TargetKind::Outage, -1, {}}] = 0.5 * (dist.outage_per_slot(0) + dist.outage_per_slot(1));
  out[{TargetKind::OutagePerPacket, -1, {}}] =
      0.5 * (dist.outage_probability(0) + dist.outage_probability(1));
  out[{TargetKind::Throughput, -1, {}}] = dist.throughput();
  if (dist.user_throughput(1) > 0.0) out[{TargetKind::Fairness, -1, {}}] = dist.fairness();

  const auto events = analytic::event_probabilities(setup);
  for (const auto& [label, p] : events.terminal) {
    out[{TargetKind::EventProbPerPacket, -1, label}] = p;
    out[{TargetKind::EventProb, -1, label}] = events.gamma * p;
  }
  for (const auto& [label, p] : events.first_round) {
    out[{TargetKind::EventProbPerPacket, -1, label}] = p;
    out[{TargetKind::EventProb, -1, label}] = events.gamma * p;
  }
  return out;
}

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

SweepResult sweep(const ProtocolConfig& config_template, const AllocationPolicy& policy,
                  const std::vector<double>& snr_points_db, std::uint64_t n_trials,
                  std::uint64_t master_seed, const SweepOptions& options) {
  if (snr_points_db.empty()) throw ConfigError("sweep: empty SNR axis");
  for (std::size_t i = 1; i < snr_points_db.size(); ++i) {
    if (!(snr_points_db[i] > snr_points_db[i - 1])) {
      throw ConfigError("sweep: SNR axis must be strictly increasing");
    }
  }
  SweepResult result;
  const EstimateOptions base{options.threads, 0};
  for (double db : snr_points_db) {
    ProtocolConfig config = config_template;
    config.power = db_to_linear(db);
    auto hist = simulate(config, policy, n_trials, master_seed, base);
    while (options.min_outages > 0 && hist.outages(-1) < options.min_outages &&
           hist.trials() < options.max_trials) {
      const std::uint64_t extra = std::min(hist.trials(), options.max_trials - hist.trials());
      hist.merge(simulate(config, policy, extra, master_seed, {options.threads, hist.trials()}));
    }
    result.axis.push_back(db);
    SweepPoint point;
    point.snr_db = db;
    point.estimates = summarize(hist, config, policy);
    if (options.with_analytic) point.analytic = analytic_targets(config, policy);
    result.points.push_back(std::move(point));
    if (options.stop_when_unresolvable && hist.outages(-1) < kOutageFloor) break;
  }
  return result;
}

double fit_diversity_slope(const SweepResult& sweep, int user, double top_decades) {
  if (!(top_decades > 0.0)) throw ContractViolation("fit window must be positive");
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& p : sweep.points) {
    const auto& e = p.estimates.at({TargetKind::Outage, user, {}});
    if (p.estimates.histogram.outages(user) < kOutageFloor || !(e.point > 0.0)) continue;
    xs.push_back(p.snr_db / 10.0);
    ys.push_back(std::log10(e.point));
  }
  if (xs.empty()) {
    throw FitError("no SNR point has " + std::to_string(kOutageFloor) +
                   " or more outages; raise the trial count");
  }
  const double floor = *std::min_element(ys.begin(), ys.end());
  std::vector<double> wx;
  std::vector<double> wy;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (ys[i] <= floor + top_decades + 1e-12) {
      wx.push_back(xs[i]);
      wy.push_back(ys[i]);
    }
  }
  if (wx.size() < 3) {
    throw FitError("only " + std::to_string(wx.size()) +
                   " resolvable points in the fit window; raise the trial count or add SNR points");
  }
  const double n = static_cast<double>(wx.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < wx.size(); ++i) {
    mx += wx[i] / n;
    my += wy[i] / n;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < wx.size(); ++i) {
    sxy += (wx[i] - mx) * (wy[i] - my);
    sxx += (wx[i] - mx) * (wx[i] - mx);
  }
  return sxy / sxx;
}

double snr_at_outage(const std::vector<double>& snr_db, const std::vector<double>& outage,
                     double epsilon) {
  if (snr_db.size() != outage.size()) throw ContractViolation("snr_at_outage: size mismatch");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw ContractViolation("epsilon must lie in (0, 1)");
  for (std::size_t i = 0; i + 1 < snr_db.size(); ++i) {
    const double p0 = outage[i];
    const double p1 = outage[i + 1];
    if (!(p0 > 0.0) || !(p1 > 0.0)) continue;
    if (p0 == epsilon) return snr_db[i];
    if ((p0 - epsilon) * (p1 - epsilon) <= 0.0) {
      const double l0 = std::log10(p0);
      const double l1 = std::log10(p1);
      const double f = (std::log10(epsilon) - l0) / (l1 - l0);
      return snr_db[i] + f * (snr_db[i + 1] - snr_db[i]);
    }
  }
  throw FitError("outage curve does not cross " + std::to_string(epsilon) +
                 " on the given axis; extend the SNR range or raise the trial count");
}

double energy_gain_at_outage(const SweepResult& sweep_a, const SweepResult& sweep_b,
                             double epsilon, int user) {
  auto crossing = [&](const SweepResult& s) {
    std::vector<double> p;
    for (const auto& pt : s.points) p.push_back(pt.estimates.at({TargetKind::Outage, user, {}}).point);
    return snr_at_outage(s.axis, p, epsilon);
  };
  return crossing(sweep_a) - crossing(sweep_b);
}

}  // namespace coharq

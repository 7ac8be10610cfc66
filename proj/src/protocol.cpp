#include "coharq/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

namespace coharq {

void ProtocolConfig::validate() const {
  if (users < 1) throw ConfigError("number of users must be >= 1");
  if (max_rounds < 1) throw ConfigError("maximum number of rounds must be >= 1");
  if (max_rounds >= static_cast<int>(Substream::kMaxSlot)) {
    throw ConfigError("maximum number of rounds too large");
  }
  if (static_cast<int>(rates.size()) != users) {
    throw ConfigError("expected " + std::to_string(users) + " rates, got " +
                      std::to_string(rates.size()));
  }
  for (double r : rates) {
    if (!(r >= 0.0) || !std::isfinite(r)) throw ConfigError("rates must be finite and >= 0");
  }
  if (!(power > 0.0) || !std::isfinite(power)) throw ConfigError("power must be positive");
  fading.validate();
  if (fading.bands() != users) {
    throw ConfigError("fading profile must have one band per user");
  }
}

std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::NonCoordinated: return "noncoord";
    case PolicyKind::FullCoordination: return "coord";
    case PolicyKind::RandomSplit: return "random-split";
    case PolicyKind::RoundRobin: return "round-robin";
  }
  return "?";
}

PolicyKind parse_policy(std::string_view text) {
  if (text == "noncoord" || text == "non-coordinated" || text == "none") {
    return PolicyKind::NonCoordinated;
  }
  if (text == "coord" || text == "full") return PolicyKind::FullCoordination;
  if (text == "random-split" || text == "random") return PolicyKind::RandomSplit;
  if (text == "round-robin" || text == "rr") return PolicyKind::RoundRobin;
  throw ConfigError("unknown policy '" + std::string(text) +
                    "' (expected noncoord, coord, random-split or round-robin)");
}

namespace {

// Allocation core shared by policy_allocate and advance_slot; writes into
// caller-owned buffers so the per-slot hot path does not allocate.
void allocate_into(BandAssignment& out, std::vector<char>& failed_flag, const std::vector<int>& failed,
                   const std::vector<int>& bands, int users, const AllocationPolicy& policy,
                   const Substream* random, int slot) {
  out.assign(static_cast<std::size_t>(users), -1);
  for (int b : bands) {
    if (b < 0 || b >= users) throw ContractViolation("band index out of range");
  }
  if (failed.empty()) {
    for (int b : bands) out[static_cast<std::size_t>(b)] = b;
    return;
  }
  failed_flag.assign(static_cast<std::size_t>(users), 0);
  for (int u : failed) {
    if (u < 0 || u >= users) throw ContractViolation("failed user index out of range");
    failed_flag[static_cast<std::size_t>(u)] = 1;
  }

  std::size_t dealt = 0;
  for (int b : bands) {
    auto& slot_owner = out[static_cast<std::size_t>(b)];
    if (failed_flag[static_cast<std::size_t>(b)]) {
      slot_owner = b;
      continue;
    }
    switch (policy.kind) {
      case PolicyKind::NonCoordinated:
        break;
      case PolicyKind::FullCoordination:
        if (users != 2) throw ConfigError("full coordination is defined for two users");
        slot_owner = failed.front();
        break;
      case PolicyKind::RandomSplit: {
        if (random == nullptr) throw ContractViolation("random split needs a policy stream");
        const double u = random->uniforms(static_cast<std::uint32_t>(b),
                                          static_cast<std::uint32_t>(slot), 0)[1];
        auto pick = static_cast<std::size_t>(u * static_cast<double>(failed.size()));
        slot_owner = failed[std::min(pick, failed.size() - 1)];
        break;
      }
      case PolicyKind::RoundRobin:
        slot_owner = failed[dealt % failed.size()];
        ++dealt;
        break;
    }
  }
}

bool is_sorted_unique(const std::vector<int>& v) {
  return std::adjacent_find(v.begin(), v.end(), std::greater_equal<>()) == v.end();
}

}  // namespace

BandAssignment policy_allocate(const std::vector<int>& failed, const std::vector<int>& bands,
                               int users, const AllocationPolicy& policy, const Substream* random,
                               int slot) {
  std::vector<int> sorted_failed = failed;
  std::sort(sorted_failed.begin(), sorted_failed.end());
  std::vector<int> sorted_bands = bands;
  std::sort(sorted_bands.begin(), sorted_bands.end());
  if (!is_sorted_unique(sorted_failed) || !is_sorted_unique(sorted_bands)) {
    throw ContractViolation("policy_allocate: duplicate users or bands");
  }
  BandAssignment out;
  std::vector<char> flags;
  allocate_into(out, flags, sorted_failed, sorted_bands, users, policy, random, slot);
  return out;
}

bool SlotLedger::any_active() const {
  return std::any_of(users.begin(), users.end(),
                     [](const UserLedger& u) { return u.status == UserStatus::Active; });
}

SlotLedger make_ledger(const ProtocolConfig& config) {
  config.validate();
  SlotLedger ledger;
  ledger.assignment.resize(static_cast<std::size_t>(config.users));
  for (int b = 0; b < config.users; ++b) ledger.assignment[static_cast<std::size_t>(b)] = b;
  ledger.users.resize(static_cast<std::size_t>(config.users));
  for (auto& u : ledger.users) {
    u.accumulator = RateAccumulator(config.scheme, config.power, config.fading.tx_antennas,
                                    config.fading.rx_antennas);
  }
  return ledger;
}

namespace {

void check_assignment(const SlotLedger& ledger, const AllocationPolicy& policy) {
  const int users = static_cast<int>(ledger.users.size());
  if (static_cast<int>(ledger.assignment.size()) != users) {
    throw ProtocolError("assignment does not cover every band");
  }
  for (int b = 0; b < users; ++b) {
    const int u = ledger.assignment[static_cast<std::size_t>(b)];
    if (u < -1 || u >= users) throw ProtocolError("band assigned to an unknown user");
    if (u == -1) {
      if (policy.coordinated()) throw ProtocolError("band left idle while a user is active");
      continue;
    }
    if (ledger.users[static_cast<std::size_t>(u)].status != UserStatus::Active) {
      throw ProtocolError("band assigned to a finished user");
    }
    if (!policy.coordinated() && u != b) {
      throw ProtocolError("non-coordinated band served a foreign user");
    }
  }
}

}  // namespace

void advance_slot(SlotLedger& ledger, const SlotDraws& draws, const ProtocolConfig& config,
                  const AllocationPolicy& policy, const Substream& policy_stream) {
  if (!ledger.any_active()) throw ContractViolation("advance_slot: no active user");
  check_assignment(ledger, policy);
  const auto users = static_cast<std::size_t>(config.users);
  const bool use_effects = !draws.effects.empty();
  if (use_effects ? draws.effects.size() < users
                  : (config.fading.siso() ? draws.gains.size() < users
                                          : draws.matrices.size() < users)) {
    throw ContractViolation("advance_slot: draws do not cover every band");
  }

  for (std::size_t b = 0; b < users; ++b) {
    const int u = ledger.assignment[b];
    if (u < 0) continue;
    auto& acc = ledger.users[static_cast<std::size_t>(u)].accumulator;
    if (use_effects) {
      acc.add(draws.effects[b]);
    } else if (config.fading.siso()) {
      acc.add_gain(draws.gains[b].gain);
    } else {
      acc.add_matrix(draws.matrices[b].h);
    }
  }

  thread_local std::vector<int> failed;
  thread_local std::vector<int> all_bands;
  thread_local std::vector<char> flags;
  failed.clear();
  for (std::size_t k = 0; k < users; ++k) {
    auto& user = ledger.users[k];
    if (user.status != UserStatus::Active) continue;
    ++user.rounds_used;
    if (user.accumulator.decoded(config.rates[k])) {
      user.status = UserStatus::Decoded;
    } else if (user.rounds_used >= config.max_rounds) {
      user.status = UserStatus::Outage;
    } else {
      failed.push_back(static_cast<int>(k));
    }
  }
  ++ledger.slot;

  all_bands.resize(users);
  for (std::size_t b = 0; b < users; ++b) all_bands[b] = static_cast<int>(b);
  allocate_into(ledger.assignment, flags, failed, all_bands, config.users, policy,
                &policy_stream, ledger.slot);
}

void TraceWriter::header() {
  out_ << "trial,slot,band,user,scheme,decoded_users,failed_users\n";
}

void TraceWriter::slot(std::uint64_t trial, const SlotLedger& before, const SlotLedger& after,
                       Scheme scheme) {
  std::string decoded;
  std::string failed;
  for (std::size_t k = 0; k < after.users.size(); ++k) {
    if (before.users[k].status != UserStatus::Active) continue;
    std::string& target = after.users[k].status == UserStatus::Decoded ? decoded : failed;
    if (!target.empty()) target += ';';
    target += std::to_string(k);
  }
  for (std::size_t b = 0; b < before.assignment.size(); ++b) {
    out_ << trial << ',' << after.slot << ',' << b << ',' << before.assignment[b] << ','
         << to_string(scheme) << ',' << decoded << ',' << failed << '\n';
  }
}

PacketSimulator::PacketSimulator(ProtocolConfig config, AllocationPolicy policy)
    : config_(std::move(config)), policy_(policy), ledger_(make_ledger(config_)) {
  if (policy_.kind == PolicyKind::FullCoordination && config_.users != 2) {
    throw ConfigError("full coordination is defined for two users");
  }
  const auto users = static_cast<std::size_t>(config_.users);
  draws_.gains.resize(users);
  draws_.matrices.resize(users);
  outcome_.decode_round.resize(users);
  outcome_.nats_delivered.resize(users);
  outcome_.rounds_used.resize(users);
}

void PacketSimulator::set_rates(const std::vector<double>& rates) {
  ProtocolConfig next = config_;
  next.rates = rates;
  next.validate();
  config_.rates = rates;
}

void PacketSimulator::sample_slot(const Substream& fading, int slot, SlotDraws& out) const {
  for (int b = 0; b < config_.users; ++b) {
    if (ledger_.assignment[static_cast<std::size_t>(b)] < 0) continue;
    if (config_.fading.siso()) {
      out.gains[static_cast<std::size_t>(b)] = sample_gain(config_.fading, b, slot, fading);
    } else {
      out.matrices[static_cast<std::size_t>(b)] = sample_matrix(config_.fading, b, slot, fading);
    }
  }
}

void PacketSimulator::finish() {
  for (std::size_t k = 0; k < ledger_.users.size(); ++k) {
    const auto& user = ledger_.users[k];
    const bool ok = user.status == UserStatus::Decoded;
    outcome_.decode_round[k] = ok ? user.rounds_used : kOutage;
    outcome_.nats_delivered[k] = ok ? config_.rates[k] : 0.0;
    outcome_.rounds_used[k] = user.rounds_used;
  }
  outcome_.slots_consumed = ledger_.slot;
}

namespace {

void reset_ledger(SlotLedger& ledger) {
  ledger.slot = 0;
  for (std::size_t b = 0; b < ledger.assignment.size(); ++b) {
    ledger.assignment[b] = static_cast<int>(b);
  }
  for (auto& u : ledger.users) {
    u.accumulator.reset();
    u.rounds_used = 0;
    u.status = UserStatus::Active;
  }
}

}  // namespace

const PacketOutcome& PacketSimulator::run(std::uint64_t master_seed, std::uint64_t trial,
                                          TraceWriter* trace) {
  const Substream fading(master_seed, trial, StreamKind::Fading);
  const Substream policy_stream(master_seed, trial, StreamKind::Policy);
  reset_ledger(ledger_);
  while (ledger_.any_active()) {
    sample_slot(fading, ledger_.slot, draws_);
    if (trace != nullptr) {
      const SlotLedger before = ledger_;
      advance_slot(ledger_, draws_, config_, policy_, policy_stream);
      trace->slot(trial, before, ledger_, config_.scheme);
    } else {
      advance_slot(ledger_, draws_, config_, policy_, policy_stream);
    }
  }
  finish();
  return outcome_;
}

std::vector<SlotDraws> PacketSimulator::record(std::uint64_t master_seed,
                                               std::uint64_t trial) const {
  const Substream fading(master_seed, trial, StreamKind::Fading);
  const auto& probe = ledger_.users.front().accumulator;
  std::vector<SlotDraws> slots(static_cast<std::size_t>(config_.max_rounds));
  for (int t = 0; t < config_.max_rounds; ++t) {
    auto& s = slots[static_cast<std::size_t>(t)];
    s.effects.reserve(static_cast<std::size_t>(config_.users));
    for (int b = 0; b < config_.users; ++b) {
      if (config_.fading.siso()) {
        s.effects.push_back(probe.effect_of_gain(sample_gain(config_.fading, b, t, fading).gain));
      } else {
        s.effects.push_back(probe.effect_of_matrix(sample_matrix(config_.fading, b, t, fading).h));
      }
    }
  }
  return slots;
}

const PacketOutcome& PacketSimulator::replay(const std::vector<SlotDraws>& slots,
                                             std::uint64_t master_seed, std::uint64_t trial) {
  if (static_cast<int>(slots.size()) < config_.max_rounds) {
    throw ContractViolation("replay: recording shorter than the round limit");
  }
  const Substream policy_stream(master_seed, trial, StreamKind::Policy);
  reset_ledger(ledger_);
  while (ledger_.any_active()) {
    advance_slot(ledger_, slots[static_cast<std::size_t>(ledger_.slot)], config_, policy_,
                 policy_stream);
  }
  finish();
  return outcome_;
}

PacketOutcome run_packet(const ProtocolConfig& config, const AllocationPolicy& policy,
                         std::uint64_t master_seed, std::uint64_t trial) {
  PacketSimulator sim(config, policy);
  return sim.run(master_seed, trial);
}

}  // namespace coharq

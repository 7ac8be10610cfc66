#pragma once

#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "coharq/fading.hpp"
#include "coharq/rates.hpp"

namespace coharq {

/// Parameters of one coordinated-HARQ deployment. User k owns band k, so the
/// fading profile must have exactly `users` bands.
struct ProtocolConfig {
  int users = 2;       // K
  int max_rounds = 2;  // M
  std::vector<double> rates;  // initial rate R_u per user, nats per channel use
  double power = 1.0;         // P per band, linear
  Scheme scheme = Scheme::Rtd;
  FadingProfile fading;

  void validate() const;  // throws ConfigError
};

enum class PolicyKind {
  NonCoordinated,      // band k always serves user k
  FullCoordination,    // K = 2: a failed user gets both bands
  RandomSplit,         // free bands go to uniformly chosen failed users (K = 3 rule)
  RoundRobin           // free bands dealt cyclically over failed users
};

std::string_view to_string(PolicyKind kind);
PolicyKind parse_policy(std::string_view text);  // throws ConfigError

struct AllocationPolicy {
  PolicyKind kind = PolicyKind::NonCoordinated;
  bool coordinated() const { return kind != PolicyKind::NonCoordinated; }
};

/// Band -> user map for one slot; -1 marks a band that carries nothing of
/// the current packet epoch.
using BandAssignment = std::vector<int>;

/// Assigns `bands` for the next slot. Failed users keep their own band; the
/// remaining bands are distributed according to the policy. With no failed
/// users every band reverts to its owner. `random` supplies the tie-breaking
/// randomness of RandomSplit and may be null for the other policies.
BandAssignment policy_allocate(const std::vector<int>& failed, const std::vector<int>& bands,
                               int users, const AllocationPolicy& policy,
                               const Substream* random = nullptr, int slot = 0);

enum class UserStatus { Active, Decoded, Outage };

struct UserLedger {
  RateAccumulator accumulator;
  int rounds_used = 0;
  UserStatus status = UserStatus::Active;
};

/// Mutable state of one packet epoch. `slot` counts completed slots and
/// `assignment` is the allocation for the upcoming slot.
struct SlotLedger {
  int slot = 0;
  BandAssignment assignment;
  std::vector<UserLedger> users;

  bool any_active() const;
};

SlotLedger make_ledger(const ProtocolConfig& config);

/// Channel draws of every band for one slot: `gains` for SISO profiles,
/// `matrices` otherwise. `effects`, when non-empty, holds the per-band copy
/// contributions already reduced for the configured scheme and power and
/// takes precedence (used to replay one realization under many rate pairs).
struct SlotDraws {
  std::vector<GainDraw> gains;
  std::vector<ChannelMatrixDraw> matrices;
  std::vector<CopyEffect> effects;
};

/// One slot of the protocol: every active user absorbs the copies carried by
/// its bands, decoding is checked, statuses are updated, and the assignment
/// for the next slot is drawn from the policy. Throws ProtocolError if the
/// current assignment breaks the allocation invariants.
void advance_slot(SlotLedger& ledger, const SlotDraws& draws, const ProtocolConfig& config,
                  const AllocationPolicy& policy, const Substream& policy_stream);

inline constexpr int kOutage = 0;

struct PacketOutcome {
  std::vector<int> decode_round;    // 1..M, or kOutage
  std::vector<double> nats_delivered;
  std::vector<int> rounds_used;     // slots in which the user was active
  int slots_consumed = 0;
};

/// Protocol trace: one CSV line per (slot, band).
class TraceWriter {
 public:
  explicit TraceWriter(std::ostream& out) : out_(out) {}
  void header();
  void slot(std::uint64_t trial, const SlotLedger& before, const SlotLedger& after,
            Scheme scheme);

 private:
  std::ostream& out_;
};

/// Runs packets with reusable buffers. Fading and policy randomness of trial
/// t come from Substream(seed, t, ...), so outcomes are a pure function of
/// (config, policy, seed, trial).
class PacketSimulator {
 public:
  PacketSimulator(ProtocolConfig config, AllocationPolicy policy);

  const PacketOutcome& run(std::uint64_t master_seed, std::uint64_t trial,
                           TraceWriter* trace = nullptr);

  /// Replays a recorded realization: `slots[t].effects` must cover every band
  /// for t < M. Policy randomness still comes from (master_seed, trial).
  const PacketOutcome& replay(const std::vector<SlotDraws>& slots, std::uint64_t master_seed,
                              std::uint64_t trial);

  /// Records the copy effects of trial `trial` for all M slots.
  std::vector<SlotDraws> record(std::uint64_t master_seed, std::uint64_t trial) const;

  /// Rates may change between runs without rebuilding the simulator.
  void set_rates(const std::vector<double>& rates);

  const ProtocolConfig& config() const { return config_; }
  const AllocationPolicy& policy() const { return policy_; }

 private:
  void sample_slot(const Substream& fading, int slot, SlotDraws& out) const;
  void finish();

  ProtocolConfig config_;
  AllocationPolicy policy_;
  SlotLedger ledger_;
  SlotDraws draws_;
  PacketOutcome outcome_;
};

PacketOutcome run_packet(const ProtocolConfig& config, const AllocationPolicy& policy,
                         std::uint64_t master_seed, std::uint64_t trial);

}  // namespace coharq

#pragma once

#include <span>
#include <string_view>
#include <vector>

#include "coharq/fading.hpp"

namespace coharq {

/// HARQ combining scheme.
///  - Rtd: repetition time diversity, the receiver combines copies (SNRs add).
///  - Inr: incremental redundancy, mutual informations add.
enum class Scheme { Rtd, Inr };

std::string_view to_string(Scheme scheme);
Scheme parse_scheme(std::string_view text);  // "rtd" | "inr", throws ConfigError

/// Per-packet received copies of one user (SISO view). Append-only.
struct AccumulationState {
  Scheme scheme = Scheme::Rtd;
  std::vector<double> snr_terms;  // g * P per copy
  std::vector<double> mi_terms;   // log(1 + SNR) per copy, nats
  int copies = 0;
};

/// (1/m) log(1 + sum SNR). Throws ContractViolation on an empty list.
double u_rtd(std::span<const double> snr_terms);
/// (1/m) sum log(1 + SNR). Throws ContractViolation on an empty list.
double u_inr(std::span<const double> snr_terms);

/// Total accumulated nats m * U_(m) of a SISO state (0 when no copies).
double accumulated_nats(const AccumulationState& state);

/// Decoding succeeds when accumulated nats reach the initial rate R.
/// The boundary m * U_(m) == R counts as success.
bool decode_success(const AccumulationState& state, double initial_rate);

struct MimoRateInputs {
  std::vector<ComplexMatrix> matrices;  // each rx x tx
  double power = 1.0;
  int tx_antennas = 1;
};

/// (1/m) log det(I_{mv} + (P/u) H H^*) with H the vertical stack of all matrices.
double mimo_rate_rtd(const MimoRateInputs& inputs);
/// (1/m) sum_i log det(I_v + (P/u) H_i H_i^*).
double mimo_rate_inr(const MimoRateInputs& inputs);

/// log det(I + X) for Hermitian positive semi-definite X, via Cholesky.
double log_det_identity_plus(const ComplexMatrix& x);

/// Contribution of one received copy, precomputed for a fixed scheme and
/// power: the SNR (SISO RTD), the mutual information in nats (INR), or the
/// scaled Gram matrix (P/u) H^* H (MIMO RTD).
struct CopyEffect {
  double value = 0.0;
  ComplexMatrix gram;
};

/// Running decodability state used by the protocol engine. Handles SISO
/// gains and MIMO matrices with O(1) work per copy: RTD keeps the summed
/// SNR (or the u x u Gram sum (P/u) sum H^*H), INR keeps summed nats.
class RateAccumulator {
 public:
  RateAccumulator() = default;
  RateAccumulator(Scheme scheme, double power, int tx_antennas = 1, int rx_antennas = 1);

  void reset();
  void add_gain(double gain) { add(effect_of_gain(gain)); }
  void add_matrix(const ComplexMatrix& h) { add(effect_of_matrix(h)); }
  void add(const CopyEffect& effect);

  CopyEffect effect_of_gain(double gain) const;
  CopyEffect effect_of_matrix(const ComplexMatrix& h) const;

  double accumulated_nats() const;
  bool decoded(double initial_rate) const { return accumulated_nats() >= initial_rate; }
  int copies() const { return state_.copies; }
  const AccumulationState& state() const { return state_; }

 private:
  double power_ = 1.0;
  int tx_antennas_ = 1;
  bool mimo_ = false;
  AccumulationState state_;
  double snr_sum_ = 0.0;
  double mi_sum_ = 0.0;
  ComplexMatrix gram_;
};

}  // namespace coharq

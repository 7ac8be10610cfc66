#include "coharq/rates.hpp"

#include <cmath>
#include <numeric>
#include <string>

namespace coharq {

std::string_view to_string(Scheme scheme) {
  return scheme == Scheme::Rtd ? "rtd" : "inr";
}

Scheme parse_scheme(std::string_view text) {
  if (text == "rtd" || text == "RTD") return Scheme::Rtd;
  if (text == "inr" || text == "INR") return Scheme::Inr;
  throw ConfigError("unknown scheme '" + std::string(text) + "' (expected rtd or inr)");
}

double u_rtd(std::span<const double> snr_terms) {
  if (snr_terms.empty()) throw ContractViolation("u_rtd: empty SNR list");
  const double total = std::accumulate(snr_terms.begin(), snr_terms.end(), 0.0);
  return std::log1p(total) / static_cast<double>(snr_terms.size());
}

double u_inr(std::span<const double> snr_terms) {
  if (snr_terms.empty()) throw ContractViolation("u_inr: empty SNR list");
  double total = 0.0;
  for (double snr : snr_terms) total += std::log1p(snr);
  return total / static_cast<double>(snr_terms.size());
}

double accumulated_nats(const AccumulationState& state) {
  if (state.copies == 0) return 0.0;
  if (state.scheme == Scheme::Rtd) {
    return std::log1p(std::accumulate(state.snr_terms.begin(), state.snr_terms.end(), 0.0));
  }
  if (!state.mi_terms.empty()) {
    return std::accumulate(state.mi_terms.begin(), state.mi_terms.end(), 0.0);
  }
  return u_inr(state.snr_terms) * static_cast<double>(state.snr_terms.size());
}

bool decode_success(const AccumulationState& state, double initial_rate) {
  return accumulated_nats(state) >= initial_rate;
}

double log_det_identity_plus(const ComplexMatrix& x) {
  const ComplexMatrix a = ComplexMatrix::Identity(x.rows(), x.cols()) + x;
  Eigen::LLT<ComplexMatrix> llt(a);
  if (llt.info() != Eigen::Success) {
    throw ContractViolation("log_det_identity_plus: matrix is not positive definite");
  }
  const auto& l = llt.matrixLLT();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) sum += std::log(l(i, i).real());
  return 2.0 * sum;
}

namespace {

void check_inputs(const MimoRateInputs& inputs) {
  if (inputs.matrices.empty()) throw ContractViolation("MIMO rate: no matrices");
  if (inputs.tx_antennas < 1) throw ContractViolation("MIMO rate: tx_antennas < 1");
  const auto rows = inputs.matrices.front().rows();
  for (const auto& h : inputs.matrices) {
    if (h.rows() != rows || h.cols() != inputs.tx_antennas) {
      throw ContractViolation("MIMO rate: matrix dimension mismatch");
    }
  }
}

}  // namespace

double mimo_rate_rtd(const MimoRateInputs& inputs) {
  check_inputs(inputs);
  // Sylvester: det(I_{mv} + c H H^*) = det(I_u + c H^* H), and the stacked
  // H^* H is the sum of the per-copy Gram matrices.
  const double scale = inputs.power / inputs.tx_antennas;
  ComplexMatrix gram = ComplexMatrix::Zero(inputs.tx_antennas, inputs.tx_antennas);
  for (const auto& h : inputs.matrices) gram.noalias() += scale * h.adjoint() * h;
  return log_det_identity_plus(gram) / static_cast<double>(inputs.matrices.size());
}

double mimo_rate_inr(const MimoRateInputs& inputs) {
  check_inputs(inputs);
  const double scale = inputs.power / inputs.tx_antennas;
  double total = 0.0;
  for (const auto& h : inputs.matrices) {
    total += log_det_identity_plus(scale * h.adjoint() * h);
  }
  return total / static_cast<double>(inputs.matrices.size());
}

RateAccumulator::RateAccumulator(Scheme scheme, double power, int tx_antennas,
                                 int rx_antennas)
    : power_(power), tx_antennas_(tx_antennas), mimo_(tx_antennas != 1 || rx_antennas != 1) {
  if (!(power >= 0.0)) throw ContractViolation("RateAccumulator: negative power");
  if (tx_antennas < 1 || rx_antennas < 1) {
    throw ContractViolation("RateAccumulator: antenna counts must be >= 1");
  }
  state_.scheme = scheme;
  if (mimo_) gram_ = ComplexMatrix::Zero(tx_antennas, tx_antennas);
}

void RateAccumulator::reset() {
  state_.snr_terms.clear();
  state_.mi_terms.clear();
  state_.copies = 0;
  snr_sum_ = 0.0;
  mi_sum_ = 0.0;
  if (mimo_) gram_.setZero();
}

CopyEffect RateAccumulator::effect_of_gain(double gain) const {
  if (mimo_) throw ContractViolation("RateAccumulator: scalar gain on a MIMO link");
  const double snr = gain * power_;
  return {state_.scheme == Scheme::Rtd ? snr : std::log1p(snr), {}};
}

CopyEffect RateAccumulator::effect_of_matrix(const ComplexMatrix& h) const {
  if (!mimo_) {
    if (h.rows() != 1 || h.cols() != 1) throw ContractViolation("RateAccumulator: bad matrix");
    return effect_of_gain(std::norm(h(0, 0)));
  }
  if (h.cols() != tx_antennas_) throw ContractViolation("RateAccumulator: dimension mismatch");
  const double scale = power_ / tx_antennas_;
  ComplexMatrix gram = scale * h.adjoint() * h;
  if (state_.scheme == Scheme::Inr) return {log_det_identity_plus(gram), {}};
  return {0.0, std::move(gram)};
}

void RateAccumulator::add(const CopyEffect& effect) {
  ++state_.copies;
  if (state_.scheme == Scheme::Inr) {
    if (!mimo_) state_.snr_terms.push_back(std::expm1(effect.value));
    state_.mi_terms.push_back(effect.value);
    mi_sum_ += effect.value;
  } else if (mimo_) {
    gram_ += effect.gram;
  } else {
    state_.snr_terms.push_back(effect.value);
    snr_sum_ += effect.value;
  }
}

double RateAccumulator::accumulated_nats() const {
  if (state_.copies == 0) return 0.0;
  if (state_.scheme == Scheme::Inr) return mi_sum_;
  if (mimo_) return log_det_identity_plus(gram_);
  return std::log1p(snr_sum_);
}

}  // namespace coharq

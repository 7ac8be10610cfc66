#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "coharq/errors.hpp"
#include "coharq/rng.hpp"

namespace coharq {

using ComplexMatrix = Eigen::MatrixXcd;

/// Rayleigh block-fading environment: one fading parameter per band.
/// The gain of band i is Exponential with rate lambdas[i] (mean 1/lambda).
struct FadingProfile {
  std::vector<double> lambdas;
  int tx_antennas = 1;
  int rx_antennas = 1;

  int bands() const { return static_cast<int>(lambdas.size()); }
  bool siso() const { return tx_antennas == 1 && rx_antennas == 1; }

  /// Throws ConfigError when an invariant is broken.
  void validate() const;
};

struct GainDraw {
  int band = 0;
  int slot = 0;
  double gain = 0.0;  // |h|^2, linear
};

struct ChannelMatrixDraw {
  int band = 0;
  int slot = 0;
  ComplexMatrix h;  // rx x tx
};

/// Channel gain of `band` at `slot`. Uses the same counter as entry (0, 0)
/// of sample_matrix, so SISO gains and 1x1 matrices agree exactly.
GainDraw sample_gain(const FadingProfile& profile, int band, int slot,
                     const Substream& stream);

/// i.i.d. circularly-symmetric complex Gaussian entries, E|H_ab|^2 = 1/lambda.
ChannelMatrixDraw sample_matrix(const FadingProfile& profile, int band, int slot,
                                const Substream& stream);

}  // namespace coharq

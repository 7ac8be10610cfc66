#include "coharq/fading.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace coharq {

Philox4x32::Block Substream::block(std::uint32_t band, std::uint32_t slot,
                                   std::uint32_t index) const {
  if (band >= kMaxBand || slot >= kMaxSlot || index >= kMaxIndex) {
    throw std::out_of_range("substream address out of range");
  }
  const Philox4x32::Block counter{
      static_cast<std::uint32_t>(trial_), static_cast<std::uint32_t>(trial_ >> 32),
      (static_cast<std::uint32_t>(kind_) << 24) | band, (slot << 12) | index};
  return Philox4x32::generate(counter, key_);
}

std::array<double, 2> Substream::uniforms(std::uint32_t band, std::uint32_t slot,
                                          std::uint32_t index) const {
  constexpr double kScale = 0x1.0p-53;
  const auto b = block(band, slot, index);
  const std::uint64_t first = (std::uint64_t{b[1]} << 32) | b[0];
  const std::uint64_t second = (std::uint64_t{b[3]} << 32) | b[2];
  return {static_cast<double>((first >> 11) + 1) * kScale,
          static_cast<double>(second >> 11) * kScale};
}

void FadingProfile::validate() const {
  if (lambdas.empty()) throw ConfigError("fading profile has no bands");
  for (double l : lambdas) {
    if (!(l > 0.0) || !std::isfinite(l)) {
      throw ConfigError("fading parameter must be positive, got " + std::to_string(l));
    }
  }
  if (tx_antennas < 1 || rx_antennas < 1) {
    throw ConfigError("antenna counts must be >= 1");
  }
  if (tx_antennas * rx_antennas > static_cast<int>(Substream::kMaxIndex)) {
    throw ConfigError("antenna array too large");
  }
}

namespace {

double band_lambda(const FadingProfile& profile, int band) {
  if (band < 0 || band >= profile.bands()) {
    throw ConfigError("band index " + std::to_string(band) + " out of range");
  }
  const double lambda = profile.lambdas[static_cast<std::size_t>(band)];
  if (!(lambda > 0.0)) throw ConfigError("fading parameter must be positive");
  return lambda;
}

}  // namespace

GainDraw sample_gain(const FadingProfile& profile, int band, int slot,
                     const Substream& stream) {
  const double lambda = band_lambda(profile, band);
  const auto u = stream.uniforms(static_cast<std::uint32_t>(band),
                                 static_cast<std::uint32_t>(slot), 0);
  return {band, slot, -std::log(u[0]) / lambda};
}

ChannelMatrixDraw sample_matrix(const FadingProfile& profile, int band, int slot,
                                const Substream& stream) {
  const double lambda = band_lambda(profile, band);
  const int rows = profile.rx_antennas;
  const int cols = profile.tx_antennas;
  if (rows < 1 || cols < 1) throw ConfigError("antenna counts must be >= 1");

  ChannelMatrixDraw draw{band, slot, ComplexMatrix(rows, cols)};
  for (int a = 0; a < rows; ++a) {
    for (int b = 0; b < cols; ++b) {
      const auto u = stream.uniforms(static_cast<std::uint32_t>(band),
                                     static_cast<std::uint32_t>(slot),
                                     static_cast<std::uint32_t>(a * cols + b));
      // Box-Muller on the complex plane: |h|^2 = -log(u0) / lambda exactly.
      const double radius = std::sqrt(-std::log(u[0]) / lambda);
      const double phase = 2.0 * std::numbers::pi * u[1];
      draw.h(a, b) = std::polar(radius, phase);
    }
  }
  return draw;
}

}  // namespace coharq

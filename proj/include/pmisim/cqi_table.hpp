#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <string_view>

namespace pmisim {

/// One row of the 4-bit CQI table (QPSK..64QAM flavor).
struct CqiRow {
  int cqi;
  std::string_view modulation;
  int code_rate_x1024;
  double spectral_efficiency;  // bit/s/Hz
};

// TS 38.214 Table 5.2.2.1-2. CQI 0 is the out-of-range marker.
inline constexpr std::array<CqiRow, 15> kCqiTable{{
    {1, "qpsk", 78, 0.1523},
    {2, "qpsk", 120, 0.2344},
    {3, "qpsk", 193, 0.3770},
    {4, "qpsk", 308, 0.6016},
    {5, "qpsk", 449, 0.8770},
    {6, "qpsk", 602, 1.1758},
    {7, "16qam", 378, 1.4766},
    {8, "16qam", 490, 1.9141},
    {9, "16qam", 616, 2.4063},
    {10, "64qam", 466, 2.7305},
    {11, "64qam", 567, 3.3223},
    {12, "64qam", 666, 3.9023},
    {13, "64qam", 772, 4.5234},
    {14, "64qam", 873, 5.1152},
    {15, "64qam", 948, 5.5547},
}};

/// Largest CQI whose table efficiency fits under log2(1+sinr); 0 when even
/// CQI 1 does not fit.
inline int sinr_to_cqi(double sinr_linear) {
  if (sinr_linear < 0.0 || !std::isfinite(sinr_linear)) {
    throw std::domain_error("sinr_to_cqi: sinr must be finite and >= 0");
  }
  const double se = std::log2(1.0 + sinr_linear);
  int cqi = 0;
  for (const CqiRow& row : kCqiTable) {
    if (row.spectral_efficiency <= se) {
      cqi = row.cqi;
    } else {
      break;
    }
  }
  return cqi;
}

inline double cqi_to_se(int cqi) {
  if (cqi < 0 || cqi > 15) throw std::domain_error("cqi_to_se: cqi out of [0,15]");
  if (cqi == 0) return 0.0;
  return kCqiTable[static_cast<size_t>(cqi - 1)].spectral_efficiency;
}

}  // namespace pmisim

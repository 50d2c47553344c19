#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pmisim/mat.hpp"

namespace pmisim {

/// Single-panel array geometry: n1 x n2 elements per polarization with
/// oversampling (o1, o2); cross-polarization doubles the port count.
struct CodebookConfig {
  int n1 = 4;
  int n2 = 1;
  int o1 = 4;
  int o2 = 1;

  int ports() const { return 2 * n1 * n2; }
  int num_beams_h() const { return n1 * o1; }
  int num_beams_v() const { return n2 * o2; }
};

/// 3GPP-style index tuple kept for debugging; the wire uses the flat index.
struct PmiTuple {
  int l = 0;       // horizontal beam (i11)
  int m = 0;       // vertical beam (i12)
  int offset = 0;  // beam-pair selector (i13); -1 for rank 1
  int cophase = 0; // QPSK co-phase (i2)
};

namespace detail {

/// Beam-pair offset factors (k1, k2) from the rank-2 selection table,
/// scaled by (o1, o2) at construction time.
inline std::vector<std::pair<int, int>> rank2_offset_factors(const CodebookConfig& cfg) {
  if (cfg.n2 == 1) {
    if (cfg.n1 == 2) return {{0, 0}, {1, 0}};
    if (cfg.n1 > 2) return {{0, 0}, {1, 0}, {2, 0}, {3, 0}};
  } else if (cfg.n1 == cfg.n2) {
    return {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
  } else if (cfg.n1 > cfg.n2) {
    return {{0, 0}, {1, 0}, {0, 1}, {2, 0}};
  }
  throw std::invalid_argument("codebook: unsupported (n1, n2) combination");
}

inline std::vector<cplx> dft_beam(const CodebookConfig& cfg, int l, int m) {
  std::vector<cplx> v(static_cast<size_t>(cfg.n1 * cfg.n2));
  for (int i = 0; i < cfg.n1; ++i) {
    const cplx h = std::polar(1.0, 2.0 * std::numbers::pi * l * i / (cfg.o1 * cfg.n1));
    for (int k = 0; k < cfg.n2; ++k) {
      const cplx u = std::polar(1.0, 2.0 * std::numbers::pi * m * k / (cfg.o2 * cfg.n2));
      v[static_cast<size_t>(i * cfg.n2 + k)] = h * u;
    }
  }
  return v;
}

}  // namespace detail

/// Indexed rank-1 / rank-2 precoding matrix sets. Built once, immutable.
class Codebook {
 public:
  explicit Codebook(const CodebookConfig& cfg = {}) : cfg_(cfg) {
    if (cfg_.n1 < 2 || cfg_.n2 < 1 || cfg_.n1 < cfg_.n2) {
      throw std::invalid_argument("codebook: unsupported (n1, n2) combination");
    }
    if (cfg_.o1 < 1 || cfg_.o2 < 1) {
      throw std::invalid_argument("codebook: oversampling factors must be >= 1");
    }
    offsets_ = detail::rank2_offset_factors(cfg_);
    int max_k1 = 0, max_k2 = 0;
    for (const auto& [k1, k2] : offsets_) {
      scaled_offsets_.emplace_back(k1 * cfg_.o1, k2 * cfg_.o2);
      max_k1 = std::max(max_k1, k1 * cfg_.o1);
      max_k2 = std::max(max_k2, k2 * cfg_.o2);
    }
    ext_l_ = static_cast<size_t>(cfg_.num_beams_h() + max_k1);
    ext_m_ = static_cast<size_t>(cfg_.num_beams_v() + max_k2);
    beams_.reserve(ext_l_ * ext_m_);
    for (size_t l = 0; l < ext_l_; ++l) {
      for (size_t m = 0; m < ext_m_; ++m) {
        beams_.push_back(detail::dft_beam(cfg_, static_cast<int>(l), static_cast<int>(m)));
      }
    }
    build_rank1();
    build_rank2();
  }

  const CodebookConfig& config() const { return cfg_; }
  int rank1_size() const { return static_cast<int>(rank1_.size()); }
  int rank2_size() const { return static_cast<int>(rank2_.size()); }
  int size(int rank) const { return rank == 1 ? rank1_size() : rank2_size(); }

  const CMat& get_pm(int rank, int j) const {
    if (rank != 1 && rank != 2) throw std::out_of_range("get_pm: rank must be 1 or 2");
    const auto& set = (rank == 1) ? rank1_ : rank2_;
    if (j < 0 || j >= static_cast<int>(set.size())) {
      throw std::out_of_range("get_pm: pmi index out of range");
    }
    return set[static_cast<size_t>(j)];
  }

  PmiTuple tuple_of(int rank, int j) const {
    if (rank != 1 && rank != 2) throw std::out_of_range("tuple_of: rank must be 1 or 2");
    const auto& tuples = (rank == 1) ? tuples1_ : tuples2_;
    if (j < 0 || j >= static_cast<int>(tuples.size())) {
      throw std::out_of_range("tuple_of: pmi index out of range");
    }
    return tuples[static_cast<size_t>(j)];
  }

  int index_of(int rank, const PmiTuple& t) const {
    const int nm = cfg_.num_beams_v();
    if (rank == 1) return (t.l * nm + t.m) * 4 + t.cophase;
    const int n_off = static_cast<int>(offsets_.size());
    return ((t.l * nm + t.m) * n_off + t.offset) * 2 + t.cophase;
  }

  /// (k1, k2) beam-pair offsets of the rank-2 set, already scaled by the
  /// oversampling factors.
  const std::vector<std::pair<int, int>>& rank2_beam_offsets() const { return scaled_offsets_; }

  /// DFT beam for possibly extended (l, m) as used by the rank-2
  /// paired-beam construction; bit-identical to the stored matrices.
  const std::vector<cplx>& beam(int l, int m) const {
    return beams_[static_cast<size_t>(l) * ext_m_ + static_cast<size_t>(m)];
  }

 private:
  void build_rank1() {
    const double norm = 1.0 / std::sqrt(static_cast<double>(cfg_.ports()));
    for (int l = 0; l < cfg_.num_beams_h(); ++l) {
      for (int m = 0; m < cfg_.num_beams_v(); ++m) {
        const std::vector<cplx>& v = beam(l, m);
        for (int n = 0; n < 4; ++n) {
          const cplx phi = std::polar(1.0, std::numbers::pi * n / 2.0);
          CMat w(cfg_.ports(), 1);
          const int half = cfg_.ports() / 2;
          for (int p = 0; p < half; ++p) {
            w(p, 0) = norm * v[static_cast<size_t>(p)];
            w(p + half, 0) = norm * phi * v[static_cast<size_t>(p)];
          }
          rank1_.push_back(std::move(w));
          tuples1_.push_back({l, m, -1, n});
        }
      }
    }
  }

  void build_rank2() {
    const double norm = 1.0 / std::sqrt(2.0 * cfg_.ports());
    for (int l = 0; l < cfg_.num_beams_h(); ++l) {
      for (int m = 0; m < cfg_.num_beams_v(); ++m) {
        for (int off = 0; off < static_cast<int>(scaled_offsets_.size()); ++off) {
          const int lp = l + scaled_offsets_[static_cast<size_t>(off)].first;
          const int mp = m + scaled_offsets_[static_cast<size_t>(off)].second;
          const std::vector<cplx>& v = beam(l, m);
          const std::vector<cplx>& vp = beam(lp, mp);
          for (int n = 0; n < 2; ++n) {
            const cplx phi = std::polar(1.0, std::numbers::pi * n / 2.0);
            CMat w(cfg_.ports(), 2);
            const int half = cfg_.ports() / 2;
            for (int p = 0; p < half; ++p) {
              w(p, 0) = norm * v[static_cast<size_t>(p)];
              w(p, 1) = norm * vp[static_cast<size_t>(p)];
              w(p + half, 0) = norm * phi * v[static_cast<size_t>(p)];
              w(p + half, 1) = -norm * phi * vp[static_cast<size_t>(p)];
            }
            rank2_.push_back(std::move(w));
            tuples2_.push_back({l, m, off, n});
          }
        }
      }
    }
  }

  CodebookConfig cfg_;
  std::vector<CMat> rank1_;
  std::vector<CMat> rank2_;
  std::vector<PmiTuple> tuples1_;
  std::vector<PmiTuple> tuples2_;
  std::vector<std::pair<int, int>> offsets_;         // table factors
  std::vector<std::pair<int, int>> scaled_offsets_;  // factors * (o1, o2)
  std::vector<std::vector<cplx>> beams_;             // extended (l, m) grid
  size_t ext_l_ = 0;
  size_t ext_m_ = 0;
};

}  // namespace pmisim

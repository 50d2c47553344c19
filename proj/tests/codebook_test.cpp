#include "pmisim/codebook.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <complex>

namespace pmisim {
namespace {

TEST(Codebook, DefaultSizes) {
  const Codebook cb;
  EXPECT_EQ(cb.rank1_size(), 64);   // n1*o1 * n2*o2 * 4 co-phases
  EXPECT_EQ(cb.rank2_size(), 128);  // 16 beams * 4 offsets * 2 co-phases
  EXPECT_EQ(cb.config().ports(), 8);
}

TEST(Codebook, UnitFrobeniusNorm) {
  const Codebook cb;
  for (int rank = 1; rank <= 2; ++rank) {
    for (int j = 0; j < cb.size(rank); ++j) {
      EXPECT_NEAR(cb.get_pm(rank, j).frob_sq(), 1.0, 1e-12);
    }
  }
}

TEST(Codebook, Rank2ColumnsOrthogonal) {
  const Codebook cb;
  for (int j = 0; j < cb.rank2_size(); ++j) {
    EXPECT_LT(std::abs(cb.get_pm(2, j).col_dot(0, 1)), 1e-12);
  }
}

TEST(Codebook, PerPortPower) {
  const Codebook cb;
  const double expected = 1.0 / 8.0;
  for (int rank = 1; rank <= 2; ++rank) {
    for (int j = 0; j < cb.size(rank); ++j) {
      const CMat& w = cb.get_pm(rank, j);
      for (int p = 0; p < w.rows(); ++p) {
        double row = 0.0;
        for (int c = 0; c < w.cols(); ++c) row += std::norm(w(p, c));
        EXPECT_NEAR(row, expected, 1e-12);
      }
    }
  }
}

TEST(Codebook, EntriesPairwiseDistinct) {
  const Codebook cb;
  for (int rank = 1; rank <= 2; ++rank) {
    for (int i = 0; i < cb.size(rank); ++i) {
      for (int j = i + 1; j < cb.size(rank); ++j) {
        const CMat& a = cb.get_pm(rank, i);
        const CMat& b = cb.get_pm(rank, j);
        double max_diff = 0.0;
        for (size_t k = 0; k < a.data().size(); ++k) {
          max_diff = std::max(max_diff, std::abs(a.data()[k] - b.data()[k]));
        }
        EXPECT_GT(max_diff, 1e-9) << "rank " << rank << " entries " << i << "," << j;
      }
    }
  }
}

TEST(Codebook, FirstEntryIsBroadsideCophaseZero) {
  const Codebook cb;
  const PmiTuple t = cb.tuple_of(1, 0);
  EXPECT_EQ(t.l, 0);
  EXPECT_EQ(t.m, 0);
  EXPECT_EQ(t.cophase, 0);
  // Beam (0,0), co-phase 0: every entry is 1/sqrt(8).
  const CMat& w = cb.get_pm(1, 0);
  for (int p = 0; p < 8; ++p) {
    EXPECT_NEAR(w(p, 0).real(), 1.0 / std::sqrt(8.0), 1e-12);
    EXPECT_NEAR(w(p, 0).imag(), 0.0, 1e-12);
  }
}

TEST(Codebook, OutOfRangeIndexThrows) {
  const Codebook cb;
  EXPECT_THROW(cb.get_pm(1, 64), std::out_of_range);
  EXPECT_THROW(cb.get_pm(2, 128), std::out_of_range);
  EXPECT_THROW(cb.get_pm(1, -1), std::out_of_range);
  EXPECT_THROW(cb.get_pm(3, 0), std::out_of_range);
}

TEST(Codebook, TupleIndexBijection) {
  const Codebook cb;
  for (int rank = 1; rank <= 2; ++rank) {
    for (int j = 0; j < cb.size(rank); ++j) {
      EXPECT_EQ(cb.index_of(rank, cb.tuple_of(rank, j)), j);
    }
  }
}

TEST(Codebook, UnsupportedGeometryRejected) {
  EXPECT_THROW(Codebook(CodebookConfig{1, 1, 4, 1}), std::invalid_argument);
  EXPECT_THROW(Codebook(CodebookConfig{2, 4, 4, 4}), std::invalid_argument);
}

TEST(Codebook, TwoByOneGeometry) {
  const Codebook cb(CodebookConfig{2, 1, 4, 1});
  EXPECT_EQ(cb.rank1_size(), 8 * 4);       // 8 beams * 4 co-phases
  EXPECT_EQ(cb.rank2_size(), 8 * 2 * 2);   // 8 beams * 2 offsets * 2 co-phases
  EXPECT_EQ(cb.config().ports(), 4);
  for (int j = 0; j < cb.rank2_size(); ++j) {
    EXPECT_LT(std::abs(cb.get_pm(2, j).col_dot(0, 1)), 1e-12);
    EXPECT_NEAR(cb.get_pm(2, j).frob_sq(), 1.0, 1e-12);
  }
}

}  // namespace
}  // namespace pmisim

#pragma once

#include <complex>
#include <stdexcept>
#include <vector>

namespace pmisim {

using cplx = std::complex<double>;

/// Dense row-major complex matrix. Dimensions here stay tiny (receive
/// antennas x transmit ports), so no attempt at blocking or views.
class CMat {
 public:
  CMat() = default;
  CMat(int rows, int cols) : rows_(rows), cols_(cols), a_(rows * cols) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  cplx& operator()(int r, int c) { return a_[static_cast<size_t>(r) * cols_ + c]; }
  const cplx& operator()(int r, int c) const {
    return a_[static_cast<size_t>(r) * cols_ + c];
  }

  const std::vector<cplx>& data() const { return a_; }
  std::vector<cplx>& data() { return a_; }

  double frob_sq() const {
    double s = 0.0;
    for (const cplx& z : a_) s += std::norm(z);
    return s;
  }

  CMat operator*(const CMat& b) const {
    if (cols_ != b.rows_) throw std::invalid_argument("CMat: shape mismatch in product");
    CMat out(rows_, b.cols_);
    for (int r = 0; r < rows_; ++r) {
      for (int c = 0; c < b.cols_; ++c) {
        cplx acc{0.0, 0.0};
        for (int k = 0; k < cols_; ++k) acc += (*this)(r, k) * b(k, c);
        out(r, c) = acc;
      }
    }
    return out;
  }

  /// Hermitian inner product of two columns: sum_r conj(A(r,i)) * A(r,j).
  cplx col_dot(int i, int j) const {
    cplx acc{0.0, 0.0};
    for (int r = 0; r < rows_; ++r) acc += std::conj((*this)(r, i)) * (*this)(r, j);
    return acc;
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<cplx> a_;
};

/// ||A*B||_F^2 without materializing the product.
inline double product_frob_sq(const CMat& a, const CMat& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("product_frob_sq: shape mismatch");
  double s = 0.0;
  for (int r = 0; r < a.rows(); ++r) {
    for (int c = 0; c < b.cols(); ++c) {
      cplx acc{0.0, 0.0};
      for (int k = 0; k < a.cols(); ++k) acc += a(r, k) * b(k, c);
      s += std::norm(acc);
    }
  }
  return s;
}

}  // namespace pmisim

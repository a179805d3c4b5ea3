#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace attloc {

// Dense row-major matrix of doubles. Everything above this layer (features,
// model, training) is built from these kernels and a seedable RNG.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

  static Matrix zeros(std::size_t rows, std::size_t cols) { return Matrix(rows, cols); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  double* row(std::size_t r) { return data_.data() + r * cols_; }
  const double* row(std::size_t r) const { return data_.data() + r * cols_; }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool all_finite() const;

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// C = A * B. Dimension mismatch is a hard error reporting both shapes.
Matrix matmul(const Matrix& a, const Matrix& b);
// C = A * B^T. Contracts over the columns of both operands (cache-friendly
// for row-major storage; the model keeps weights as out_dim x in_dim).
Matrix matmul_nt(const Matrix& a, const Matrix& b);
// C = A^T * B. Contracts over rows; used for gradient accumulation.
Matrix matmul_tn(const Matrix& a, const Matrix& b);

Matrix sigmoid(const Matrix& x);
Matrix relu(const Matrix& x);
Matrix tanh(const Matrix& x);
// Numerically stabilized softmax over each row (subtracts the row max).
Matrix softmax_rows(const Matrix& x);

// Eight independent accumulator lanes with a fixed combine order: the sum
// stays deterministic while the lane loop vectorizes under strict IEEE.
inline double dot(const double* a, const double* b, std::size_t n) {
  constexpr std::size_t kLanes = 8;
  double acc[kLanes] = {0.0};
  std::size_t i = 0;
  for (; i + kLanes <= n; i += kLanes) {
    for (std::size_t k = 0; k < kLanes; ++k) acc[k] += a[i + k] * b[i + k];
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += a[i] * b[i];
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail;
}

// y = M * x, with x of length cols and y of length rows.
void matvec(const Matrix& m, const double* x, double* y);
// y += M^T * x, with x of length rows and y of length cols.
void matvec_t_add(const Matrix& m, const double* x, double* y);

// Rows in reverse order (time reversal for recurrent passes).
Matrix reverse_rows(const Matrix& m);

// Overflow-safe scalar sigmoid; saturates cleanly to 0.0 / 1.0 in double.
double sigmoid(double x);

// splitmix64. Same seed gives the same stream; uniform() is in [0,1).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

  std::uint64_t next_u64();
  double uniform();                        // [0, 1)
  double uniform(double lo, double hi);    // [lo, hi)
  std::size_t below(std::size_t n);        // integer in [0, n)

  // Independent child stream for a fixed purpose label, derived from the
  // original seed only (insensitive to how much of this stream was consumed).
  Rng derive(std::uint64_t label) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t state_ = 0;
};

}  // namespace attloc

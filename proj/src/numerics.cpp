#include "attloc/numerics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "attloc/errors.hpp"

namespace attloc {

namespace {

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require_finite(const Matrix& m, const char* op) {
  if (!m.all_finite()) {
    throw NumericError(std::string(op) + ": non-finite input entry");
  }
}

}  // namespace

bool Matrix::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: shape mismatch " + shape_str(a) + " * " + shape_str(b));
  }
  Matrix out(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* orow = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      const double* brow = b.row(k);
      for (std::size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("matmul_nt: shape mismatch " + shape_str(a) + " * " + shape_str(b) + "^T");
  }
  Matrix out(a.rows(), b.rows());
  const std::size_t k = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* arow = a.row(i);
    double* orow = out.row(i);
    for (std::size_t j = 0; j < b.rows(); ++j) orow[j] = dot(arow, b.row(j), k);
  }
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw std::invalid_argument("matmul_tn: shape mismatch " + shape_str(a) + "^T * " + shape_str(b));
  }
  Matrix out(a.cols(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t t = 0; t < a.rows(); ++t) {
    const double* arow = a.row(t);
    const double* brow = b.row(t);
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double ati = arow[i];
      double* orow = out.row(i);
      for (std::size_t j = 0; j < n; ++j) orow[j] += ati * brow[j];
    }
  }
  return out;
}

void matvec(const Matrix& m, const double* x, double* y) {
  for (std::size_t i = 0; i < m.rows(); ++i) y[i] = dot(m.row(i), x, m.cols());
}

void matvec_t_add(const Matrix& m, const double* x, double* y) {
  for (std::size_t k = 0; k < m.rows(); ++k) {
    const double xk = x[k];
    const double* row = m.row(k);
    for (std::size_t j = 0; j < m.cols(); ++j) y[j] += xk * row[j];
  }
}

Matrix reverse_rows(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t t = 0; t < m.rows(); ++t) {
    const double* src = m.row(m.rows() - 1 - t);
    double* dst = out.row(t);
    for (std::size_t j = 0; j < m.cols(); ++j) dst[j] = src[j];
  }
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Matrix sigmoid(const Matrix& x) {
  require_finite(x, "sigmoid");
  Matrix out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = sigmoid(out.data()[i]);
  return out;
}

Matrix relu(const Matrix& x) {
  require_finite(x, "relu");
  Matrix out = x;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out.data()[i] < 0.0) out.data()[i] = 0.0;
  }
  return out;
}

Matrix tanh(const Matrix& x) {
  require_finite(x, "tanh");
  Matrix out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = std::tanh(out.data()[i]);
  return out;
}

Matrix softmax_rows(const Matrix& x) {
  require_finite(x, "softmax_rows");
  Matrix out = x;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    double* row = out.row(i);
    double mx = row[0];
    for (std::size_t j = 1; j < out.cols(); ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < out.cols(); ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    for (std::size_t j = 0; j < out.cols(); ++j) row[j] /= sum;
  }
  return out;
}

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t Rng::next_u64() { return splitmix64(state_); }

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::size_t Rng::below(std::size_t n) {
  return static_cast<std::size_t>(
      (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
}

Rng Rng::derive(std::uint64_t label) const {
  std::uint64_t s = seed_ ^ (0xA0761D6478BD642FULL * (label + 1));
  splitmix64(s);  // decorrelate nearby labels
  return Rng(s);
}

}  // namespace attloc

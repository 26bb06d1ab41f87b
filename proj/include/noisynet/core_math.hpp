// Dense linear algebra, seeded random streams and the noise squash function.
#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace noisynet {

using Vector = std::vector<double>;

/// Raised when operand dimensions do not compose.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an operation is called on an object in the wrong state or of the wrong kind.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Row-major dense matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool all_finite() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// w·x. Throws ShapeError when w.cols() != x.size().
Vector matvec(const Matrix& w, std::span<const double> x);
/// wᵀ·x. Throws ShapeError when w.rows() != x.size().
Vector matvec_transposed(const Matrix& w, std::span<const double> x);
/// w += scale · a·bᵀ
void add_outer(Matrix& w, std::span<const double> a, std::span<const double> b, double scale = 1.0);

/// sgn(x)·√|x|, the squash applied to factorised noise.
double squash(double x);

bool all_finite(std::span<const double> v);

/// Named random streams. Every stream of a run is derived from the run seed and
/// its id, so no two consumers ever share a sequence.
enum class StreamId : std::uint8_t {
  OnlineNoise,
  TargetNoise,
  ActionNoise,
  Env,
  Init,
  ReplaySampling,
  Exploration,     // epsilon-greedy coin flips and random actions
  PolicySampling,  // sampling actions from a softmax policy
  EvalNoise,
  EvalEnv,
  EvalPolicy,
};

std::string_view to_string(StreamId id);

/// Seeded 64-bit random stream.
///
/// The engine is std::mt19937_64 seeded with a SplitMix64 mix of
/// (seed, stream id, substream). Uniforms take the top 53 bits of one engine
/// output; Gaussians use the Box–Muller transform, caching the second variate.
/// Both conversions are implemented here rather than through <random>
/// distributions so sequences are identical across standard libraries.
class RngStream {
 public:
  RngStream(std::uint64_t seed, StreamId id, std::uint64_t substream = 0);

  std::uint64_t next_u64();
  /// Uniform on [0, 1).
  double uniform();
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi);
  /// Uniform integer on [0, n). n must be positive.
  std::size_t below(std::size_t n);
  /// Standard normal variate.
  double gaussian();

  std::uint64_t seed() const { return seed_; }
  StreamId id() const { return id_; }
  std::uint64_t substream() const { return substream_; }
  /// Number of variates handed out so far (uniform, integer or Gaussian).
  std::uint64_t position() const { return position_; }

 private:
  std::uint64_t seed_;
  StreamId id_;
  std::uint64_t substream_;
  std::mt19937_64 engine_;
  std::uint64_t position_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// SplitMix64 finaliser; used to derive stream keys and hashes.
std::uint64_t mix64(std::uint64_t x);

/// n i.i.d. unit Gaussians. n must be at least 1.
Vector gaussian(RngStream& rng, std::size_t n);

}  // namespace noisynet

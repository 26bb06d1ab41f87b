#include "noisynet/core_math.hpp"

#include <cmath>
#include <numbers>

namespace noisynet {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("matrix data length " + std::to_string(data_.size()) + " != " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged matrix rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(data));
}

bool Matrix::all_finite() const { return noisynet::all_finite(data_); }

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

Vector matvec(const Matrix& w, std::span<const double> x) {
  if (w.cols() != x.size()) {
    throw ShapeError("matvec: matrix has " + std::to_string(w.cols()) + " columns, vector has " +
                     std::to_string(x.size()) + " entries");
  }
  Vector y(w.rows(), 0.0);
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const double* row = w.row(r).data();
    const std::size_t n = x.size();
    // Four partial sums break the serial dependency chain.
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
    std::size_t c = 0;
    for (; c + 4 <= n; c += 4) {
      a0 += row[c] * x[c];
      a1 += row[c + 1] * x[c + 1];
      a2 += row[c + 2] * x[c + 2];
      a3 += row[c + 3] * x[c + 3];
    }
    for (; c < n; ++c) a0 += row[c] * x[c];
    y[r] = (a0 + a1) + (a2 + a3);
  }
  return y;
}

Vector matvec_transposed(const Matrix& w, std::span<const double> x) {
  if (w.rows() != x.size()) {
    throw ShapeError("matvec_transposed: matrix has " + std::to_string(w.rows()) +
                     " rows, vector has " + std::to_string(x.size()) + " entries");
  }
  Vector y(w.cols(), 0.0);
  for (std::size_t r = 0; r < w.rows(); ++r) {
    const double xr = x[r];
    if (xr == 0.0) continue;
    const auto row = w.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) y[c] += row[c] * xr;
  }
  return y;
}

void add_outer(Matrix& w, std::span<const double> a, std::span<const double> b, double scale) {
  if (w.rows() != a.size() || w.cols() != b.size()) throw ShapeError("add_outer: shape mismatch");
  for (std::size_t r = 0; r < a.size(); ++r) {
    const double ar = a[r] * scale;
    if (ar == 0.0) continue;
    auto row = w.row(r);
    for (std::size_t c = 0; c < b.size(); ++c) row[c] += ar * b[c];
  }
}

double squash(double x) {
  const double root = std::sqrt(std::abs(x));
  return x < 0.0 ? -root : root;
}

std::string_view to_string(StreamId id) {
  switch (id) {
    case StreamId::OnlineNoise: return "online_noise";
    case StreamId::TargetNoise: return "target_noise";
    case StreamId::ActionNoise: return "action_noise";
    case StreamId::Env: return "env";
    case StreamId::Init: return "init";
    case StreamId::ReplaySampling: return "replay_sampling";
    case StreamId::Exploration: return "exploration";
    case StreamId::PolicySampling: return "policy_sampling";
    case StreamId::EvalNoise: return "eval_noise";
    case StreamId::EvalEnv: return "eval_env";
    case StreamId::EvalPolicy: return "eval_policy";
  }
  return "unknown";
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

std::uint64_t stream_key(std::uint64_t seed, StreamId id, std::uint64_t substream) {
  std::uint64_t k = mix64(seed);
  k = mix64(k ^ (static_cast<std::uint64_t>(id) + 1) * 0xd6e8feb86659fd93ULL);
  k = mix64(k ^ substream);
  return k;
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, StreamId id, std::uint64_t substream)
    : seed_(seed), id_(id), substream_(substream), engine_(stream_key(seed, id, substream)) {}

std::uint64_t RngStream::next_u64() {
  ++position_;
  return engine_();
}

double RngStream::uniform() {
  ++position_;
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::size_t RngStream::below(std::size_t n) {
  if (n == 0) throw UsageError("RngStream::below: empty range");
  // Lemire-style rejection keeps the result exactly uniform.
  const std::uint64_t bound = n;
  const std::uint64_t threshold = (0 - bound) % bound;
  ++position_;
  for (;;) {
    const std::uint64_t r = engine_();
    if (r >= threshold) return static_cast<std::size_t>(r % bound);
  }
}

double RngStream::gaussian() {
  ++position_;
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // u1 in (0, 1] so the log is finite.
  const double u1 = 1.0 - static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

Vector gaussian(RngStream& rng, std::size_t n) {
  if (n == 0) throw UsageError("gaussian: n must be at least 1");
  Vector out(n);
  for (auto& v : out) v = rng.gaussian();
  return out;
}

}  // namespace noisynet

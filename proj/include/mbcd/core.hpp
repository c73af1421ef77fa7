#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace mbcd {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

// Requested operation is not defined for the given block/manifold kind.
class unsupported_operation : public std::logic_error {
 public:
  explicit unsupported_operation(const std::string& what) : std::logic_error(what) {}
};

// Numerically degenerate input (rank-deficient polar factor, zero retraction
// argument, ...). Carries the convention result so the caller can decide
// whether to use it or fall back to a keep-previous policy.
class degenerate_error : public std::runtime_error {
 public:
  degenerate_error(const std::string& what, MatrixXd factor, VectorXd singular_values)
      : std::runtime_error(what),
        factor(std::move(factor)),
        singular_values(std::move(singular_values)) {}
  explicit degenerate_error(const std::string& what) : std::runtime_error(what) {}

  MatrixXd factor;
  VectorXd singular_values;
};

// A sweep increased the objective beyond tolerance; the run is aborted.
class monotonicity_error : public std::runtime_error {
 public:
  monotonicity_error(const std::string& what, int sweep, int block, double f_before,
                     double f_after)
      : std::runtime_error(what), sweep(sweep), block(block), f_before(f_before),
        f_after(f_after) {}
  int sweep = -1;
  int block = -1;
  double f_before = 0.0;
  double f_after = 0.0;
};

// A surrogate fell below the objective at a visited point; the run is aborted.
class majorizer_error : public std::runtime_error {
 public:
  majorizer_error(const std::string& what, int sweep, int block, double g_value,
                  double f_value)
      : std::runtime_error(what), sweep(sweep), block(block), g_value(g_value),
        f_value(f_value) {}
  int sweep = -1;
  int block = -1;
  double g_value = 0.0;
  double f_value = 0.0;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

inline void require_finite(const Eigen::Ref<const MatrixXd>& m, const std::string& what) {
  if (!m.allFinite()) throw std::invalid_argument(what + ": non-finite entries");
}

// ---------------------------------------------------------------------------
// Deterministic RNG
//
// std::mt19937_64 is fully specified, but the standard distributions are not;
// their output may differ across standard libraries. All randomness used by
// the library goes through this wrapper so identical seeds give bit-identical
// streams everywhere.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Sub-stream for worker k of a seeded driver; disjoint for distinct k.
  static Rng derive(std::uint64_t master_seed, std::uint64_t index) {
    return Rng(splitmix64(master_seed ^ splitmix64(index + 1)));
  }

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via Box-Muller (cached spare).
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform01();
    } while (u1 <= 0.0);
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // Uniform integer in [0, n) by rejection; unbiased.
  std::uint64_t uniform_index(std::uint64_t n) {
    require(n > 0, "uniform_index: n must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = 0;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  VectorXd gaussian_vector(int n) {
    VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = gaussian();
    return v;
  }

  MatrixXd gaussian_matrix(int rows, int cols) {
    MatrixXd m(rows, cols);
    for (int j = 0; j < cols; ++j)
      for (int i = 0; i < rows; ++i) m(i, j) = gaussian();
    return m;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[uniform_index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// ---------------------------------------------------------------------------
// Formatting: shortest representation that round-trips (17 significant digits).
// ---------------------------------------------------------------------------

inline std::string fmt17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return std::string(buf);
}

// Column-major matrix <-> flat vector views used for matrix-valued blocks.
inline Eigen::Map<const MatrixXd> as_matrix(const VectorXd& v, int rows, int cols) {
  require(v.size() == static_cast<Eigen::Index>(rows) * cols,
          "as_matrix: size mismatch");
  return Eigen::Map<const MatrixXd>(v.data(), rows, cols);
}
Eigen::Map<const MatrixXd> as_matrix(VectorXd&&, int, int) = delete;  // no maps over temporaries

inline VectorXd as_vector(const Eigen::Ref<const MatrixXd>& m) {
  return Eigen::Map<const VectorXd>(m.data(), m.size());
}

}  // namespace mbcd

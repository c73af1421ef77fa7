#pragma once

#include <memory>
#include <numeric>
#include <sstream>
#include <variant>
#include <vector>

#include "mbcd/numerics.hpp"

namespace mbcd {

// ---------------------------------------------------------------------------
// Finite constraint sets (orthogonal transform families for sensing problems).
// Elements live in ambient coordinates as column-major m x m matrices so they
// compose with the generic block-point machinery.
// ---------------------------------------------------------------------------

class FiniteSetDomain {
 public:
  virtual ~FiniteSetDomain() = default;
  virtual std::string name() const = 0;
  virtual int side() const = 0;  // matrix dimension m
  int ambient_dim() const { return side() * side(); }
  // Max deviation of x from the defining element structure; 0 on elements.
  virtual double violation(const VectorXd& x) const = 0;
  virtual VectorXd sample(Rng& rng) const = 0;
  virtual std::uint64_t size() const = 0;
  virtual VectorXd element(std::uint64_t index) const = 0;
};

namespace detail {

inline VectorXd permutation_to_ambient(const std::vector<int>& perm,
                                       const std::vector<double>* signs = nullptr) {
  const int m = static_cast<int>(perm.size());
  MatrixXd p = MatrixXd::Zero(m, m);
  // Row perm[j] gets the j-th column entry: P e_j = e_perm[j].
  for (int j = 0; j < m; ++j) p(perm[j], j) = signs ? (*signs)[j] : 1.0;
  return as_vector(p);
}

inline double entry_deviation_01(double v) { return std::min(std::abs(v), std::abs(v - 1.0)); }

inline std::uint64_t factorial_checked(int m, int limit) {
  require(m >= 1 && m <= limit, "finite set: size out of enumerable range");
  std::uint64_t f = 1;
  for (int i = 2; i <= m; ++i) f *= static_cast<std::uint64_t>(i);
  return f;
}

// index -> permutation in lexicographic order (factorial number system).
inline std::vector<int> unrank_permutation(int m, std::uint64_t index) {
  std::vector<int> avail(m);
  std::iota(avail.begin(), avail.end(), 0);
  std::vector<int> perm(m);
  std::uint64_t radix = 1;
  for (int i = 2; i < m; ++i) radix *= static_cast<std::uint64_t>(i);
  for (int pos = 0; pos < m; ++pos) {
    const std::uint64_t digit = (radix > 0) ? index / radix : 0;
    perm[pos] = avail[static_cast<std::size_t>(digit)];
    avail.erase(avail.begin() + static_cast<std::ptrdiff_t>(digit));
    index -= digit * radix;
    if (m - pos - 2 > 0) radix /= static_cast<std::uint64_t>(m - pos - 1);
    else radix = 1;
  }
  return perm;
}

}  // namespace detail

class PermutationDomain : public FiniteSetDomain {
 public:
  explicit PermutationDomain(int m) : m_(m) { require(m >= 1 && m <= 20, "PermutationDomain: need 1 <= m <= 20"); }
  std::string name() const override { return "perm(" + std::to_string(m_) + ")"; }
  int side() const override { return m_; }

  double violation(const VectorXd& x) const override {
    const auto p = as_matrix(x, m_, m_);
    double worst = 0.0;
    for (int j = 0; j < m_; ++j) {
      double colsum = 0.0;
      for (int i = 0; i < m_; ++i) {
        worst = std::max(worst, detail::entry_deviation_01(p(i, j)));
        colsum += p(i, j);
      }
      worst = std::max(worst, std::abs(colsum - 1.0));
    }
    for (int i = 0; i < m_; ++i) worst = std::max(worst, std::abs(p.row(i).sum() - 1.0));
    return worst;
  }

  VectorXd sample(Rng& rng) const override {
    std::vector<int> perm(m_);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    return detail::permutation_to_ambient(perm);
  }

  std::uint64_t size() const override { return detail::factorial_checked(m_, 20); }

  VectorXd element(std::uint64_t index) const override {
    require(index < size(), "PermutationDomain: index out of range");
    return detail::permutation_to_ambient(detail::unrank_permutation(m_, index));
  }

 private:
  int m_;
};

class SignDomain : public FiniteSetDomain {
 public:
  explicit SignDomain(int m) : m_(m) { require(m >= 1 && m <= 62, "SignDomain: need 1 <= m <= 62"); }
  std::string name() const override { return "sign(" + std::to_string(m_) + ")"; }
  int side() const override { return m_; }

  double violation(const VectorXd& x) const override {
    const auto p = as_matrix(x, m_, m_);
    double worst = 0.0;
    for (int j = 0; j < m_; ++j)
      for (int i = 0; i < m_; ++i)
        worst = std::max(worst, i == j ? std::abs(std::abs(p(i, i)) - 1.0) : std::abs(p(i, j)));
    return worst;
  }

  VectorXd sample(Rng& rng) const override {
    MatrixXd d = MatrixXd::Zero(m_, m_);
    for (int i = 0; i < m_; ++i) d(i, i) = rng.uniform01() < 0.5 ? -1.0 : 1.0;
    return as_vector(d);
  }

  std::uint64_t size() const override { return std::uint64_t{1} << m_; }

  VectorXd element(std::uint64_t index) const override {
    require(index < size(), "SignDomain: index out of range");
    MatrixXd d = MatrixXd::Zero(m_, m_);
    for (int i = 0; i < m_; ++i) d(i, i) = (index >> i) & 1 ? -1.0 : 1.0;
    return as_vector(d);
  }

 private:
  int m_;
};

class SignedPermutationDomain : public FiniteSetDomain {
 public:
  explicit SignedPermutationDomain(int m) : m_(m) {
    require(m >= 1 && m <= 15, "SignedPermutationDomain: need 1 <= m <= 15");
  }
  std::string name() const override { return "signedperm(" + std::to_string(m_) + ")"; }
  int side() const override { return m_; }

  double violation(const VectorXd& x) const override {
    const auto p = as_matrix(x, m_, m_);
    double worst = 0.0;
    for (int j = 0; j < m_; ++j) {
      double colsum = 0.0;
      for (int i = 0; i < m_; ++i) {
        const double a = std::abs(p(i, j));
        worst = std::max(worst, detail::entry_deviation_01(a));
        colsum += a;
      }
      worst = std::max(worst, std::abs(colsum - 1.0));
    }
    for (int i = 0; i < m_; ++i)
      worst = std::max(worst, std::abs(p.row(i).cwiseAbs().sum() - 1.0));
    return worst;
  }

  VectorXd sample(Rng& rng) const override {
    std::vector<int> perm(m_);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::vector<double> signs(m_);
    for (int i = 0; i < m_; ++i) signs[i] = rng.uniform01() < 0.5 ? -1.0 : 1.0;
    return detail::permutation_to_ambient(perm, &signs);
  }

  std::uint64_t size() const override {
    return detail::factorial_checked(m_, 15) << m_;
  }

  VectorXd element(std::uint64_t index) const override {
    require(index < size(), "SignedPermutationDomain: index out of range");
    const std::uint64_t sign_bits = index & ((std::uint64_t{1} << m_) - 1);
    const std::uint64_t perm_index = index >> m_;
    std::vector<double> signs(m_);
    for (int i = 0; i < m_; ++i) signs[i] = (sign_bits >> i) & 1 ? -1.0 : 1.0;
    return detail::permutation_to_ambient(detail::unrank_permutation(m_, perm_index), &signs);
  }

 private:
  int m_;
};

// ---------------------------------------------------------------------------
// Manifold specs.  Immutable value types describing each block's constraint
// set; all points and tangents are flat ambient vectors (matrices stored
// column-major).
// ---------------------------------------------------------------------------

class ManifoldSpec;

struct Euclidean {
  int n;
};
struct Sphere {
  int n;  // ambient dimension; the set is the unit sphere in R^n
};
struct Stiefel {
  int n, p;  // n x p orthonormal frames
};
struct SpecialOrthogonal {
  int d;
};
struct Oblique {
  int n, k;  // n x k, unit-norm columns
};
struct Box {
  VectorXd lower, upper;
};
struct Affine {
  VectorXd offset;
  MatrixXd basis;  // orthonormal columns spanning the direction space
};
struct FiniteSet {
  std::shared_ptr<const FiniteSetDomain> domain;
};
struct ProductOf {
  std::vector<ManifoldSpec> factors;
};

class ManifoldSpec {
 public:
  using Kind = std::variant<Euclidean, Sphere, Stiefel, SpecialOrthogonal, Oblique, Box,
                            Affine, FiniteSet, ProductOf>;

  explicit ManifoldSpec(Kind kind) : kind_(std::make_shared<const Kind>(std::move(kind))) {
    validate();
  }

  static ManifoldSpec euclidean(int n) { return ManifoldSpec(Euclidean{n}); }
  static ManifoldSpec sphere(int n) { return ManifoldSpec(Sphere{n}); }
  static ManifoldSpec stiefel(int n, int p) { return ManifoldSpec(Stiefel{n, p}); }
  static ManifoldSpec special_orthogonal(int d) { return ManifoldSpec(SpecialOrthogonal{d}); }
  static ManifoldSpec oblique(int n, int k) { return ManifoldSpec(Oblique{n, k}); }
  static ManifoldSpec box(VectorXd lower, VectorXd upper) {
    return ManifoldSpec(Box{std::move(lower), std::move(upper)});
  }
  static ManifoldSpec affine(VectorXd offset, MatrixXd basis) {
    return ManifoldSpec(Affine{std::move(offset), std::move(basis)});
  }
  static ManifoldSpec finite_set(std::shared_ptr<const FiniteSetDomain> domain) {
    return ManifoldSpec(FiniteSet{std::move(domain)});
  }
  static ManifoldSpec product(std::vector<ManifoldSpec> factors) {
    return ManifoldSpec(ProductOf{std::move(factors)});
  }

  const Kind& kind() const { return *kind_; }

  template <typename T>
  const T* get_if() const {
    return std::get_if<T>(kind_.get());
  }

  int ambient_dim() const {
    return std::visit(
        [](const auto& k) -> int {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, Euclidean>) return k.n;
          else if constexpr (std::is_same_v<T, Sphere>) return k.n;
          else if constexpr (std::is_same_v<T, Stiefel>) return k.n * k.p;
          else if constexpr (std::is_same_v<T, SpecialOrthogonal>) return k.d * k.d;
          else if constexpr (std::is_same_v<T, Oblique>) return k.n * k.k;
          else if constexpr (std::is_same_v<T, Box>) return static_cast<int>(k.lower.size());
          else if constexpr (std::is_same_v<T, Affine>) return static_cast<int>(k.offset.size());
          else if constexpr (std::is_same_v<T, FiniteSet>) return k.domain->ambient_dim();
          else {
            int total = 0;
            for (const auto& f : k.factors) total += f.ambient_dim();
            return total;
          }
        },
        *kind_);
  }

  // Intrinsic dimension (0 for finite sets).
  int dim() const {
    return std::visit(
        [](const auto& k) -> int {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, Euclidean>) return k.n;
          else if constexpr (std::is_same_v<T, Sphere>) return k.n - 1;
          else if constexpr (std::is_same_v<T, Stiefel>) return k.n * k.p - k.p * (k.p + 1) / 2;
          else if constexpr (std::is_same_v<T, SpecialOrthogonal>) return k.d * (k.d - 1) / 2;
          else if constexpr (std::is_same_v<T, Oblique>) return (k.n - 1) * k.k;
          else if constexpr (std::is_same_v<T, Box>) return static_cast<int>(k.lower.size());
          else if constexpr (std::is_same_v<T, Affine>) return static_cast<int>(k.basis.cols());
          else if constexpr (std::is_same_v<T, FiniteSet>) return 0;
          else {
            int total = 0;
            for (const auto& f : k.factors) total += f.dim();
            return total;
          }
        },
        *kind_);
  }

  // Smooth embedded submanifold (retraction + tangent projection available)?
  bool smooth() const {
    return std::visit(
        [](const auto& k) -> bool {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, Box> || std::is_same_v<T, FiniteSet>) return false;
          else if constexpr (std::is_same_v<T, ProductOf>) {
            for (const auto& f : k.factors)
              if (!f.smooth()) return false;
            return true;
          } else {
            (void)k;
            return true;
          }
        },
        *kind_);
  }

  std::string describe() const {
    return std::visit(
        [](const auto& k) -> std::string {
          using T = std::decay_t<decltype(k)>;
          std::ostringstream os;
          if constexpr (std::is_same_v<T, Euclidean>) os << "Euclidean(" << k.n << ")";
          else if constexpr (std::is_same_v<T, Sphere>) os << "Sphere(" << k.n << ")";
          else if constexpr (std::is_same_v<T, Stiefel>) os << "Stiefel(" << k.n << "," << k.p << ")";
          else if constexpr (std::is_same_v<T, SpecialOrthogonal>) os << "SO(" << k.d << ")";
          else if constexpr (std::is_same_v<T, Oblique>) os << "Oblique(" << k.n << "," << k.k << ")";
          else if constexpr (std::is_same_v<T, Box>) os << "Box(" << k.lower.size() << ")";
          else if constexpr (std::is_same_v<T, Affine>)
            os << "Affine(" << k.offset.size() << "," << k.basis.cols() << ")";
          else if constexpr (std::is_same_v<T, FiniteSet>) os << "FiniteSet(" << k.domain->name() << ")";
          else {
            os << "Product(";
            for (std::size_t i = 0; i < k.factors.size(); ++i) {
              if (i) os << " x ";
              os << k.factors[i].describe();
            }
            os << ")";
          }
          return os.str();
        },
        *kind_);
  }

 private:
  void validate() const {
    std::visit(
        [](const auto& k) {
          using T = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<T, Euclidean>) {
            require(k.n >= 1, "Euclidean: n >= 1");
          } else if constexpr (std::is_same_v<T, Sphere>) {
            require(k.n >= 1, "Sphere: n >= 1");
          } else if constexpr (std::is_same_v<T, Stiefel>) {
            require(k.p >= 1 && k.p <= k.n, "Stiefel: need 1 <= p <= n");
          } else if constexpr (std::is_same_v<T, SpecialOrthogonal>) {
            require(k.d >= 1, "SpecialOrthogonal: d >= 1");
          } else if constexpr (std::is_same_v<T, Oblique>) {
            require(k.n >= 1 && k.k >= 1, "Oblique: need n >= 1, k >= 1");
          } else if constexpr (std::is_same_v<T, Box>) {
            require(k.lower.size() == k.upper.size() && k.lower.size() >= 1,
                    "Box: bound dimensions must match");
            require_finite(k.lower, "Box lower");
            require_finite(k.upper, "Box upper");
            require((k.lower.array() <= k.upper.array()).all(), "Box: need lower <= upper");
          } else if constexpr (std::is_same_v<T, Affine>) {
            require(k.basis.rows() == k.offset.size() && k.basis.cols() >= 1,
                    "Affine: basis/offset dimensions must match");
            require_finite(k.offset, "Affine offset");
            require_finite(k.basis, "Affine basis");
            const MatrixXd gram = k.basis.transpose() * k.basis;
            require((gram - MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff() < 1e-10,
                    "Affine: basis columns must be orthonormal");
          } else if constexpr (std::is_same_v<T, FiniteSet>) {
            require(k.domain != nullptr, "FiniteSet: domain must be non-null");
          } else {
            require(!k.factors.empty(), "Product: needs at least one factor");
          }
        },
        *kind_);
  }

  std::shared_ptr<const Kind> kind_;
};

// ---------------------------------------------------------------------------
// Point operations
// ---------------------------------------------------------------------------

struct Feasibility {
  bool feasible = false;
  double violation = 0.0;
};

namespace detail {

inline MatrixXd sym(const MatrixXd& a) { return 0.5 * (a + a.transpose()); }
inline MatrixXd skew(const MatrixXd& a) { return 0.5 * (a - a.transpose()); }

template <typename PerFactor>
void for_each_factor(const ProductOf& prod, const VectorXd& x, PerFactor&& fn) {
  int offset = 0;
  for (const auto& f : prod.factors) {
    const int d = f.ambient_dim();
    fn(f, x.segment(offset, d));
    offset += d;
  }
}

}  // namespace detail

inline Feasibility is_feasible(const ManifoldSpec& spec, const VectorXd& x, double tol = 1e-8) {
  require(x.size() == spec.ambient_dim(), "is_feasible: dimension mismatch for " + spec.describe());
  if (!x.allFinite()) return {false, std::numeric_limits<double>::infinity()};
  const double v = std::visit(
      [&](const auto& k) -> double {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, Euclidean>) {
          return 0.0;
        } else if constexpr (std::is_same_v<T, Sphere>) {
          return std::abs(x.norm() - 1.0);
        } else if constexpr (std::is_same_v<T, Stiefel>) {
          const auto m = as_matrix(x, k.n, k.p);
          return (m.transpose() * m - MatrixXd::Identity(k.p, k.p)).cwiseAbs().maxCoeff();
        } else if constexpr (std::is_same_v<T, SpecialOrthogonal>) {
          const auto m = as_matrix(x, k.d, k.d);
          const double ortho =
              (m.transpose() * m - MatrixXd::Identity(k.d, k.d)).cwiseAbs().maxCoeff();
          return std::max(ortho, std::abs(m.determinant() - 1.0));
        } else if constexpr (std::is_same_v<T, Oblique>) {
          const auto m = as_matrix(x, k.n, k.k);
          double worst = 0.0;
          for (int j = 0; j < k.k; ++j) worst = std::max(worst, std::abs(m.col(j).norm() - 1.0));
          return worst;
        } else if constexpr (std::is_same_v<T, Box>) {
          return std::max(0.0, std::max((k.lower - x).maxCoeff(), (x - k.upper).maxCoeff()));
        } else if constexpr (std::is_same_v<T, Affine>) {
          const VectorXd d = x - k.offset;
          return (d - k.basis * (k.basis.transpose() * d)).norm();
        } else if constexpr (std::is_same_v<T, FiniteSet>) {
          return k.domain->violation(x);
        } else {
          double worst = 0.0;
          detail::for_each_factor(k, x, [&](const ManifoldSpec& f, const auto& seg) {
            worst = std::max(worst, is_feasible(f, seg, 0.0).violation);
          });
          return worst;
        }
      },
      spec.kind());
  return {v <= tol, v};
}

// Orthogonal projection of an ambient vector onto the tangent space at x.
// Defined for smooth kinds only.
inline VectorXd project_tangent(const ManifoldSpec& spec, const VectorXd& x, const VectorXd& v) {
  require(x.size() == spec.ambient_dim() && v.size() == spec.ambient_dim(),
          "project_tangent: dimension mismatch for " + spec.describe());
  return std::visit(
      [&](const auto& k) -> VectorXd {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, Euclidean>) {
          return v;
        } else if constexpr (std::is_same_v<T, Sphere>) {
          return v - x.dot(v) * x;
        } else if constexpr (std::is_same_v<T, Stiefel>) {
          const auto xm = as_matrix(x, k.n, k.p);
          const auto vm = as_matrix(v, k.n, k.p);
          return as_vector(MatrixXd(vm - xm * detail::sym(xm.transpose() * vm)));
        } else if constexpr (std::is_same_v<T, SpecialOrthogonal>) {
          const auto xm = as_matrix(x, k.d, k.d);
          const auto vm = as_matrix(v, k.d, k.d);
          return as_vector(MatrixXd(xm * detail::skew(xm.transpose() * vm)));
        } else if constexpr (std::is_same_v<T, Oblique>) {
          const auto xm = as_matrix(x, k.n, k.k);
          const auto vm = as_matrix(v, k.n, k.k);
          MatrixXd out(k.n, k.k);
          for (int j = 0; j < k.k; ++j)
            out.col(j) = vm.col(j) - xm.col(j).dot(vm.col(j)) * xm.col(j);
          return as_vector(out);
        } else if constexpr (std::is_same_v<T, Affine>) {
          return k.basis * (k.basis.transpose() * v);
        } else if constexpr (std::is_same_v<T, ProductOf>) {
          VectorXd out(v.size());
          int offset = 0;
          for (const auto& f : k.factors) {
            const int d = f.ambient_dim();
            out.segment(offset, d) = project_tangent(f, x.segment(offset, d), v.segment(offset, d));
            offset += d;
          }
          return out;
        } else {
          throw unsupported_operation("project_tangent: not defined for " + spec.describe());
        }
      },
      spec.kind());
}

// Retraction of a tangent vector based at x.  Sphere/Oblique renormalize,
// Stiefel/SO use the polar factor, flat kinds translate.
inline VectorXd retract(const ManifoldSpec& spec, const VectorXd& x, const VectorXd& v) {
  require(x.size() == spec.ambient_dim() && v.size() == spec.ambient_dim(),
          "retract: dimension mismatch for " + spec.describe());
  return std::visit(
      [&](const auto& k) -> VectorXd {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, Euclidean> || std::is_same_v<T, Affine>) {
          return x + v;
        } else if constexpr (std::is_same_v<T, Sphere>) {
          const VectorXd y = x + v;
          const double n = y.norm();
          if (n < 1e-14)
            throw degenerate_error("retract: step lands at the sphere's center");
          return y / n;
        } else if constexpr (std::is_same_v<T, Stiefel>) {
          const auto xm = as_matrix(x, k.n, k.p);
          const auto vm = as_matrix(v, k.n, k.p);
          return as_vector(polar_orthogonal_factor(xm + vm));
        } else if constexpr (std::is_same_v<T, SpecialOrthogonal>) {
          const auto xm = as_matrix(x, k.d, k.d);
          const auto vm = as_matrix(v, k.d, k.d);
          return as_vector(polar_orthogonal_factor(xm + vm, /*special=*/true));
        } else if constexpr (std::is_same_v<T, Oblique>) {
          const auto xm = as_matrix(x, k.n, k.k);
          const auto vm = as_matrix(v, k.n, k.k);
          MatrixXd out(k.n, k.k);
          for (int j = 0; j < k.k; ++j) {
            const VectorXd y = xm.col(j) + vm.col(j);
            const double n = y.norm();
            if (n < 1e-14)
              throw degenerate_error("retract: column lands at the sphere's center");
            out.col(j) = y / n;
          }
          return as_vector(out);
        } else if constexpr (std::is_same_v<T, ProductOf>) {
          VectorXd out(x.size());
          int offset = 0;
          for (const auto& f : k.factors) {
            const int d = f.ambient_dim();
            out.segment(offset, d) = retract(f, x.segment(offset, d), v.segment(offset, d));
            offset += d;
          }
          return out;
        } else {
          throw unsupported_operation("retract: not defined for non-smooth kinds");
        }
      },
      spec.kind());
}

// Draw a point on the manifold: Gaussian-based for smooth kinds (uniform on
// spheres and orthogonal frames), uniform for Box, uniform element for finite
// sets, Gaussian coefficients for flat kinds.
inline VectorXd random_point(const ManifoldSpec& spec, Rng& rng) {
  return std::visit(
      [&](const auto& k) -> VectorXd {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, Euclidean>) {
          return rng.gaussian_vector(k.n);
        } else if constexpr (std::is_same_v<T, Sphere>) {
          for (;;) {
            const VectorXd g = rng.gaussian_vector(k.n);
            const double n = g.norm();
            if (n > 1e-12) return g / n;
          }
        } else if constexpr (std::is_same_v<T, Stiefel>) {
          for (;;) {
            try {
              return as_vector(polar_orthogonal_factor(rng.gaussian_matrix(k.n, k.p)));
            } catch (const degenerate_error&) {
            }
          }
        } else if constexpr (std::is_same_v<T, SpecialOrthogonal>) {
          for (;;) {
            try {
              return as_vector(polar_orthogonal_factor(rng.gaussian_matrix(k.d, k.d), true));
            } catch (const degenerate_error&) {
            }
          }
        } else if constexpr (std::is_same_v<T, Oblique>) {
          MatrixXd out(k.n, k.k);
          for (int j = 0; j < k.k; ++j) {
            for (;;) {
              const VectorXd g = rng.gaussian_vector(k.n);
              const double n = g.norm();
              if (n > 1e-12) {
                out.col(j) = g / n;
                break;
              }
            }
          }
          return as_vector(out);
        } else if constexpr (std::is_same_v<T, Box>) {
          VectorXd x(k.lower.size());
          for (int i = 0; i < x.size(); ++i)
            x[i] = k.lower[i] + rng.uniform01() * (k.upper[i] - k.lower[i]);
          return x;
        } else if constexpr (std::is_same_v<T, Affine>) {
          return k.offset + k.basis * rng.gaussian_vector(static_cast<int>(k.basis.cols()));
        } else if constexpr (std::is_same_v<T, FiniteSet>) {
          return k.domain->sample(rng);
        } else {
          VectorXd out(spec.ambient_dim());
          int offset = 0;
          for (const auto& f : k.factors) {
            const int d = f.ambient_dim();
            out.segment(offset, d) = random_point(f, rng);
            offset += d;
          }
          return out;
        }
      },
      spec.kind());
}

// Random unit tangent vector at x (smooth kinds); zero when the tangent
// space is trivial.
inline VectorXd random_tangent(const ManifoldSpec& spec, const VectorXd& x, Rng& rng) {
  if (spec.dim() == 0) return VectorXd::Zero(spec.ambient_dim());
  for (;;) {
    const VectorXd t = project_tangent(spec, x, rng.gaussian_vector(spec.ambient_dim()));
    const double n = t.norm();
    if (n > 1e-12) return t / n;
  }
}

// Pull a nearly-feasible point back onto the manifold (used to control
// feasibility drift on long runs).  Identity for flat kinds and finite sets.
inline VectorXd reproject(const ManifoldSpec& spec, const VectorXd& x) {
  require(x.size() == spec.ambient_dim(), "reproject: dimension mismatch");
  return std::visit(
      [&](const auto& k) -> VectorXd {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, Euclidean> || std::is_same_v<T, FiniteSet>) {
          return x;
        } else if constexpr (std::is_same_v<T, Sphere>) {
          const double n = x.norm();
          if (n < 1e-14) throw degenerate_error("reproject: zero point on sphere");
          return x / n;
        } else if constexpr (std::is_same_v<T, Stiefel>) {
          return as_vector(polar_orthogonal_factor(MatrixXd(as_matrix(x, k.n, k.p))));
        } else if constexpr (std::is_same_v<T, SpecialOrthogonal>) {
          return as_vector(polar_orthogonal_factor(MatrixXd(as_matrix(x, k.d, k.d)), true));
        } else if constexpr (std::is_same_v<T, Oblique>) {
          const auto xm = as_matrix(x, k.n, k.k);
          MatrixXd out(k.n, k.k);
          for (int j = 0; j < k.k; ++j) {
            const double n = xm.col(j).norm();
            if (n < 1e-14) throw degenerate_error("reproject: zero column on oblique");
            out.col(j) = xm.col(j) / n;
          }
          return as_vector(out);
        } else if constexpr (std::is_same_v<T, Box>) {
          return x.cwiseMax(k.lower).cwiseMin(k.upper);
        } else if constexpr (std::is_same_v<T, Affine>) {
          return k.offset + k.basis * (k.basis.transpose() * (x - k.offset));
        } else {
          VectorXd out(x.size());
          int offset = 0;
          for (const auto& f : k.factors) {
            const int d = f.ambient_dim();
            out.segment(offset, d) = reproject(f, x.segment(offset, d));
            offset += d;
          }
          return out;
        }
      },
      spec.kind());
}

// ---------------------------------------------------------------------------
// ProductPoint: one coordinate vector per block of the solver-level product
// manifold M_1 x ... x M_b.
// ---------------------------------------------------------------------------

class ProductPoint {
 public:
  ProductPoint() = default;
  explicit ProductPoint(std::vector<VectorXd> blocks) : blocks_(std::move(blocks)) {}

  int num_blocks() const { return static_cast<int>(blocks_.size()); }
  const VectorXd& block(int i) const { return blocks_.at(static_cast<std::size_t>(i)); }
  VectorXd& block(int i) { return blocks_.at(static_cast<std::size_t>(i)); }
  const std::vector<VectorXd>& blocks() const { return blocks_; }

 private:
  std::vector<VectorXd> blocks_;
};

// Validated construction of a ProductPoint from per-block coordinates.
inline ProductPoint product_pack(const std::vector<ManifoldSpec>& specs,
                                 std::vector<VectorXd> blocks) {
  require(specs.size() == blocks.size(), "product_pack: block count mismatch");
  for (std::size_t i = 0; i < specs.size(); ++i)
    require(blocks[i].size() == specs[i].ambient_dim(),
            "product_pack: block " + std::to_string(i + 1) + " dimension mismatch");
  return ProductPoint(std::move(blocks));
}

// Per-block views of a ProductPoint; with product_pack forms a lossless
// round trip.
inline const std::vector<VectorXd>& product_unpack(const ProductPoint& p) { return p.blocks(); }

inline ProductPoint random_product_point(const std::vector<ManifoldSpec>& specs, Rng& rng) {
  std::vector<VectorXd> blocks;
  blocks.reserve(specs.size());
  for (const auto& s : specs) blocks.push_back(random_point(s, rng));
  return ProductPoint(std::move(blocks));
}

inline Feasibility is_feasible(const std::vector<ManifoldSpec>& specs, const ProductPoint& p,
                               double tol = 1e-8) {
  require(static_cast<int>(specs.size()) == p.num_blocks(),
          "is_feasible: block count mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < specs.size(); ++i)
    worst = std::max(worst, is_feasible(specs[i], p.block(static_cast<int>(i)), 0.0).violation);
  return {worst <= tol, worst};
}

}  // namespace mbcd

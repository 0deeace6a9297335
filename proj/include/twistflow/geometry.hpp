#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "twistflow/error.hpp"
#include "twistflow/types.hpp"

namespace twistflow {

/// Form type of a field, stored as the coefficient against the fixed coframe
/// 1, dz, dz̄ or dz∧dz̄.
struct Bidegree {
  int p = 0;
  int q = 0;
  friend bool operator==(const Bidegree&, const Bidegree&) = default;
};

inline constexpr Bidegree kFunction{0, 0};
inline constexpr Bidegree kForm10{1, 0};
inline constexpr Bidegree kForm01{0, 1};
inline constexpr Bidegree kForm11{1, 1};

/// Flat torus C/(Z + τZ) sampled at z_{jk} = j/N + (k/N)τ, with Kähler form
/// σ = (i/2) dz∧dz̄ (so the volume is Im τ).
class TorusGeometry {
 public:
  TorusGeometry() = default;

  cplx tau() const { return tau_; }
  int grid_n() const { return n_; }
  std::size_t size() const { return static_cast<std::size_t>(n_) * n_; }
  double volume() const { return tau_.imag(); }

  /// Flat index of sample (j, k); j runs along the real generator.
  std::size_t index(int j, int k) const { return static_cast<std::size_t>(j) * n_ + k; }
  int j_of(std::size_t p) const { return static_cast<int>(p / n_); }
  int k_of(std::size_t p) const { return static_cast<int>(p % n_); }

  double s(std::size_t p) const { return static_cast<double>(j_of(p)) / n_; }
  double t(std::size_t p) const { return static_cast<double>(k_of(p)) / n_; }
  cplx point(std::size_t p) const { return s(p) + t(p) * tau_; }

  friend bool operator==(const TorusGeometry& a, const TorusGeometry& b) {
    return a.tau_ == b.tau_ && a.n_ == b.n_;
  }

 private:
  friend TorusGeometry make_torus(cplx tau, int grid_n);
  cplx tau_{0.0, 1.0};
  int n_ = 8;
};

/// Throws NonPositiveModulus if Im τ ≤ 0, BadGrid if grid_n is odd or < 8.
TorusGeometry make_torus(cplx tau, int grid_n);

/// N×N periodic complex samples of a (p,q)-form coefficient.
class ScalarField {
 public:
  ScalarField() = default;
  ScalarField(const TorusGeometry& geom, Bidegree bidegree = kFunction)
      : geom_(geom), bidegree_(bidegree), values_(geom.size()) {}
  ScalarField(const TorusGeometry& geom, std::vector<cplx> values, Bidegree bidegree = kFunction);

  template <class Fn>
  static ScalarField sample(const TorusGeometry& geom, Fn&& fn, Bidegree bidegree = kFunction) {
    ScalarField f(geom, bidegree);
    for (std::size_t p = 0; p < geom.size(); ++p) f.values_[p] = fn(geom.s(p), geom.t(p));
    return f;
  }

  const TorusGeometry& geometry() const { return geom_; }
  Bidegree bidegree() const { return bidegree_; }
  void set_bidegree(Bidegree b) { bidegree_ = b; }

  std::span<cplx> values() { return values_; }
  std::span<const cplx> values() const { return values_; }
  cplx& operator[](std::size_t p) { return values_[p]; }
  cplx operator[](std::size_t p) const { return values_[p]; }

  double sup_norm() const;

  ScalarField& operator+=(const ScalarField& o);
  ScalarField& operator-=(const ScalarField& o);
  ScalarField& operator*=(cplx a);
  friend ScalarField operator+(ScalarField a, const ScalarField& b) { return a += b; }
  friend ScalarField operator-(ScalarField a, const ScalarField& b) { return a -= b; }
  friend ScalarField operator*(cplx a, ScalarField b) { return b *= a; }

 private:
  TorusGeometry geom_;
  Bidegree bidegree_;
  std::vector<cplx> values_;
};

enum class Direction { Holomorphic, Antiholomorphic };

/// Exterior ∂ or ∂̄. Lattice derivatives are spectral and the chain rule
/// ∂_z = (τ̄∂_s − ∂_t)/(τ̄ − τ), ∂_z̄ = (∂_t − τ∂_s)/(τ̄ − τ) converts them.
/// ∂̄ of a (1,0) coefficient picks up the sign of dz̄∧dz = −dz∧dz̄.
ScalarField derivative(const ScalarField& field, Direction direction);

/// Λ_g: (1,1) → (0,0); Λ(dz∧dz̄) = −2i, so Λσ = 1.
ScalarField hodge_lambda(const ScalarField& form);

/// ∫ over X; (0,0) input is integrated against σ.
cplx integrate(const ScalarField& form);

/// iΛ∂̄∂ applied to a function (equals −2∂_z∂_z̄, a non-negative operator).
ScalarField laplace_operator(const ScalarField& function);

/// Zero-mean u with iΛ∂̄∂u = rhs. Throws NonZeroMean if |∫rhs σ| exceeds the
/// tolerance.
ScalarField poisson_solve(const ScalarField& rhs, double tolerance = 1e-8);

/// Plane-level spectral primitives shared by scalar and matrix fields. Every
/// plane is N×N samples in the layout of TorusGeometry::index.
namespace spectral {

void derivative(const TorusGeometry& geom, std::span<const cplx> in, std::span<cplx> out,
                Direction direction);

/// Applies ∂_z∂_z̄ (no form sign bookkeeping).
void mixed_second(const TorusGeometry& geom, std::span<const cplx> in, std::span<cplx> out);

/// Inverse of iΛ∂̄∂ on the zero-mean part; the mean of the output is zero.
void inverse_laplace(const TorusGeometry& geom, std::span<const cplx> in, std::span<cplx> out);

/// (1 + dt·iΛ∂̄∂)^{-1}: the implicit-Euler resolvent of the principal part of
/// the heat flow.
void resolvent(const TorusGeometry& geom, double dt, std::span<const cplx> in,
               std::span<cplx> out);

/// Symbol of iΛ∂̄∂ at lattice frequency (m, n); real and ≥ 0.
double laplace_symbol(const TorusGeometry& geom, int m, int n);

cplx mean(std::span<const cplx> plane);

}  // namespace spectral

}  // namespace twistflow

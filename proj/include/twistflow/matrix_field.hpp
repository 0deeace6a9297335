#pragma once

#include <functional>
#include <span>
#include <vector>

#include "twistflow/geometry.hpp"
#include "twistflow/kernels.hpp"

namespace twistflow {

/// How stored values are transported across the two lattice seams.
///   Scalar:       strictly periodic function-valued entries.
///   Endomorphism: M(z+λ) = a_λ(z) M(z) a_λ(z)^{-1}.
///   Morphism:     M(z+λ) = b_λ(z) M(z) a_λ(z)^{-1} between two bundles.
///   Frame:        not covariant (grid values of non-periodic data such as
///                 multipliers, connection matrices in the holomorphic frame).
enum class Covariance { Scalar, Endomorphism, Morphism, Frame };

/// Grid of rows×cols complex matrices. Storage is planar: one N×N plane per
/// matrix entry so spectral derivatives act on contiguous memory.
class MatrixField {
 public:
  MatrixField() = default;
  MatrixField(const TorusGeometry& geom, int rows, int cols, Bidegree bidegree = kFunction,
              Covariance covariance = Covariance::Endomorphism);

  static MatrixField constant(const TorusGeometry& geom, const Mat& value, Bidegree bidegree = kFunction,
                              Covariance covariance = Covariance::Endomorphism);
  static MatrixField identity(const TorusGeometry& geom, int rank);
  /// f·id_r
  static MatrixField scalar(const ScalarField& f, int rank);

  template <class Fn>
  static MatrixField generate(const TorusGeometry& geom, int rows, int cols, Fn&& fn,
                              Bidegree bidegree = kFunction, Covariance cov = Covariance::Endomorphism,
                              Exec exec = default_exec()) {
    MatrixField out(geom, rows, cols, bidegree, cov);
    for_each_point(geom.size(), [&](std::size_t p) { out.set(p, fn(p)); }, exec);
    return out;
  }

  const TorusGeometry& geometry() const { return geom_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t points() const { return geom_.size(); }
  Bidegree bidegree() const { return bidegree_; }
  void set_bidegree(Bidegree b) { bidegree_ = b; }
  Covariance covariance() const { return covariance_; }
  void set_covariance(Covariance c) { covariance_ = c; }

  Mat at(std::size_t p) const;
  void set(std::size_t p, const Mat& m);

  cplx& entry(int a, int b, std::size_t p) { return data_[plane_offset(a, b) + p]; }
  cplx entry(int a, int b, std::size_t p) const { return data_[plane_offset(a, b) + p]; }
  std::span<cplx> plane(int a, int b) { return {data_.data() + plane_offset(a, b), points()}; }
  std::span<const cplx> plane(int a, int b) const { return {data_.data() + plane_offset(a, b), points()}; }

  ScalarField entry_field(int a, int b) const;
  ScalarField trace() const;
  double sup_norm() const;
  /// Grid mean of every entry.
  Mat mean() const;

  MatrixField adjoint() const;
  MatrixField transpose() const;

  MatrixField& operator+=(const MatrixField& o);
  MatrixField& operator-=(const MatrixField& o);
  MatrixField& operator*=(cplx a);
  friend MatrixField operator+(MatrixField a, const MatrixField& b) { return a += b; }
  friend MatrixField operator-(MatrixField a, const MatrixField& b) { return a -= b; }
  friend MatrixField operator*(cplx a, MatrixField b) { return b *= a; }

 private:
  std::size_t plane_offset(int a, int b) const {
    return (static_cast<std::size_t>(a) * cols_ + b) * points();
  }
  TorusGeometry geom_;
  int rows_ = 0;
  int cols_ = 0;
  Bidegree bidegree_;
  Covariance covariance_ = Covariance::Endomorphism;
  std::vector<cplx> data_;
};

/// Pointwise coefficient product; bidegrees add (no wedge sign).
MatrixField operator*(const MatrixField& a, const MatrixField& b);
/// Pointwise product with the wedge sign dz̄∧dz = −dz∧dz̄ applied.
MatrixField wedge(const MatrixField& a, const MatrixField& b);
/// Pointwise [a, b] = ab − ba, bidegrees add.
MatrixField commutator(const MatrixField& a, const MatrixField& b);
/// Scalar-field multiple, pointwise.
MatrixField operator*(const ScalarField& f, const MatrixField& m);

/// Pointwise inverse; throws Singular at the first non-invertible sample.
MatrixField inverse(const MatrixField& m, Exec exec = default_exec());

/// Entrywise spectral ∂ or ∂̄ with the same form bookkeeping as the scalar
/// derivative.
MatrixField derivative(const MatrixField& m, Direction direction);

/// Applies fn to the spectrum of a pointwise Hermitian field.
MatrixField hermitian_function(const MatrixField& herm, const std::function<double(double)>& fn,
                               Exec exec = default_exec());

/// Pointwise maps with an explicit execution policy.
MatrixField map_points(const MatrixField& in, int rows, int cols, const std::function<Mat(const Mat&)>& fn,
                       Exec exec = default_exec());

double sup_distance(const MatrixField& a, const MatrixField& b);

/// max over the grid of ‖M − M^†‖.
double hermitian_defect(const MatrixField& m);

}  // namespace twistflow

#pragma once

#include <cstdint>
#include <vector>

#include "twistflow/bundle.hpp"

namespace twistflow {

/// Hermitian metric h on a bundle, stored through its decomposition against
/// the reference metric: H(z) = H_ref(z)·F(z) with F = f^{h_ref,h} = exp(S).
///
/// F is periodic on the grid. Because H_ref is a scalar multiple of the
/// identity on each reference-degree block and F is block diagonal, F is
/// Hermitian in the flat inner product.
class MetricState {
 public:
  MetricState() = default;

  /// Validates Hermitian symmetry (1e-12 relative), positivity (min eigenvalue
  /// > 1e-12, else DegenerateMetric) and seam covariance (< 1e-10).
  static MetricState from_relative(BundlePtr bundle, MatrixField relative);
  static MetricState from_exponent(BundlePtr bundle, const MatrixField& exponent);
  static MetricState reference(BundlePtr bundle);
  /// e^{u}·h for a real function u.
  static MetricState conformal(const MetricState& h, const ScalarField& u);

  const BundleSpec& bundle() const { return *bundle_; }
  const BundlePtr& bundle_ptr() const { return bundle_; }
  int rank() const { return bundle_->rank; }
  const TorusGeometry& geometry() const { return relative_.geometry(); }

  const MatrixField& relative() const { return relative_; }
  const MatrixField& exponent() const { return exponent_; }
  /// F^{1/2} and F^{-1/2}, cached from the same eigendecomposition as S.
  const MatrixField& sqrt_relative() const { return sqrt_; }
  const MatrixField& inv_sqrt_relative() const { return inv_sqrt_; }

  /// Metric matrices H on the fundamental-domain grid (not periodic).
  MatrixField matrix() const;
  double min_eigenvalue() const { return min_eig_; }
  double max_eigenvalue() const { return max_eig_; }

 private:
  BundlePtr bundle_;
  MatrixField relative_;
  MatrixField exponent_;
  MatrixField sqrt_;
  MatrixField inv_sqrt_;
  double min_eig_ = 0.0;
  double max_eig_ = 0.0;
};

/// Smooth random Hermitian endomorphism field built from Fourier modes with
/// |m|, |n| ≤ modes, projected onto the bundle's covariant subspace and scaled
/// so its sup norm equals amplitude.
MatrixField random_hermitian_field(const BundleSpec& bundle, std::uint64_t seed, double amplitude, int modes = 2);

/// Sup relative defect of H(z+λ) = (a_λ^*)^{-1} H(z) a_λ^{-1} over the grid.
double metric_seam_residual(const MetricState& h);

/// Hermitian (not necessarily definite) form, stored relative to the
/// reference metric: V = H_ref·G.
class HermitianFormField {
 public:
  HermitianFormField() = default;
  /// Throws NotHermitian if G is not Hermitian to 1e-10 (relative).
  static HermitianFormField from_relative(BundlePtr bundle, MatrixField relative);
  static HermitianFormField from_metric(const MetricState& h);

  const BundleSpec& bundle() const { return *bundle_; }
  const BundlePtr& bundle_ptr() const { return bundle_; }
  const MatrixField& relative() const { return relative_; }

  HermitianFormField& operator+=(const HermitianFormField& o);
  HermitianFormField& operator*=(double a);
  friend HermitianFormField operator+(HermitianFormField a, const HermitianFormField& b) { return a += b; }
  friend HermitianFormField operator*(double a, HermitianFormField v) { return v *= a; }

 private:
  BundlePtr bundle_;
  MatrixField relative_;
};

bool same_bundle(const BundleSpec& a, const BundleSpec& b);

/// f^{h,v} = H^{-1}V. Throws BundleMismatch.
MatrixField endo_from_form(const MetricState& h, const HermitianFormField& v);
MatrixField endo_from_form(const MetricState& h, const MetricState& k);

/// Form v with f^{h,v} = f. Throws NotHermitian unless HF is Hermitian to 1e-10.
HermitianFormField form_from_endo(const MetricState& h, const MatrixField& f);
MetricState metric_from_endo(const MetricState& h, const MatrixField& f);

enum class SpectralFunction { Exp, Log, Power };

/// Applies exp, log or x^σ to an h-Hermitian endomorphism field by
/// diagonalizing F^{1/2} f F^{-1/2}. Throws SpectrumOutOfDomain when log or a
/// power meets a non-positive eigenvalue, NotHermitian for non h-Hermitian f.
MatrixField functional_calculus(const MetricState& h, const MatrixField& f, SpectralFunction fn,
                                double sigma = 1.0);

/// Eigenvalues of an h-Hermitian endomorphism field, ascending per point.
std::vector<Vec> hermitian_eigenvalues(const MetricState& h, const MatrixField& f);

/// h-adjoint f^{*h} = F^{-1} f^† F.
MatrixField h_adjoint(const MetricState& h, const MatrixField& f);

/// Transported form a·v with matrix a^† V a. Throws Singular.
HermitianFormField gauge_act(const MatrixField& a, const HermitianFormField& v);
MetricState gauge_act(const MatrixField& a, const MetricState& h);

/// Pointwise factor a with h = a·k (Cholesky-type), witnessing transitivity.
MatrixField gauge_between(const MetricState& h, const MetricState& k);

/// (v, w)_h = ∫ Tr(f^{h,v} f^{h,w}) σ.
double inner_product(const MetricState& h, const HermitianFormField& v, const HermitianFormField& w);

enum class PathKind { Geodesic, Linear, Custom };

/// Piecewise-differentiable path of metrics sampled at uniform nodes on
/// [0, t_end]. tangents[i] = f^{h_t, h_t'} at node i.
struct MetricPath {
  PathKind kind = PathKind::Geodesic;
  double t_end = 1.0;
  std::vector<MetricState> samples;
  std::vector<MatrixField> tangents;

  const MetricState& start() const { return samples.front(); }
  const MetricState& end() const { return samples.back(); }
  double spacing() const { return t_end / static_cast<double>(samples.size() - 1); }
};

/// h_t = form_from_endo(h, exp(t·log f^{h,k})). nodes must be odd and ≥ 3.
MetricPath geodesic_path(const MetricState& h, const MetricState& k, int nodes);
/// H_t = (1 − t)H + tK.
MetricPath linear_path(const MetricState& h, const MetricState& k, int nodes);
/// Samples supplied by the caller; tangents by second-order differences.
MetricPath custom_path(std::vector<MetricState> samples, double t_end = 1.0);

/// Geodesic sample at a single parameter value.
MetricState geodesic_point(const MetricState& h, const MetricState& k, double t);

MetricPath reverse(const MetricPath& path);
/// Joins two paths with the same node spacing; end of a must equal start of b.
MetricPath concatenate(const MetricPath& a, const MetricPath& b);

}  // namespace twistflow

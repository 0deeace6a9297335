#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "twistflow/matrix_field.hpp"
#include "twistflow/twist.hpp"

namespace twistflow {

class BundleSpec;
using BundlePtr = std::shared_ptr<const BundleSpec>;

enum class Generator { One, Tau };

/// A declared holomorphic subbundle S ⊂ E together with the quotient data
/// used to split E ≅ S ⊕ S^⊥. The inclusion must map each reference-degree
/// block of S into the block of E with the same degree.
struct InclusionSpec {
  BundlePtr sub;
  BundlePtr quotient;
  MatrixField inclusion;  ///< r × s, holomorphic
  Mat quotient_map;       ///< q × r constant p with p∘inclusion = 0
  Mat quotient_lift;      ///< r × q constant with p∘lift = id
  double sub_degree_hint = 0.0;
};

/// Twisted holomorphic bundle on the torus in factor-of-automorphy form.
///
/// Sections satisfy s(z+λ) = a_λ(z) s(z) with a_1(z) = M_1 and
/// a_τ(z) = M_τ·diag(exp(−πi d_j τ − 2πi d_j z)), where the constant parts
/// commute with the diagonal factor. The holomorphic structure is ∂̄ + A dz̄.
/// The reference metric is diag(exp(−2π d_j (Im z)² / Im τ)).
class BundleSpec {
 public:
  std::string name;
  TorusGeometry geometry;
  int rank = 0;
  Mat mult_one;
  Mat mult_tau;
  Vec degrees;
  MatrixField deformation;
  TwistDescriptor twist;
  std::string reference_metric_id;
  std::vector<InclusionSpec> declared_subbundles;

  Mat multiplier(Generator g, cplx z) const;
  MatrixField multiplier_field(Generator g) const;

  /// Reference metric matrix at an arbitrary point (not periodic).
  Mat reference_metric(cplx z) const;
  /// Connection matrix H_ref^{-1}∂_z H_ref at z (coefficient of dz).
  Mat reference_connection(cplx z) const;
  /// Constant curvature coefficient of the reference metric against dz∧dz̄,
  /// before the B-field correction.
  Mat reference_curvature() const;

  bool has_deformation() const;
};

enum class PresetKind { LineBundle, DirectSum, Extension, AtiyahF2, Heisenberg };

struct PresetParams {
  int d = 0;
  std::vector<int> degrees;
  int d1 = 0;
  int d2 = 0;
  cplx beta{1.0, 0.0};
  /// Extension class representative; only constants (harmonic on the torus)
  /// are supported.
  std::optional<ScalarField> beta_profile;
  int r = 2;
  int p = 1;
  double b_coeff = 0.0;
};

/// Throws UnsupportedParams for parameters outside the supported catalog.
BundlePtr make_preset(const TorusGeometry& geom, PresetKind kind, const PresetParams& params);

BundlePtr make_line_bundle(const TorusGeometry& geom, int d);
BundlePtr make_direct_sum(const TorusGeometry& geom, const std::vector<int>& degrees);
BundlePtr make_atiyah_f2(const TorusGeometry& geom, cplx beta);
BundlePtr make_heisenberg(const TorusGeometry& geom, int r, int p);

/// Copy of the bundle with a different B coefficient.
BundlePtr with_b_coeff(const BundleSpec& bundle, double b_coeff);

BundlePtr bundle_dual(const BundleSpec& b);
/// Throws TwistMismatch for different twists.
BundlePtr bundle_dsum(const BundleSpec& b1, const BundleSpec& b2);
BundlePtr bundle_tensor(const BundleSpec& b1, const BundleSpec& b2);
/// End(E) = E^* ⊗ E.
BundlePtr bundle_end(const BundleSpec& b);

/// Covariance defect of a field across both seams. Endomorphism fields are
/// checked against a M a^{-1}; morphism fields need the source bundle.
/// Throws ShapeMismatch on rank disagreement.
double seam_residual(const MatrixField& field, const BundleSpec& bundle);
double seam_residual(const MatrixField& field, const BundleSpec& target, const BundleSpec& source);

/// Orthogonal projection of an endomorphism field onto the covariant
/// subspace: entries between blocks of different reference degree are
/// removed and the result is averaged over conjugation by the constant
/// multiplier group.
MatrixField project_covariant(const MatrixField& field, const BundleSpec& bundle);

Mat kron(const Mat& a, const Mat& b);
Mat block_diag(const Mat& a, const Mat& b);

}  // namespace twistflow

#pragma once

#include "twistflow/herm.hpp"

namespace twistflow {

/// Chern curvature with the B-field already removed, stored as the
/// coefficient of dz∧dz̄.
struct CurvatureField {
  MatrixField value;
  TwistDescriptor b_applied;
};

struct BundleReport {
  double degree = 0.0;
  double slope = 0.0;
  double einstein_constant = 0.0;
  double he_residual_sup = 0.0;
  double he_residual_l2 = 0.0;
};

/// Periodic part F^{-1}∂F − F^{-1}A^†F of the Chern connection (dz coefficient).
MatrixField relative_connection(const BundleSpec& bundle, const MetricState& h);

/// Total (1,0) connection coefficient in the holomorphic frame at the grid
/// points, including the reference part diag(2πi d_j Im z / Im τ).
MatrixField chern_connection(const BundleSpec& bundle, const MetricState& h);

CurvatureField curvature(const BundleSpec& bundle, const MetricState& h);

/// K = iΛR̃, an h-Hermitian endomorphism field.
MatrixField mean_curvature(const BundleSpec& bundle, const MetricState& h);

/// K⁰ = K − c·id.
MatrixField trace_free_curvature(const BundleSpec& bundle, const MetricState& h);

/// Topological degree Σd_j shifted by the B-field: Σd_j + r·b·Vol/2π.
double analytic_degree(const BundleSpec& bundle);
/// 2π·deg/(r·Vol).
double einstein_constant(const BundleSpec& bundle);

/// Degree-k part of det(I − X/2πi). Throws BadDegree unless 1 ≤ k ≤ dim X.
cplx chern_form_poly(const Mat& x, int k);

BundleReport bundle_report(const BundleSpec& bundle, const MetricState& h);

/// e^{u}h with iΛ∂̄∂u = c − Tr K / r. Throws NotWeakHE if K − (Tr K/r)·id
/// exceeds weak_tolerance in sup norm.
MetricState conformal_normalize(const BundleSpec& bundle, const MetricState& h, double weak_tolerance = 1e-6);

/// iΛ∂̄_E D^{1,0}f for an endomorphism field f, with D the Chern connection
/// of h acting on End(E). This is ∂_t K along h_t with f^{h_t,h_t'} = f.
MatrixField curvature_variation(const BundleSpec& bundle, const MetricState& h, const MatrixField& f);

}  // namespace twistflow

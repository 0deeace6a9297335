#pragma once

#include <string>
#include <vector>

#include "twistflow/chern.hpp"

namespace twistflow {

/// Orthogonal splitting E ≅ S ⊕ S^⊥ induced by a metric, with the quotient
/// realized on S^⊥. The sub and quotient bundles carry the holomorphic
/// structures induced from E.
struct SplitStructure {
  BundlePtr sub_bundle;
  BundlePtr quotient_bundle;
  MetricState sub_metric;
  MetricState quotient_metric;
  MatrixField inclusion;                ///< ι, r × s
  MatrixField projection_to_sub;        ///< π, s × r with π∘ι = id
  MatrixField splitting_from_quotient;  ///< φ, r × q with p∘φ = id
  MatrixField second_form_A;            ///< (1,0), q × s
  MatrixField second_form_C;            ///< (0,1), s × q
};

/// Throws NotInjective if ι drops rank at a grid point.
SplitStructure induced_structures(const BundleSpec& bundle, const InclusionSpec& incl, const MetricState& h);

/// ι∘π, the h-orthogonal projector of E onto S.
MatrixField sub_projector(const SplitStructure& split);

/// C^* = (F^Q)^{-1} C^† F^S, a (1,0) form valued in Hom(S, Q).
MatrixField c_adjoint(const SplitStructure& split);

/// ‖C‖² = 2∫Tr(C C^*)σ, the L² norm of the (0,1)-form C.
double c_norm_squared(const SplitStructure& split);

/// Sup distance between T^{-1}R_E T (T = [ι φ]) and the block curvature
/// assembled from the sub, quotient and second fundamental form data.
double gauss_codazzi_residual(const BundleSpec& bundle, const InclusionSpec& incl, const MetricState& h);

enum class StabilityKind { StableAmongWitnesses, StrictlySemistableWitnessed, UnstableWitnessed };

std::string to_string(StabilityKind kind);

struct WitnessSlope {
  std::string name;
  int rank = 0;
  double degree = 0.0;
  double slope = 0.0;
  double quotient_slope = 0.0;
};

struct StabilityVerdict {
  StabilityKind kind = StabilityKind::StableAmongWitnesses;
  double slope = 0.0;
  std::vector<WitnessSlope> witnesses;
};

/// Compares μ(E) with μ(S) for every declared witness (tolerance 1e-8).
/// Rank-1 bundles are stable. Throws NoWitnesses otherwise when none are
/// declared.
StabilityVerdict slope_verdict(const BundleSpec& bundle, const MetricState& h);

struct WeakHoloResidual {
  double adjoint = 0.0;     ///< sup |π − π^{*h}|
  double idempotent = 0.0;  ///< sup |π − π²|
  double holomorphic = 0.0; ///< sup |(id − π)∘∂̄_E π|
};

WeakHoloResidual weakly_holo_residual(const BundleSpec& bundle, const MetricState& h, const MatrixField& proj);

}  // namespace twistflow

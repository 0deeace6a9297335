#pragma once

#include <array>

#include "twistflow/types.hpp"

namespace twistflow {

class BundleSpec;
class MetricState;

/// Twist data for the two-generator cover of the torus: the projective phase
/// ε of the multiplier pair, a constant B-field and its correction one-forms.
///
/// B is the constant (1,1)-form i·b_coeff·σ; with constant B the correction
/// forms vanish and their compatibility holds trivially.
struct TwistDescriptor {
  cplx epsilon{1.0, 0.0};
  double b_coeff = 0.0;
  std::array<cplx, 2> omega{};

  bool is_trivial(double tol = 1e-14) const {
    return std::abs(epsilon - 1.0) <= tol && b_coeff == 0.0;
  }
};

bool same_twist(const TwistDescriptor& a, const TwistDescriptor& b, double tol = 1e-12);

enum class TwistOp { Tensor, Dual, Conjugate };

/// Tensor multiplies phases and adds B; Dual and Conjugate act on `a` alone
/// (invert/conjugate ε, negate B).
TwistDescriptor twist_compose(const TwistDescriptor& a, const TwistDescriptor& b, TwistOp op);

struct ValidationReport {
  double defect = 0.0;        ///< sup relative defect of a_τ(z+1)a_1(z) = ε a_1(z+τ)a_τ(z)
  cplx epsilon{1.0, 0.0};     ///< declared phase
  cplx measured_epsilon{1.0, 0.0};
  bool passed = false;
};

/// Throws ShapeMismatch if the multiplier ranks disagree.
ValidationReport validate_twist(const BundleSpec& bundle);

struct ShiftReport {
  double predicted_degree_shift = 0.0;
  double predicted_einstein_shift = 0.0;
  double measured_degree_shift = 0.0;
  double measured_einstein_shift = 0.0;
  /// sup over the grid of |ΔK − Δc·id|; zero when the bookkeeping is consistent.
  double k_minus_c_change = 0.0;
};

/// Shifts b_coeff by delta_b and compares predicted against measured degree
/// and Einstein-constant shifts, using the bundle's reference metric.
ShiftReport b_shift_report(const BundleSpec& bundle, double delta_b);
ShiftReport b_shift_report(const BundleSpec& bundle, const MetricState& h, double delta_b);

}  // namespace twistflow

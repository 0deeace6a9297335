#include "twistflow/twist.hpp"

#include <cmath>

#include "twistflow/bundle.hpp"
#include "twistflow/chern.hpp"

namespace twistflow {

bool same_twist(const TwistDescriptor& a, const TwistDescriptor& b, double tol) {
  return std::abs(a.epsilon - b.epsilon) <= tol && std::abs(a.b_coeff - b.b_coeff) <= tol &&
         std::abs(a.omega[0] - b.omega[0]) <= tol && std::abs(a.omega[1] - b.omega[1]) <= tol;
}

TwistDescriptor twist_compose(const TwistDescriptor& a, const TwistDescriptor& b, TwistOp op) {
  TwistDescriptor out;
  switch (op) {
    case TwistOp::Tensor:
      out.epsilon = a.epsilon * b.epsilon;
      out.epsilon /= std::abs(out.epsilon);
      out.b_coeff = a.b_coeff + b.b_coeff;
      out.omega = {a.omega[0] + b.omega[0], a.omega[1] + b.omega[1]};
      break;
    case TwistOp::Dual:
      out.epsilon = std::conj(a.epsilon);
      out.b_coeff = -a.b_coeff;
      out.omega = {-a.omega[0], -a.omega[1]};
      break;
    case TwistOp::Conjugate:
      // B is purely imaginary, so conjugation negates its real coefficient.
      out.epsilon = std::conj(a.epsilon);
      out.b_coeff = -a.b_coeff;
      out.omega = {std::conj(a.omega[0]), std::conj(a.omega[1])};
      break;
  }
  return out;
}

ValidationReport validate_twist(const BundleSpec& bundle) {
  if (bundle.mult_one.rows() != bundle.mult_tau.rows() || bundle.mult_one.rows() != bundle.rank ||
      bundle.mult_one.rows() != bundle.mult_one.cols() || bundle.mult_tau.rows() != bundle.mult_tau.cols()) {
    throw Error(ErrorCode::ShapeMismatch, "multiplier ranks disagree");
  }
  const auto& g = bundle.geometry;
  const cplx tau = g.tau();
  ValidationReport rep;
  rep.epsilon = bundle.twist.epsilon;
  cplx num{};
  double den = 0.0;
  for (std::size_t p = 0; p < g.size(); ++p) {
    const cplx z = g.point(p);
    const Mat lhs = bundle.multiplier(Generator::Tau, z + 1.0) * bundle.multiplier(Generator::One, z);
    const Mat rhs = bundle.multiplier(Generator::One, z + tau) * bundle.multiplier(Generator::Tau, z);
    const double scale = std::max(1.0, max_abs(lhs));
    rep.defect = std::max(rep.defect, max_abs(lhs - rep.epsilon * rhs) / scale);
    num += (rhs.adjoint() * lhs).trace() / (scale * scale);
    den += rhs.squaredNorm() / (scale * scale);
  }
  if (den > 0.0) rep.measured_epsilon = num / den;
  rep.passed = rep.defect < 1e-10;
  return rep;
}

ShiftReport b_shift_report(const BundleSpec& bundle, double delta_b) {
  BundlePtr copy = std::make_shared<BundleSpec>(bundle);
  return b_shift_report(bundle, MetricState::reference(copy), delta_b);
}

ShiftReport b_shift_report(const BundleSpec& bundle, const MetricState& h, double delta_b) {
  BundlePtr shifted = with_b_coeff(bundle, bundle.twist.b_coeff + delta_b);
  const MetricState h2 = MetricState::from_relative(shifted, h.relative());
  const auto before = bundle_report(bundle, h);
  const auto after = bundle_report(*shifted, h2);
  ShiftReport rep;
  rep.predicted_degree_shift = bundle.rank * delta_b * bundle.geometry.volume() / (2.0 * kPi);
  rep.predicted_einstein_shift = rep.predicted_degree_shift * 2.0 * kPi / (bundle.rank * bundle.geometry.volume());
  rep.measured_degree_shift = after.degree - before.degree;
  rep.measured_einstein_shift = after.einstein_constant - before.einstein_constant;
  const MatrixField k1 = trace_free_curvature(bundle, h);
  const MatrixField k2 = trace_free_curvature(*shifted, h2);
  rep.k_minus_c_change = sup_distance(k1, k2);
  return rep;
}

}  // namespace twistflow

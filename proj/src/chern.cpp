#include "twistflow/chern.hpp"

#include <algorithm>
#include <cmath>

namespace twistflow {
namespace {

void require_metric_on(const BundleSpec& bundle, const MetricState& h) {
  if (!same_bundle(bundle, h.bundle())) throw Error(ErrorCode::BundleMismatch, "metric belongs to " + h.bundle().name);
}

MatrixField as_function(MatrixField m) {
  m.set_bidegree(kFunction);
  return m;
}

}  // namespace

MatrixField relative_connection(const BundleSpec& bundle, const MetricState& h) {
  require_metric_on(bundle, h);
  const MatrixField fi = inverse(h.relative());
  MatrixField gamma = fi * derivative(h.relative(), Direction::Holomorphic);
  if (bundle.has_deformation()) gamma -= fi * bundle.deformation.adjoint() * h.relative();
  return gamma;
}

MatrixField chern_connection(const BundleSpec& bundle, const MetricState& h) {
  MatrixField gamma = relative_connection(bundle, h);
  const auto& g = bundle.geometry;
  for (std::size_t p = 0; p < g.size(); ++p) gamma.set(p, gamma.at(p) + bundle.reference_connection(g.point(p)));
  gamma.set_covariance(Covariance::Frame);
  return gamma;
}

CurvatureField curvature(const BundleSpec& bundle, const MetricState& h) {
  const MatrixField gamma = relative_connection(bundle, h);
  const auto& g = bundle.geometry;
  // R = dΘ + Θ∧Θ for Θ = Γ dz + A dz̄; the reference part of Γ is scalar on
  // each degree block and contributes only its constant curvature.
  MatrixField r = derivative(gamma, Direction::Antiholomorphic);
  if (bundle.has_deformation()) {
    const MatrixField& a = bundle.deformation;
    r += derivative(a, Direction::Holomorphic);
    r += wedge(gamma, a);
    r += wedge(a, gamma);
  }
  const Mat shift = bundle.reference_curvature() + 0.5 * bundle.twist.b_coeff * Mat::Identity(bundle.rank, bundle.rank);
  r += MatrixField::constant(g, shift, kForm11);
  return CurvatureField{std::move(r), bundle.twist};
}

MatrixField mean_curvature(const BundleSpec& bundle, const MetricState& h) {
  // iΛ(R dz∧dz̄) = 2R.
  MatrixField k = curvature(bundle, h).value;
  k *= 2.0;
  return as_function(std::move(k));
}

double analytic_degree(const BundleSpec& bundle) {
  return bundle.degrees.sum() + bundle.rank * bundle.twist.b_coeff * bundle.geometry.volume() / (2.0 * kPi);
}

double einstein_constant(const BundleSpec& bundle) {
  return 2.0 * kPi * analytic_degree(bundle) / (bundle.rank * bundle.geometry.volume());
}

MatrixField trace_free_curvature(const BundleSpec& bundle, const MetricState& h) {
  MatrixField k = mean_curvature(bundle, h);
  k -= MatrixField::constant(bundle.geometry, einstein_constant(bundle) * Mat::Identity(bundle.rank, bundle.rank));
  return k;
}

cplx chern_form_poly(const Mat& x, int k) {
  const int r = static_cast<int>(x.rows());
  if (x.rows() != x.cols() || k < 1 || k > r) throw Error(ErrorCode::BadDegree, "degree outside 1..dim");
  // Newton identities: e_k from power sums p_i = Tr(X^i).
  std::vector<cplx> p(k + 1), e(k + 1);
  Mat power = Mat::Identity(r, r);
  for (int i = 1; i <= k; ++i) {
    power = power * x;
    p[i] = power.trace();
  }
  e[0] = 1.0;
  for (int j = 1; j <= k; ++j) {
    cplx acc = 0.0;
    for (int i = 1; i <= j; ++i) acc += (i % 2 == 1 ? 1.0 : -1.0) * e[j - i] * p[i];
    e[j] = acc / static_cast<double>(j);
  }
  return e[k] * std::pow(-1.0 / (2.0 * kPi * kI), k);
}

BundleReport bundle_report(const BundleSpec& bundle, const MetricState& h) {
  const MatrixField r = curvature(bundle, h).value;
  const double vol = bundle.geometry.volume();
  const ScalarField tr = r.trace();
  BundleReport rep;
  rep.degree = vol / kPi * spectral::mean(tr.values()).real();
  rep.slope = rep.degree / bundle.rank;
  rep.einstein_constant = 2.0 * kPi * rep.degree / (bundle.rank * vol);
  MatrixField k = 2.0 * r;
  k.set_bidegree(kFunction);
  k -= MatrixField::constant(bundle.geometry, rep.einstein_constant * Mat::Identity(bundle.rank, bundle.rank));
  const ScalarField sq = (k * k).trace();
  double sup = 0.0;
  for (const auto& v : sq.values()) sup = std::max(sup, v.real());
  rep.he_residual_sup = sup;
  rep.he_residual_l2 = integrate(sq).real();
  return rep;
}

MetricState conformal_normalize(const BundleSpec& bundle, const MetricState& h, double weak_tolerance) {
  const MatrixField k = mean_curvature(bundle, h);
  ScalarField phi = k.trace();
  phi *= 1.0 / bundle.rank;
  for (auto& v : phi.values()) v = v.real();
  const double weak = sup_distance(k, MatrixField::scalar(phi, bundle.rank));
  if (!(weak < weak_tolerance)) {
    throw Error(ErrorCode::NotWeakHE, "K is not a function multiple of id (defect " + std::to_string(weak) + ")");
  }
  const cplx c = spectral::mean(phi.values());
  ScalarField rhs = phi;
  for (auto& v : rhs.values()) v = c - v;
  return MetricState::conformal(h, poisson_solve(rhs));
}

MatrixField curvature_variation(const BundleSpec& bundle, const MetricState& h, const MatrixField& f) {
  const MatrixField gamma = relative_connection(bundle, h);
  const MatrixField w = derivative(f, Direction::Holomorphic) + commutator(gamma, f);
  // ∂̄_E(w dz) = −(∂_z̄w + [A, w]) dz∧dz̄ and iΛ doubles the coefficient.
  MatrixField out = derivative(w, Direction::Antiholomorphic);
  if (bundle.has_deformation()) out -= commutator(bundle.deformation, w);
  out *= 2.0;
  return as_function(std::move(out));
}

}  // namespace twistflow

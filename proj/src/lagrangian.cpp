#include <algorithm>
#include <cmath>

#include "twistflow/flow.hpp"

namespace twistflow {
namespace {

double psi(double x) {
  if (std::abs(x) < 1e-4) return 0.5 + x / 6.0 + x * x / 24.0;
  return (std::expm1(x) - x) / (x * x);
}

double integrate_trace(const MatrixField& m) {
  MatrixField f = m;
  f.set_bidegree(kFunction);
  return integrate(f.trace()).real();
}

// −2(∂_z̄w + [A, w]) for the dz coefficient w, i.e. iΛ∂̄_E(w dz).
MatrixField lambda_dbar(const BundleSpec& bundle, const MatrixField& w) {
  MatrixField out = derivative(w, Direction::Antiholomorphic);
  if (bundle.has_deformation()) out -= commutator(bundle.deformation, w);
  out *= 2.0;
  out.set_bidegree(kFunction);
  return out;
}

double simpson(const std::vector<double>& g, double h) {
  const std::size_t n = g.size();
  double acc = g.front() + g.back();
  for (std::size_t i = 1; i + 1 < n; ++i) acc += (i % 2 == 1 ? 4.0 : 2.0) * g[i];
  return acc * h / 3.0;
}

}  // namespace

ScalarField q1_field(const MetricState& h, const MetricState& k) {
  if (!same_bundle(h.bundle(), k.bundle())) throw Error(ErrorCode::BundleMismatch, "q1 across bundles");
  ScalarField out = h.exponent().trace() - k.exponent().trace();
  for (auto& v : out.values()) v = v.real();
  return out;
}

double lagrangian_path(const BundleSpec& bundle, const MetricPath& path) {
  const std::size_t n = path.samples.size();
  if (n < 3 || n % 2 == 0) throw Error(ErrorCode::BadField, "Simpson quadrature needs an odd node count >= 3");
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = integrate_trace(mean_curvature(bundle, path.samples[i]) * path.tangents[i]);
  const double c = einstein_constant(bundle);
  const double logdet = integrate(q1_field(path.end(), path.start())).real();
  return simpson(g, path.spacing()) - c * logdet;
}

namespace detail {

double lagrangian_closed_with(const BundleSpec& bundle, const MetricState& h0, const MatrixField& k0,
                              const MetricState& h) {
  if (!same_bundle(h0.bundle(), h.bundle())) throw Error(ErrorCode::BundleMismatch, "closed form across bundles");
  const auto& g = h0.geometry();
  const int r = h0.rank();
  std::vector<Mat> frames(g.size());
  std::vector<Vec> spectra(g.size());
  MatrixField s(g, r, r);
  for_each_point(g.size(), [&](std::size_t p) {
    const Mat sq = h0.sqrt_relative().at(p);
    const Mat isq = h0.inv_sqrt_relative().at(p);
    Mat x = isq * h.relative().at(p) * isq;
    x = 0.5 * (x + x.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<Mat> es(x);
    spectra[p] = es.eigenvalues().array().log().matrix();
    frames[p] = es.eigenvectors();
    const Mat shat = frames[p] * spectra[p].cast<cplx>().asDiagonal() * frames[p].adjoint();
    s.set(p, isq * shat * sq);
  });
  const double linear = integrate_trace(k0 * s);
  MatrixField ds = derivative(s, Direction::Antiholomorphic);
  if (bundle.has_deformation()) ds += commutator(bundle.deformation, s);
  ScalarField density(g);
  for_each_point(g.size(), [&](std::size_t p) {
    const Mat y = frames[p].adjoint() * h0.sqrt_relative().at(p) * ds.at(p) * h0.inv_sqrt_relative().at(p) * frames[p];
    double acc = 0.0;
    for (int a = 0; a < r; ++a)
      for (int b = 0; b < r; ++b) acc += std::norm(y(a, b)) * psi(spectra[p](a) - spectra[p](b));
    density[p] = acc;
  });
  return linear + 2.0 * integrate(density).real();
}

}  // namespace detail

double lagrangian_closed(const BundleSpec& bundle, const MetricState& h0, const MetricState& h) {
  return detail::lagrangian_closed_with(bundle, h0, trace_free_curvature(bundle, h0), h);
}

DerivativeCheck lagrangian_derivative_check(const BundleSpec& bundle, const MetricPath& path, double t, double step) {
  if (!(t > 0.0 && t < path.t_end)) throw Error(ErrorCode::BadField, "derivative check needs an interior t");
  const MetricState& h = path.start();
  const MetricState& k = path.end();
  auto point = [&](double s) {
    const double u = s / path.t_end;
    switch (path.kind) {
      case PathKind::Geodesic: return geodesic_point(h, k, u);
      case PathKind::Linear:
        return MetricState::from_relative(h.bundle_ptr(), (1.0 - u) * h.relative() + u * k.relative());
      case PathKind::Custom: break;
    }
    throw Error(ErrorCode::BadField, "derivative check needs a geodesic or linear path");
  };
  const MatrixField k0 = trace_free_curvature(bundle, h);
  DerivativeCheck out;
  const double plus = detail::lagrangian_closed_with(bundle, h, k0, point(t + step));
  const double minus = detail::lagrangian_closed_with(bundle, h, k0, point(t - step));
  out.finite_difference = (plus - minus) / (2.0 * step);
  const MetricState ht = point(t);
  MatrixField tangent;
  if (path.kind == PathKind::Geodesic) {
    tangent = path.tangents.front();
  } else {
    tangent = inverse(ht.relative()) * (k.relative() - h.relative());
  }
  tangent *= 1.0 / path.t_end;
  out.formula = integrate_trace(trace_free_curvature(bundle, ht) * tangent);
  return out;
}

LagrangianDecomposition lagrangian_decomposition(const BundleSpec& bundle, const InclusionSpec& incl,
                                                 const MetricState& h, const MetricState& k) {
  const SplitStructure sh = induced_structures(bundle, incl, h);
  const SplitStructure sk = induced_structures(bundle, incl, k);
  const MetricState sub_k = MetricState::from_relative(sh.sub_bundle, sk.sub_metric.relative());
  const MetricState quo_k = MetricState::from_relative(sh.quotient_bundle, sk.quotient_metric.relative());
  LagrangianDecomposition d;
  d.total = lagrangian_closed(bundle, h, k);
  d.sub = lagrangian_closed(*sh.sub_bundle, sh.sub_metric, sub_k);
  d.quotient = lagrangian_closed(*sh.quotient_bundle, sh.quotient_metric, quo_k);
  d.c_terms = kCTermSign * (c_norm_squared(sk) - c_norm_squared(sh));
  // S and Q carry their own Einstein constants; the ambient one differs by the slope gap
  const double c = einstein_constant(bundle);
  d.slope_terms = (einstein_constant(*sh.sub_bundle) - c) * integrate(q1_field(sub_k, sh.sub_metric)).real() +
                  (einstein_constant(*sh.quotient_bundle) - c) * integrate(q1_field(quo_k, sh.quotient_metric)).real();
  d.residual = d.total - d.sub - d.quotient - d.c_terms - d.slope_terms;
  return d;
}

MatrixField perturbed_residual(const BundleSpec& bundle, const MetricState& h0, const MatrixField& f, double eps) {
  const MatrixField log_f = functional_calculus(h0, f, SpectralFunction::Log);
  const MatrixField gamma = relative_connection(bundle, h0);
  const MatrixField w = inverse(f) * (derivative(f, Direction::Holomorphic) + commutator(gamma, f));
  MatrixField out = trace_free_curvature(bundle, h0) + lambda_dbar(bundle, w);
  out += eps * log_f;
  return out;
}

PerturbedSolution construct_perturbed_solution(const BundleSpec& bundle, const MetricState& h) {
  ScalarField rhs = trace_free_curvature(bundle, h).trace();
  for (auto& v : rhs.values()) v = -v.real() / bundle.rank;
  const MetricState h1 = MetricState::conformal(h, poisson_solve(rhs));
  // discretization leaves K slightly off h-Hermitian on coarse grids
  MatrixField k1 = trace_free_curvature(bundle, h1);
  k1 += h_adjoint(h1, k1);
  k1 *= 0.5;
  k1.set_bidegree(kFunction);
  PerturbedSolution sol;
  sol.h0 = metric_from_endo(h1, functional_calculus(h1, k1, SpectralFunction::Exp));
  sol.f1 = functional_calculus(h1, -1.0 * k1, SpectralFunction::Exp);
  return sol;
}

}  // namespace twistflow

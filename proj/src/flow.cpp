#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "twistflow/flow.hpp"

namespace twistflow {
namespace {

constexpr double kMinDt = 1e-12;
constexpr double kMonotoneTol = 1e-9;
constexpr double kGapTol = 1e-6;

struct Diagnostics {
  MatrixField k0;
  double m_k = 0.0;
  double s_k = 0.0;
};

Diagnostics diagnose(const BundleSpec& bundle, const MetricState& h) {
  Diagnostics d;
  const MatrixField k = mean_curvature(bundle, h);
  const double c = einstein_constant(bundle);
  d.k0 = k - MatrixField::constant(bundle.geometry, c * Mat::Identity(bundle.rank, bundle.rank));
  const ScalarField k0sq = (d.k0 * d.k0).trace();
  const ScalarField ksq = (k * k).trace();
  for (std::size_t p = 0; p < k0sq.values().size(); ++p) {
    d.m_k = std::max(d.m_k, k0sq[p].real());
    d.s_k = std::max(d.s_k, std::sqrt(std::max(0.0, ksq[p].real())));
  }
  return d;
}

bool increased(double next, double prev) { return next > prev + kMonotoneTol * (1.0 + std::abs(prev)); }

MetricState step_with(const MetricState& h, const MatrixField& k0, double dt,
                      bool sl_normalize) {
  const auto& g = h.geometry();
  const int r = h.rank();
  MatrixField y = h.sqrt_relative() * k0 * h.inv_sqrt_relative();
  y *= -dt;
  MatrixField smoothed(g, r, r);
  for (int a = 0; a < r; ++a)
    for (int b = 0; b < r; ++b) spectral::resolvent(g, dt, y.plane(a, b), smoothed.plane(a, b));
  const MatrixField e = hermitian_function(smoothed, [](double v) { return std::exp(v); });
  MatrixField next = h.sqrt_relative() * e * h.sqrt_relative();
  if (sl_normalize) {
    // Keep det f^{h0,h_t} = 1 by matching det F to the previous step.
    for (std::size_t p = 0; p < g.size(); ++p) {
      const Mat m = next.at(p);
      const double ratio = std::real(h.relative().at(p).determinant() / m.determinant());
      next.set(p, std::pow(ratio, 1.0 / r) * m);
    }
  }
  return MetricState::from_relative(h.bundle_ptr(), std::move(next));
}

double det_residual(const MetricState& h0, const MetricState& h) {
  return q1_field(h, h0).sup_norm();
}

}  // namespace

MetricState flow_step(const BundleSpec& bundle, const MetricState& h, double dt, bool sl_normalize) {
  if (!(dt > 0.0)) throw Error(ErrorCode::BadField, "dt must be positive");
  return step_with(h, trace_free_curvature(bundle, h), dt, sl_normalize);
}

FlowTrace run_flow(const BundleSpec& bundle, const MetricState& h0, const FlowConfig& cfg) {
  if (!(cfg.dt_initial > 0.0) || !(cfg.t_final > 0.0) || cfg.dt_initial > cfg.dt_max) {
    throw Error(ErrorCode::BadField, "flow config needs 0 < dt_initial <= dt_max and t_final > 0");
  }
  FlowTrace trace;
  MetricState h = h0;
  Diagnostics d = diagnose(bundle, h);
  double t = 0.0;
  double lag = 0.0;
  double dt = cfg.dt_initial;
  int accepted = 0;
  auto record = [&](double used) {
    trace.rows.push_back({t, d.m_k, d.s_k, lag, det_residual(h0, h), h.min_eigenvalue(), h.max_eigenvalue(), used});
  };
  record(0.0);
  trace.stop_reason = "t_final";
  while (cfg.t_final - t > 1e-9 * dt) {
    if (cfg.m_k_target > 0.0 && d.m_k < cfg.m_k_target) {
      trace.stop_reason = "m_k_target";
      break;
    }
    double step = std::min(dt, cfg.t_final - t);
    if (!cfg.fixed_step && d.m_k > 0.0) step = std::min(step, cfg.cfl_safety / std::sqrt(d.m_k));
    const MetricState next = step_with(h, d.k0, step, cfg.sl_normalize);
    Diagnostics dn = diagnose(bundle, next);
    const double dl = detail::lagrangian_closed_with(bundle, h, d.k0, next);
    const bool bad = increased(dn.m_k, d.m_k) || increased(dn.s_k, d.s_k) || dl > kMonotoneTol * (1.0 + std::abs(lag));
    if (cfg.monotonicity_guard && bad) {
      ++trace.rejected_steps;
      dt = step * 0.5;
      if (dt < kMinDt) throw Error(ErrorCode::StallDetected, "step size collapsed at t = " + std::to_string(t));
      continue;
    }
    h = next;
    d = std::move(dn);
    t += step;
    lag += dl;
    ++accepted;
    const bool last = !(cfg.t_final - t > 1e-9 * dt);
    if (accepted % std::max(1, cfg.record_every) == 0 || last) record(step);
    if (!cfg.fixed_step && step == dt) dt = std::min(dt * 1.25, cfg.dt_max);
  }
  if (trace.rows.back().t != t) record(0.0);
  trace.final_metric = h;
  trace.last_dt = dt;
  return trace;
}

std::vector<std::size_t> trace_violations(const FlowTrace& trace) {
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i < trace.rows.size(); ++i) {
    const auto& a = trace.rows[i - 1];
    const auto& b = trace.rows[i];
    if (increased(b.m_k, a.m_k) || increased(b.s_k, a.s_k) || increased(b.lagrangian, a.lagrangian)) out.push_back(i);
  }
  return out;
}

MatrixField extract_destabilizer(const MetricState& h, const BundleSpec& bundle) {
  if (!same_bundle(bundle, h.bundle())) throw Error(ErrorCode::BundleMismatch, "metric belongs to " + h.bundle().name);
  const int r = bundle.rank;
  if (r < 2) throw Error(ErrorCode::SpectralGapTooSmall, "a line bundle has no proper subbundle");
  const auto& g = bundle.geometry;
  std::vector<Eigen::SelfAdjointEigenSolver<Mat>> eig(g.size());
  for_each_point(g.size(), [&](std::size_t p) { eig[p].compute(h.relative().at(p)); });
  Vec mean = Vec::Zero(r);
  for (const auto& es : eig) mean += es.eigenvalues().array().log().matrix();
  mean /= static_cast<double>(g.size());
  int cut = 0;
  for (int i = 1; i + 1 < r; ++i)
    if (mean(i + 1) - mean(i) > mean(cut + 1) - mean(cut)) cut = i;
  MatrixField proj(g, r, r);
  for (std::size_t p = 0; p < g.size(); ++p) {
    const Vec lam = eig[p].eigenvalues().array().log().matrix();
    if (!(lam(cut + 1) - lam(cut) >= kGapTol)) {
      throw Error(ErrorCode::SpectralGapTooSmall, "eigenvalue gap " + std::to_string(lam(cut + 1) - lam(cut)));
    }
    const Mat u = eig[p].eigenvectors().leftCols(cut + 1);
    proj.set(p, u * u.adjoint());
  }
  return proj;
}

double projector_degree(const BundleSpec& bundle, const MetricState& h, const MatrixField& proj) {
  const MatrixField k = mean_curvature(bundle, h);
  MatrixField dbar = derivative(proj, Direction::Antiholomorphic);
  if (bundle.has_deformation()) dbar += commutator(bundle.deformation, proj);
  MatrixField sq = dbar * h_adjoint(h, dbar);
  sq.set_bidegree(kFunction);
  const double curv = integrate((proj * k).trace()).real();
  const double defect = 2.0 * integrate(sq.trace()).real();
  return (curv - defect) / (2.0 * kPi);
}

void write_trace_csv(const FlowTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "t,m_K,s_K,L,det_residual,min_eig,max_eig,dt\n";
  char buf[512];
  for (const auto& r : trace.rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.t, r.m_k, r.s_k, r.lagrangian,
                  r.det_residual, r.min_eig, r.max_eig, r.dt);
    out << buf;
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace twistflow

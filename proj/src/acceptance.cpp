#include "twistflow/acceptance.hpp"

#include <chrono>
#include <cstdio>

#include "twistflow/scenario.hpp"

namespace twistflow {
namespace {

// Accumulates the worst measured value of each named check.
class Checks {
 public:
  void le(const std::string& what, double value, double bound) {
    ok_ = ok_ && (value <= bound);
    append(what, value, bound, value <= bound ? "<=" : ">");
  }
  void ge(const std::string& what, double value, double bound) {
    ok_ = ok_ && (value >= bound);
    append(what, value, bound, value >= bound ? ">=" : "<");
  }
  void require(const std::string& what, bool cond) {
    ok_ = ok_ && cond;
    if (!detail_.empty()) detail_ += "; ";
    detail_ += what + (cond ? " yes" : " NO");
  }
  bool ok() const { return ok_; }
  const std::string& detail() const { return detail_; }

 private:
  void append(const std::string& what, double value, double bound, const char* rel) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s %.3g %s %.3g", what.c_str(), value, rel, bound);
    if (!detail_.empty()) detail_ += "; ";
    detail_ += buf;
  }
  bool ok_ = true;
  std::string detail_;
};

MetricState random_metric(const BundlePtr& b, std::uint64_t seed, double amp) {
  return MetricState::from_exponent(b, random_hermitian_field(*b, seed, amp));
}

double rel(double a, double b) { return std::abs(a - b) / (1.0 + std::abs(b)); }

bool monotone(const FlowTrace& tr, double FlowRow::*col) {
  for (std::size_t i = 1; i < tr.rows.size(); ++i) {
    const double prev = tr.rows[i - 1].*col;
    if (tr.rows[i].*col > prev + 1e-9 * (1.0 + std::abs(prev))) return false;
  }
  return true;
}

void c1(const TorusGeometry& g, Checks& c) {
  std::vector<BundlePtr> presets;
  for (int d = -2; d <= 2; ++d) presets.push_back(make_line_bundle(g, d));
  presets.push_back(make_direct_sum(g, {1, -1}));
  presets.push_back(make_direct_sum(g, {2, 0, -1}));
  PresetParams ext;
  ext.d1 = ext.d2 = 1;
  ext.beta = 0.5;
  presets.push_back(make_preset(g, PresetKind::Extension, ext));
  presets.push_back(make_atiyah_f2(g, 1.0));
  presets.push_back(make_heisenberg(g, 2, 1));
  presets.push_back(make_heisenberg(g, 3, 1));
  presets.push_back(make_heisenberg(g, 3, 2));
  presets.push_back(with_b_coeff(*make_heisenberg(g, 3, 1), 0.5));
  double worst = 0.0;
  bool all = true;
  for (const auto& b : presets) {
    const auto v = validate_twist(*b);
    worst = std::max(worst, v.defect);
    all = all && v.passed;
  }
  c.le("max defect", worst, 1e-10);
  c.require("all passed", all);
  const auto v = validate_twist(*make_heisenberg(g, 3, 1));
  const cplx omega = std::polar(1.0, 2.0 * kPi / 3.0);
  c.le("|eps - e^{2pi i/3}|", std::abs(v.measured_epsilon - omega), 1e-12);
  c.le("|declared - measured|", std::abs(v.epsilon - v.measured_epsilon), 1e-12);
}

void c2(const TorusGeometry& g, Checks& c) {
  double curv = 0.0;
  double deg = 0.0;
  for (int d = -2; d <= 2; ++d) {
    const auto l = make_line_bundle(g, d);
    const auto h = MetricState::reference(l);
    const auto r = curvature(*l, h).value;
    for (std::size_t p = 0; p < g.size(); ++p)
      curv = std::max(curv, std::abs(r.entry(0, 0, p) - kPi * d / g.volume()));
    deg = std::max(deg, std::abs(bundle_report(*l, h).degree - d));
  }
  c.le("curvature sup error", curv, 1e-9);
  c.le("degree error", deg, 1e-8);
}

void c3(const TorusGeometry& g, Checks& c) {
  double res = 0.0;
  double ein = 0.0;
  for (int d = -2; d <= 2; ++d) {
    const auto l = make_line_bundle(g, d);
    const auto r = bundle_report(*l, MetricState::reference(l));
    res = std::max(res, r.he_residual_sup);
    ein = std::max(ein, std::abs(r.einstein_constant - 2.0 * kPi * d / g.volume()));
    // the constant value of K itself
    ein = std::max(ein, std::abs(mean_curvature(*l, MetricState::reference(l)).entry(0, 0, 0).real() - r.einstein_constant));
  }
  c.le("residual_sup", res, 1e-10);
  c.le("Einstein factor error", ein, 1e-9);
}

void c4(const TorusGeometry& g, Checks& c) {
  const std::vector<BundlePtr> corpus{make_line_bundle(g, 1),    make_line_bundle(g, -2),  make_direct_sum(g, {1, -1}),
                                      make_atiyah_f2(g, 0.7),    make_heisenberg(g, 3, 1), make_heisenberg(g, 2, 1)};
  double dual = 0.0, sum = 0.0, tensor = 0.0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& b = corpus[i];
    const auto h = random_metric(b, 30 + i, 0.2);
    const auto r = curvature(*b, h).value;
    const auto d = bundle_dual(*b);
    const auto hd = MetricState::from_relative(d, inverse(h.relative()).transpose());
    dual = std::max(dual, sup_distance(curvature(*d, hd).value, -1.0 * r.transpose()));

    const auto& b2 = corpus[(i + 1) % corpus.size()];
    const auto h2 = random_metric(b2, 40 + i, 0.2);
    const auto r2 = curvature(*b2, h2).value;
    const auto t = bundle_tensor(*b, *b2);
    const auto ht = MetricState::from_relative(t, MatrixField::generate(g, t->rank, t->rank, [&](std::size_t p) {
                                                 return kron(h.relative().at(p), h2.relative().at(p));
                                               }));
    const auto expect = MatrixField::generate(g, t->rank, t->rank, [&](std::size_t p) {
      return Mat(kron(r.at(p), Mat::Identity(b2->rank, b2->rank)) + kron(Mat::Identity(b->rank, b->rank), r2.at(p)));
    });
    tensor = std::max(tensor, sup_distance(curvature(*t, ht).value, expect));

    // direct sums need equal twists; pair each preset with itself
    const auto s = bundle_dsum(*b, *b);
    const auto h3 = random_metric(b, 50 + i, 0.2);
    const auto r3 = curvature(*b, h3).value;
    const auto hs = MetricState::from_relative(s, MatrixField::generate(g, s->rank, s->rank, [&](std::size_t p) {
                                                 return block_diag(h.relative().at(p), h3.relative().at(p));
                                               }));
    const auto blocks = MatrixField::generate(g, s->rank, s->rank, [&](std::size_t p) { return block_diag(r.at(p), r3.at(p)); });
    sum = std::max(sum, sup_distance(curvature(*s, hs).value, blocks));
  }
  c.le("dual", dual, 1e-9);
  c.le("dsum", sum, 1e-9);
  c.le("tensor", tensor, 1e-9);
}

void c5(const TorusGeometry& g, Checks& c) {
  double deg = 0.0, ein = 0.0, kc = 0.0;
  for (const auto& b : {make_line_bundle(g, 1), make_atiyah_f2(g, 1.0), make_heisenberg(g, 3, 1)}) {
    const auto h = random_metric(b, 3, 0.3);
    for (double db : {-1.0, 1.0}) {
      const auto s = b_shift_report(*b, h, db);
      deg = std::max(deg, std::abs(s.measured_degree_shift - s.predicted_degree_shift));
      ein = std::max(ein, std::abs(s.measured_einstein_shift - s.predicted_einstein_shift));
      kc = std::max(kc, s.k_minus_c_change);
    }
  }
  c.le("degree shift error", deg, 1e-8);
  c.le("c shift error", ein, 1e-9);
  c.le("change of K - c", kc, 1e-10);
}

void c6(const TorusGeometry& g, Checks& c) {
  const auto l = make_line_bundle(g, 1);
  const auto h = MetricState::conformal(MetricState::reference(l), conformal_factor(g, "cos_s", 0.5));
  c.ge("residual before", bundle_report(*l, h).he_residual_sup, 1.0);
  c.le("residual after", bundle_report(*l, conformal_normalize(*l, h)).he_residual_sup, 1e-8);
}

void c7(const TorusGeometry& g, Checks& c) {
  const auto b = make_atiyah_f2(g, 1.0);
  const auto h = random_metric(b, 8, 0.4);
  const auto k = random_metric(b, 9, 0.4);
  const auto path = geodesic_path(h, k, 5);
  double worst = 0.0;
  const double step = 1e-4;
  for (std::size_t i = 1; i + 1 < path.samples.size(); ++i) {
    const double t = path.spacing() * static_cast<double>(i);
    MatrixField fd = mean_curvature(*b, geodesic_point(h, k, t + step)) - mean_curvature(*b, geodesic_point(h, k, t - step));
    fd *= 1.0 / (2.0 * step);
    const auto analytic = curvature_variation(*b, path.samples[i], path.tangents[i]);
    worst = std::max(worst, sup_distance(fd, analytic) / analytic.sup_norm());
  }
  c.le("relative error", worst, 1e-5);
}

void c8(const TorusGeometry& g, Checks& c) {
  const auto b = make_atiyah_f2(g, 1.0);
  const auto& w = b->declared_subbundles.at(0);
  c.le("residual at h = id", gauss_codazzi_residual(*b, w, MetricState::reference(b)), 1e-8);
  c.le("residual at random h", gauss_codazzi_residual(*b, w, random_metric(b, 12, 0.4)), 1e-8);
}

void c9(const TorusGeometry& g, Checks& c) {
  double cocycle = 0.0, anti = 0.0, add = 0.0, indep = 0.0, deriv = 0.0, closed = 0.0;
  const std::vector<BundlePtr> corpus{make_atiyah_f2(g, 1.0), make_line_bundle(g, 1), make_direct_sum(g, {1, -1}),
                                      make_heisenberg(g, 2, 1)};
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& b = corpus[i];
    const auto h = random_metric(b, 60 + i, 0.3);
    const auto k = random_metric(b, 70 + i, 0.3);
    const auto l = random_metric(b, 80 + i, 0.3);
    cocycle = std::max({cocycle, (q1_field(h, k) + q1_field(k, l) + q1_field(l, h)).sup_norm(),
                        (q1_field(h, k) + q1_field(k, h)).sup_norm(), q1_field(h, h).sup_norm()});
    const double hk = lagrangian_closed(*b, h, k);
    anti = std::max(anti, rel(lagrangian_closed(*b, k, h), -hk));
    add = std::max(add, rel(hk + lagrangian_closed(*b, k, l), lagrangian_closed(*b, h, l)));
    const double geo = lagrangian_path(*b, geodesic_path(h, k, 33));
    const double lin = lagrangian_path(*b, linear_path(h, k, 33));
    indep = std::max(indep, rel(lin, geo));
    closed = std::max(closed, rel(geo, hk));
    for (const auto& p : {geodesic_path(h, k, 9), linear_path(h, k, 9)}) {
      const auto dc = lagrangian_derivative_check(*b, p, 0.5, 1e-4);
      deriv = std::max(deriv, std::abs(dc.finite_difference - dc.formula) / (1.0 + std::abs(dc.formula)));
    }
  }
  c.le("Q1 cocycle", cocycle, 1e-12);
  c.le("antisymmetry", anti, 1e-7);
  c.le("additivity", add, 1e-7);
  c.le("path independence", indep, 1e-6);
  c.le("derivative identity", deriv, 1e-5);
  c.le("closed vs path", closed, 1e-6);
}

void c10(const TorusGeometry& g, Checks& c) {
  double l1 = 0.0, tr = 0.0, ident = 0.0;
  for (const auto& b : {make_atiyah_f2(g, 1.0), make_direct_sum(g, {1, -1})}) {
    const auto sol = construct_perturbed_solution(*b, MetricState::reference(b));
    l1 = std::max(l1, perturbed_residual(*b, sol.h0, sol.f1, 1.0).sup_norm());
    tr = std::max(tr, trace_free_curvature(*b, sol.h0).trace().sup_norm());
    const auto h0 = random_metric(b, 90, 0.2);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto f = endo_from_form(h0, random_metric(b, 200 + seed, 0.3));
      const auto lhs = trace_free_curvature(*b, metric_from_endo(h0, f)).trace();
      const auto rhs = perturbed_residual(*b, h0, f, 0.0).trace();
      ident = std::max(ident, (lhs - rhs).sup_norm());
    }
  }
  c.le("|L1(f1)|", l1, 1e-7);
  c.le("Tr K0(h0)", tr, 1e-8);
  c.le("trace identity", ident, 1e-9);
}

void c11(const TorusGeometry& g, Checks& c) {
  const auto l = make_line_bundle(g, 1);
  const auto h0 = MetricState::conformal(MetricState::reference(l), conformal_factor(g, "random", 0.5, 7));
  FlowConfig cfg;
  cfg.t_final = 20.0;
  const auto tr = run_flow(*l, h0, cfg);
  double first = -1.0;
  for (const auto& r : tr.rows)
    if (first < 0.0 && r.m_k < 1e-6) first = r.t;
  c.le("final m_K", tr.rows.back().m_k, 1e-6);
  c.require("m_K monotone", monotone(tr, &FlowRow::m_k));
  c.require("s_K monotone", monotone(tr, &FlowRow::s_k));
  c.require("L monotone", monotone(tr, &FlowRow::lagrangian));
  char buf[64];
  std::snprintf(buf, sizeof buf, "m_K < 1e-6 from t = %.3g", first);
  c.require(buf, first >= 0.0);
}

void c12(const TorusGeometry& g, Checks& c) {
  const auto b = make_atiyah_f2(g, 1.0);
  FlowConfig cfg;
  cfg.t_final = 200.0;
  cfg.dt_max = 1.0;
  const auto tr = run_flow(*b, MetricState::reference(b), cfg);
  const auto& last = tr.rows.back();
  c.le("m_K at t = 200", last.m_k, 1e-3);
  c.ge("cond f", last.max_eig / last.min_eig, 1e3);
  c.require("m_K monotone", monotone(tr, &FlowRow::m_k));
}

void c13(const TorusGeometry& g, Checks& c) {
  const auto s = make_direct_sum(g, {1, -1});
  FlowConfig cfg;
  cfg.t_final = 3.0;
  const auto tr = run_flow(*s, random_metric(s, 5, 0.3), cfg);
  const double floor = 8.0 * kPi * kPi;
  double plateau = 0.0;
  for (const auto& r : tr.rows)
    if (r.t >= 2.0) plateau = std::max(plateau, std::abs(r.m_k - floor));
  c.le("|m_K - 8pi^2| for t >= 2", plateau, 1e-4);
  c.require("m_K monotone", monotone(tr, &FlowRow::m_k));
  const auto proj = extract_destabilizer(tr.final_metric, *s);
  const auto res = weakly_holo_residual(*s, tr.final_metric, proj);
  c.le("max weakly holomorphic residual", std::max({res.adjoint, res.idempotent, res.holomorphic}), 1e-6);
  const double rank = proj.trace()[0].real();
  const double slope = projector_degree(*s, tr.final_metric, proj) / std::round(rank);
  const double mu = bundle_report(*s, tr.final_metric).slope;
  c.le("|slope - 1|", std::abs(slope - 1.0), 1e-6);
  c.require("slope > mu(E) = 0", slope > mu + 0.5 && std::abs(mu) < 1e-8);
}

void c14(const TorusGeometry& g, Checks& c) {
  const auto b = make_atiyah_f2(g, 1.0);
  double worst = 0.0;
  double c_min = 1e300;
  for (std::uint64_t seed = 1; seed < 4; ++seed) {
    const auto d = lagrangian_decomposition(*b, b->declared_subbundles.at(0), random_metric(b, seed, 0.3),
                                            random_metric(b, seed + 10, 0.3));
    worst = std::max(worst, std::abs(d.residual));
    c_min = std::min(c_min, std::abs(d.c_terms));
  }
  c.le("decomposition residual", worst, 1e-6);
  c.ge("|C-terms| (non-trivial)", c_min, 1e-3);
}

void c15(const TorusGeometry& g, Checks& c) {
  const auto b = make_atiyah_f2(g, 1.0);
  const auto h = random_metric(b, 41, 0.3);
  FlowConfig cfg;
  cfg.fixed_step = true;
  cfg.dt_initial = 0.01;
  cfg.t_final = 0.3;
  const auto whole = run_flow(*b, h, cfg);
  cfg.t_final = 0.1;
  const auto first = run_flow(*b, h, cfg);
  cfg.t_final = 0.2;
  const auto second = run_flow(*b, first.final_metric, cfg);
  c.le("sup distance", sup_distance(whole.final_metric.relative(), second.final_metric.relative()), 1e-6);
}

struct Entry {
  int id;
  const char* title;
  void (*fn)(const TorusGeometry&, Checks&);
};

constexpr Entry kEntries[] = {
    {1, "cocycle validation", c1},
    {2, "curvature oracle", c2},
    {3, "HE identity", c3},
    {4, "functoriality", c4},
    {5, "B-shift invariance", c5},
    {6, "conformal normalization", c6},
    {7, "variation formula", c7},
    {8, "Gauss-Codazzi", c8},
    {9, "Lagrangian structure", c9},
    {10, "perturbed equation", c10},
    {11, "stable flow", c11},
    {12, "approximate HE on semistable", c12},
    {13, "unstable floor", c13},
    {14, "Lagrangian decomposition", c14},
    {15, "semigroup", c15},
};

}  // namespace

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts) {
  const TorusGeometry g = make_torus({0.0, 1.0}, opts.grid_n);
  std::vector<CriterionResult> out;
  for (const auto& e : kEntries) {
    if (!opts.only.empty() && !opts.only.contains(e.id)) continue;
    CriterionResult r;
    r.id = e.id;
    r.title = e.title;
    const auto start = std::chrono::steady_clock::now();
    try {
      Checks c;
      e.fn(g, c);
      r.passed = c.ok();
      r.detail = c.detail();
    } catch (const std::exception& ex) {
      r.passed = false;
      r.detail = std::string("threw ") + ex.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (opts.on_result) opts.on_result(r);
    out.push_back(std::move(r));
  }
  return out;
}

nlohmann::json criteria_json(const std::vector<CriterionResult>& results) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : results) {
    out.push_back({{"id", r.id}, {"title", r.title}, {"status", r.passed ? "pass" : "fail"}, {"detail", r.detail}});
  }
  return out;
}

}  // namespace twistflow

#include <filesystem>
#include <fstream>

#include "support.hpp"

using namespace twistflow;

namespace {

MetricState random_metric(const BundlePtr& b, std::uint64_t seed, double amp = 0.3) {
  return MetricState::from_exponent(b, random_hermitian_field(*b, seed, amp));
}

double rel(double a, double b) { return std::abs(a - b) / (1.0 + std::abs(b)); }

std::vector<BundlePtr> corpus(const TorusGeometry& g) {
  return {make_atiyah_f2(g, 1.0), make_line_bundle(g, 1), make_direct_sum(g, {1, -1}), make_heisenberg(g, 2, 1)};
}

double l2_sq(const MatrixField& k0) { return integrate((k0 * k0).trace()).real(); }

}  // namespace

TEST_CASE("q1 cocycle") {
  const auto g = torus(32);
  for (const auto& b : corpus(g)) {
    const auto h = random_metric(b, 1);
    const auto k = random_metric(b, 2);
    const auto l = random_metric(b, 3);
    CHECK(q1_field(h, h).sup_norm() == 0.0);
    CHECK((q1_field(h, k) + q1_field(k, h)).sup_norm() < 1e-12);
    CHECK((q1_field(h, k) + q1_field(k, l) + q1_field(l, h)).sup_norm() < 1e-12);
    // log det of the endomorphism relating the two metrics
    const auto f = endo_from_form(k, h);
    double worst = 0.0;
    for (std::size_t p = 0; p < g.size(); p += 7) {
      worst = std::max(worst, std::abs(std::log(std::abs(f.at(p).determinant())) - q1_field(h, k)[p].real()));
    }
    CHECK(worst < 1e-12);
  }
  const auto other = make_line_bundle(g, 2);
  CHECK_THROWS_AS(q1_field(MetricState::reference(other), MetricState::reference(make_line_bundle(g, 1))), Error);
}

TEST_CASE("closed form matches the path integral and is path independent") {
  const auto g = torus(32);
  for (const auto& b : corpus(g)) {
    const auto h = random_metric(b, 5);
    const auto k = random_metric(b, 6);
    const double closed = lagrangian_closed(*b, h, k);
    const double geo = lagrangian_path(*b, geodesic_path(h, k, 33));
    const double lin = lagrangian_path(*b, linear_path(h, k, 33));
    CHECK_MESSAGE(rel(geo, closed) < 1e-6, b->name);
    CHECK_MESSAGE(rel(lin, geo) < 1e-6, b->name);
    CHECK(lagrangian_closed(*b, h, h) == doctest::Approx(0.0));
  }
}

TEST_CASE("Simpson converges at fourth order") {
  const auto g = torus(16);
  const auto b = make_atiyah_f2(g, 1.0);
  const auto h = random_metric(b, 5);
  const auto k = random_metric(b, 6);
  const double closed = lagrangian_closed(*b, h, k);
  const double e1 = std::abs(lagrangian_path(*b, geodesic_path(h, k, 5)) - closed);
  const double e2 = std::abs(lagrangian_path(*b, geodesic_path(h, k, 9)) - closed);
  CHECK(e2 < e1 / 8.0);
  CHECK_THROWS_AS(lagrangian_path(*b, geodesic_path(h, k, 4)), Error);
}

TEST_CASE("antisymmetry and additivity") {
  const auto g = torus(32);
  for (const auto& b : corpus(g)) {
    const auto h = random_metric(b, 11);
    const auto k = random_metric(b, 12);
    const auto l = random_metric(b, 13);
    const double hk = lagrangian_closed(*b, h, k);
    CHECK_MESSAGE(rel(lagrangian_closed(*b, k, h), -hk) < 1e-7, b->name);
    CHECK_MESSAGE(rel(lagrangian_closed(*b, h, k) + lagrangian_closed(*b, k, l), lagrangian_closed(*b, h, l)) < 1e-7, b->name);

    const auto a = geodesic_path(h, k, 17);
    const auto c = geodesic_path(k, l, 17);
    CHECK(rel(lagrangian_path(*b, reverse(a)), -lagrangian_path(*b, a)) < 1e-7);
    CHECK(rel(lagrangian_path(*b, concatenate(a, c)), lagrangian_path(*b, a) + lagrangian_path(*b, c)) < 1e-7);
  }
}

TEST_CASE("derivative identity") {
  const auto g = torus(32);
  for (const auto& b : corpus(g)) {
    const auto h = random_metric(b, 21);
    const auto k = random_metric(b, 22);
    for (double t : {0.25, 0.6}) {
      const auto geo = lagrangian_derivative_check(*b, geodesic_path(h, k, 9), t, 1e-4);
      CHECK_MESSAGE(std::abs(geo.finite_difference - geo.formula) < 1e-5 * (1.0 + std::abs(geo.formula)), b->name);
      const auto lin = lagrangian_derivative_check(*b, linear_path(h, k, 9), t, 1e-4);
      CHECK_MESSAGE(std::abs(lin.finite_difference - lin.formula) < 1e-5 * (1.0 + std::abs(lin.formula)), b->name);
    }
  }
  const auto b = make_line_bundle(g, 1);
  CHECK_THROWS_AS(lagrangian_derivative_check(*b, geodesic_path(random_metric(b, 1), random_metric(b, 2), 9), 0.0), Error);
}

TEST_CASE("HE metrics are critical points") {
  const auto g = torus(32);
  const auto l = make_line_bundle(g, 2);
  const auto h = MetricState::reference(l);
  const auto k = random_metric(l, 4, 0.01);
  const auto d = lagrangian_derivative_check(*l, geodesic_path(h, k, 9), 1e-3, 5e-4);
  CHECK(std::abs(d.formula) < 1e-4);
  // convex along geodesics: positive away from the critical point
  CHECK(lagrangian_closed(*l, h, random_metric(l, 4, 0.5)) > 0.0);
}

TEST_CASE("decomposition across the Atiyah extension") {
  const auto g = torus(32);
  for (const auto& b : {make_atiyah_f2(g, 1.0), make_atiyah_f2(g, {0.3, -0.4})}) {
    for (std::uint64_t seed = 1; seed < 4; ++seed) {
      const auto h = random_metric(b, seed);
      const auto k = random_metric(b, seed + 10);
      const auto d = lagrangian_decomposition(*b, b->declared_subbundles[0], h, k);
      CHECK(std::abs(d.residual) < 1e-6);
      CHECK(std::abs(d.slope_terms) < 1e-12);
      CHECK(std::abs(d.c_terms) > 1e-3);
    }
  }
  // unequal slopes need the slope-gap correction
  const auto s = make_direct_sum(g, {1, -1});
  const auto d = lagrangian_decomposition(*s, s->declared_subbundles[0], random_metric(s, 1), random_metric(s, 2));
  CHECK(std::abs(d.residual) < 1e-6);
  CHECK(std::abs(d.slope_terms) > 1e-3);
}

TEST_CASE("perturbed equation") {
  const auto g = torus(64);
  for (const auto& b : {make_atiyah_f2(g, 1.0), make_direct_sum(g, {1, -1})}) {
    const auto ref = construct_perturbed_solution(*b, MetricState::reference(b));
    CHECK_MESSAGE(perturbed_residual(*b, ref.h0, ref.f1, 1.0).sup_norm() < 1e-7, b->name);
    CHECK(trace_free_curvature(*b, ref.h0).trace().sup_norm() < 1e-8);
    // h0 carries exp(K⁰) and is much rougher than h, so the grid sets the error
    const auto rough = construct_perturbed_solution(*b, random_metric(b, 3, 0.01));
    CHECK(perturbed_residual(*b, rough.h0, rough.f1, 1.0).sup_norm() < 1e-5);
    CHECK(trace_free_curvature(*b, rough.h0).trace().sup_norm() < 1e-5);
    // K(h0 f) − c = K⁰(h0) + iΛ∂̄(f⁻¹D'f): trace identity for random positive f
    const auto h0 = random_metric(b, 4, 0.2);
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const auto f = endo_from_form(h0, random_metric(b, 100 + seed, 0.3));
      const auto lhs = trace_free_curvature(*b, metric_from_endo(h0, f)).trace();
      const auto rhs = perturbed_residual(*b, h0, f, 0.0).trace();
      CHECK((lhs - rhs).sup_norm() < 1e-9);
    }
  }
  const auto l = make_line_bundle(g, 1);
  CHECK_THROWS_AS(perturbed_residual(*l, MetricState::reference(l), -1.0 * MatrixField::identity(g, 1), 0.5), Error);
}

TEST_CASE("flow step preserves positivity and fixes HE metrics") {
  const auto g = torus(32);
  const auto l = make_line_bundle(g, 1);
  const auto ref = MetricState::reference(l);
  CHECK(sup_distance(flow_step(*l, ref, 0.3).relative(), ref.relative()) < 1e-13);
  const auto s = make_direct_sum(g, {1, -1});
  const auto h = random_metric(s, 8, 1.0);
  const auto next = flow_step(*s, h, 1.0);
  CHECK(next.min_eigenvalue() > 0.0);
  CHECK(hermitian_defect(next.relative()) < 1e-12);
  const auto sl = flow_step(*s, h, 0.1, true);
  CHECK(q1_field(sl, h).sup_norm() < 1e-12);
  CHECK_THROWS_AS(flow_step(*s, h, 0.0), Error);
}

TEST_CASE("scalar flow equals implicit Euler") {
  // for a conformal perturbation of a line bundle the step is linear in log F
  const auto g = torus(32);
  const auto l = make_line_bundle(g, 1);
  const auto u = cos_s(g, 0.2);
  const auto next = flow_step(*l, MetricState::conformal(MetricState::reference(l), u), 0.05);
  ScalarField expect(g);
  spectral::resolvent(g, 0.05, u.values(), expect.values());
  double worst = 0.0;
  for (std::size_t p = 0; p < g.size(); ++p)
    worst = std::max(worst, std::abs(std::log(next.relative().entry(0, 0, p).real()) - expect[p].real()));
  CHECK(worst < 1e-12);
}

TEST_CASE("stable line bundle converges") {
  const auto g = torus(32);
  const auto l = make_line_bundle(g, 1);
  const auto h0 = MetricState::conformal(MetricState::reference(l), random_hermitian_field(*make_line_bundle(g, 0), 17, 0.5).trace());
  FlowConfig cfg;
  cfg.t_final = 5.0;
  cfg.m_k_target = 1e-10;
  const auto tr = run_flow(*l, h0, cfg);
  CHECK(tr.rows.back().m_k < 1e-10);
  CHECK(tr.stop_reason == "m_k_target");
  CHECK(trace_violations(tr).empty());
  CHECK(tr.rows.front().lagrangian == 0.0);
  CHECK(tr.rows.back().lagrangian < 0.0);
  CHECK(bundle_report(*l, tr.final_metric).he_residual_sup < 1e-4);
}

TEST_CASE("descent matches the gradient identity") {
  const auto g = torus(32);
  for (const auto& b : {make_atiyah_f2(g, 1.0), make_heisenberg(g, 2, 1)}) {
    const auto h = random_metric(b, 31, 0.3);
    const double dt = 1e-4;
    const auto next = flow_step(*b, h, dt);
    const double dl = lagrangian_closed(*b, h, next);
    const double expect = -l2_sq(trace_free_curvature(*b, h)) * dt;
    CHECK_MESSAGE(std::abs(dl - expect) < 0.1 * std::abs(expect), b->name);
    CHECK(dl < 0.0);
  }
}

TEST_CASE("semigroup with matched steps") {
  const auto g = torus(32);
  const auto b = make_atiyah_f2(g, 1.0);
  const auto h = random_metric(b, 41);
  FlowConfig cfg;
  cfg.fixed_step = true;
  cfg.dt_initial = 0.01;
  cfg.t_final = 0.3;
  const auto whole = run_flow(*b, h, cfg);
  cfg.t_final = 0.1;
  const auto first = run_flow(*b, h, cfg);
  cfg.t_final = 0.2;
  const auto second = run_flow(*b, first.final_metric, cfg);
  CHECK(sup_distance(whole.final_metric.relative(), second.final_metric.relative()) < 1e-10);
  CHECK(whole.rows.back().t == doctest::Approx(0.3));
}

TEST_CASE("semistable extension decays without converging") {
  const auto g = torus(16);
  const auto b = make_atiyah_f2(g, 1.0);
  FlowConfig cfg;
  cfg.t_final = 10.0;
  const auto tr = run_flow(*b, MetricState::reference(b), cfg);
  CHECK(trace_violations(tr).empty());
  const auto& last = tr.rows.back();
  CHECK(last.m_k < 1e-2);
  CHECK(last.max_eig / last.min_eig > 20.0);
  // homogeneous metrics stay homogeneous and unimodular
  CHECK(last.det_residual < 1e-12);
}

TEST_CASE("unstable sum plateaus and yields its destabilizer") {
  const auto g = torus(32);
  const auto s = make_direct_sum(g, {1, -1});
  FlowConfig cfg;
  cfg.t_final = 3.0;
  const auto tr = run_flow(*s, random_metric(s, 5, 0.3), cfg);
  CHECK(trace_violations(tr).empty());
  CHECK(std::abs(tr.rows.back().m_k - 8.0 * kPi * kPi) < 1e-4);
  const auto proj = extract_destabilizer(tr.final_metric, *s);
  const auto res = weakly_holo_residual(*s, tr.final_metric, proj);
  CHECK(res.adjoint < 1e-6);
  CHECK(res.idempotent < 1e-6);
  CHECK(res.holomorphic < 1e-6);
  CHECK(projector_degree(*s, tr.final_metric, proj) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(std::abs(proj.trace()[0].real() - 1.0) < 1e-12);
  const auto l = make_line_bundle(g, 1);
  CHECK_THROWS_AS(extract_destabilizer(MetricState::reference(l), *l), Error);
  CHECK_THROWS_AS(extract_destabilizer(MetricState::reference(s), *s), Error);
}

TEST_CASE("projector degree of a holomorphic split") {
  const auto g = torus(64);
  const auto b = make_atiyah_f2(g, 1.0);
  const auto h = random_metric(b, 2);
  const auto split = induced_structures(*b, b->declared_subbundles[0], h);
  CHECK(std::abs(projector_degree(*b, h, sub_projector(split))) < 1e-8);
  const auto s = make_direct_sum(g, {2, -1});
  const auto hs = random_metric(s, 3);
  CHECK(projector_degree(*s, hs, sub_projector(induced_structures(*s, s->declared_subbundles[0], hs))) ==
        doctest::Approx(2.0).epsilon(1e-8));
}

TEST_CASE("trace csv") {
  const auto g = torus(16);
  const auto l = make_line_bundle(g, 1);
  FlowConfig cfg;
  cfg.t_final = 0.05;
  const auto tr = run_flow(*l, MetricState::conformal(MetricState::reference(l), cos_s(g, 0.1)), cfg);
  const auto dir = std::filesystem::temp_directory_path() / "twistflow_trace_test";
  std::filesystem::create_directories(dir);
  write_trace_csv(tr, dir / "trace.csv");
  std::ifstream in(dir / "trace.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,m_K,s_K,L,det_residual,min_eig,max_eig,dt");
  std::size_t lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  CHECK(lines == tr.rows.size());
  CHECK_THROWS_AS(write_trace_csv(tr, dir / "missing" / "trace.csv"), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("flow config validation") {
  const auto g = torus(16);
  const auto l = make_line_bundle(g, 1);
  FlowConfig cfg;
  cfg.dt_initial = 1.0;
  cfg.dt_max = 0.5;
  CHECK_THROWS_AS(run_flow(*l, MetricState::reference(l), cfg), Error);
}

#include "support.hpp"

using namespace twistflow;

namespace {

MetricState random_metric(const BundlePtr& b, std::uint64_t seed, double amp = 0.5) {
  return MetricState::from_exponent(b, random_hermitian_field(*b, seed, amp));
}

MatrixField constant(const TorusGeometry& g, std::initializer_list<cplx> diag) {
  Mat m = Mat::Zero(static_cast<int>(diag.size()), static_cast<int>(diag.size()));
  int i = 0;
  for (cplx v : diag) m(i, i) = v, ++i;
  return MatrixField::constant(g, m);
}

MetricState dual_metric(const BundlePtr& dual, const MetricState& h) {
  return MetricState::from_relative(dual, inverse(h.relative()).transpose());
}

MetricState dsum_metric(const BundlePtr& s, const MetricState& a, const MetricState& b) {
  const auto& g = a.geometry();
  return MetricState::from_relative(
      s, MatrixField::generate(g, s->rank, s->rank, [&](std::size_t p) { return block_diag(a.relative().at(p), b.relative().at(p)); }));
}

MetricState tensor_metric(const BundlePtr& t, const MetricState& a, const MetricState& b) {
  const auto& g = a.geometry();
  return MetricState::from_relative(
      t, MatrixField::generate(g, t->rank, t->rank, [&](std::size_t p) { return kron(a.relative().at(p), b.relative().at(p)); }));
}

}  // namespace

TEST_CASE("chern connection oracles") {
  const auto g = make_torus({0.3, 1.4}, 16);
  const auto triv = make_line_bundle(g, 0);
  CHECK(chern_connection(*triv, MetricState::reference(triv)).sup_norm() < 1e-14);
  for (int d : {-2, 1, 3}) {
    const auto l = make_line_bundle(g, d);
    const auto gamma = chern_connection(*l, MetricState::reference(l));
    CHECK(gamma.bidegree() == kForm10);
    double worst = 0.0;
    for (std::size_t p = 0; p < g.size(); ++p) {
      const cplx z = g.point(p);
      const cplx expect = kPi * d / g.volume() * (z - std::conj(z));
      worst = std::max(worst, std::abs(gamma.entry(0, 0, p) - expect));
    }
    CHECK(worst < 1e-12);
  }
  const cplx beta{0.6, -0.8};
  const auto f2 = make_atiyah_f2(g, beta);
  Mat expect = Mat::Zero(2, 2);
  expect(1, 0) = -std::conj(beta);
  CHECK(sup_distance(chern_connection(*f2, MetricState::reference(f2)), MatrixField::constant(g, expect, kForm10)) < 1e-14);
}

TEST_CASE("curvature and mean curvature oracles") {
  const auto g = torus(16);
  for (int d = -2; d <= 2; ++d) {
    const auto l = make_line_bundle(g, d);
    const auto h = MetricState::reference(l);
    const auto r = curvature(*l, h);
    CHECK(r.value.bidegree() == kForm11);
    CHECK(sup_distance(r.value, constant(g, {kPi * d})) < 1e-12);
    CHECK(sup_distance(mean_curvature(*l, h), constant(g, {2.0 * kPi * d})) < 1e-12);
  }
  const cplx beta{1.0, 0.5};
  const double b2 = std::norm(beta);
  const auto f2 = make_atiyah_f2(g, beta);
  const auto h = MetricState::reference(f2);
  CHECK(sup_distance(curvature(*f2, h).value, constant(g, {b2, -b2})) < 1e-13);
  CHECK(sup_distance(mean_curvature(*f2, h), constant(g, {2 * b2, -2 * b2})) < 1e-13);

  // B shifts the curvature coefficient by −B = b/2.
  const auto shifted = with_b_coeff(*f2, 0.7);
  const auto hs = MetricState::from_relative(shifted, h.relative());
  CHECK(sup_distance(curvature(*shifted, hs).value, constant(g, {b2 + 0.35, -b2 + 0.35})) < 1e-13);
}

TEST_CASE("conformal change shifts K by the Laplacian") {
  const auto g = torus(64);
  const auto b = make_atiyah_f2(g, 1.0);
  const auto h = random_metric(b, 3);
  const auto u = smooth_bump(g, 0.6);
  const auto hu = MetricState::conformal(h, u);
  const auto expect = mean_curvature(*b, h) + MatrixField::scalar(laplace_operator(u), 2);
  CHECK(sup_distance(mean_curvature(*b, hu), expect) < 1e-9);
}

TEST_CASE("mean curvature is h-Hermitian") {
  // coarse grids alias the products; 64 points resolve these metrics
  const auto g = torus(64);
  for (const auto& b : {make_atiyah_f2(g, 1.0), make_direct_sum(g, {2, -1}), make_heisenberg(g, 3, 2)}) {
    const auto h = random_metric(b, 5);
    const auto k = mean_curvature(*b, h);
    CHECK(sup_distance(k, h_adjoint(h, k)) < 1e-10 * k.sup_norm());
    CHECK(curvature(*b, h).value.trace().sup_norm() < 1e6);
  }
}

TEST_CASE("chern_form_poly") {
  Mat x(2, 2);
  x << cplx(1, 2), cplx(0.5, 0), cplx(-1, 1), cplx(3, -1);
  CHECK(std::abs(chern_form_poly(x, 1) - (-x.trace() / (2.0 * kPi * kI))) < 1e-14);
  CHECK(std::abs(chern_form_poly(x, 2) - Mat(-x / (2.0 * kPi * kI)).determinant()) < 1e-14);
  CHECK(std::abs(chern_form_poly(Mat::Zero(3, 3), 2)) == 0.0);
  CHECK_THROWS_AS(chern_form_poly(x, 3), Error);
  CHECK_THROWS_AS(chern_form_poly(x, 0), Error);
}

TEST_CASE("bundle_report oracles") {
  const auto g = torus(64);
  for (int d = -2; d <= 2; ++d) {
    const auto l = make_line_bundle(g, d);
    const auto rep = bundle_report(*l, MetricState::reference(l));
    CHECK(std::abs(rep.degree - d) < 1e-8);
    CHECK(rep.he_residual_sup < 1e-10);
    CHECK(std::abs(rep.einstein_constant - 2.0 * kPi * d) < 1e-9);
    CHECK(rep.slope == doctest::Approx(rep.degree));
  }
  const auto s = make_direct_sum(g, {1, -1});
  const auto rs = bundle_report(*s, MetricState::reference(s));
  CHECK(std::abs(rs.degree) < 1e-10);
  CHECK(std::abs(rs.einstein_constant) < 1e-10);
  CHECK(rs.he_residual_sup == doctest::Approx(8.0 * kPi * kPi).epsilon(1e-12));
  const cplx beta{0.8, 0.3};
  const auto f2 = make_atiyah_f2(g, beta);
  const auto rf = bundle_report(*f2, MetricState::reference(f2));
  CHECK(std::abs(rf.degree) < 1e-12);
  CHECK(rf.he_residual_sup == doctest::Approx(8.0 * std::pow(std::norm(beta), 2)).epsilon(1e-12));
  CHECK(rf.he_residual_l2 == doctest::Approx(8.0 * std::pow(std::norm(beta), 2)).epsilon(1e-12));
}

TEST_CASE("property: degree is metric independent and c matches constant K") {
  const auto g = torus(32);
  for (const auto& b : {make_line_bundle(g, 2), make_direct_sum(g, {1, -2}), make_atiyah_f2(g, 1.0),
                        make_heisenberg(g, 3, 1), with_b_coeff(*make_heisenberg(g, 2, 1), 0.4)}) {
    const double ref = bundle_report(*b, MetricState::reference(b)).degree;
    CHECK(std::abs(ref - analytic_degree(*b)) < 1e-8);
    for (std::uint64_t seed = 1; seed < 4; ++seed) {
      CHECK(std::abs(bundle_report(*b, random_metric(b, seed, 0.8)).degree - ref) < 1e-8);
    }
  }
  const auto l = make_line_bundle(g, 2);
  const auto rep = bundle_report(*l, MetricState::reference(l));
  CHECK(std::abs(mean_curvature(*l, MetricState::reference(l)).entry(0, 0, 17).real() - rep.einstein_constant) < 1e-9);
}

TEST_CASE("property: functoriality of curvature") {
  const auto g = torus(32);
  const std::vector<BundlePtr> corpus{make_line_bundle(g, 1), make_line_bundle(g, -2), make_direct_sum(g, {1, -1}),
                                      make_atiyah_f2(g, 0.7), make_heisenberg(g, 3, 1), make_heisenberg(g, 2, 1)};
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& b = corpus[i];
    const auto h = random_metric(b, 30 + i);
    const auto r = curvature(*b, h).value;
    const auto d = bundle_dual(*b);
    CHECK_MESSAGE(sup_distance(curvature(*d, dual_metric(d, h)).value, -1.0 * r.transpose()) < 1e-7, b->name);
    CHECK(std::abs(bundle_report(*d, dual_metric(d, h)).he_residual_sup - bundle_report(*b, h).he_residual_sup) < 1e-7);

    const auto& b2 = corpus[(i + 1) % corpus.size()];
    const auto h2 = random_metric(b2, 40 + i);
    const auto r2 = curvature(*b2, h2).value;
    const auto t = bundle_tensor(*b, *b2);
    const auto rt = curvature(*t, tensor_metric(t, h, h2)).value;
    const auto expect = MatrixField::generate(g, t->rank, t->rank, [&](std::size_t p) {
      return Mat(kron(r.at(p), Mat::Identity(b2->rank, b2->rank)) + kron(Mat::Identity(b->rank, b->rank), r2.at(p)));
    });
    CHECK_MESSAGE(sup_distance(rt, expect) < 1e-7, t->name);

    if (same_twist(b->twist, b2->twist)) {
      const auto s = bundle_dsum(*b, *b2);
      const auto rs = curvature(*s, dsum_metric(s, h, h2)).value;
      const auto blocks = MatrixField::generate(g, s->rank, s->rank, [&](std::size_t p) { return block_diag(r.at(p), r2.at(p)); });
      CHECK_MESSAGE(sup_distance(rs, blocks) < 1e-7, s->name);
    }
  }
}

TEST_CASE("property: HE functoriality") {
  const auto g = torus(16);
  const auto l1 = make_line_bundle(g, 1);
  const auto l2 = make_line_bundle(g, 2);
  const auto t = bundle_tensor(*l1, *l2);
  const auto ht = tensor_metric(t, MetricState::reference(l1), MetricState::reference(l2));
  CHECK(bundle_report(*t, ht).he_residual_sup < 1e-10);
  const auto same = bundle_dsum(*l1, *make_line_bundle(g, 1));
  CHECK(bundle_report(*same, MetricState::reference(same)).he_residual_sup < 1e-10);
  const auto diff = bundle_dsum(*l1, *l2);
  CHECK(bundle_report(*diff, MetricState::reference(diff)).he_residual_sup > 1.0);
}

TEST_CASE("property: B shift leaves the HE residual unchanged") {
  const auto g = torus(16);
  for (const auto& b : {make_atiyah_f2(g, 1.0), make_heisenberg(g, 3, 1), make_direct_sum(g, {1, -1})}) {
    const auto h = random_metric(b, 77);
    const double base = bundle_report(*b, h).he_residual_sup;
    for (double db : {-1.0, 1.0, 2.5}) {
      const auto s = with_b_coeff(*b, db);
      CHECK(std::abs(bundle_report(*s, MetricState::from_relative(s, h.relative())).he_residual_sup - base) < 1e-10);
    }
  }
}

TEST_CASE("conformal_normalize") {
  const auto g = torus(64);
  const auto l = make_line_bundle(g, 1);
  const auto h = MetricState::reference(l);
  const auto same = conformal_normalize(*l, h);
  CHECK(sup_distance(same.relative(), h.relative()) < 1e-12);
  const auto bumped = MetricState::conformal(h, cos_s(g, 0.4));
  CHECK(bundle_report(*l, bumped).he_residual_sup > 1.0);
  CHECK(bundle_report(*l, conformal_normalize(*l, bumped)).he_residual_sup < 1e-8);
  const auto f2 = make_atiyah_f2(g, 1.0);
  try {
    conformal_normalize(*f2, MetricState::reference(f2));
    FAIL("expected NotWeakHE");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotWeakHE);
  }
}

TEST_CASE("property: variation formula") {
  const auto g = torus(32);
  for (const auto& b : {make_atiyah_f2(g, 1.0), make_line_bundle(g, 1), make_heisenberg(g, 2, 1)}) {
    const auto h = random_metric(b, 8);
    const auto f = inverse(h.relative()) * random_hermitian_field(*b, 9, 0.5);
    const double dt = 1e-4;
    const auto plus = metric_from_endo(h, functional_calculus(h, dt * f, SpectralFunction::Exp));
    const auto minus = metric_from_endo(h, functional_calculus(h, -dt * f, SpectralFunction::Exp));
    MatrixField fd = mean_curvature(*b, plus) - mean_curvature(*b, minus);
    fd *= 1.0 / (2.0 * dt);
    const auto analytic = curvature_variation(*b, h, f);
    CHECK_MESSAGE(sup_distance(fd, analytic) < 1e-5 * std::max(1.0, analytic.sup_norm()), b->name);
  }
}

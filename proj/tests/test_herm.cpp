#include "support.hpp"

using namespace twistflow;

namespace {

BundlePtr flat2(const TorusGeometry& g) { return make_direct_sum(g, {0, 0}); }

MetricState random_metric(const BundlePtr& b, std::uint64_t seed, double amp = 0.5) {
  return MetricState::from_exponent(b, random_hermitian_field(*b, seed, amp));
}

MatrixField random_h_hermitian(const MetricState& h, std::uint64_t seed) {
  const auto g = random_hermitian_field(h.bundle(), seed, 1.0);
  return inverse(h.relative()) * g;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("endo_from_form basics") {
  const auto g = torus(8);
  const auto b = flat2(g);
  const auto h = random_metric(b, 1);
  CHECK(sup_distance(endo_from_form(h, h), MatrixField::identity(g, 2)) < 1e-12);

  Mat hm = Mat::Zero(2, 2);
  hm(0, 0) = 2.0;
  hm(1, 1) = 1.0;
  Mat vm = Mat::Zero(2, 2);
  vm(0, 0) = 4.0;
  vm(1, 1) = 3.0;
  const auto hc = MetricState::from_relative(b, MatrixField::constant(g, hm));
  const auto v = HermitianFormField::from_relative(b, MatrixField::constant(g, vm));
  Mat expect = Mat::Zero(2, 2);
  expect(0, 0) = 2.0;
  expect(1, 1) = 3.0;
  CHECK(sup_distance(endo_from_form(hc, v), MatrixField::constant(g, expect)) < 1e-15);

  const auto k = random_metric(b, 2);
  const auto w = HermitianFormField::from_metric(random_metric(b, 3));
  const auto lhs = endo_from_form(k, HermitianFormField::from_metric(h)) * endo_from_form(h, w);
  CHECK(sup_distance(lhs, endo_from_form(k, w)) < 1e-12);
  CHECK(code_of([&] { endo_from_form(h, HermitianFormField::from_metric(random_metric(make_line_bundle(g, 0), 1))); }) ==
        ErrorCode::BundleMismatch);
}

TEST_CASE("form_from_endo roundtrip") {
  const auto g = torus(8);
  const auto b = flat2(g);
  const auto h = random_metric(b, 4);
  CHECK(sup_distance(form_from_endo(h, MatrixField::identity(g, 2)).relative(), h.relative()) < 1e-15);
  MatrixField three = MatrixField::identity(g, 2);
  three *= 3.0;
  MatrixField h3 = h.relative();
  h3 *= 3.0;
  CHECK(sup_distance(form_from_endo(h, three).relative(), h3) < 1e-14);
  const auto f = random_h_hermitian(h, 9);
  CHECK(sup_distance(endo_from_form(h, form_from_endo(h, f)), f) < 1e-12);
  Mat skew = Mat::Zero(2, 2);
  skew(0, 1) = 1.0;
  CHECK(code_of([&] { form_from_endo(h, MatrixField::constant(g, skew)); }) == ErrorCode::NotHermitian);
}

TEST_CASE("functional calculus") {
  const auto g = torus(8);
  const auto b = flat2(g);
  const auto h = random_metric(b, 5);
  CHECK(sup_distance(functional_calculus(h, MatrixField(g, 2, 2), SpectralFunction::Exp), MatrixField::identity(g, 2)) <
        1e-14);
  const auto s = random_h_hermitian(h, 6);
  const auto es = functional_calculus(h, s, SpectralFunction::Exp);
  CHECK(sup_distance(functional_calculus(h, es, SpectralFunction::Log), s) < 1e-10);
  const auto root = functional_calculus(h, es, SpectralFunction::Power, 0.5);
  CHECK(sup_distance(root * root, es) < 1e-10);
  CHECK(code_of([&] { functional_calculus(h, s, SpectralFunction::Log); }) == ErrorCode::SpectrumOutOfDomain);
}

TEST_CASE("metric validation errors") {
  const auto g = torus(8);
  const auto b = flat2(g);
  Mat m = Mat::Identity(2, 2);
  m(0, 1) = 0.5;
  CHECK(code_of([&] { MetricState::from_relative(b, MatrixField::constant(g, m)); }) == ErrorCode::NotHermitian);
  Mat neg = Mat::Identity(2, 2);
  neg(1, 1) = -1.0;
  CHECK(code_of([&] { MetricState::from_relative(b, MatrixField::constant(g, neg)); }) == ErrorCode::DegenerateMetric);
  const auto heis = make_heisenberg(g, 2, 1);
  Mat diag = Mat::Identity(2, 2);
  diag(0, 0) = 2.0;
  CHECK(code_of([&] { MetricState::from_relative(heis, MatrixField::constant(g, diag)); }) == ErrorCode::SeamViolation);
  const auto dsum = make_direct_sum(g, {1, -1});
  Mat mix = Mat::Identity(2, 2);
  mix(0, 1) = mix(1, 0) = 0.3;
  CHECK(code_of([&] { MetricState::from_relative(dsum, MatrixField::constant(g, mix)); }) == ErrorCode::SeamViolation);
}

TEST_CASE("gauge action") {
  const auto g = torus(8);
  const auto b = flat2(g);
  const auto h = random_metric(b, 7);
  const auto k = random_metric(b, 8);
  const auto v = HermitianFormField::from_metric(random_metric(b, 10));
  const auto id = MatrixField::identity(g, 2);
  CHECK(sup_distance(gauge_act(id, v).relative(), v.relative()) < 1e-15);
  const auto a = gauge_between(h, k);
  CHECK(sup_distance(gauge_act(a, k).relative(), h.relative()) < 1e-12);
  const auto ah = gauge_act(a, h);
  const auto av = gauge_act(a, v);
  const auto lhs = endo_from_form(ah, av);
  const auto rhs = inverse(a) * endo_from_form(h, v) * a;
  CHECK(sup_distance(lhs, rhs) < 1e-11);
  CHECK(code_of([&] { gauge_act(MatrixField(g, 2, 2), v); }) == ErrorCode::Singular);
}

TEST_CASE("inner product") {
  const auto g = make_torus({0.2, 1.5}, 16);
  const auto b = flat2(g);
  const auto h = random_metric(b, 11);
  const auto hv = HermitianFormField::from_metric(h);
  CHECK(inner_product(h, hv, hv) == doctest::Approx(2.0 * 1.5).epsilon(1e-13));
  const auto v = HermitianFormField::from_relative(b, random_hermitian_field(*b, 12, 1.0));
  const auto w = HermitianFormField::from_relative(b, random_hermitian_field(*b, 13, 1.0));
  CHECK(inner_product(h, v, w) == doctest::Approx(inner_product(h, w, v)).epsilon(1e-13));
  CHECK(inner_product(h, v, v) > 0.0);
  const auto a = gauge_between(random_metric(b, 14), h);
  const double moved = inner_product(gauge_act(a, h), gauge_act(a, v), gauge_act(a, w));
  CHECK(std::abs(moved - inner_product(h, v, w)) < 1e-10);
  const auto lin = 2.0 * v + (-0.5) * w;
  CHECK(inner_product(h, lin, w) == doctest::Approx(2.0 * inner_product(h, v, w) - 0.5 * inner_product(h, w, w)));
}

TEST_CASE("geodesics") {
  const auto g = torus(16);
  const auto b = make_line_bundle(g, 1);
  const auto h = MetricState::reference(b);
  const auto flat = geodesic_path(h, h, 5);
  for (const auto& s : flat.samples) CHECK(sup_distance(s.relative(), h.relative()) < 1e-14);
  const auto u = smooth_bump(g, 0.8);
  const auto k = MetricState::conformal(h, u);
  const auto path = geodesic_path(h, k, 5);
  ScalarField half = u;
  half *= 0.5;
  CHECK(sup_distance(path.samples[2].relative(), MetricState::conformal(h, half).relative()) < 1e-13);
  CHECK(&path.end() != &k);
  CHECK(sup_distance(path.end().relative(), k.relative()) == 0.0);
  CHECK_THROWS_AS(geodesic_path(h, k, 4), Error);
  CHECK_THROWS_AS(geodesic_path(h, k, 1), Error);

  // Rank two: the tangent f^{h_t, h_t'} is the same field at every t.
  const auto b2 = flat2(g);
  const auto h2 = random_metric(b2, 15);
  const auto k2 = random_metric(b2, 16);
  const auto p2 = geodesic_path(h2, k2, 7);
  const auto custom = custom_path(p2.samples);
  const auto s = functional_calculus(h2, endo_from_form(h2, k2), SpectralFunction::Log);
  CHECK(sup_distance(p2.tangents[3], s) < 1e-10);
  // Second-order differences of the sampled path agree with the exact tangent.
  CHECK(sup_distance(custom.tangents[3], p2.tangents[3]) < 5e-2);
}

TEST_CASE("property: dictionary identities on random metrics") {
  const auto g = torus(8);
  for (const auto& b : {flat2(g), make_direct_sum(g, {1, -1}), make_heisenberg(g, 3, 1)}) {
    for (std::uint64_t seed = 20; seed < 25; ++seed) {
      const auto h = random_metric(b, seed);
      const auto k = random_metric(b, seed + 100);
      const auto fhk = endo_from_form(h, k);
      const auto fkh = endo_from_form(k, h);
      CHECK(sup_distance(fhk * fkh, MatrixField::identity(g, b->rank)) < 1e-12);
      CHECK(sup_distance(fhk, h_adjoint(h, fhk)) < 1e-10);
      CHECK(sup_distance(fhk, h_adjoint(k, fhk)) < 1e-10);
      const auto v1 = HermitianFormField::from_relative(b, random_hermitian_field(*b, seed + 7, 1.0));
      const auto v2 = HermitianFormField::from_relative(b, random_hermitian_field(*b, seed + 8, 1.0));
      const auto lhs = endo_from_form(h, 1.5 * v1 + (-2.0) * v2);
      MatrixField rhs = endo_from_form(h, v1);
      rhs *= 1.5;
      MatrixField e2 = endo_from_form(h, v2);
      e2 *= -2.0;
      CHECK(sup_distance(lhs, rhs + e2) < 1e-12);
      // Real spectrum: the eigenvalues of the non-symmetric matrix F^{-1}G.
      for (std::size_t p = 0; p < g.size(); p += 7) {
        Eigen::ComplexEigenSolver<Mat> es(lhs.at(p));
        CHECK(es.eigenvalues().imag().cwiseAbs().maxCoeff() < 1e-10);
      }
    }
  }
}

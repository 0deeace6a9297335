#include "twistflow/bundle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace twistflow {
namespace {

constexpr double kDegreeTol = 1e-12;

Mat clock_matrix(int r) {
  Mat u = Mat::Zero(r, r);
  for (int k = 0; k < r; ++k) u(k, k) = std::polar(1.0, 2.0 * kPi * k / r);
  return u;
}

Mat shift_matrix(int r) {
  Mat v = Mat::Zero(r, r);
  for (int k = 0; k < r; ++k) v((k + 1) % r, k) = 1.0;
  return v;
}

// Smallest power of m proportional to the identity (projective order).
int projective_order(const Mat& m) {
  Mat acc = m;
  for (int k = 1; k <= 64; ++k) {
    const cplx c = acc(0, 0);
    if (std::abs(c) > 1e-12 && max_abs(acc - c * Mat::Identity(m.rows(), m.cols())) < 1e-10) return k;
    acc = acc * m;
  }
  return 1;
}

std::shared_ptr<BundleSpec> blank(const TorusGeometry& geom, int rank, std::string name) {
  auto b = std::make_shared<BundleSpec>();
  b->name = std::move(name);
  b->geometry = geom;
  b->rank = rank;
  b->mult_one = Mat::Identity(rank, rank);
  b->mult_tau = Mat::Identity(rank, rank);
  b->degrees = Vec::Zero(rank);
  b->deformation = MatrixField(geom, rank, rank, kForm01);
  b->reference_metric_id = "flat";
  return b;
}

std::string degree_list(const Vec& d) {
  std::string s;
  for (int i = 0; i < d.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(static_cast<long long>(std::llround(d(i))));
  }
  return s;
}

std::string reference_id(const Vec& degrees) { return "gaussian(" + degree_list(degrees) + ")"; }

Mat unit_columns(int rank, int first, int count) {
  Mat m = Mat::Zero(rank, count);
  for (int i = 0; i < count; ++i) m(first + i, i) = 1.0;
  return m;
}

// Declares the leading block of a block-diagonal bundle as a witness.
InclusionSpec leading_block_witness(const BundleSpec& whole, const BundlePtr& sub, const BundlePtr& quotient) {
  InclusionSpec w;
  w.sub = sub;
  w.quotient = quotient;
  const int s = sub->rank;
  const int q = quotient->rank;
  w.inclusion = MatrixField::constant(whole.geometry, unit_columns(whole.rank, 0, s), kFunction, Covariance::Morphism);
  w.quotient_lift = unit_columns(whole.rank, s, q);
  w.quotient_map = w.quotient_lift.transpose();
  w.sub_degree_hint = sub->degrees.sum();
  return w;
}

}  // namespace

Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Mat block_diag(const Mat& a, const Mat& b) {
  Mat out = Mat::Zero(a.rows() + b.rows(), a.cols() + b.cols());
  out.topLeftCorner(a.rows(), a.cols()) = a;
  out.bottomRightCorner(b.rows(), b.cols()) = b;
  return out;
}

Mat BundleSpec::multiplier(Generator g, cplx z) const {
  if (g == Generator::One) return mult_one;
  const cplx tau = geometry.tau();
  Mat diag = Mat::Zero(rank, rank);
  for (int j = 0; j < rank; ++j) diag(j, j) = std::exp(-kI * kPi * degrees(j) * tau - 2.0 * kI * kPi * degrees(j) * z);
  return mult_tau * diag;
}

MatrixField BundleSpec::multiplier_field(Generator g) const {
  return MatrixField::generate(geometry, rank, rank, [&](std::size_t p) { return multiplier(g, geometry.point(p)); },
                               kFunction, Covariance::Frame);
}

Mat BundleSpec::reference_metric(cplx z) const {
  Mat h = Mat::Zero(rank, rank);
  const double y = z.imag();
  for (int j = 0; j < rank; ++j) h(j, j) = std::exp(-2.0 * kPi * degrees(j) * y * y / geometry.volume());
  return h;
}

Mat BundleSpec::reference_connection(cplx z) const {
  Mat g = Mat::Zero(rank, rank);
  const double y = z.imag();
  for (int j = 0; j < rank; ++j) g(j, j) = 2.0 * kI * kPi * degrees(j) * y / geometry.volume();
  return g;
}

Mat BundleSpec::reference_curvature() const {
  Mat r = Mat::Zero(rank, rank);
  for (int j = 0; j < rank; ++j) r(j, j) = kPi * degrees(j) / geometry.volume();
  return r;
}

bool BundleSpec::has_deformation() const { return deformation.sup_norm() > 0.0; }

BundlePtr make_line_bundle(const TorusGeometry& geom, int d) {
  auto b = blank(geom, 1, "line_bundle(" + std::to_string(d) + ")");
  b->degrees(0) = d;
  b->reference_metric_id = d == 0 ? "flat" : reference_id(b->degrees);
  return b;
}

BundlePtr make_direct_sum(const TorusGeometry& geom, const std::vector<int>& degrees) {
  if (degrees.empty() || degrees.size() > 8) throw Error(ErrorCode::UnsupportedParams, "direct sum needs 1..8 summands");
  BundlePtr acc = make_line_bundle(geom, degrees.front());
  for (std::size_t i = 1; i < degrees.size(); ++i) acc = bundle_dsum(*acc, *make_line_bundle(geom, degrees[i]));
  return acc;
}

namespace {

BundlePtr make_extension(const TorusGeometry& geom, int d1, int d2, cplx beta,
                         const std::optional<ScalarField>& profile) {
  if (d1 != d2) {
    throw Error(ErrorCode::UnsupportedParams,
                "constant extension classes need equal degrees (Hom(L_d2, L_d1) is not periodic)");
  }
  if (profile) {
    const auto vals = profile->values();
    const cplx first = vals.front();
    for (const auto& v : vals)
      if (std::abs(v - first) > 1e-12) throw Error(ErrorCode::UnsupportedParams, "extension class must be harmonic (constant)");
    beta = first;
  }
  auto b = blank(geom, 2, "extension(" + std::to_string(d1) + "," + std::to_string(d2) + ")");
  b->degrees << d1, d2;
  b->reference_metric_id = d1 == 0 ? "flat" : reference_id(b->degrees);
  Mat a = Mat::Zero(2, 2);
  a(0, 1) = beta;
  b->deformation = MatrixField::constant(geom, a, kForm01);
  auto line = make_line_bundle(geom, d1);
  b->declared_subbundles.push_back(leading_block_witness(*b, line, make_line_bundle(geom, d2)));
  return b;
}

}  // namespace

BundlePtr make_atiyah_f2(const TorusGeometry& geom, cplx beta) {
  if (std::abs(beta) == 0.0) throw Error(ErrorCode::UnsupportedParams, "AtiyahF2 needs a non-zero extension class");
  auto b = make_extension(geom, 0, 0, beta, std::nullopt);
  auto copy = std::make_shared<BundleSpec>(*b);
  copy->name = "atiyah_f2";
  return copy;
}

BundlePtr make_heisenberg(const TorusGeometry& geom, int r, int p) {
  if (r < 2 || r > 8) throw Error(ErrorCode::UnsupportedParams, "Heisenberg rank must be in [2, 8]");
  if (p <= 0 || p >= r || std::gcd(p, r) != 1) {
    throw Error(ErrorCode::UnsupportedParams, "Heisenberg flux p must satisfy 0 < p < r and gcd(p, r) = 1");
  }
  auto b = blank(geom, r, "heisenberg(" + std::to_string(r) + "," + std::to_string(p) + ")");
  // a_1 = shift, a_τ = clock^p so that a_τ a_1 = e^{2πip/r} a_1 a_τ.
  b->mult_one = shift_matrix(r);
  Mat clock = clock_matrix(r);
  Mat cp = Mat::Identity(r, r);
  for (int i = 0; i < p; ++i) cp = cp * clock;
  b->mult_tau = cp;
  b->twist.epsilon = std::polar(1.0, 2.0 * kPi * p / r);
  return b;
}

BundlePtr make_preset(const TorusGeometry& geom, PresetKind kind, const PresetParams& params) {
  BundlePtr b;
  switch (kind) {
    case PresetKind::LineBundle: b = make_line_bundle(geom, params.d); break;
    case PresetKind::DirectSum: b = make_direct_sum(geom, params.degrees); break;
    case PresetKind::Extension: b = make_extension(geom, params.d1, params.d2, params.beta, params.beta_profile); break;
    case PresetKind::AtiyahF2: b = make_atiyah_f2(geom, params.beta); break;
    case PresetKind::Heisenberg: b = make_heisenberg(geom, params.r, params.p); break;
  }
  if (params.b_coeff != 0.0) b = with_b_coeff(*b, params.b_coeff);
  return b;
}

BundlePtr with_b_coeff(const BundleSpec& bundle, double b_coeff) {
  auto copy = std::make_shared<BundleSpec>(bundle);
  copy->twist.b_coeff = b_coeff;
  for (auto& w : copy->declared_subbundles) {
    w.sub = with_b_coeff(*w.sub, b_coeff);
    w.quotient = with_b_coeff(*w.quotient, b_coeff);
  }
  return copy;
}

BundlePtr bundle_dual(const BundleSpec& b) {
  auto d = std::make_shared<BundleSpec>();
  d->name = "dual(" + b.name + ")";
  d->geometry = b.geometry;
  d->rank = b.rank;
  d->mult_one = b.mult_one.inverse().transpose();
  d->mult_tau = b.mult_tau.inverse().transpose();
  d->degrees = -b.degrees;
  d->deformation = -1.0 * b.deformation.transpose();
  d->twist = twist_compose(b.twist, TwistDescriptor{}, TwistOp::Dual);
  d->reference_metric_id = b.reference_metric_id == "flat" ? "flat" : reference_id(d->degrees);
  return d;
}

BundlePtr bundle_dsum(const BundleSpec& b1, const BundleSpec& b2) {
  if (!same_twist(b1.twist, b2.twist)) throw Error(ErrorCode::TwistMismatch, "direct sum of differently twisted bundles");
  if (!(b1.geometry == b2.geometry)) throw Error(ErrorCode::ShapeMismatch, "bundles live on different grids");
  const auto& g = b1.geometry;
  auto s = blank(g, b1.rank + b2.rank, "dsum(" + b1.name + "," + b2.name + ")");
  s->mult_one = block_diag(b1.mult_one, b2.mult_one);
  s->mult_tau = block_diag(b1.mult_tau, b2.mult_tau);
  s->degrees << b1.degrees, b2.degrees;
  s->twist = b1.twist;
  MatrixField a(g, s->rank, s->rank, kForm01);
  for (int i = 0; i < b1.rank; ++i)
    for (int j = 0; j < b1.rank; ++j) std::ranges::copy(b1.deformation.plane(i, j), a.plane(i, j).begin());
  for (int i = 0; i < b2.rank; ++i)
    for (int j = 0; j < b2.rank; ++j)
      std::ranges::copy(b2.deformation.plane(i, j), a.plane(b1.rank + i, b1.rank + j).begin());
  s->deformation = std::move(a);
  const bool flat = (s->degrees.array().abs() < kDegreeTol).all();
  s->reference_metric_id = flat ? "flat" : reference_id(s->degrees);
  auto sub = std::make_shared<BundleSpec>(b1);
  auto quotient = std::make_shared<BundleSpec>(b2);
  sub->declared_subbundles.clear();
  quotient->declared_subbundles.clear();
  s->declared_subbundles.push_back(leading_block_witness(*s, sub, quotient));
  return s;
}

BundlePtr bundle_tensor(const BundleSpec& b1, const BundleSpec& b2) {
  if (!(b1.geometry == b2.geometry)) throw Error(ErrorCode::ShapeMismatch, "bundles live on different grids");
  const auto& g = b1.geometry;
  auto t = blank(g, b1.rank * b2.rank, "tensor(" + b1.name + "," + b2.name + ")");
  t->mult_one = kron(b1.mult_one, b2.mult_one);
  t->mult_tau = kron(b1.mult_tau, b2.mult_tau);
  for (int i = 0; i < b1.rank; ++i)
    for (int j = 0; j < b2.rank; ++j) t->degrees(i * b2.rank + j) = b1.degrees(i) + b2.degrees(j);
  t->twist = twist_compose(b1.twist, b2.twist, TwistOp::Tensor);
  const Mat i1 = Mat::Identity(b1.rank, b1.rank);
  const Mat i2 = Mat::Identity(b2.rank, b2.rank);
  t->deformation = MatrixField::generate(
      g, t->rank, t->rank,
      [&](std::size_t p) { return Mat(kron(b1.deformation.at(p), i2) + kron(i1, b2.deformation.at(p))); }, kForm01);
  const bool flat = (t->degrees.array().abs() < kDegreeTol).all();
  t->reference_metric_id = flat ? "flat" : reference_id(t->degrees);
  return t;
}

BundlePtr bundle_end(const BundleSpec& b) { return bundle_tensor(*bundle_dual(b), b); }

double seam_residual(const MatrixField& field, const BundleSpec& bundle) {
  if (field.covariance() == Covariance::Scalar) return 0.0;
  if (field.rows() != bundle.rank || field.cols() != bundle.rank) {
    throw Error(ErrorCode::ShapeMismatch, "endomorphism field rank does not match the bundle");
  }
  return seam_residual(field, bundle, bundle);
}

double seam_residual(const MatrixField& field, const BundleSpec& target, const BundleSpec& source) {
  if (field.covariance() == Covariance::Scalar) return 0.0;
  if (field.rows() != target.rank || field.cols() != source.rank) {
    throw Error(ErrorCode::ShapeMismatch, "morphism field shape does not match the bundles");
  }
  const auto& g = field.geometry();
  double worst = 0.0;
  for (std::size_t p = 0; p < g.size(); ++p) {
    const cplx z = g.point(p);
    const Mat m = field.at(p);
    const double scale = std::max(1.0, max_abs(m));
    for (Generator gen : {Generator::One, Generator::Tau}) {
      const Mat transported = target.multiplier(gen, z) * m * source.multiplier(gen, z).inverse();
      worst = std::max(worst, max_abs(transported - m) / scale);
    }
  }
  return worst;
}

MatrixField project_covariant(const MatrixField& field, const BundleSpec& bundle) {
  const int r = bundle.rank;
  if (field.rows() != r || field.cols() != r) throw Error(ErrorCode::ShapeMismatch, "projection needs an endomorphism field");
  MatrixField out = field;
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < r; ++j)
      if (std::abs(bundle.degrees(i) - bundle.degrees(j)) > kDegreeTol) std::ranges::fill(out.plane(i, j), cplx{});
  const int o1 = projective_order(bundle.mult_one);
  const int o2 = projective_order(bundle.mult_tau);
  if (o1 == 1 && o2 == 1) return out;
  std::vector<Mat> group;
  Mat p1 = Mat::Identity(r, r);
  for (int a = 0; a < o1; ++a, p1 = p1 * bundle.mult_one) {
    Mat p2 = Mat::Identity(r, r);
    for (int b = 0; b < o2; ++b, p2 = p2 * bundle.mult_tau) group.push_back(p1 * p2);
  }
  std::vector<Mat> inverses;
  for (const auto& gm : group) inverses.push_back(gm.inverse());
  const double weight = 1.0 / static_cast<double>(group.size());
  return map_points(out, r, r, [&](const Mat& m) {
    Mat acc = Mat::Zero(r, r);
    for (std::size_t k = 0; k < group.size(); ++k) acc += group[k] * m * inverses[k];
    return Mat(weight * acc);
  });
}

}  // namespace twistflow

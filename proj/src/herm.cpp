#include "twistflow/herm.hpp"

#include <algorithm>
#include <cmath>
#include <atomic>
#include <random>
#include <tuple>

namespace twistflow {
namespace {

constexpr double kHermTol = 1e-12;
constexpr double kFormHermTol = 1e-10;
constexpr double kMinEig = 1e-12;
constexpr double kSeamTol = 1e-10;

void require_same(const BundleSpec& a, const BundleSpec& b) {
  if (!same_bundle(a, b)) throw Error(ErrorCode::BundleMismatch, a.name + " vs " + b.name);
}

double relative_hermitian_defect(const MatrixField& m) {
  return hermitian_defect(m) / std::max(1.0, m.sup_norm());
}

MatrixField symmetrized(const MatrixField& m) {
  MatrixField out = m + m.adjoint();
  out *= 0.5;
  out.set_bidegree(m.bidegree());
  out.set_covariance(m.covariance());
  return out;
}

Mat apply_spectrum(const Eigen::SelfAdjointEigenSolver<Mat>& es, const Vec& lam) {
  return es.eigenvectors() * lam.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
}

}  // namespace

bool same_bundle(const BundleSpec& a, const BundleSpec& b) {
  if (&a == &b) return true;
  return a.rank == b.rank && a.geometry == b.geometry && a.degrees == b.degrees &&
         max_abs(a.mult_one - b.mult_one) == 0.0 && max_abs(a.mult_tau - b.mult_tau) == 0.0 &&
         std::abs(a.twist.epsilon - b.twist.epsilon) <= 1e-14;
}

MetricState MetricState::from_relative(BundlePtr bundle, MatrixField relative) {
  if (!bundle) throw Error(ErrorCode::BundleMismatch, "metric without a bundle");
  if (relative.rows() != bundle->rank || relative.cols() != bundle->rank || !(relative.geometry() == bundle->geometry)) {
    throw Error(ErrorCode::ShapeMismatch, "metric field does not match the bundle");
  }
  const double defect = relative_hermitian_defect(relative);
  if (!(defect <= kHermTol)) {
    throw Error(ErrorCode::NotHermitian, "metric matrices are not Hermitian (defect " + std::to_string(defect) + ")");
  }
  MetricState h;
  h.bundle_ = std::move(bundle);
  h.relative_ = symmetrized(relative);
  h.relative_.set_covariance(Covariance::Endomorphism);
  const auto& g = h.relative_.geometry();
  const int r = h.bundle_->rank;
  h.exponent_ = MatrixField(g, r, r);
  h.sqrt_ = MatrixField(g, r, r);
  h.inv_sqrt_ = MatrixField(g, r, r);
  std::vector<double> lo(g.size()), hi(g.size());
  for_each_point(g.size(), [&](std::size_t p) {
    Eigen::SelfAdjointEigenSolver<Mat> es(h.relative_.at(p));
    const Vec lam = es.eigenvalues();
    lo[p] = lam.minCoeff();
    hi[p] = lam.maxCoeff();
    if (!(lo[p] > kMinEig) || !std::isfinite(hi[p])) return;
    h.exponent_.set(p, apply_spectrum(es, lam.array().log().matrix()));
    h.sqrt_.set(p, apply_spectrum(es, lam.array().sqrt().matrix()));
    h.inv_sqrt_.set(p, apply_spectrum(es, lam.array().rsqrt().matrix()));
  });
  h.min_eig_ = *std::ranges::min_element(lo);
  h.max_eig_ = *std::ranges::max_element(hi);
  if (!(h.min_eig_ > kMinEig) || !std::isfinite(h.max_eig_)) {
    throw Error(ErrorCode::DegenerateMetric, "minimum eigenvalue " + std::to_string(h.min_eig_));
  }
  const double seam = seam_residual(h.relative_, *h.bundle_);
  if (!(seam < kSeamTol)) {
    throw Error(ErrorCode::SeamViolation, "metric is not seam compatible (residual " + std::to_string(seam) + ")");
  }
  return h;
}

MetricState MetricState::from_exponent(BundlePtr bundle, const MatrixField& exponent) {
  if (relative_hermitian_defect(exponent) > kHermTol) throw Error(ErrorCode::NotHermitian, "exponent is not Hermitian");
  return from_relative(std::move(bundle), hermitian_function(exponent, [](double x) { return std::exp(x); }));
}

MetricState MetricState::reference(BundlePtr bundle) {
  const auto& g = bundle->geometry;
  const int r = bundle->rank;
  return from_relative(std::move(bundle), MatrixField::identity(g, r));
}

MetricState MetricState::conformal(const MetricState& h, const ScalarField& u) {
  ScalarField e(u.geometry());
  for (std::size_t p = 0; p < e.values().size(); ++p) e[p] = std::exp(u[p].real());
  return from_relative(h.bundle_, e * h.relative_);
}

MatrixField MetricState::matrix() const {
  const auto& g = geometry();
  return MatrixField::generate(
      g, rank(), rank(),
      [&](std::size_t p) { return Mat(bundle_->reference_metric(g.point(p)) * relative_.at(p)); }, kFunction,
      Covariance::Frame);
}

double metric_seam_residual(const MetricState& h) {
  const auto& b = h.bundle();
  const auto& g = h.geometry();
  double worst = 0.0;
  // F is stored periodically, so H(z+λ) = H_ref(z+λ)·F(z).
  for (std::size_t p = 0; p < g.size(); ++p) {
    const cplx z = g.point(p);
    const Mat f = h.relative().at(p);
    const Mat hz = b.reference_metric(z) * f;
    for (Generator gen : {Generator::One, Generator::Tau}) {
      const cplx lambda = gen == Generator::One ? cplx{1.0} : g.tau();
      const Mat shifted = b.reference_metric(z + lambda) * f;
      const Mat ai = b.multiplier(gen, z).inverse();
      const Mat transported = ai.adjoint() * hz * ai;
      const double scale = std::max(max_abs(shifted), max_abs(transported));
      worst = std::max(worst, max_abs(shifted - transported) / std::max(scale, 1e-300));
    }
  }
  return worst;
}

HermitianFormField HermitianFormField::from_relative(BundlePtr bundle, MatrixField relative) {
  if (relative.rows() != bundle->rank || relative.cols() != bundle->rank) {
    throw Error(ErrorCode::ShapeMismatch, "form field does not match the bundle");
  }
  if (relative_hermitian_defect(relative) > kFormHermTol) throw Error(ErrorCode::NotHermitian, "form is not Hermitian");
  HermitianFormField v;
  v.bundle_ = std::move(bundle);
  v.relative_ = symmetrized(relative);
  return v;
}

HermitianFormField HermitianFormField::from_metric(const MetricState& h) {
  HermitianFormField v;
  v.bundle_ = h.bundle_ptr();
  v.relative_ = h.relative();
  return v;
}

HermitianFormField& HermitianFormField::operator+=(const HermitianFormField& o) {
  require_same(*bundle_, *o.bundle_);
  relative_ += o.relative_;
  return *this;
}

HermitianFormField& HermitianFormField::operator*=(double a) {
  relative_ *= a;
  return *this;
}

MatrixField endo_from_form(const MetricState& h, const HermitianFormField& v) {
  require_same(h.bundle(), v.bundle());
  return inverse(h.relative()) * v.relative();
}

MatrixField endo_from_form(const MetricState& h, const MetricState& k) {
  require_same(h.bundle(), k.bundle());
  return inverse(h.relative()) * k.relative();
}

HermitianFormField form_from_endo(const MetricState& h, const MatrixField& f) {
  MatrixField g = h.relative() * f;
  if (relative_hermitian_defect(g) > kFormHermTol) throw Error(ErrorCode::NotHermitian, "endomorphism is not h-Hermitian");
  return HermitianFormField::from_relative(h.bundle_ptr(), std::move(g));
}

MetricState metric_from_endo(const MetricState& h, const MatrixField& f) {
  return MetricState::from_relative(h.bundle_ptr(), form_from_endo(h, f).relative());
}

MatrixField functional_calculus(const MetricState& h, const MatrixField& f, SpectralFunction fn, double sigma) {
  if (relative_hermitian_defect(h.relative() * f) > kFormHermTol) {
    throw Error(ErrorCode::NotHermitian, "functional calculus needs an h-Hermitian endomorphism");
  }
  const auto& g = h.geometry();
  const int r = h.rank();
  MatrixField out(g, r, r);
  std::atomic<bool> bad{false};
  for_each_point(g.size(), [&](std::size_t p) {
    const Mat s = h.sqrt_relative().at(p);
    const Mat si = h.inv_sqrt_relative().at(p);
    Mat x = s * f.at(p) * si;
    x = 0.5 * (x + x.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<Mat> es(x);
    Vec lam = es.eigenvalues();
    switch (fn) {
      case SpectralFunction::Exp: lam = lam.array().exp().matrix(); break;
      case SpectralFunction::Log:
      case SpectralFunction::Power:
        if (!(lam.minCoeff() > 0.0)) {
          bad = true;
          return;
        }
        if (fn == SpectralFunction::Log) lam = lam.array().log().matrix();
        else lam = lam.array().pow(sigma).matrix();
        break;
    }
    out.set(p, si * apply_spectrum(es, lam) * s);
  });
  if (bad) throw Error(ErrorCode::SpectrumOutOfDomain, "non-positive eigenvalue");
  return out;
}

std::vector<Vec> hermitian_eigenvalues(const MetricState& h, const MatrixField& f) {
  std::vector<Vec> out(h.geometry().size());
  for_each_point(out.size(), [&](std::size_t p) {
    Mat x = h.sqrt_relative().at(p) * f.at(p) * h.inv_sqrt_relative().at(p);
    x = 0.5 * (x + x.adjoint()).eval();
    out[p] = Eigen::SelfAdjointEigenSolver<Mat>(x, Eigen::EigenvaluesOnly).eigenvalues();
  });
  return out;
}

MatrixField h_adjoint(const MetricState& h, const MatrixField& f) {
  MatrixField out = inverse(h.relative()) * f.adjoint() * h.relative();
  out.set_bidegree(Bidegree{f.bidegree().q, f.bidegree().p});
  return out;
}

HermitianFormField gauge_act(const MatrixField& a, const HermitianFormField& v) {
  (void)inverse(a);
  return HermitianFormField::from_relative(v.bundle_ptr(), a.adjoint() * v.relative() * a);
}

MetricState gauge_act(const MatrixField& a, const MetricState& h) {
  (void)inverse(a);
  return MetricState::from_relative(h.bundle_ptr(), a.adjoint() * h.relative() * a);
}

MatrixField gauge_between(const MetricState& h, const MetricState& k) {
  require_same(h.bundle(), k.bundle());
  const int r = h.rank();
  return MatrixField::generate(h.geometry(), r, r, [&](std::size_t p) {
    const Mat lh = Eigen::LLT<Mat>(h.relative().at(p)).matrixL();
    const Mat lk = Eigen::LLT<Mat>(k.relative().at(p)).matrixL();
    return Mat(lk.adjoint().inverse() * lh.adjoint());
  });
}

double inner_product(const MetricState& h, const HermitianFormField& v, const HermitianFormField& w) {
  require_same(h.bundle(), v.bundle());
  require_same(h.bundle(), w.bundle());
  const MatrixField fi = inverse(h.relative());
  const ScalarField tr = (fi * v.relative() * fi * w.relative()).trace();
  return integrate(tr).real();
}

MatrixField random_hermitian_field(const BundleSpec& bundle, std::uint64_t seed, double amplitude, int modes) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  const int r = bundle.rank;
  const auto& g = bundle.geometry;
  std::vector<std::tuple<int, int, Mat>> terms;
  for (int m = -modes; m <= modes; ++m)
    for (int n = -modes; n <= modes; ++n) {
      Mat c(r, r);
      for (int a = 0; a < r; ++a)
        for (int b = 0; b < r; ++b) c(a, b) = cplx(normal(rng), normal(rng));
      terms.emplace_back(m, n, c / (1.0 + m * m + n * n));
    }
  MatrixField raw = MatrixField::generate(g, r, r, [&](std::size_t p) {
    Mat acc = Mat::Zero(r, r);
    for (const auto& [m, n, c] : terms) acc += std::polar(1.0, 2.0 * kPi * (m * g.s(p) + n * g.t(p))) * c;
    return Mat(0.5 * (acc + acc.adjoint()));
  }, kFunction, Covariance::Endomorphism, Exec::Serial);
  MatrixField out = project_covariant(raw, bundle);
  out = symmetrized(out);
  const double sup = out.sup_norm();
  if (sup > 0.0) out *= amplitude / sup;
  return out;
}

namespace {

MetricPath finish_path(PathKind kind, std::vector<MetricState> samples, std::vector<MatrixField> tangents) {
  MetricPath path;
  path.kind = kind;
  path.samples = std::move(samples);
  path.tangents = std::move(tangents);
  return path;
}

void require_nodes(int nodes) {
  if (nodes < 3 || nodes % 2 == 0) throw Error(ErrorCode::BadField, "path node count must be odd and at least 3");
}

// Y = log(F_h^{-1/2} F_k F_h^{-1/2}), Hermitian in the flat sense.
MatrixField geodesic_generator(const MetricState& h, const MetricState& k) {
  require_same(h.bundle(), k.bundle());
  const MatrixField x = h.inv_sqrt_relative() * k.relative() * h.inv_sqrt_relative();
  return hermitian_function(x, [](double v) { return std::log(v); });
}

MetricState geodesic_sample(const MetricState& h, const MatrixField& y, double t) {
  const MatrixField e = hermitian_function(y, [t](double v) { return std::exp(t * v); });
  return MetricState::from_relative(h.bundle_ptr(), h.sqrt_relative() * e * h.sqrt_relative());
}

}  // namespace

MetricState geodesic_point(const MetricState& h, const MetricState& k, double t) {
  return geodesic_sample(h, geodesic_generator(h, k), t);
}

MetricPath geodesic_path(const MetricState& h, const MetricState& k, int nodes) {
  require_nodes(nodes);
  const MatrixField y = geodesic_generator(h, k);
  const MatrixField s = h.inv_sqrt_relative() * y * h.sqrt_relative();
  std::vector<MetricState> samples;
  std::vector<MatrixField> tangents;
  for (int i = 0; i < nodes; ++i) {
    const double t = static_cast<double>(i) / (nodes - 1);
    if (i == 0) samples.push_back(h);
    else if (i == nodes - 1) samples.push_back(k);
    else samples.push_back(geodesic_sample(h, y, t));
    tangents.push_back(s);
  }
  return finish_path(PathKind::Geodesic, std::move(samples), std::move(tangents));
}

MetricPath linear_path(const MetricState& h, const MetricState& k, int nodes) {
  require_nodes(nodes);
  require_same(h.bundle(), k.bundle());
  const MatrixField diff = k.relative() - h.relative();
  std::vector<MetricState> samples;
  std::vector<MatrixField> tangents;
  for (int i = 0; i < nodes; ++i) {
    const double t = static_cast<double>(i) / (nodes - 1);
    if (i == 0) samples.push_back(h);
    else if (i == nodes - 1) samples.push_back(k);
    else samples.push_back(MetricState::from_relative(h.bundle_ptr(), (1.0 - t) * h.relative() + t * k.relative()));
    tangents.push_back(inverse(samples.back().relative()) * diff);
  }
  return finish_path(PathKind::Linear, std::move(samples), std::move(tangents));
}

MetricPath custom_path(std::vector<MetricState> samples, double t_end) {
  const int nodes = static_cast<int>(samples.size());
  require_nodes(nodes);
  const double dt = t_end / (nodes - 1);
  std::vector<MatrixField> tangents;
  for (int i = 0; i < nodes; ++i) {
    MatrixField d;
    if (i == 0) {
      d = -3.0 * samples[0].relative() + 4.0 * samples[1].relative() - samples[2].relative();
    } else if (i == nodes - 1) {
      d = 3.0 * samples[i].relative() - 4.0 * samples[i - 1].relative() + samples[i - 2].relative();
    } else {
      d = samples[i + 1].relative() - samples[i - 1].relative();
    }
    d *= 1.0 / (2.0 * dt);
    tangents.push_back(inverse(samples[i].relative()) * d);
  }
  MetricPath p = finish_path(PathKind::Custom, std::move(samples), std::move(tangents));
  p.t_end = t_end;
  return p;
}

MetricPath reverse(const MetricPath& path) {
  MetricPath out = path;
  std::ranges::reverse(out.samples);
  std::ranges::reverse(out.tangents);
  for (auto& t : out.tangents) t *= -1.0;
  return out;
}

MetricPath concatenate(const MetricPath& a, const MetricPath& b) {
  if (std::abs(a.spacing() - b.spacing()) > 1e-12 * a.spacing()) {
    throw Error(ErrorCode::ShapeMismatch, "concatenated paths need the same node spacing");
  }
  if (sup_distance(a.end().relative(), b.start().relative()) > 1e-10 * std::max(1.0, a.end().relative().sup_norm())) {
    throw Error(ErrorCode::ShapeMismatch, "paths do not join");
  }
  MetricPath out;
  out.kind = PathKind::Custom;
  out.t_end = a.t_end + b.t_end;
  out.samples = a.samples;
  out.tangents = a.tangents;
  // The tangent jumps at the joint; Simpson panels meet there, so the
  // average of the one-sided values reproduces the sum of both integrals.
  out.tangents.back() = 0.5 * (a.tangents.back() + b.tangents.front());
  out.samples.insert(out.samples.end(), b.samples.begin() + 1, b.samples.end());
  out.tangents.insert(out.tangents.end(), b.tangents.begin() + 1, b.tangents.end());
  return out;
}

}  // namespace twistflow

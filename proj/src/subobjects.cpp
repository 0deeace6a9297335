#include "twistflow/subobjects.hpp"

#include <algorithm>
#include <cmath>

namespace twistflow {
namespace {

constexpr double kInjectiveTol = 1e-10;
constexpr double kSlopeTol = 1e-8;

MatrixField constant_field(const TorusGeometry& g, const Mat& m, Covariance cov = Covariance::Morphism) {
  return MatrixField::constant(g, m, kFunction, cov);
}

BundlePtr with_deformation(const BundlePtr& base, MatrixField deformation) {
  auto copy = std::make_shared<BundleSpec>(*base);
  deformation.set_bidegree(kForm01);
  deformation.set_covariance(Covariance::Endomorphism);
  copy->deformation = std::move(deformation);
  copy->declared_subbundles.clear();
  return copy;
}

MatrixField as_form(MatrixField m, Bidegree b) {
  m.set_bidegree(b);
  return m;
}

}  // namespace

SplitStructure induced_structures(const BundleSpec& bundle, const InclusionSpec& incl, const MetricState& h) {
  if (!same_bundle(bundle, h.bundle())) throw Error(ErrorCode::BundleMismatch, "metric belongs to " + h.bundle().name);
  const auto& g = bundle.geometry;
  const MatrixField& iota = incl.inclusion;
  if (iota.rows() != bundle.rank || iota.cols() != incl.sub->rank) {
    throw Error(ErrorCode::ShapeMismatch, "inclusion shape does not match the bundles");
  }
  for (std::size_t p = 0; p < g.size(); ++p) {
    Eigen::JacobiSVD<Mat> svd(iota.at(p));
    if (svd.singularValues().minCoeff() < kInjectiveTol) {
      throw Error(ErrorCode::NotInjective, "inclusion drops rank at grid point " + std::to_string(p));
    }
  }
  const MatrixField& f = h.relative();
  const MatrixField pmap = constant_field(g, incl.quotient_map);
  const MatrixField lift = constant_field(g, incl.quotient_lift);

  MatrixField fs = iota.adjoint() * f * iota;
  MatrixField pi = inverse(fs) * iota.adjoint() * f;
  MatrixField phi = lift - iota * pi * lift;
  MatrixField fq = phi.adjoint() * f * phi;

  SplitStructure split;
  split.inclusion = iota;
  split.projection_to_sub = pi;
  split.splitting_from_quotient = phi;

  // Induced ∂̄-operators: ∂̄_S = π∘∂̄_E∘ι and ∂̄_Q = p∘∂̄_E∘φ.
  const bool deformed = bundle.has_deformation();
  auto dbar_e = [&](const MatrixField& m) {
    MatrixField out = derivative(m, Direction::Antiholomorphic);
    if (deformed) out += bundle.deformation * m;
    return out;
  };
  split.sub_bundle = with_deformation(incl.sub, pi * dbar_e(iota));
  split.quotient_bundle = with_deformation(incl.quotient, pmap * dbar_e(phi));
  fs.set_covariance(Covariance::Endomorphism);
  fq.set_covariance(Covariance::Endomorphism);
  split.sub_metric = MetricState::from_relative(split.sub_bundle, fs);
  split.quotient_metric = MetricState::from_relative(split.quotient_bundle, fq);

  const MatrixField gamma = relative_connection(bundle, h);
  split.second_form_A = pmap * (derivative(iota, Direction::Holomorphic) + gamma * iota);
  split.second_form_C = pi * dbar_e(phi);
  return split;
}

MatrixField sub_projector(const SplitStructure& split) {
  MatrixField p = split.inclusion * split.projection_to_sub;
  p.set_covariance(Covariance::Endomorphism);
  return p;
}

MatrixField c_adjoint(const SplitStructure& split) {
  return inverse(split.quotient_metric.relative()) * split.second_form_C.adjoint() * split.sub_metric.relative();
}

double c_norm_squared(const SplitStructure& split) {
  const MatrixField cc = split.second_form_C * c_adjoint(split);
  return 2.0 * integrate(as_form(cc, kFunction).trace()).real();
}

double gauss_codazzi_residual(const BundleSpec& bundle, const InclusionSpec& incl, const MetricState& h) {
  const SplitStructure split = induced_structures(bundle, incl, h);
  const int r = bundle.rank;
  const auto& g = bundle.geometry;

  const MatrixField re = curvature(bundle, h).value;
  const MatrixField rs = curvature(*split.sub_bundle, split.sub_metric).value;
  const MatrixField rq = curvature(*split.quotient_bundle, split.quotient_metric).value;
  const MatrixField gs = relative_connection(*split.sub_bundle, split.sub_metric);
  const MatrixField gq = relative_connection(*split.quotient_bundle, split.quotient_metric);
  const MatrixField& as = split.sub_bundle->deformation;
  const MatrixField& aq = split.quotient_bundle->deformation;
  const MatrixField& c = split.second_form_C;
  const MatrixField cs = c_adjoint(split);

  // dz∧dz̄ coefficients of the block curvature in the frame [ι φ].
  const MatrixField tl = rs + as_form(c * cs, kForm11);
  const MatrixField tr = derivative(c, Direction::Holomorphic) + as_form(gs * c, kForm11) - as_form(c * gq, kForm11);
  // derivative() already carries the dz̄∧dz sign, so it is negated here.
  const MatrixField bl = -1.0 * derivative(cs, Direction::Antiholomorphic) + as_form(aq * cs, kForm11) -
                         as_form(cs * as, kForm11);
  const MatrixField br = rq - as_form(cs * c, kForm11);

  double worst = 0.0;
  for (std::size_t p = 0; p < g.size(); ++p) {
    Mat t(r, r);
    t << split.inclusion.at(p), split.splitting_from_quotient.at(p);
    const Mat direct = t.inverse() * re.at(p) * t;
    Mat blocks(r, r);
    blocks << tl.at(p), tr.at(p), bl.at(p), br.at(p);
    worst = std::max(worst, max_abs(direct - blocks));
  }
  return worst;
}

std::string to_string(StabilityKind kind) {
  switch (kind) {
    case StabilityKind::StableAmongWitnesses: return "stable-among-witnesses";
    case StabilityKind::StrictlySemistableWitnessed: return "strictly-semistable-witnessed";
    case StabilityKind::UnstableWitnessed: return "unstable-witnessed";
  }
  return "unknown";
}

StabilityVerdict slope_verdict(const BundleSpec& bundle, const MetricState& h) {
  StabilityVerdict v;
  v.slope = bundle_report(bundle, h).slope;
  if (bundle.rank == 1) return v;
  if (bundle.declared_subbundles.empty()) throw Error(ErrorCode::NoWitnesses, bundle.name + " declares no subbundles");
  bool equal = false;
  bool larger = false;
  for (const auto& incl : bundle.declared_subbundles) {
    const SplitStructure split = induced_structures(bundle, incl, h);
    WitnessSlope w;
    w.name = incl.sub->name;
    w.rank = incl.sub->rank;
    w.degree = bundle_report(*split.sub_bundle, split.sub_metric).degree;
    w.slope = w.degree / w.rank;
    w.quotient_slope = bundle_report(*split.quotient_bundle, split.quotient_metric).slope;
    if (w.slope > v.slope + kSlopeTol) larger = true;
    else if (std::abs(w.slope - v.slope) <= kSlopeTol) equal = true;
    v.witnesses.push_back(w);
  }
  if (larger) v.kind = StabilityKind::UnstableWitnessed;
  else if (equal) v.kind = StabilityKind::StrictlySemistableWitnessed;
  return v;
}

WeakHoloResidual weakly_holo_residual(const BundleSpec& bundle, const MetricState& h, const MatrixField& proj) {
  if (proj.rows() != bundle.rank || proj.cols() != bundle.rank) throw Error(ErrorCode::ShapeMismatch, "projector rank");
  const int r = bundle.rank;
  WeakHoloResidual res;
  res.adjoint = sup_distance(proj, h_adjoint(h, proj));
  res.idempotent = sup_distance(proj, proj * proj);
  MatrixField dbar = derivative(proj, Direction::Antiholomorphic);
  if (bundle.has_deformation()) dbar += commutator(bundle.deformation, proj);
  const MatrixField complement = MatrixField::identity(bundle.geometry, r) - proj;
  res.holomorphic = (complement * dbar).sup_norm();
  return res;
}

}  // namespace twistflow

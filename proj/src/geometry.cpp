#include "twistflow/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include <fftw3.h>

namespace twistflow {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonPositiveModulus: return "NonPositiveModulus";
    case ErrorCode::BadGrid: return "BadGrid";
    case ErrorCode::BidegreeOverflow: return "BidegreeOverflow";
    case ErrorCode::WrongBidegree: return "WrongBidegree";
    case ErrorCode::NonZeroMean: return "NonZeroMean";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::UnsupportedParams: return "UnsupportedParams";
    case ErrorCode::TwistMismatch: return "TwistMismatch";
    case ErrorCode::BundleMismatch: return "BundleMismatch";
    case ErrorCode::NotHermitian: return "NotHermitian";
    case ErrorCode::DegenerateMetric: return "DegenerateMetric";
    case ErrorCode::SeamViolation: return "SeamViolation";
    case ErrorCode::SpectrumOutOfDomain: return "SpectrumOutOfDomain";
    case ErrorCode::Singular: return "Singular";
    case ErrorCode::BadDegree: return "BadDegree";
    case ErrorCode::NotWeakHE: return "NotWeakHE";
    case ErrorCode::NotInjective: return "NotInjective";
    case ErrorCode::NoWitnesses: return "NoWitnesses";
    case ErrorCode::SpectralGapTooSmall: return "SpectralGapTooSmall";
    case ErrorCode::StepRejected: return "StepRejected";
    case ErrorCode::StallDetected: return "StallDetected";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnknownPreset: return "UnknownPreset";
    case ErrorCode::BadField: return "BadField";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

TorusGeometry make_torus(cplx tau, int grid_n) {
  if (!(tau.imag() > 0.0)) throw Error(ErrorCode::NonPositiveModulus, "Im(tau) must be positive");
  if (grid_n < 8 || grid_n % 2 != 0) {
    throw Error(ErrorCode::BadGrid, "grid_n must be even and at least 8, got " + std::to_string(grid_n));
  }
  TorusGeometry g;
  g.tau_ = tau;
  g.n_ = grid_n;
  return g;
}

ScalarField::ScalarField(const TorusGeometry& geom, std::vector<cplx> values, Bidegree bidegree)
    : geom_(geom), bidegree_(bidegree), values_(std::move(values)) {
  if (values_.size() != geom_.size()) throw Error(ErrorCode::ShapeMismatch, "sample count does not match grid");
}

double ScalarField::sup_norm() const {
  double m = 0.0;
  for (const auto& v : values_) m = std::max(m, std::abs(v));
  return m;
}

ScalarField& ScalarField::operator+=(const ScalarField& o) {
  if (o.values_.size() != values_.size()) throw Error(ErrorCode::ShapeMismatch, "field sizes differ");
  for (std::size_t p = 0; p < values_.size(); ++p) values_[p] += o.values_[p];
  return *this;
}

ScalarField& ScalarField::operator-=(const ScalarField& o) {
  if (o.values_.size() != values_.size()) throw Error(ErrorCode::ShapeMismatch, "field sizes differ");
  for (std::size_t p = 0; p < values_.size(); ++p) values_[p] -= o.values_[p];
  return *this;
}

ScalarField& ScalarField::operator*=(cplx a) {
  for (auto& v : values_) v *= a;
  return *this;
}

namespace spectral {
namespace {

struct Plans {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
};

// Plans are created once per grid size; fftw_execute_dft on distinct arrays
// is thread-safe, plan creation is not.
const Plans& plans_for(int n) {
  static std::mutex mutex;
  static std::map<int, Plans> cache;
  std::lock_guard lock(mutex);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  std::vector<cplx> scratch(static_cast<std::size_t>(n) * n);
  auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
  Plans p;
  p.forward = fftw_plan_dft_2d(n, n, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  p.backward = fftw_plan_dft_2d(n, n, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  return cache.emplace(n, p).first->second;
}

int wavenumber(int i, int n) { return i <= n / 2 ? i : i - n; }

void forward(int n, std::span<const cplx> in, std::vector<cplx>& out) {
  out.assign(in.begin(), in.end());
  auto* buf = reinterpret_cast<fftw_complex*>(out.data());
  fftw_execute_dft(plans_for(n).forward, buf, buf);
}

void backward(int n, std::vector<cplx>& spec, std::span<cplx> out) {
  auto* buf = reinterpret_cast<fftw_complex*>(spec.data());
  fftw_execute_dft(plans_for(n).backward, buf, buf);
  const double scale = 1.0 / (static_cast<double>(n) * n);
  for (std::size_t p = 0; p < spec.size(); ++p) out[p] = spec[p] * scale;
}

// Symbols of ∂_z and ∂_z̄; the Nyquist row/column has no symmetric partner
// and is dropped for first derivatives.
cplx first_symbol(const TorusGeometry& g, int m, int n, Direction d, bool keep_nyquist) {
  const int half = g.grid_n() / 2;
  const double ms = (!keep_nyquist && std::abs(m) == half) ? 0.0 : m;
  const double ns = (!keep_nyquist && std::abs(n) == half) ? 0.0 : n;
  const cplx ds = 2.0 * kPi * kI * ms;
  const cplx dt = 2.0 * kPi * kI * ns;
  const cplx tau = g.tau();
  const cplx taub = std::conj(tau);
  if (d == Direction::Holomorphic) return (taub * ds - dt) / (taub - tau);
  return (dt - tau * ds) / (taub - tau);
}

template <class SymbolFn>
void apply_symbol(const TorusGeometry& g, std::span<const cplx> in, std::span<cplx> out, SymbolFn&& symbol) {
  const int n = g.grid_n();
  std::vector<cplx> spec;
  forward(n, in, spec);
  for (int i = 0; i < n; ++i) {
    const int m = wavenumber(i, n);
    for (int k = 0; k < n; ++k) spec[static_cast<std::size_t>(i) * n + k] *= symbol(m, wavenumber(k, n));
  }
  backward(n, spec, out);
}

}  // namespace

double laplace_symbol(const TorusGeometry& g, int m, int n) {
  // iΛ∂̄∂ = −2∂_z∂_z̄ has symbol |τ·2πm − 2πn|² / (2 Im²τ).
  const cplx w = g.tau() * (2.0 * kPi * m) - 2.0 * kPi * n;
  return std::norm(w) / (2.0 * g.volume() * g.volume());
}

void derivative(const TorusGeometry& g, std::span<const cplx> in, std::span<cplx> out, Direction d) {
  apply_symbol(g, in, out, [&](int m, int n) { return first_symbol(g, m, n, d, false); });
}

void mixed_second(const TorusGeometry& g, std::span<const cplx> in, std::span<cplx> out) {
  apply_symbol(g, in, out, [&](int m, int n) {
    return first_symbol(g, m, n, Direction::Holomorphic, false) *
           first_symbol(g, m, n, Direction::Antiholomorphic, false);
  });
}

void inverse_laplace(const TorusGeometry& g, std::span<const cplx> in, std::span<cplx> out) {
  apply_symbol(g, in, out, [&](int m, int n) -> cplx {
    if (m == 0 && n == 0) return 0.0;
    return 1.0 / laplace_symbol(g, m, n);
  });
}

void resolvent(const TorusGeometry& g, double dt, std::span<const cplx> in, std::span<cplx> out) {
  apply_symbol(g, in, out, [&](int m, int n) -> cplx { return 1.0 / (1.0 + dt * laplace_symbol(g, m, n)); });
}

cplx mean(std::span<const cplx> plane) {
  cplx acc = 0.0;
  for (const auto& v : plane) acc += v;
  return acc / static_cast<double>(plane.size());
}

}  // namespace spectral

ScalarField derivative(const ScalarField& field, Direction direction) {
  Bidegree b = field.bidegree();
  double sign = 1.0;
  if (direction == Direction::Holomorphic) {
    if (b.p >= 1) throw Error(ErrorCode::BidegreeOverflow, "holomorphic derivative of a (1,q)-form");
    b.p += 1;
  } else {
    if (b.q >= 1) throw Error(ErrorCode::BidegreeOverflow, "antiholomorphic derivative of a (p,1)-form");
    b.q += 1;
    if (b.p == 1) sign = -1.0;  // dz̄∧dz = −dz∧dz̄
  }
  ScalarField out(field.geometry(), b);
  spectral::derivative(field.geometry(), field.values(), out.values(), direction);
  if (sign < 0) out *= -1.0;
  return out;
}

ScalarField hodge_lambda(const ScalarField& form) {
  if (form.bidegree() != kForm11) throw Error(ErrorCode::WrongBidegree, "hodge_lambda needs a (1,1)-form");
  ScalarField out = form;
  out *= cplx(0.0, -2.0);
  out.set_bidegree(kFunction);
  return out;
}

cplx integrate(const ScalarField& form) {
  const auto& g = form.geometry();
  const cplx avg = spectral::mean(form.values());
  if (form.bidegree() == kFunction) return avg * g.volume();
  if (form.bidegree() == kForm11) return cplx(0.0, -2.0) * avg * g.volume();
  throw Error(ErrorCode::WrongBidegree, "only (0,0) and (1,1) fields can be integrated");
}

ScalarField laplace_operator(const ScalarField& function) {
  if (function.bidegree() != kFunction) throw Error(ErrorCode::WrongBidegree, "laplace_operator needs a function");
  ScalarField out(function.geometry());
  spectral::mixed_second(function.geometry(), function.values(), out.values());
  out *= -2.0;
  return out;
}

ScalarField poisson_solve(const ScalarField& rhs, double tolerance) {
  if (rhs.bidegree() != kFunction) throw Error(ErrorCode::WrongBidegree, "poisson_solve needs a function");
  const cplx total = integrate(rhs);
  const double scale = std::max(1.0, rhs.sup_norm() * rhs.geometry().volume());
  if (std::abs(total) > tolerance * scale) {
    throw Error(ErrorCode::NonZeroMean, "right-hand side integrates to " + std::to_string(std::abs(total)));
  }
  ScalarField u(rhs.geometry());
  spectral::inverse_laplace(rhs.geometry(), rhs.values(), u.values());
  return u;
}

}  // namespace twistflow

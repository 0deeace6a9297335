#include "twistflow/matrix_field.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

namespace twistflow {
namespace {

void require_same_shape(const MatrixField& a, const MatrixField& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols() || !(a.geometry() == b.geometry())) {
    throw Error(ErrorCode::ShapeMismatch, "matrix fields have different shapes");
  }
}

Bidegree add_bidegrees(Bidegree a, Bidegree b) {
  Bidegree out{a.p + b.p, a.q + b.q};
  if (out.p > 1 || out.q > 1) throw Error(ErrorCode::BidegreeOverflow, "product leaves forms on a curve");
  return out;
}

Covariance combine(Covariance a, Covariance b) {
  if (a == Covariance::Frame || b == Covariance::Frame) return Covariance::Frame;
  if (a == Covariance::Morphism || b == Covariance::Morphism) return Covariance::Morphism;
  if (a == Covariance::Endomorphism || b == Covariance::Endomorphism) return Covariance::Endomorphism;
  return Covariance::Scalar;
}

}  // namespace

MatrixField::MatrixField(const TorusGeometry& geom, int rows, int cols, Bidegree bidegree, Covariance covariance)
    : geom_(geom), rows_(rows), cols_(cols), bidegree_(bidegree), covariance_(covariance),
      data_(static_cast<std::size_t>(rows) * cols * geom.size()) {}

MatrixField MatrixField::constant(const TorusGeometry& geom, const Mat& value, Bidegree bidegree,
                                  Covariance covariance) {
  MatrixField out(geom, static_cast<int>(value.rows()), static_cast<int>(value.cols()), bidegree, covariance);
  for (int a = 0; a < out.rows_; ++a)
    for (int b = 0; b < out.cols_; ++b) std::ranges::fill(out.plane(a, b), value(a, b));
  return out;
}

MatrixField MatrixField::identity(const TorusGeometry& geom, int rank) {
  return constant(geom, Mat::Identity(rank, rank));
}

MatrixField MatrixField::scalar(const ScalarField& f, int rank) {
  MatrixField out(f.geometry(), rank, rank, f.bidegree());
  for (int a = 0; a < rank; ++a) std::ranges::copy(f.values(), out.plane(a, a).begin());
  return out;
}

Mat MatrixField::at(std::size_t p) const {
  Mat m(rows_, cols_);
  for (int a = 0; a < rows_; ++a)
    for (int b = 0; b < cols_; ++b) m(a, b) = data_[plane_offset(a, b) + p];
  return m;
}

void MatrixField::set(std::size_t p, const Mat& m) {
  for (int a = 0; a < rows_; ++a)
    for (int b = 0; b < cols_; ++b) data_[plane_offset(a, b) + p] = m(a, b);
}

ScalarField MatrixField::entry_field(int a, int b) const {
  auto pl = plane(a, b);
  return ScalarField(geom_, std::vector<cplx>(pl.begin(), pl.end()), bidegree_);
}

ScalarField MatrixField::trace() const {
  if (rows_ != cols_) throw Error(ErrorCode::ShapeMismatch, "trace of a non-square field");
  ScalarField out(geom_, bidegree_);
  for (int a = 0; a < rows_; ++a) {
    auto pl = plane(a, a);
    for (std::size_t p = 0; p < points(); ++p) out[p] += pl[p];
  }
  return out;
}

double MatrixField::sup_norm() const {
  double m = 0.0;
  for (const auto& v : data_) m = std::max(m, std::abs(v));
  return m;
}

Mat MatrixField::mean() const {
  Mat m(rows_, cols_);
  for (int a = 0; a < rows_; ++a)
    for (int b = 0; b < cols_; ++b) m(a, b) = spectral::mean(plane(a, b));
  return m;
}

MatrixField MatrixField::adjoint() const {
  MatrixField out(geom_, cols_, rows_, Bidegree{bidegree_.q, bidegree_.p}, covariance_);
  for (int a = 0; a < rows_; ++a)
    for (int b = 0; b < cols_; ++b) {
      auto src = plane(a, b);
      auto dst = out.plane(b, a);
      for (std::size_t p = 0; p < points(); ++p) dst[p] = std::conj(src[p]);
    }
  return out;
}

MatrixField MatrixField::transpose() const {
  MatrixField out(geom_, cols_, rows_, bidegree_, covariance_);
  for (int a = 0; a < rows_; ++a)
    for (int b = 0; b < cols_; ++b) std::ranges::copy(plane(a, b), out.plane(b, a).begin());
  return out;
}

MatrixField& MatrixField::operator+=(const MatrixField& o) {
  require_same_shape(*this, o);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

MatrixField& MatrixField::operator-=(const MatrixField& o) {
  require_same_shape(*this, o);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

MatrixField& MatrixField::operator*=(cplx a) {
  for (auto& v : data_) v *= a;
  return *this;
}

MatrixField operator*(const MatrixField& a, const MatrixField& b) {
  if (a.cols() != b.rows() || !(a.geometry() == b.geometry())) {
    throw Error(ErrorCode::ShapeMismatch, "pointwise product of incompatible fields");
  }
  MatrixField out(a.geometry(), a.rows(), b.cols(), add_bidegrees(a.bidegree(), b.bidegree()),
                  combine(a.covariance(), b.covariance()));
  for_each_point(a.points(), [&](std::size_t p) {
    for (int i = 0; i < a.rows(); ++i)
      for (int j = 0; j < b.cols(); ++j) {
        cplx acc = 0.0;
        for (int k = 0; k < a.cols(); ++k) acc += a.entry(i, k, p) * b.entry(k, j, p);
        out.entry(i, j, p) = acc;
      }
  });
  return out;
}

MatrixField wedge(const MatrixField& a, const MatrixField& b) {
  MatrixField out = a * b;
  if (a.bidegree() == kForm01 && b.bidegree() == kForm10) out *= -1.0;
  return out;
}

MatrixField commutator(const MatrixField& a, const MatrixField& b) { return a * b - b * a; }

MatrixField operator*(const ScalarField& f, const MatrixField& m) {
  MatrixField out = m;
  out.set_bidegree(add_bidegrees(f.bidegree(), m.bidegree()));
  for (int a = 0; a < m.rows(); ++a)
    for (int b = 0; b < m.cols(); ++b) {
      auto pl = out.plane(a, b);
      for (std::size_t p = 0; p < m.points(); ++p) pl[p] *= f[p];
    }
  return out;
}

MatrixField inverse(const MatrixField& m, Exec exec) {
  if (m.rows() != m.cols()) throw Error(ErrorCode::ShapeMismatch, "inverse of a non-square field");
  MatrixField out(m.geometry(), m.rows(), m.cols(), m.bidegree(), m.covariance());
  std::atomic<bool> singular{false};
  for_each_point(m.points(), [&](std::size_t p) {
    Eigen::PartialPivLU<Mat> lu(m.at(p));
    const double scale = std::max(1.0, max_abs(m.at(p)));
    if (std::abs(lu.determinant()) < 1e-300 || lu.rcond() < 1e-14 * (1.0 / scale)) {
      singular = true;
      return;
    }
    out.set(p, lu.inverse());
  }, exec);
  if (singular) throw Error(ErrorCode::Singular, "field is not invertible at some grid point");
  return out;
}

MatrixField derivative(const MatrixField& m, Direction direction) {
  Bidegree b = m.bidegree();
  double sign = 1.0;
  if (direction == Direction::Holomorphic) {
    if (b.p >= 1) throw Error(ErrorCode::BidegreeOverflow, "holomorphic derivative of a (1,q)-form");
    b.p += 1;
  } else {
    if (b.q >= 1) throw Error(ErrorCode::BidegreeOverflow, "antiholomorphic derivative of a (p,1)-form");
    b.q += 1;
    if (b.p == 1) sign = -1.0;
  }
  MatrixField out(m.geometry(), m.rows(), m.cols(), b, m.covariance());
  const int planes = m.rows() * m.cols();
  const bool parallel = default_exec() == Exec::Parallel;
#pragma omp parallel for schedule(static) if (parallel)
  for (int idx = 0; idx < planes; ++idx) {
    const int a = idx / m.cols();
    const int c = idx % m.cols();
    spectral::derivative(m.geometry(), m.plane(a, c), out.plane(a, c), direction);
  }
  if (sign < 0) out *= -1.0;
  return out;
}

MatrixField hermitian_function(const MatrixField& herm, const std::function<double(double)>& fn, Exec exec) {
  MatrixField out(herm.geometry(), herm.rows(), herm.cols(), herm.bidegree(), herm.covariance());
  for_each_point(herm.points(), [&](std::size_t p) {
    Mat h = herm.at(p);
    h = 0.5 * (h + h.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<Mat> es(h);
    Vec lam = es.eigenvalues().unaryExpr(fn);
    out.set(p, es.eigenvectors() * lam.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint());
  }, exec);
  return out;
}

MatrixField map_points(const MatrixField& in, int rows, int cols, const std::function<Mat(const Mat&)>& fn,
                       Exec exec) {
  MatrixField out(in.geometry(), rows, cols, in.bidegree(), in.covariance());
  for_each_point(in.points(), [&](std::size_t p) { out.set(p, fn(in.at(p))); }, exec);
  return out;
}

double sup_distance(const MatrixField& a, const MatrixField& b) {
  require_same_shape(a, b);
  return (a - b).sup_norm();
}

double hermitian_defect(const MatrixField& m) {
  double d = 0.0;
  for (std::size_t p = 0; p < m.points(); ++p) {
    const Mat x = m.at(p);
    d = std::max(d, max_abs(x - x.adjoint()));
  }
  return d;
}

}  // namespace twistflow

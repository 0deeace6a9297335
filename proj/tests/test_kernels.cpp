#include "support.hpp"

using namespace twistflow;

namespace {

struct ExecGuard {
  Exec saved = default_exec();
  ~ExecGuard() { set_default_exec(saved); }
};

template <class Fn>
auto both(Fn&& fn) {
  ExecGuard guard;
  set_default_exec(Exec::Serial);
  auto serial = fn();
  set_default_exec(Exec::Parallel);
  auto parallel = fn();
  return std::pair{serial, parallel};
}

}  // namespace

TEST_CASE("pointwise kernels agree bitwise") {
  set_thread_limit(4);
  const auto g = torus(32);
  const auto b = make_heisenberg(g, 3, 1);
  const auto x = random_hermitian_field(*b, 9, 0.7);
  const auto f = hermitian_function(x, [](double v) { return std::exp(v); }, Exec::Serial);
  CHECK(sup_distance(f, hermitian_function(x, [](double v) { return std::exp(v); }, Exec::Parallel)) == 0.0);
  CHECK(sup_distance(inverse(f, Exec::Serial), inverse(f, Exec::Parallel)) == 0.0);
  const auto sq = [](const Mat& m) { return Mat(m * m); };
  CHECK(sup_distance(map_points(f, 3, 3, sq, Exec::Serial), map_points(f, 3, 3, sq, Exec::Parallel)) == 0.0);
}

TEST_CASE("pipelines agree across execution policies") {
  const auto g = torus(32);
  const auto b = make_atiyah_f2(g, 1.0);
  const auto [k_s, k_p] = both([&] {
    const auto h = MetricState::from_exponent(b, random_hermitian_field(*b, 4, 0.5));
    return mean_curvature(*b, h);
  });
  CHECK(sup_distance(k_s, k_p) == 0.0);

  const auto [d_s, d_p] = both([&] { return derivative(k_s, Direction::Holomorphic); });
  CHECK(sup_distance(d_s, d_p) == 0.0);

  const auto [f_s, f_p] = both([&] {
    FlowConfig cfg;
    cfg.t_final = 0.2;
    return run_flow(*b, MetricState::from_exponent(b, random_hermitian_field(*b, 4, 0.5)), cfg).final_metric.relative();
  });
  CHECK(sup_distance(f_s, f_p) < 1e-14);

  const auto [l_s, l_p] = both([&] {
    const auto h = MetricState::from_exponent(b, random_hermitian_field(*b, 1, 0.3));
    const auto k = MetricState::from_exponent(b, random_hermitian_field(*b, 2, 0.3));
    return lagrangian_closed(*b, h, k);
  });
  CHECK(l_s == doctest::Approx(l_p).epsilon(1e-14));
}

TEST_CASE("thread limit") {
  set_thread_limit(2);
  CHECK(thread_limit() == 2);
  set_thread_limit(0);
  CHECK(thread_limit() == 2);
}

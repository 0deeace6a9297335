#pragma once

#include <doctest.h>

#include <random>

#include "twistflow/flow.hpp"

namespace tf = twistflow;

inline tf::TorusGeometry torus(int n = 32, tf::cplx tau = {0.0, 1.0}) { return tf::make_torus(tau, n); }

inline tf::ScalarField cos_s(const tf::TorusGeometry& g, double amp = 1.0) {
  return tf::ScalarField::sample(g, [amp](double s, double) { return tf::cplx(amp * std::cos(2.0 * tf::kPi * s)); });
}

inline tf::ScalarField smooth_bump(const tf::TorusGeometry& g, double amp = 1.0) {
  return tf::ScalarField::sample(g, [amp](double s, double t) {
    return tf::cplx(amp * (std::cos(2.0 * tf::kPi * s) * std::sin(2.0 * tf::kPi * t) + 0.5 * std::sin(4.0 * tf::kPi * s)));
  });
}

inline double err(const tf::ScalarField& a, const tf::ScalarField& b) { return (a - b).sup_norm(); }

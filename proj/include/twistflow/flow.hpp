#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "twistflow/subobjects.hpp"

namespace twistflow {

/// Q₁(h, k) = log det f^{k,h}, pointwise.
ScalarField q1_field(const MetricState& h, const MetricState& k);

/// L(path) = ∫₀¹∫_X Tr((K_t − c)·f^{h_t,h_t'}) σ dt, with the K-term by Simpson
/// quadrature over the path nodes and the c-term in closed form through Q₁.
/// Zero at the start and decreasing along the heat flow.
double lagrangian_path(const BundleSpec& bundle, const MetricPath& path);

/// Same value along the geodesic from h0 to h, in closed form:
///   ∫Tr((K₀ − c)s)σ + 2∫Σ_ab |Y_ab|² Ψ(λ_a − λ_b) σ
/// where s = log f^{h0,h} has eigenvalues λ, Y is ∂̄_E s in an h0-orthonormal
/// eigenframe of s and Ψ(x) = (eˣ − x − 1)/x².
double lagrangian_closed(const BundleSpec& bundle, const MetricState& h0, const MetricState& h);

struct DerivativeCheck {
  double finite_difference = 0.0;
  double formula = 0.0;
};

/// Central difference of t ↦ L(h_0 → h_t) against ∫Tr((K_t − c) f^{h_t,h_t'})σ.
/// Geodesic and linear paths only.
DerivativeCheck lagrangian_derivative_check(const BundleSpec& bundle, const MetricPath& path, double t,
                                            double step = 1e-3);

namespace detail {
/// Closed form with K⁰(h0) supplied by the caller.
double lagrangian_closed_with(const BundleSpec& bundle, const MetricState& h0, const MatrixField& k0,
                              const MetricState& h);
}  // namespace detail

/// Sign of the second-fundamental-form pair in the decomposition across
/// 0 → S → E → Q → 0, fixed once by calibration on AtiyahF2.
inline constexpr double kCTermSign = 1.0;

struct LagrangianDecomposition {
  double total = 0.0;
  double sub = 0.0;
  double quotient = 0.0;
  double c_terms = 0.0;  ///< kCTermSign·(‖C_k‖² − ‖C_h‖²)
  /// Σ (c_S − c_E)∫log det f^{h_S,k_S}σ over S and Q
  double slope_terms = 0.0;
  double residual = 0.0;
};

LagrangianDecomposition lagrangian_decomposition(const BundleSpec& bundle, const InclusionSpec& incl,
                                                 const MetricState& h, const MetricState& k);

/// K⁰(h0) + iΛ∂̄_E(f^{-1}D₀^{1,0}f) + ε·log f. Throws SpectrumOutOfDomain
/// unless f is positive.
MatrixField perturbed_residual(const BundleSpec& bundle, const MetricState& h0, const MatrixField& f, double eps);

struct PerturbedSolution {
  MetricState h0;
  MatrixField f1;
};

/// h₁ = e^{φ}h with iΛ∂̄∂φ = −Tr K⁰(h)/r, h₀ = h₁·exp(K⁰(h₁)) and
/// f₁ = exp(−K⁰(h₁)); then L₁^{h₀}(f₁) = 0.
PerturbedSolution construct_perturbed_solution(const BundleSpec& bundle, const MetricState& h);

struct FlowConfig {
  double dt_initial = 1e-2;
  double dt_max = 0.5;
  double t_final = 1.0;
  double cfl_safety = 0.5;
  bool sl_normalize = false;
  int record_every = 1;
  /// Stop once m_K drops below this value (0 disables).
  double m_k_target = 0.0;
  /// Keep dt fixed at dt_initial (no growth, no stiffness cap).
  bool fixed_step = false;
  /// Reject steps that increase m_K, s_K or L.
  bool monotonicity_guard = true;
};

struct FlowRow {
  double t = 0.0;
  double m_k = 0.0;
  double s_k = 0.0;
  double lagrangian = 0.0;
  double det_residual = 0.0;
  double min_eig = 0.0;
  double max_eig = 0.0;
  double dt = 0.0;
};

struct FlowTrace {
  std::vector<FlowRow> rows;
  MetricState final_metric;
  double last_dt = 0.0;
  int rejected_steps = 0;
  std::string stop_reason;
};

/// One semi-implicit geometric Euler step of ∂_t h = −(K̂ − c·h):
/// Y = F^{1/2}(−dt(K − c))F^{-1/2}, Ỹ = (1 + dt·iΛ∂̄∂)^{-1}Y entrywise and
/// F_new = F^{1/2}exp(Ỹ)F^{1/2}. Positive and Hermitian by construction.
MetricState flow_step(const BundleSpec& bundle, const MetricState& h, double dt, bool sl_normalize = false);

/// Throws StallDetected when dt collapses below 1e-12.
FlowTrace run_flow(const BundleSpec& bundle, const MetricState& h0, const FlowConfig& cfg);

/// Indices of rows breaking monotonicity of m_K, s_K or L (tolerance
/// 1e-9·(1 + value)).
std::vector<std::size_t> trace_violations(const FlowTrace& trace);

/// h-orthogonal projector onto the eigenspaces of f^{h_ref,h} below the
/// largest gap of the mean spectrum. Throws SpectralGapTooSmall when that gap
/// falls below 1e-6 anywhere or the bundle has rank 1.
MatrixField extract_destabilizer(const MetricState& h, const BundleSpec& bundle);

/// Degree of the image of a weakly holomorphic projector:
/// (1/2π)(∫Tr(πK)σ − 2∫Tr(∂̄π (∂̄π)^*)σ).
double projector_degree(const BundleSpec& bundle, const MetricState& h, const MatrixField& proj);

/// Columns t,m_K,s_K,L,det_residual,min_eig,max_eig,dt. Throws IoError.
void write_trace_csv(const FlowTrace& trace, const std::filesystem::path& path);

}  // namespace twistflow

#include "twistflow/scenario.hpp"

#include <algorithm>
#include <fstream>

#include "twistflow/acceptance.hpp"

namespace twistflow {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& path, const std::string& why) {
  throw Error(ErrorCode::BadField, path + ": " + why);
}

const json* find(const json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

double number(const json& obj, const char* key, const std::string& path, double fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_number()) bad(path + key, "expected a number");
  return v->get<double>();
}

int integer(const json& obj, const char* key, const std::string& path, int fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_number_integer()) bad(path + key, "expected an integer");
  return v->get<int>();
}

bool boolean(const json& obj, const char* key, const std::string& path, bool fallback) {
  const json* v = find(obj, key);
  if (!v) return fallback;
  if (!v->is_boolean()) bad(path + key, "expected true or false");
  return v->get<bool>();
}

cplx complex_value(const json& v, const std::string& path) {
  if (v.is_number()) return {v.get<double>(), 0.0};
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) return {v[0].get<double>(), v[1].get<double>()};
  bad(path, "expected a number or a [re, im] pair");
}

void only_keys(const json& obj, std::initializer_list<const char*> keys, const std::string& path) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) bad(path + it.key(), "unknown field");
  }
}

PresetKind preset_kind(const std::string& name) {
  if (name == "line_bundle") return PresetKind::LineBundle;
  if (name == "direct_sum" || name == "dsum") return PresetKind::DirectSum;
  if (name == "extension") return PresetKind::Extension;
  if (name == "atiyah_f2") return PresetKind::AtiyahF2;
  if (name == "heisenberg") return PresetKind::Heisenberg;
  throw Error(ErrorCode::UnknownPreset, "preset: no preset named '" + name + "'");
}

PresetParams preset_params(const json& p) {
  if (!p.is_object()) bad("params", "expected an object");
  only_keys(p, {"d", "degrees", "d1", "d2", "beta", "r", "p"}, "params.");
  PresetParams out;
  out.d = integer(p, "d", "params.", 0);
  out.d1 = integer(p, "d1", "params.", 0);
  out.d2 = integer(p, "d2", "params.", 0);
  out.r = integer(p, "r", "params.", 2);
  out.p = integer(p, "p", "params.", 1);
  if (const json* b = find(p, "beta")) out.beta = complex_value(*b, "params.beta");
  if (const json* d = find(p, "degrees")) {
    if (!d->is_array()) bad("params.degrees", "expected an array of integers");
    for (std::size_t i = 0; i < d->size(); ++i) {
      if (!(*d)[i].is_number_integer()) bad("params.degrees[" + std::to_string(i) + "]", "expected an integer");
      out.degrees.push_back((*d)[i].get<int>());
    }
  }
  return out;
}

InitialMetricSpec metric_spec(const json& m, const std::string& path, InitialMetricSpec out) {
  if (m.is_string()) {
    out.kind = InitialMetricSpec::Kind::Reference;
    if (m.get<std::string>() != "reference") bad(path, "only \"reference\" may be given as a bare string");
    return out;
  }
  if (!m.is_object()) bad(path, "expected an object");
  only_keys(m, {"kind", "expression", "amplitude", "seed", "modes"}, path + ".");
  const json* k = find(m, "kind");
  if (!k || !k->is_string()) bad(path + ".kind", "expected reference, conformal or random");
  const std::string kind = k->get<std::string>();
  if (kind == "reference") out.kind = InitialMetricSpec::Kind::Reference;
  else if (kind == "conformal") out.kind = InitialMetricSpec::Kind::Conformal;
  else if (kind == "random") out.kind = InitialMetricSpec::Kind::Random;
  else bad(path + ".kind", "expected reference, conformal or random");
  if (const json* e = find(m, "expression")) {
    if (!e->is_string()) bad(path + ".expression", "expected a string");
    out.expression = e->get<std::string>();
  }
  out.amplitude = number(m, "amplitude", path + ".", out.amplitude);
  if (const json* s = find(m, "seed")) {
    if (!s->is_number_unsigned()) bad(path + ".seed", "expected a non-negative integer");
    out.seed = s->get<std::uint64_t>();
  }
  out.modes = integer(m, "modes", path + ".", out.modes);
  if (out.modes < 1) bad(path + ".modes", "must be at least 1");
  if (!(out.amplitude >= 0.0)) bad(path + ".amplitude", "must be non-negative");
  static const std::vector<std::string> ids{"cos_s", "cos_t", "cos_st", "bump", "random"};
  if (std::find(ids.begin(), ids.end(), out.expression) == ids.end()) bad(path + ".expression", "unknown expression id");
  return out;
}

FlowConfig flow_config(const json& f) {
  if (!f.is_object()) bad("flow", "expected an object");
  only_keys(f,
            {"dt_initial", "dt_max", "t_final", "cfl_safety", "sl_normalize", "record_every", "m_k_target", "fixed_step",
             "monotonicity_guard"},
            "flow.");
  FlowConfig c;
  c.dt_initial = number(f, "dt_initial", "flow.", c.dt_initial);
  c.dt_max = number(f, "dt_max", "flow.", c.dt_max);
  c.t_final = number(f, "t_final", "flow.", c.t_final);
  c.cfl_safety = number(f, "cfl_safety", "flow.", c.cfl_safety);
  c.sl_normalize = boolean(f, "sl_normalize", "flow.", c.sl_normalize);
  c.record_every = integer(f, "record_every", "flow.", c.record_every);
  c.m_k_target = number(f, "m_k_target", "flow.", c.m_k_target);
  c.fixed_step = boolean(f, "fixed_step", "flow.", c.fixed_step);
  c.monotonicity_guard = boolean(f, "monotonicity_guard", "flow.", c.monotonicity_guard);
  if (!(c.dt_initial > 0.0)) bad("flow.dt_initial", "must be positive");
  if (c.dt_max < c.dt_initial) bad("flow.dt_max", "must be at least dt_initial");
  if (!(c.t_final > 0.0)) bad("flow.t_final", "must be positive");
  if (!(c.cfl_safety > 0.0)) bad("flow.cfl_safety", "must be positive");
  if (c.record_every < 1) bad("flow.record_every", "must be at least 1");
  return c;
}

Action action_of(const std::string& s) {
  if (s == "validate") return Action::Validate;
  if (s == "report") return Action::Report;
  if (s == "lagrangian") return Action::Lagrangian;
  if (s == "flow") return Action::Flow;
  if (s == "suite") return Action::Suite;
  bad("action", "expected validate, report, lagrangian, flow or suite");
}

json pair(cplx z) { return json::array({z.real(), z.imag()}); }

json bundle_json(const BundleSpec& b) {
  std::vector<double> degrees(b.degrees.data(), b.degrees.data() + b.degrees.size());
  return {{"name", b.name},
          {"rank", b.rank},
          {"degrees", degrees},
          {"twist", {{"epsilon", pair(b.twist.epsilon)}, {"b_coeff", b.twist.b_coeff}}},
          {"analytic_degree", analytic_degree(b)},
          {"witnesses", b.declared_subbundles.size()}};
}

json validation_json(const BundleSpec& b, const MetricState& h) {
  const ValidationReport v = validate_twist(b);
  return {{"defect", v.defect},
          {"epsilon", pair(v.epsilon)},
          {"measured_epsilon", pair(v.measured_epsilon)},
          {"passed", v.passed},
          {"metric_seam_residual", metric_seam_residual(h)}};
}

json report_json(const BundleReport& r) {
  return {{"degree", r.degree},
          {"slope", r.slope},
          {"einstein_constant", r.einstein_constant},
          {"residual_sup", r.he_residual_sup},
          {"residual_l2", r.he_residual_l2}};
}

json verdict_json(const BundleSpec& b, const MetricState& h) {
  if (b.rank > 1 && b.declared_subbundles.empty()) return {{"kind", "no_witnesses"}};
  const StabilityVerdict v = slope_verdict(b, h);
  json w = json::array();
  for (const auto& s : v.witnesses) {
    w.push_back({{"name", s.name}, {"rank", s.rank}, {"degree", s.degree}, {"slope", s.slope}, {"quotient_slope", s.quotient_slope}});
  }
  return {{"kind", to_string(v.kind)}, {"slope", v.slope}, {"witnesses", w}};
}

json row_json(const FlowRow& r) {
  return {{"t", r.t},
          {"m_K", r.m_k},
          {"s_K", r.s_k},
          {"L", r.lagrangian},
          {"det_residual", r.det_residual},
          {"min_eig", r.min_eig},
          {"max_eig", r.max_eig},
          {"dt", r.dt}};
}

json destabilizer_json(const BundleSpec& b, const MetricState& h) {
  try {
    const MatrixField proj = extract_destabilizer(h, b);
    const WeakHoloResidual res = weakly_holo_residual(b, h, proj);
    const double rank = proj.trace()[0].real();
    const double degree = projector_degree(b, h, proj);
    return {{"rank", std::lround(rank)},
            {"degree", degree},
            {"slope", degree / std::round(rank)},
            {"residuals", {{"adjoint", res.adjoint}, {"idempotent", res.idempotent}, {"holomorphic", res.holomorphic}}}};
  } catch (const Error& e) {
    return {{"error", e.what()}};
  }
}

json flow_json(const BundleSpec& b, const FlowTrace& tr, const std::vector<std::size_t>& violations) {
  json out = {{"rows", tr.rows.size()},
              {"rejected_steps", tr.rejected_steps},
              {"stop_reason", tr.stop_reason},
              {"last_dt", tr.last_dt},
              {"initial", row_json(tr.rows.front())},
              {"final", row_json(tr.rows.back())},
              {"violations", violations}};
  const auto& last = tr.rows.back();
  if (b.rank > 1 && last.m_k > 1e-6) out["destabilizer"] = destabilizer_json(b, tr.final_metric);
  out["final_report"] = report_json(bundle_report(b, tr.final_metric));
  return out;
}

json lagrangian_json(const BundleSpec& b, const MetricState& h, const MetricState& k, int nodes) {
  const double closed = lagrangian_closed(b, h, k);
  const double geo = lagrangian_path(b, geodesic_path(h, k, nodes));
  const double lin = lagrangian_path(b, linear_path(h, k, nodes));
  const DerivativeCheck dc = lagrangian_derivative_check(b, geodesic_path(h, k, nodes), 0.5, 1e-4);
  json out = {{"closed", closed},
              {"geodesic_path", geo},
              {"linear_path", lin},
              {"path_independence", std::abs(geo - lin) / (1.0 + std::abs(geo))},
              {"closed_vs_path", std::abs(closed - geo) / (1.0 + std::abs(closed))},
              {"q1_mean", integrate(q1_field(k, h)).real() / b.geometry.volume()},
              {"derivative_check", {{"finite_difference", dc.finite_difference}, {"formula", dc.formula}}}};
  if (!b.declared_subbundles.empty()) {
    const auto d = lagrangian_decomposition(b, b.declared_subbundles[0], h, k);
    out["decomposition"] = {{"total", d.total},     {"sub", d.sub},
                            {"quotient", d.quotient}, {"c_terms", d.c_terms},
                            {"slope_terms", d.slope_terms}, {"residual", d.residual}};
  }
  return out;
}

}  // namespace

std::string to_string(Action action) {
  switch (action) {
    case Action::Validate: return "validate";
    case Action::Report: return "report";
    case Action::Lagrangian: return "lagrangian";
    case Action::Flow: return "flow";
    case Action::Suite: return "suite";
  }
  return "?";
}

ScenarioConfig parse_config(const json& doc, const std::string& default_name) {
  if (!doc.is_object()) throw Error(ErrorCode::ParseError, "config root must be a JSON object");
  only_keys(doc,
            {"name", "preset", "params", "tau", "grid_n", "b_coeff", "initial_metric", "action", "flow", "target_metric",
             "path_nodes", "output_dir"},
            "");
  ScenarioConfig cfg;
  cfg.source = doc;
  cfg.name = default_name;
  if (const json* n = find(doc, "name")) {
    if (!n->is_string() || n->get<std::string>().empty()) bad("name", "expected a non-empty string");
    cfg.name = n->get<std::string>();
  }
  const json* preset = find(doc, "preset");
  if (!preset) bad("preset", "missing");
  if (!preset->is_string()) bad("preset", "expected a string");
  cfg.preset = preset->get<std::string>();
  cfg.kind = preset_kind(cfg.preset);
  if (const json* p = find(doc, "params")) cfg.params = preset_params(*p);
  if (const json* t = find(doc, "tau")) cfg.tau = complex_value(*t, "tau");
  cfg.grid_n = integer(doc, "grid_n", "", cfg.grid_n);
  cfg.b_coeff = number(doc, "b_coeff", "", cfg.b_coeff);
  cfg.params.b_coeff = cfg.b_coeff;
  if (const json* m = find(doc, "initial_metric")) cfg.initial = metric_spec(*m, "initial_metric", cfg.initial);
  if (const json* m = find(doc, "target_metric")) cfg.target = metric_spec(*m, "target_metric", cfg.target);
  cfg.path_nodes = integer(doc, "path_nodes", "", cfg.path_nodes);
  if (cfg.path_nodes < 3 || cfg.path_nodes % 2 == 0) bad("path_nodes", "must be odd and at least 3");
  const json* a = find(doc, "action");
  if (!a) bad("action", "missing");
  if (!a->is_string()) bad("action", "expected a string");
  cfg.action = action_of(a->get<std::string>());
  if (const json* f = find(doc, "flow")) cfg.flow = flow_config(*f);
  if (const json* o = find(doc, "output_dir")) {
    if (!o->is_string()) bad("output_dir", "expected a path string");
    cfg.output_dir = o->get<std::string>();
  }
  // geometry and preset parameters are checked by constructing them
  try {
    (void)build_bundle(cfg);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::BadGrid) bad("grid_n", e.what());
    if (e.code() == ErrorCode::NonPositiveModulus) bad("tau", e.what());
    if (e.code() == ErrorCode::UnsupportedParams) bad("params", e.what());
    throw;
  }
  return cfg;
}

ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
  }
  ScenarioConfig cfg = parse_config(doc, path.stem().string());
  if (cfg.output_dir.is_relative()) cfg.output_dir = path.parent_path() / cfg.output_dir;
  return cfg;
}

ScalarField conformal_factor(const TorusGeometry& geom, const std::string& id, double amplitude, std::uint64_t seed,
                             int modes) {
  constexpr double w = 2.0 * kPi;
  ScalarField u;
  if (id == "cos_s") u = ScalarField::sample(geom, [](double s, double) { return cplx(std::cos(w * s)); });
  else if (id == "cos_t") u = ScalarField::sample(geom, [](double, double t) { return cplx(std::cos(w * t)); });
  else if (id == "cos_st") u = ScalarField::sample(geom, [](double s, double t) { return cplx(std::cos(w * s) * std::cos(w * t)); });
  else if (id == "bump")
    u = ScalarField::sample(geom, [](double s, double t) {
      return cplx(std::cos(w * s) * std::sin(w * t) + 0.5 * std::sin(2.0 * w * s));
    });
  else if (id == "random")
    u = random_hermitian_field(*make_line_bundle(geom, 0), seed, 1.0, modes).trace();
  else throw Error(ErrorCode::BadField, "expression: unknown id " + id);
  const double sup = u.sup_norm();
  for (auto& v : u.values()) v = cplx(v.real() * amplitude / sup, 0.0);
  return u;
}

BundlePtr build_bundle(const ScenarioConfig& cfg) {
  return make_preset(make_torus(cfg.tau, cfg.grid_n), cfg.kind, cfg.params);
}

MetricState build_metric(const BundlePtr& bundle, const InitialMetricSpec& spec) {
  switch (spec.kind) {
    case InitialMetricSpec::Kind::Reference: return MetricState::reference(bundle);
    case InitialMetricSpec::Kind::Conformal:
      return MetricState::conformal(MetricState::reference(bundle),
                                    conformal_factor(bundle->geometry, spec.expression, spec.amplitude, spec.seed, spec.modes));
    case InitialMetricSpec::Kind::Random:
      return MetricState::from_exponent(bundle, random_hermitian_field(*bundle, spec.seed, spec.amplitude, spec.modes));
  }
  return MetricState::reference(bundle);
}

ScenarioResult run_scenario(const ScenarioConfig& cfg) {
  ScenarioResult res;
  res.name = cfg.name;
  res.output_dir = cfg.output_dir;
  json& rep = res.report;
  rep["scenario"] = cfg.name;
  rep["action"] = to_string(cfg.action);
  rep["config"] = cfg.source;
  rep["errors"] = json::array();
  try {
    if (cfg.action == Action::Suite) {
      AcceptanceOptions opts;
      opts.grid_n = cfg.grid_n;
      const auto crit = run_acceptance(opts);
      rep["criteria"] = criteria_json(crit);
      return res;
    }
    const BundlePtr b = build_bundle(cfg);
    rep["bundle"] = bundle_json(*b);
    const MetricState h = build_metric(b, cfg.initial);
    rep["validation"] = validation_json(*b, h);
    if (!rep["validation"]["passed"].get<bool>()) rep["errors"].push_back({{"code", "TwistDefect"}, {"message", "cocycle defect above 1e-10"}});
    if (cfg.action == Action::Validate) return res;
    rep["report"] = report_json(bundle_report(*b, h));
    rep["stability"] = verdict_json(*b, h);
    if (cfg.action == Action::Lagrangian) {
      rep["lagrangian"] = lagrangian_json(*b, h, build_metric(b, cfg.target), cfg.path_nodes);
    } else if (cfg.action == Action::Flow) {
      FlowTrace tr = run_flow(*b, h, cfg.flow);
      const auto violations = trace_violations(tr);
      rep["flow"] = flow_json(*b, tr, violations);
      if (!violations.empty()) {
        res.exit_code = kExitInvariant;
        rep["errors"].push_back({{"code", "MonotonicityViolation"},
                                 {"message", std::to_string(violations.size()) + " trace rows break monotonicity"}});
      }
      res.trace = std::move(tr);
    }
  } catch (const Error& e) {
    res.exit_code = e.code() == ErrorCode::IoError ? kExitIo : kExitNumeric;
    rep["errors"].push_back({{"code", std::string(to_string(e.code()))}, {"message", e.what()}});
  }
  return res;
}

std::string render_report(const json& report) { return report.dump(2) + "\n"; }

void emit_reports(const std::vector<ScenarioResult>& results) {
  for (const auto& r : results) {
    const auto dir = r.output_dir / r.name;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string() + ": " + ec.message());
    std::ofstream out(dir / "report.json");
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + (dir / "report.json").string());
    out << render_report(r.report);
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + (dir / "report.json").string());
    if (r.trace) write_trace_csv(*r.trace, dir / "trace.csv");
  }
}

}  // namespace twistflow

// Copyright 2026 The qlqg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "qlqg/workbench.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "qlqg/errors.hpp"

namespace qlqg {

namespace fixtures {
extern const std::string_view kExampleSystem;
extern const std::string_view kExampleControl;
extern const std::string_view kExampleExpected;
}  // namespace fixtures

using nlohmann::json;

namespace {

constexpr double kPi = 3.14159265358979323846;

// ---- parsing ---------------------------------------------------------------

[[noreturn]] void field_error(const std::string& field, const std::string& what) {
  throw ValidationError(field + ": " + what);
}

const json& require(const json& doc, const std::string& key, const std::string& ctx) {
  if (!doc.is_object()) field_error(ctx, "expected an object");
  auto it = doc.find(key);
  if (it == doc.end()) field_error(ctx + "." + key, "missing field");
  return *it;
}

double parse_number(const json& v, const std::string& field) {
  if (!v.is_number()) field_error(field, "expected a number");
  return v.get<double>();
}

Matrix parse_matrix(const json& v, const std::string& field) {
  if (!v.is_array()) field_error(field, "expected a nested array (rows of numbers)");
  const auto rows = static_cast<Eigen::Index>(v.size());
  if (rows == 0) return Matrix(0, 0);
  if (!v[0].is_array()) field_error(field, "expected a nested array (rows of numbers)");
  const auto cols = static_cast<Eigen::Index>(v[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = v[static_cast<size_t>(i)];
    const std::string rf = field + "[" + std::to_string(i) + "]";
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      field_error(rf, "ragged row (expected " + std::to_string(cols) + " entries)");
    }
    for (Eigen::Index j = 0; j < cols; ++j) {
      m(i, j) = parse_number(row[static_cast<size_t>(j)], rf + "[" + std::to_string(j) + "]");
    }
  }
  return m;
}

Vector parse_vector(const json& v, const std::string& field) {
  if (!v.is_array()) field_error(field, "expected an array of numbers");
  Vector out(static_cast<Eigen::Index>(v.size()));
  for (size_t i = 0; i < v.size(); ++i) {
    out(static_cast<Eigen::Index>(i)) = parse_number(v[i], field + "[" + std::to_string(i) + "]");
  }
  return out;
}

SplitComplexMatrix parse_split(const json& v, const std::string& field, Eigen::Index rows,
                               Eigen::Index cols) {
  if (!v.is_object()) field_error(field, "expected an object with \"re\" and \"im\"");
  SplitComplexMatrix out;
  out.re = v.contains("re") ? parse_matrix(v["re"], field + ".re") : Matrix();
  out.im = v.contains("im") ? parse_matrix(v["im"], field + ".im") : Matrix();
  if (out.re.size() == 0 && out.im.size() == 0) {
    field_error(field, "needs at least one of \"re\" and \"im\"");
  }
  if (rows < 0) rows = out.re.size() ? out.re.rows() : out.im.rows();
  if (cols < 0) cols = out.re.size() ? out.re.cols() : out.im.cols();
  if (out.re.size() == 0) out.re = Matrix::Zero(rows, cols);
  if (out.im.size() == 0) out.im = Matrix::Zero(rows, cols);
  if (out.re.rows() != rows || out.re.cols() != cols || out.im.rows() != rows ||
      out.im.cols() != cols) {
    field_error(field, "re and im must both be " + std::to_string(rows) + " x " +
                           std::to_string(cols));
  }
  return out;
}

json parse_text(std::string_view text, const std::string& source) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    // Translate the byte offset into a line/column pair.
    size_t line = 1, col = 1;
    for (size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    std::ostringstream os;
    os << source << ":" << line << ":" << col << ": JSON parse error: " << e.what();
    throw ValidationError(os.str());
  }
}

json read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw IoError("cannot read " + path);
  return parse_text(buf.str(), path);
}

// ---- report helpers --------------------------------------------------------

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json labeled(const std::string& symbol, const std::string& units, const Matrix& m) {
  return json{{"symbol", symbol}, {"units", units}, {"value", matrix_json(m)}};
}

json labeled_split(const std::string& symbol, const SplitComplexMatrix& m) {
  return json{{"symbol", symbol},
              {"units", "dimensionless"},
              {"re", matrix_json(m.re)},
              {"im", matrix_json(m.im)}};
}

json hbar_scalar(double value, double hbar) {
  return json{{"value", value}, {"over_hbar", value / hbar}, {"units", "hbar"}};
}

json eig_json(const std::vector<std::complex<double>>& eigs) {
  json out = json::array();
  for (const auto& e : eigs) out.push_back(json::array({e.real(), e.imag()}));
  return out;
}

Table eig_table(const std::string& name, const std::vector<std::complex<double>>& eigs) {
  Table t{name, {"index", "re", "im"}, {}};
  for (size_t i = 0; i < eigs.size(); ++i) {
    t.rows.push_back({static_cast<double>(i), eigs[i].real(), eigs[i].imag()});
  }
  return t;
}

Table matrix_table(const std::string& name, const Matrix& m, double scale = 1.0) {
  Table t{name, {"row", "col", "value"}, {}};
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      t.rows.push_back({static_cast<double>(i), static_cast<double>(j), m(i, j) * scale});
    }
  }
  return t;
}

std::vector<std::complex<double>> eigs_of(const Matrix& m) { return eigenvalues(m); }

double purity_det(const Matrix& w, double hbar) { return (2.0 * w / hbar).determinant(); }

// Homodyne phase for a single channel: Upsilon = theta * r * exp(2 i phi), phi in [0, pi).
double channel_phase(const UnravellingMatrix& u) {
  double phi = 0.5 * std::atan2(u.upsilon.im(0, 0), u.upsilon.re(0, 0));
  if (phi < 0.0) phi += kPi;
  return phi;
}

json unravelling_json(const UnravellingMatrix& u) {
  json out{{"U", labeled("U", "dimensionless", u.U)},
           {"Theta", labeled("Theta", "dimensionless", Matrix(u.theta.asDiagonal()))},
           {"Upsilon", labeled_split("Upsilon", u.upsilon)}};
  if (u.channels() == 1) {
    const std::complex<double> ups(u.upsilon.re(0, 0), u.upsilon.im(0, 0));
    out["phi"] = json{{"value", channel_phase(u)},
                      {"over_pi", channel_phase(u) / kPi},
                      {"units", "rad"}};
    out["squeeze_ratio"] = u.theta(0) > 0.0 ? std::abs(ups) / u.theta(0) : 0.0;
  }
  return out;
}

json filter_json(const FilterModel& fm, const RiccatiSolution& w, const MomentModel& model) {
  const LmiMargins lmi = lmi_margins(w.X, model);
  return json{{"C", labeled("C", "hbar^-1/2", fm.C)},
              {"Gamma", labeled("Gamma", "hbar^1/2", fm.Gamma)},
              {"Omega_eff", labeled("Omega_eff", "1/time", fm.omega_eff)},
              {"Noise_eff", labeled("Noise_eff", "hbar/time", fm.noise_eff)},
              {"W", labeled("W", "hbar", w.X)},
              {"riccati_residual", w.residual},
              {"stabilizing", w.stabilizing},
              {"filter_closed_loop", labeled("A - (W C^T + Gamma^T) C", "1/time", w.closed_loop)},
              {"filter_eigenvalues", eig_json(w.closed_loop_eigs)},
              {"purity_det", purity_det(w.X, model.hbar)},
              {"lmi_uncertainty_min_eig", lmi.uncertainty},
              {"lmi_evolution_min_eig", lmi.evolution}};
}

json design_json(const ControllerDesign& d, double hbar) {
  const bool markov = d.kind == ControllerKind::markovian;
  json out{{"kind", markov ? "markovian" : "optimal"},
           {markov ? "F" : "K", labeled(markov ? "F" : "K", markov ? "hbar^-1/2" : "1",
                                        d.gain)},
           {"M", labeled("M", "1/time", d.M_closed)},
           {"M_eigenvalues", eig_json(d.eigs)},
           {"predicted_cost", hbar_scalar(d.predicted_cost, hbar)}};
  if (markov) {
    out["cancellation_residual"] = d.cancellation_residual;
    out["pseudo_inverse"] = d.pseudo_inverse;
  }
  return out;
}

struct Context {
  const RunManifest& manifest;
  LoadedProblem problem;
  MomentModel model;
  ToleranceConfig tol;
};

void add_certificate(Report& r, const std::string& name, bool pass) {
  r.body["certificates"][name] = pass;
  r.certificates_pass = r.certificates_pass && pass;
}

const ControlProblem& need_control(const Context& ctx) {
  if (!ctx.problem.control) {
    throw ValidationError(std::string(command_name(ctx.manifest.command)) +
                          ": a control file (--control) is required");
  }
  return *ctx.problem.control;
}

const UnravellingMatrix& need_unravelling(const Context& ctx) {
  if (!ctx.problem.unravelling) {
    throw ValidationError(std::string(command_name(ctx.manifest.command)) +
                          ": an unravelling file (--unravelling) is required");
  }
  return *ctx.problem.unravelling;
}

// ---- commands --------------------------------------------------------------

void run_validate(Context& ctx, Report& r) {
  const SystemSpec& s = ctx.problem.system;
  const UnravellingMatrix u =
      ctx.problem.unravelling ? *ctx.problem.unravelling : heterodyne(s.channels());
  const FilterModel fm = filter_model(ctx.model, u, ctx.tol);
  const Detectability det = pbh_detectable(fm.C, fm.omega_eff, ctx.tol);
  json& res = r.body["results"];
  res["modes"] = s.modes();
  res["channels"] = s.channels();
  res["inputs"] = s.inputs();
  res["detectable"] = det.detectable;
  res["unravelling_source"] = ctx.problem.unravelling ? "file" : "heterodyne";
  if (!det.detectable) {
    res["undetectable_eigenvalue"] = json::array({det.eigenvalue.real(), det.eigenvalue.imag()});
  }
  res["control_provided"] = ctx.problem.control.has_value();
  r.body["certificates"]["detectable"] = det.detectable;
  if (!det.detectable) {
    r.certificates_pass = false;
    r.exit_code = 1;
  }
}

void run_moments(Context& ctx, Report& r) {
  const MomentModel& m = ctx.model;
  json& res = r.body["results"];
  res["A"] = labeled("A", "1/time", m.A);
  res["D"] = labeled("D", "hbar/time", m.D);
  res["C_bar"] = labeled("C_bar", "hbar^-1/2 time^-1/2", m.C_bar);
  res["Sigma"] = labeled("Sigma", "dimensionless", m.sigma);
  const auto eigs = eigs_of(m.A);
  res["A_eigenvalues"] = eig_json(eigs);
  r.tables.push_back(eig_table("eigenvalues", eigs));
  const bool stable = spectral_abscissa(m.A) < -ctx.tol.stability_margin;
  res["stable"] = stable;
  if (stable) {
    const Matrix v = solve_lyapunov(m.A, m.D, ctx.tol);
    res["V_stationary"] = labeled("V", "hbar", v);
  }

  // Unconditional evolution from x = 0, V = hbar I on a uniform grid.
  const Eigen::Index n = m.A.rows();
  constexpr int kSamples = 100;
  std::vector<double> grid;
  for (int k = 0; k <= kSamples; ++k) grid.push_back(ctx.manifest.t_final * k / kSamples);
  const MomentTrajectory traj = unconditional_evolution(
      m, Matrix(), {}, Vector::Zero(n), m.hbar * Matrix::Identity(n, n), grid, ctx.tol);
  Table t{"evolution", {"t"}, {}};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      t.columns.push_back("V" + std::to_string(i) + std::to_string(j));
    }
  }
  for (size_t k = 0; k < traj.times.size(); ++k) {
    std::vector<double> row{traj.times[k]};
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i; j < n; ++j) row.push_back(traj.covariances[k](i, j));
    }
    t.rows.push_back(std::move(row));
  }
  res["V_final"] = labeled("V", "hbar", traj.covariances.back());
  r.tables.push_back(std::move(t));
}

void run_filter(Context& ctx, Report& r) {
  const UnravellingMatrix& u = need_unravelling(ctx);
  const FilterModel fm = filter_model(ctx.model, u, ctx.tol);
  const RiccatiSolution w = solve_filter_care(fm, ctx.tol);
  json& res = r.body["results"];
  res["unravelling"] = unravelling_json(u);
  res["filter"] = filter_json(fm, w, ctx.model);
  if (ctx.problem.control) {
    res["filter_cost"] = hbar_scalar((ctx.problem.control->P * w.X).trace(), ctx.model.hbar);
  }
  r.tables.push_back(eig_table("eigenvalues", w.closed_loop_eigs));
  r.tables.push_back(matrix_table("W", w.X));
  add_certificate(r, "stabilizing", w.stabilizing);
  add_certificate(r, "residual", w.residual <= ctx.tol.residual_tol);
}

void run_optimize(Context& ctx, Report& r) {
  const ControlProblem& control = need_control(ctx);
  const SystemSpec& s = ctx.problem.system;
  const OptimizationResult opt = optimize_unravelling(s, ctx.model, control, ctx.tol);
  const double hbar = ctx.model.hbar;
  json& res = r.body["results"];
  res["W_star"] = labeled("W", "hbar", opt.W_star);
  res["m_star"] = hbar_scalar(opt.m_star, hbar);
  res["cost_weight"] = labeled("Lambda", "1/hbar", opt.weight.lambda);
  res["cost_constant"] = hbar_scalar(opt.weight.constant_term, hbar);
  res["purity_det"] = purity_det(opt.W_star, hbar);
  res["lmi_uncertainty_min_eig"] = opt.lmi_residuals.uncertainty;
  res["lmi_evolution_min_eig"] = opt.lmi_residuals.evolution;
  res["barrier_mu_final"] = opt.barrier_mu_final;
  res["gap_bound"] = opt.gap_bound;
  res["newton_steps"] = opt.newton_steps;
  res["recover_residual"] = opt.recover_residual;
  res["recover_flagged"] = opt.recover_flagged;
  res["verification_mismatch"] = opt.verification_mismatch;
  res["unravelling"] = unravelling_json(*opt.U_star);

  const FilterModel fm = filter_model(ctx.model, *opt.U_star, ctx.tol);
  const Matrix& w = opt.verified_filter->X;
  const ControllerDesign markov = design_markovian(w, fm, s.B, control.P, ctx.tol);
  res["markovian"] = design_json(markov, hbar);
  if (opt.control_riccati) {
    res["Y"] = labeled("Y", "1/hbar", opt.control_riccati->X);
    const ControllerDesign optimal =
        design_optimal(*opt.control_riccati, w, fm, s.B, control.Q, ctx.tol);
    res["optimal"] = design_json(optimal, hbar);
    add_certificate(r, "optimal_stable", certify_stabilizing(optimal.M_closed, ctx.tol));
  }

  if (s.modes() == 1 && s.channels() == 1) {
    const OracleResult oracle = grid_oracle(ctx.model, opt.weight, ctx.manifest.phi_resolution,
                                            ctx.tol);
    res["oracle_m"] = hbar_scalar(oracle.m_best, hbar);
    Table sweep{"sweep", {"phi", "cost", "stable"}, {}};
    for (const OraclePoint& p : oracle.homodyne_sweep) {
      sweep.rows.push_back({p.phi, p.cost / hbar, p.stable ? 1.0 : 0.0});
    }
    r.tables.push_back(std::move(sweep));
  }
  r.tables.push_back(matrix_table("W", opt.W_star));
  r.tables.push_back(eig_table("eigenvalues", markov.eigs));

  add_certificate(r, "uncertainty_lmi", opt.lmi_residuals.uncertainty >= -10.0 * ctx.tol.psd_tol);
  add_certificate(r, "evolution_lmi", opt.lmi_residuals.evolution >= -10.0 * ctx.tol.psd_tol);
  add_certificate(r, "recovered_unravelling", !opt.recover_flagged);
  add_certificate(r, "filter_stabilizing", opt.verified_filter->stabilizing);
  add_certificate(r, "markovian_stable", certify_stabilizing(markov.M_closed, ctx.tol));
}

void run_markovian(Context& ctx, Report& r) {
  const ControlProblem& control = need_control(ctx);
  const UnravellingMatrix& u = need_unravelling(ctx);
  const FilterModel fm = filter_model(ctx.model, u, ctx.tol);
  const RiccatiSolution w = solve_filter_care(fm, ctx.tol);
  const ControllerDesign d =
      design_markovian(w.X, fm, ctx.problem.system.B, control.P, ctx.tol);
  json& res = r.body["results"];
  res["unravelling"] = unravelling_json(u);
  res["W"] = labeled("W", "hbar", w.X);
  res["markovian"] = design_json(d, ctx.model.hbar);
  r.tables.push_back(eig_table("eigenvalues", d.eigs));
  add_certificate(r, "markovian_stable", certify_stabilizing(d.M_closed, ctx.tol));
  add_certificate(r, "filter_stabilizing", w.stabilizing);
}

void run_simulate(Context& ctx, Report& r) {
  const UnravellingMatrix& u = need_unravelling(ctx);
  const SystemSpec& s = ctx.problem.system;
  const FilterModel fm = filter_model(ctx.model, u, ctx.tol);
  const RiccatiSolution w = solve_filter_care(fm, ctx.tol);
  const Eigen::Index n = ctx.model.A.rows();

  SimConfig cfg;
  cfg.dt = ctx.manifest.dt;
  cfg.t_final = ctx.manifest.t_final;
  cfg.n_traj = ctx.manifest.trajectories;
  cfg.seed = ctx.manifest.seed;
  cfg.record_stride = std::max(1, static_cast<int>(std::lround(1.0 / cfg.dt)));

  std::optional<ControllerDesign> design;
  Matrix p = Matrix::Zero(n, n);
  Matrix q;
  if (ctx.problem.control) {
    p = ctx.problem.control->P;
    q = ctx.problem.control->Q;
    design = design_markovian(w.X, fm, s.B, p, ctx.tol);
  }
  const SimulationResult sim = simulate_conditional(ctx.model, s.B, fm,
                                                    design ? &*design : nullptr, p, q, cfg,
                                                    ctx.tol);
  const double hbar = ctx.model.hbar;
  json& res = r.body["results"];
  res["unravelling"] = unravelling_json(u);
  res["W"] = labeled("W", "hbar", w.X);
  res["controlled"] = sim.controlled;
  res["drift"] = labeled(sim.controlled ? "M" : "A", "1/time", sim.drift);
  res["min_uncertainty_margin"] = sim.min_uncertainty_margin;
  res["Vc_final"] = labeled("V_c", "hbar", sim.Vc_path.back());
  add_certificate(r, "uncertainty_lmi", sim.min_uncertainty_margin >= -10.0 * ctx.tol.psd_tol);

  if (design) {
    const CostEstimate est = estimate_steady_cost(sim);
    res["markovian"] = design_json(*design, hbar);
    res["cost_estimate"] = hbar_scalar(est.m_hat, hbar);
    res["cost_standard_error"] = hbar_scalar(est.standard_error, hbar);
    res["nonstationary"] = est.nonstationary;
    res["predicted_cost"] = hbar_scalar(design->predicted_cost, hbar);
  }

  // Ensemble mean path summary for plotting: averages of <x>_c and V_c.
  Table path{"paths", {"t"}, {}};
  for (Eigen::Index i = 0; i < n; ++i) path.columns.push_back("mean_x" + std::to_string(i));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) {
      path.columns.push_back("Vc" + std::to_string(i) + std::to_string(j));
    }
  }
  for (size_t k = 0; k < sim.times.size(); ++k) {
    Vector mean = Vector::Zero(n);
    for (const TrajectoryRecord& tr : sim.trajectories) mean += tr.mean_path[k];
    mean /= static_cast<double>(sim.trajectories.size());
    std::vector<double> row{sim.times[k]};
    for (Eigen::Index i = 0; i < n; ++i) row.push_back(mean(i));
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i; j < n; ++j) row.push_back(sim.Vc_path[k](i, j));
    }
    path.rows.push_back(std::move(row));
  }
  r.tables.push_back(std::move(path));

  if (!sim.controlled && cfg.n_traj >= 500 && spectral_abscissa(ctx.model.A) < 0.0) {
    std::vector<double> check_times;
    for (double t : {1.0, 5.0, 10.0}) {
      if (t <= cfg.t_final + 0.5 * cfg.dt) check_times.push_back(t);
    }
    if (!check_times.empty()) {
      const ConsistencyReport rep =
          ensemble_consistency_check(sim, ctx.model, check_times, ctx.tol.psd_tol);
      json pts = json::array();
      Table t{"consistency", {"t", "max_abs_deviation", "max_z", "relative_deviation", "pass"}, {}};
      for (const ConsistencyPoint& pt : rep.points) {
        pts.push_back(json{{"t", pt.t},
                           {"total", labeled("E[x x^T] + V_c", "hbar", pt.total)},
                           {"unconditional", labeled("V", "hbar", pt.unconditional)},
                           {"max_abs_deviation", pt.max_abs_deviation},
                           {"max_z", pt.max_z},
                           {"relative_deviation", pt.relative_deviation},
                           {"pass", pt.pass}});
        t.rows.push_back({pt.t, pt.max_abs_deviation, pt.max_z, pt.relative_deviation,
                          pt.pass ? 1.0 : 0.0});
      }
      res["consistency"] = pts;
      r.tables.push_back(std::move(t));
      add_certificate(r, "ensemble_consistency", rep.pass);
    }
  }
}

void check_expect(Report& r, const json& exp, const std::string& key, double got) {
  const json& e = require(exp, key, "expected");
  const double value = parse_number(require(e, "value", "expected." + key), key + ".value");
  const double tolerance =
      parse_number(require(e, "tolerance", "expected." + key), key + ".tolerance");
  const bool pass = std::abs(got - value) <= tolerance;
  r.body["results"]["comparison"][key] =
      json{{"expected", value}, {"tolerance", tolerance}, {"actual", got}, {"pass", pass}};
  add_certificate(r, "expect_" + key, pass);
}

void run_example(const RunManifest& manifest, Report& r) {
  Context ctx{manifest, example_problem(), {}, {}};
  ctx.model = derive_moment_model(ctx.problem.system);
  const ControlProblem& control = *ctx.problem.control;
  const SystemSpec& s = ctx.problem.system;
  const json& exp = example_expectations();

  const OptimizationResult opt = optimize_unravelling(s, ctx.model, control, ctx.tol);
  const double hbar = ctx.model.hbar;
  const UnravellingMatrix& u = *opt.U_star;
  const FilterModel fm = filter_model(ctx.model, u, ctx.tol);
  const ControllerDesign markov =
      design_markovian(opt.verified_filter->X, fm, s.B, control.P, ctx.tol);

  json& res = r.body["results"];
  res["W_star"] = labeled("W", "hbar", opt.W_star);
  res["m_star"] = hbar_scalar(opt.m_star, hbar);
  res["unravelling"] = unravelling_json(u);
  res["markovian"] = design_json(markov, hbar);

  check_expect(r, exp, "m_over_hbar", opt.m_star / hbar);
  check_expect(r, exp, "beta", 2.0 * opt.W_star(0, 1) / hbar);
  check_expect(r, exp, "phi_over_pi", channel_phase(u) / kPi);
  check_expect(r, exp, "theta", u.theta(0));
  check_expect(r, exp, "purity_det", purity_det(opt.W_star, hbar));

  const json& md = require(exp, "markovian_drift", "expected");
  const Matrix expected_m = parse_matrix(require(md, "value", "expected.markovian_drift"),
                                         "markovian_drift.value");
  const double mtol = parse_number(require(md, "tolerance", "expected.markovian_drift"),
                                   "markovian_drift.tolerance");
  const double mdev = (markov.M_closed - expected_m).cwiseAbs().maxCoeff();
  const bool mpass = mdev <= mtol;
  res["comparison"]["markovian_drift"] = json{{"expected", matrix_json(expected_m)},
                                              {"tolerance", mtol},
                                              {"actual", matrix_json(markov.M_closed)},
                                              {"max_abs_deviation", mdev},
                                              {"pass", mpass}};
  add_certificate(r, "expect_markovian_drift", mpass);
  add_certificate(r, "cancellation", markov.cancellation_residual <= 1e-12);
}

}  // namespace

// ---- public API ------------------------------------------------------------

std::string_view command_name(Command c) {
  switch (c) {
    case Command::validate: return "validate";
    case Command::moments: return "moments";
    case Command::filter: return "filter";
    case Command::optimize: return "optimize";
    case Command::markovian: return "markovian";
    case Command::simulate: return "simulate";
    case Command::example: return "example";
  }
  return "unknown";
}

std::optional<Command> parse_command(std::string_view name) {
  for (Command c : {Command::validate, Command::moments, Command::filter, Command::optimize,
                    Command::markovian, Command::simulate, Command::example}) {
    if (command_name(c) == name) return c;
  }
  return std::nullopt;
}

std::vector<std::string> RunManifest::input_paths() const {
  std::vector<std::string> out;
  for (const std::string* p : {&system_path, &control_path, &unravelling_path}) {
    if (!p->empty()) out.push_back(*p);
  }
  return out;
}

json RunManifest::to_json() const {
  return json{{"command", command_name(command)},
              {"input_paths", input_paths()},
              {"seed", seed},
              {"output_format", output_format == OutputFormat::json ? "json" : "csv"},
              {"tool_version", tool_version},
              {"dt", dt},
              {"t_final", t_final},
              {"trajectories", trajectories},
              {"phi_resolution", phi_resolution}};
}

SystemSpec parse_system(const json& doc) {
  SystemSpec s;
  s.hbar = doc.is_object() && doc.contains("hbar") ? parse_number(doc["hbar"], "system.hbar")
                                                    : 1.0;
  s.G = parse_matrix(require(doc, "G", "system"), "system.G");
  s.c_tilde = parse_split(require(doc, "C_tilde", "system"), "system.C_tilde", -1, -1);
  s.B = doc.contains("B") ? parse_matrix(doc["B"], "system.B") : Matrix(s.G.rows(), 0);
  return validate_spec(s);
}

ControlProblem parse_control(const json& doc, const SystemSpec& spec) {
  ControlProblem c;
  c.P = parse_matrix(require(doc, "P", "control"), "control.P");
  if (doc.contains("Q_zero_limit")) {
    if (!doc["Q_zero_limit"].is_boolean()) field_error("control.Q_zero_limit", "expected a boolean");
    c.q_zero_limit = doc["Q_zero_limit"].get<bool>();
  }
  if (!c.q_zero_limit) c.Q = parse_matrix(require(doc, "Q", "control"), "control.Q");
  return validate_control(c, spec);
}

UnravellingMatrix parse_unravelling(const json& doc) {
  if (!doc.is_object()) field_error("unravelling", "expected an object");
  if (doc.contains("U")) return decompose_u(parse_matrix(doc["U"], "unravelling.U"));
  const Vector theta = parse_vector(require(doc, "Theta", "unravelling"), "unravelling.Theta");
  const auto l = theta.size();
  SplitComplexMatrix ups{Matrix::Zero(l, l), Matrix::Zero(l, l)};
  if (doc.contains("Upsilon")) ups = parse_split(doc["Upsilon"], "unravelling.Upsilon", l, l);
  return compose_u(theta, ups);
}

LoadedProblem load_problem(const std::string& system_path, const std::string& control_path,
                           const std::string& unravelling_path) {
  if (system_path.empty()) throw ValidationError("a system file (--system) is required");
  LoadedProblem out;
  out.system = parse_system(read_file(system_path));
  if (!control_path.empty()) out.control = parse_control(read_file(control_path), out.system);
  if (!unravelling_path.empty()) {
    out.unravelling = parse_unravelling(read_file(unravelling_path));
    if (out.unravelling->channels() != out.system.channels()) {
      throw ValidationError("unravelling: channel count differs from the system's C_tilde rows");
    }
  }
  return out;
}

LoadedProblem example_problem() {
  LoadedProblem out;
  out.system = parse_system(parse_text(fixtures::kExampleSystem, "example_opo.json"));
  out.control = parse_control(parse_text(fixtures::kExampleControl, "example_control.json"),
                              out.system);
  return out;
}

const json& example_expectations() {
  static const json doc = parse_text(fixtures::kExampleExpected, "example_expected.json");
  return doc;
}

Report run_command(const RunManifest& manifest) {
  if (!(manifest.dt > 0.0) || !(manifest.t_final > 0.0) || manifest.trajectories < 1 ||
      !(manifest.phi_resolution > 0.0)) {
    throw ValidationError("manifest: dt, t_final, trajectories and phi_resolution must be positive");
  }
  Report r;
  r.body = json::object();
  r.body["manifest"] = manifest.to_json();
  r.body["certificates"] = json::object();
  r.body["results"] = json::object();

  if (manifest.command == Command::example) {
    run_example(manifest, r);
  } else {
    Context ctx{manifest,
                load_problem(manifest.system_path, manifest.control_path,
                             manifest.unravelling_path),
                {},
                {}};
    ctx.model = derive_moment_model(ctx.problem.system);
    switch (manifest.command) {
      case Command::validate: run_validate(ctx, r); break;
      case Command::moments: run_moments(ctx, r); break;
      case Command::filter: run_filter(ctx, r); break;
      case Command::optimize: run_optimize(ctx, r); break;
      case Command::markovian: run_markovian(ctx, r); break;
      case Command::simulate: run_simulate(ctx, r); break;
      case Command::example: break;
    }
  }
  if (!r.certificates_pass && r.exit_code == 0) r.exit_code = 2;
  r.body["pass"] = r.certificates_pass;
  r.body["exit_code"] = r.exit_code;
  return r;
}

int exit_code_for(const std::exception& error) {
  if (dynamic_cast<const IoError*>(&error)) return 3;
  if (dynamic_cast<const NumericalError*>(&error)) return 2;
  return 1;
}

std::string serialize_json(const Report& report) { return report.body.dump(2) + "\n"; }

namespace {

std::string format_double(double v) {
  // Shortest representation that round-trips, via the JSON serializer.
  return json(v).dump();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << content;
  out.flush();
  if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace

void write_report(const Report& report, OutputFormat format, const std::string& path) {
  if (format == OutputFormat::json) {
    const std::string text = serialize_json(report);
    if (path.empty()) {
      std::cout << text;
      std::cout.flush();
      if (!std::cout) throw IoError("cannot write report to stdout");
    } else {
      write_file(path, text);
    }
    return;
  }
  if (path.empty()) throw IoError("csv output needs --out");
  const std::filesystem::path base(path);
  const std::filesystem::path dir = base.parent_path();
  const std::string stem = base.stem().string();
  for (const Table& t : report.tables) {
    std::ostringstream os;
    for (size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
    os << "\n";
    for (const auto& row : t.rows) {
      for (size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_double(row[i]);
      os << "\n";
    }
    write_file(dir / (stem + "_" + t.name + ".csv"), os.str());
  }
}

}  // namespace qlqg

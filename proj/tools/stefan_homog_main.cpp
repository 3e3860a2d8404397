// Command-line harness: validate / mean / cell / psi0 / solve / converge /
// unique subcommands over a single JSON problem config.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "stefanhomog/stefanhomog.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace homog;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& j) {
  write_text(path, j.dump(2) + "\n");
}

json mat_to_json(const Mat& m, int dim) {
  json rows = json::array();
  for (int i = 0; i < dim; ++i) {
    json r = json::array();
    for (int j = 0; j < dim; ++j) r.push_back(m(i, j));
    rows.push_back(r);
  }
  return rows;
}

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  std::string eps_arg;  // value or "homogenized" (solve); overrides list (converge)
  int grid_override = 0;
};

// Rationalize every entry of a tensor field onto a common supercell.
struct TensorRationalization {
  MatrixField field;
  Vec cell_length{1.0, 1.0};
  double frequency_error = 0.0;
};

TensorRationalization rationalize_tensor(const MatrixField& K, long Q) {
  const int dim = K.dimension();
  std::vector<OscillatoryField> entries;
  std::array<long, 2> lcm{1, 1};
  double err = 0.0;
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) {
      Rationalization r = rationalize(K.entry(i, j), Q);
      err = std::max(err, r.frequency_error);
      for (int d = 0; d < dim; ++d)
        lcm[d] = std::lcm(lcm[d], (long)std::llround(r.cell_length[d]));
      entries.push_back(r.field);
    }
  TensorRationalization out;
  out.field = MatrixField(dim, std::move(entries), K.lower_bound(), K.upper_bound());
  out.cell_length = {double(lcm[0]), dim > 1 ? double(lcm[1]) : 1.0};
  out.frequency_error = err;
  return out;
}

bool tensor_is_periodic_on_unit_cell(const MatrixField& K) {
  const int dim = K.dimension();
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j)
      for (const Mode& m : K.entry(i, j).modes())
        for (int d = 0; d < dim; ++d) {
          double cycles = m.frequency[d] / (2.0 * M_PI);
          if (std::abs(cycles - std::round(cycles)) > 1e-12) return false;
        }
  return true;
}

Grid make_cell_grid(int dim, int M, const Vec& length) {
  // keep the per-unit-length resolution of the config on supercells
  double L = std::max(length[0], dim > 1 ? length[1] : 1.0);
  long nodes = std::lround(double(M) * L);
  nodes = std::min<long>(std::max<long>(nodes, 8), 8192);
  return Grid::cell(dim, int(nodes), length);
}

int run_validate(const ProblemSpec& spec, const fs::path& out) {
  ValidationReport rep = validate_hypotheses(spec);
  json conditions = json::array();
  for (const ConditionResult& c : rep.conditions)
    conditions.push_back(json{{"name", c.name},
                              {"pass", c.pass},
                              {"witness", c.witness},
                              {"constant", c.constant}});
  write_json(out / "validation.json", json{{"conditions", conditions},
                                           {"all_pass", rep.all_pass()},
                                           {"config_hash", spec.config_hash}});
  for (const ConditionResult& c : rep.conditions)
    std::printf("%-34s %s%s%s\n", c.name.c_str(), c.pass ? "pass" : "FAIL",
                c.witness.empty() ? "" : "  witness: ", c.witness.c_str());
  return rep.all_pass() ? 0 : 1;
}

int run_mean(const ProblemSpec& spec, const fs::path& out) {
  json fields = json::object();
  auto report_field = [&](const std::string& name, const OscillatoryField& f) {
    json numeric = json::object();
    for (double L : {10.0, 100.0, 1000.0})
      numeric[std::to_string(int(L))] = f.mean_numeric(L);
    fields[name] = json{{"exact", f.mean()}, {"numeric", numeric}};
  };
  if (spec.flux_linear) {
    for (int i = 0; i < spec.dim; ++i)
      for (int j = 0; j < spec.dim; ++j)
        report_field("flux_" + std::to_string(i) + std::to_string(j),
                     spec.flux_tensor.entry(i, j));
  }
  if (spec.potential.has_oscillation())
    report_field("potential_multiplier", spec.potential.oscillation());
  if (spec.has_source) report_field("source_factor", spec.source_factor);
  report_field("initial_factor", spec.initial_factor);
  write_json(out / "mean.json",
             json{{"fields", fields}, {"config_hash", spec.config_hash}});
  return 0;
}

int run_cell(const ProblemSpec& spec, const fs::path& out) {
  if (!spec.flux_linear) {
    std::fprintf(stderr, "cell subcommand requires a linear flux tensor\n");
    return 1;
  }
  json report;
  report["config_hash"] = spec.config_hash;
  MatrixField K = spec.flux_tensor;
  Vec length{1.0, 1.0};
  bool quasi = !tensor_is_periodic_on_unit_cell(K);
  if (quasi) {
    TensorRationalization r1 = rationalize_tensor(K, spec.rational_Q);
    TensorRationalization r2 = rationalize_tensor(K, 2 * spec.rational_Q);
    Grid g2 = make_cell_grid(spec.dim, spec.cell_M, r2.cell_length);
    CorrectorSet c2 = solve_corrector(g2, r2.field, 0.0, spec.tol.cell);
    Mat K0_q2 = effective_tensor(g2, r2.field, c2);
    report["rationalization"] = json{
        {"Q", spec.rational_Q},
        {"frequency_error", r1.frequency_error},
        {"cell_length", json::array({r1.cell_length[0], r1.cell_length[1]})},
        {"Q2", 2 * spec.rational_Q},
        {"frequency_error_Q2", r2.frequency_error},
        {"K0_Q2", mat_to_json(K0_q2, spec.dim)}};
    K = r1.field;
    length = r1.cell_length;
  }
  Grid g = make_cell_grid(spec.dim, spec.cell_M, length);
  CorrectorSet corr = solve_corrector(g, K, 0.0, spec.tol.cell);
  Mat K0 = effective_tensor(g, K, corr);
  report["grid"] = json{{"dim", spec.dim},
                        {"nodes_per_axis", g.nodes(0)},
                        {"cell_length", json::array({length[0], length[1]})}};
  report["K0"] = mat_to_json(K0, spec.dim);
  report["corrector_residuals"] = corr.residuals;
  // Voigt-Reuss bounds of the (0,0) scalar entry
  VoigtReuss vr = voigt_reuss(g, K.entry(0, 0));
  report["voigt"] = vr.arithmetic;
  report["reuss"] = vr.harmonic;
  write_json(out / "cell.json", report);
  std::printf("K0(0,0) = %.12g\n", K0(0, 0));
  bool ok = true;
  for (double r : corr.residuals) ok = ok && r <= 1e-8;
  // Voigt-Reuss sanity for scalar isotropic coefficients
  ok = ok && K0(0, 0) <= vr.arithmetic + 1e-8 && K0(0, 0) >= vr.harmonic - 1e-8;
  return ok ? 0 : 1;
}

int run_psi0(const ProblemSpec& spec, const fs::path& out) {
  DissipationPotential psi =
      spec.has_dissipation
          ? spec.dissipation
          : DissipationPotential::quadratic(spec.flux_tensor);
  Grid g = make_cell_grid(spec.dim, spec.cell_M, {1.0, 1.0});
  json samples = json::array();
  std::vector<Vec> etas;
  if (spec.dim == 1)
    etas = {vec1(0.25), vec1(0.5), vec1(1.0), vec1(-1.0), vec1(2.0)};
  else
    etas = {vec2(1, 0), vec2(0, 1), vec2(1, 1), vec2(-0.5, 1), vec2(2, -1)};
  bool ok = true;
  Mat K0;
  if (psi.kind() == DissipationPotential::Kind::Quadratic) {
    CorrectorSet corr = solve_corrector(g, psi.matrix(), 0.0, spec.tol.cell);
    K0 = effective_tensor(g, psi.matrix(), corr);
  }
  for (const Vec& eta : etas) {
    Psi0Result r = minimize_psi0(g, psi, eta, spec.tol.psi0);
    json s{{"eta", json::array({eta[0], eta[1]})},
           {"value", r.value},
           {"subgradient", json::array({r.subgradient[0], r.subgradient[1]})},
           {"iterations", r.iterations},
           {"gradient_norm", r.gradient_norm}};
    if (psi.kind() == DissipationPotential::Kind::Quadratic) {
      double cross = 0.5 * quad_form(K0, eta, spec.dim);
      s["quadratic_form_half"] = cross;
      ok = ok && std::abs(r.value - cross) <= 1e-6 * (1.0 + std::abs(cross));
    }
    samples.push_back(s);
  }
  json report{{"samples", samples}, {"config_hash", spec.config_hash}};
  if (psi.kind() == DissipationPotential::Kind::Quadratic)
    report["K0"] = mat_to_json(K0, spec.dim);
  write_json(out / "psi0.json", report);
  return ok ? 0 : 1;
}

std::string diagnostics_csv(const Trajectory& traj) {
  std::string csv = "t,l2_w,energy,nl_iters,residual\r\n";
  char buf[192];
  for (const StepDiagnostics& d : traj.diagnostics) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%d,%.17g\r\n", d.t, d.l2_w,
                  d.energy, d.nl_iters, d.residual);
    csv += buf;
  }
  return csv;
}

int run_solve(const ProblemSpec& spec, const fs::path& out, const std::string& eps_arg,
              int grid_override) {
  bool homogenized = (eps_arg == "homogenized");
  double eps = 1.0;
  if (!homogenized && !eps_arg.empty()) {
    eps = std::stod(eps_arg);
    if (!(eps > 0.0)) throw std::invalid_argument("--eps must be positive");
  } else if (!homogenized) {
    eps = spec.eps_list.empty() ? 1.0 : spec.eps_list.front();
  }
  int N = grid_override > 0 ? grid_override : spec.N;
  Mat K0 = Mat::identity(spec.dim);
  json report;
  if (homogenized) {
    Grid cell = make_cell_grid(spec.dim, spec.cell_M, {1.0, 1.0});
    EffectiveModel model = build_effective_model(spec, cell);
    K0 = model.K0_base;
    report["K0"] = mat_to_json(K0, spec.dim);
  }
  EvolutionProblem P = make_evolution_problem(spec, eps, homogenized, N, K0);
  Trajectory traj = solve_evolution(P);
  write_text(out / "diagnostics.csv", diagnostics_csv(traj));
  write_csv(P.grid, traj.terminal_u(), (out / "terminal_u.csv").string());
  write_csv(P.grid, traj.terminal_w(), (out / "terminal_w.csv").string());
  write_binary(P.grid, traj.terminal_u(), (out / "terminal_u.bin").string());
  write_binary(P.grid, traj.terminal_w(), (out / "terminal_w.bin").string());
  AprioriReport ap = apriori_check(traj, P.psi, 1.0);
  report["config_hash"] = spec.config_hash;
  report["mode"] = homogenized ? "homogenized" : "oscillatory";
  report["eps"] = eps;
  report["N"] = N;
  report["failed"] = traj.failed;
  report["failure_reason"] = traj.failure_reason;
  report["sup_l2_w"] = traj.sup_l2_w;
  report["terminal_energy"] = traj.diagnostics.back().energy;
  report["apriori"] = json{{"gamma", ap.gamma},
                           {"gamma_tilde", ap.gamma_tilde},
                           {"min_slack", ap.min_slack},
                           {"pass", ap.ok(spec.tol.apriori_slack)}};
  double maxgap = 0.0;
  for (const StepDiagnostics& d : traj.diagnostics)
    maxgap = std::max(maxgap, d.max_fenchel_gap);
  report["max_fenchel_gap"] = maxgap;
  report["files"] = json::array({"diagnostics.csv", "terminal_u.csv", "terminal_w.csv",
                                 "terminal_u.bin", "terminal_w.bin"});
  write_json(out / "solve.json", report);
  bool ok = !traj.failed && ap.ok(spec.tol.apriori_slack) && maxgap <= 1e-8;
  return ok ? 0 : 1;
}

int run_converge(const ProblemSpec& spec, const fs::path& out,
                 const std::string& eps_arg, int grid_override) {
  StudySetup setup = make_study(spec);
  if (!eps_arg.empty()) {
    setup.eps_list.clear();
    std::stringstream ss(eps_arg);
    std::string tok;
    while (std::getline(ss, tok, ',')) setup.eps_list.push_back(std::stod(tok));
  }
  if (grid_override > 0) setup.grid_factor = grid_override;
  ConvergenceTable table = convergence_study(setup);
  write_text(out / "convergence.csv", table.to_csv());
  json rows = json::array();
  bool monotone = true;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const ConvergenceRow& r = table.rows[i];
    rows.push_back(json{{"eps", r.eps},
                        {"err_l1", r.err_l1},
                        {"err_l15", r.err_l15},
                        {"weak_gap", r.weak_gap},
                        {"sup_l2_w", r.sup_l2_w},
                        {"energy", r.energy}});
    if (i > 0 && table.rows[i].err_l1 > 1.1 * table.rows[i - 1].err_l1)
      monotone = false;
  }
  json report{{"config_hash", spec.config_hash},
              {"K0", mat_to_json(table.K0, spec.dim)},
              {"reference_N", table.reference_N},
              {"rows", rows},
              {"monotone_l1", monotone},
              {"files", json::array({"convergence.csv"})}};
  write_json(out / "convergence.json", report);
  std::printf("%s", table.to_csv().c_str());
  return monotone ? 0 : 1;
}

int run_unique(const ProblemSpec& spec, const fs::path& out) {
  Grid cell = make_cell_grid(spec.dim, spec.cell_M, {1.0, 1.0});
  EffectiveModel model = build_effective_model(spec, cell);
  Grid g = Grid::domain(spec.dim, spec.N);
  GridField w0_a = detail::sample_initial(g, spec.initial_factor,
                                          spec.initial_profile, 1.0, true);
  GridField w0_b = w0_a;
  SlowProfile bump{ProfileKind::SinePi, 0.1, 0.0};
  for (std::size_t i = 0; i < g.size(); ++i)
    w0_b[i] += bump(g.coords(i), spec.dim);
  ContractionResult perturbed = contraction_test(g, model.K0_base, model.psi_bar,
                                                 w0_a, w0_b, spec.T, spec.dt);
  ContractionResult identical = contraction_test(g, model.K0_base, model.psi_bar,
                                                 w0_a, w0_a, spec.T, spec.dt);
  std::string csv = "t,energy_perturbed,energy_identical\r\n";
  char buf[160];
  for (std::size_t k = 0; k < perturbed.times.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\r\n", perturbed.times[k],
                  perturbed.E[k], identical.E[k]);
    csv += buf;
  }
  write_text(out / "contraction.csv", csv);
  double slack = spec.tol.contraction_slack * (perturbed.E.empty() ? 1.0 : perturbed.E[0]);
  bool mono = perturbed.nonincreasing(slack);
  double ident_max = 0.0;
  for (double e : identical.E) ident_max = std::max(ident_max, e);
  bool ident_zero = ident_max <= slack;
  write_json(out / "contraction.json",
             json{{"config_hash", spec.config_hash},
                  {"E0", perturbed.E.empty() ? 0.0 : perturbed.E[0]},
                  {"nonincreasing", mono},
                  {"max_increase", perturbed.max_increase()},
                  {"identical_max_energy", ident_max},
                  {"identical_zero", ident_zero},
                  {"files", json::array({"contraction.csv"})}});
  return (mono && ident_zero) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stefan-homog: homogenization laboratory for the generalized "
               "Stefan problem"};
  app.require_subcommand(1);

  CommonArgs args;
  std::vector<CLI::App*> subs;
  for (const char* name : {"validate", "mean", "cell", "psi0", "solve", "converge",
                           "unique"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", args.config_path, "problem config (JSON)")
        ->required();
    sub->add_option("--out", args.out_dir, "output directory")->required();
    sub->add_option("--eps", args.eps_arg,
                    "epsilon value, comma list (converge) or 'homogenized' (solve)");
    sub->add_option("--grid", args.grid_override, "grid override: N (solve) or "
                                                  "grid factor (converge)");
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    ProblemSpec spec = parse_config(args.config_path);
    fs::path out(args.out_dir);
    fs::create_directories(out);
    // the canonical config is persisted next to the outputs for traceability
    write_text(out / "config.canonical.json", spec.canonical);
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "validate") return run_validate(spec, out);
    if (cmd == "mean") return run_mean(spec, out);
    if (cmd == "cell") return run_cell(spec, out);
    if (cmd == "psi0") return run_psi0(spec, out);
    if (cmd == "solve") return run_solve(spec, out, args.eps_arg, args.grid_override);
    if (cmd == "converge")
      return run_converge(spec, out, args.eps_arg, args.grid_override);
    if (cmd == "unique") return run_unique(spec, out);
    std::fprintf(stderr, "unknown subcommand\n");
    return 2;
  } catch (const std::invalid_argument& e) {
    json fail{{"error", e.what()}};
    std::fprintf(stderr, "%s\n", fail.dump().c_str());
    return 2;
  } catch (const std::exception& e) {
    json fail{{"error", e.what()}};
    std::fprintf(stderr, "%s\n", fail.dump().c_str());
    return 1;
  }
}

// Command line driver.  Subcommands cover structured mesh generation and
// validation, sharp-constant audits of the registered inequality pairs under
// mesh refinement, and the solver studies (single solve, convergence table,
// stabilization-energy sweep).  All results are written as deterministic CSV
// with the full invocation echoed into '#' header comments, plus optional
// SVG log-log plots.  Exit codes: 0 success, 1 verdict or invariant failure,
// 2 usage or input error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hfem/audit.hpp"
#include "hfem/mesh.hpp"
#include "hfem/problems.hpp"
#include "hfem/report.hpp"

namespace {

using namespace hfem;

// Writes the whole file in one rename so partial output never lands under
// the requested name.
void write_atomic(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::invalid_argument("cannot open output file: " + tmp);
    os << content;
    if (!os) throw std::invalid_argument("cannot write output file: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::invalid_argument("cannot move output into place: " + path);
}

std::vector<int> levels_up_to(int last) {
  std::vector<int> levels;
  for (int l = 1; l <= last; ++l) levels.push_back(l);
  return levels;
}

void write_svg_file(const std::string& path, const std::string& title,
                    const std::string& xlabel, const std::string& ylabel,
                    const std::vector<PlotSeries>& series) {
  std::ostringstream ss;
  write_svg_loglog(ss, title, xlabel, ylabel, series);
  write_atomic(path, ss.str());
}

struct MeshGenConfig {
  int n = 2;
  std::string tags = "all-dirichlet";
  std::string out = "mesh.txt";
};

int run_mesh_gen(const MeshGenConfig& cfg) {
  Mesh mesh = build_structured(cfg.n, cfg.tags);
  std::ostringstream ss;
  save_mesh(mesh, ss);
  write_atomic(cfg.out, ss.str());
  std::cout << "wrote " << cfg.out << ": " << mesh.n_vertices()
            << " vertices, " << mesh.n_cells() << " cells, " << mesh.n_faces()
            << " faces\n";
  return 0;
}

int run_mesh_check(const std::string& path) {
  Mesh mesh;
  try {
    mesh = load_mesh_file(path);  // format errors carry line numbers
  } catch (const std::exception& e) {
    // Unreadable or inconsistent input is a usage-class failure.
    throw std::invalid_argument(e.what());
  }
  RegularityReport rep = check_regularity(mesh);
  std::cout << "vertices " << mesh.n_vertices() << ", cells " << mesh.n_cells()
            << ", faces " << mesh.n_faces() << "\n"
            << "kappa (min area/h^2)      " << format_g17(rep.kappa) << "\n"
            << "theta (max h/inscribed)   " << format_g17(rep.theta) << "\n"
            << "min angle (radians)       " << format_g17(rep.min_angle)
            << "\n"
            << "hanging-node free         "
            << (rep.hanging_node_free ? "yes" : "no") << "\n";
  bool ok = rep.hanging_node_free && rep.kappa > 1e-12 && rep.min_angle > 1e-12;
  std::cout << (ok ? "mesh ok\n" : "mesh violates regularity assumptions\n");
  return ok ? 0 : 1;
}

struct AuditConfig {
  std::string ineq;
  int k = 1;
  int levels = 4;
  std::string mode = "eigen";
  int samples = 32;
  unsigned long seed = 1;
  bool seed_given = false;
  std::string tags = "all-dirichlet";
  std::string out = "audit.csv";
  std::string svg;
};

int run_audit(const AuditConfig& cfg) {
  SweepOptions opts;
  opts.tag_rule = cfg.tags;
  if (cfg.mode == "sample") {
    if (!cfg.seed_given)
      throw CLI::ValidationError("audit", "--seed is required in sample mode");
    opts.audit.mode = AuditMode::Sample;
    opts.audit.n_samples = cfg.samples;
  } else {
    opts.audit.mode = AuditMode::Eigen;
    opts.audit.n_samples = 0;
  }
  opts.audit.seed = cfg.seed;

  SweepResult res = sweep(cfg.ineq, cfg.k, levels_up_to(cfg.levels), opts);

  std::ostringstream cmd;
  cmd << "cmd: hfem audit --ineq " << cfg.ineq << " --k " << cfg.k
      << " --levels " << cfg.levels << " --mode " << cfg.mode;
  if (opts.audit.mode == AuditMode::Sample)
    cmd << " --samples " << cfg.samples;
  cmd << " --seed " << cfg.seed << " --tags " << cfg.tags;
  std::vector<std::string> comments = {
      cmd.str(),
      "thresholds: max_ratio=" + format_g17(opts.max_ratio) +
          " max_slope=" + format_g17(opts.max_slope),
      "note: " + res.note,
      std::string("verdict: ") + (res.pass ? "pass" : "fail")};

  std::ostringstream ss;
  write_audit_csv(ss, res.rows, res.pass, comments);
  write_atomic(cfg.out, ss.str());

  if (!cfg.svg.empty()) {
    PlotSeries lam{"lambda", {}, {}}, smp{"sample max", {}, {}};
    for (const AuditResult& r : res.rows) {
      if (!r.unbounded && r.mode == AuditMode::Eigen) {
        lam.x.push_back(r.h_max);
        lam.y.push_back(r.lambda);
      }
      if (r.samples > 0) {
        smp.x.push_back(r.h_max);
        smp.y.push_back(r.sample_max);
      }
    }
    std::vector<PlotSeries> series;
    if (!lam.x.empty()) series.push_back(lam);
    if (!smp.x.empty()) series.push_back(smp);
    write_svg_file(cfg.svg, cfg.ineq + " (k=" + std::to_string(cfg.k) + ")",
                   "h_max", "constant", series);
  }

  std::cout << cfg.ineq << " k=" << cfg.k << " levels=1.." << cfg.levels
            << ": " << res.note << " -> " << (res.pass ? "pass" : "fail")
            << "\n";
  return res.pass ? 0 : 1;
}

struct HdgConfig {
  std::string problem;
  int k = 1;
  int levels = 4;
  double tau = 1.0;
  std::string out = "hdg.csv";
  std::string svg;
};

std::string hdg_cmd_comment(const char* sub, const HdgConfig& cfg) {
  std::ostringstream cmd;
  cmd << "cmd: hfem hdg " << sub << " --problem " << cfg.problem << " --k "
      << cfg.k << " --levels " << cfg.levels << " --tau "
      << format_g17(cfg.tau);
  return cmd.str();
}

void write_hdg_outputs(const HdgConfig& cfg,
                       const std::vector<ConvergenceRow>& rows,
                       std::vector<std::string> comments, bool errors_plot) {
  std::ostringstream ss;
  write_convergence_csv(ss, rows, comments);
  write_atomic(cfg.out, ss.str());
  if (cfg.svg.empty()) return;
  std::vector<PlotSeries> series;
  if (errors_plot) {
    PlotSeries eu{"err_u", {}, {}}, ep{"err_p", {}, {}};
    for (const ConvergenceRow& r : rows) {
      eu.x.push_back(r.h_max);
      eu.y.push_back(r.err_u);
      ep.x.push_back(r.h_max);
      ep.y.push_back(r.err_p);
    }
    series = {eu, ep};
  } else {
    PlotSeries en{"energy", {}, {}};
    for (const ConvergenceRow& r : rows) {
      en.x.push_back(r.h_max);
      en.y.push_back(r.energy);
    }
    series = {en};
  }
  write_svg_file(cfg.svg, cfg.problem + " (k=" + std::to_string(cfg.k) + ")",
                 "h_max", errors_plot ? "L2 error" : "energy", series);
}

int run_hdg_solve(const HdgConfig& cfg) {
  const Problem& prob = get_problem(cfg.problem);
  auto rows = hdg_converge(prob, cfg.k, {cfg.levels}, cfg.tau);
  bool pass = rows.back().residual <= 1e-10;
  std::vector<std::string> comments = {
      hdg_cmd_comment("solve", cfg),
      std::string("verdict: ") + (pass ? "pass" : "fail")};
  write_hdg_outputs(cfg, rows, comments, prob.u_exact != nullptr);
  std::cout << cfg.problem << " k=" << cfg.k << " level=" << cfg.levels
            << ": err_u=" << format_g17(rows.back().err_u)
            << " residual=" << format_g17(rows.back().residual) << " -> "
            << (pass ? "pass" : "fail") << "\n";
  return pass ? 0 : 1;
}

int run_hdg_converge(const HdgConfig& cfg) {
  const Problem& prob = get_problem(cfg.problem);
  if (!prob.u_exact)
    throw CLI::ValidationError(
        "hdg converge", "problem '" + cfg.problem +
                            "' has no exact solution; use hdg stability");
  auto rows = hdg_converge(prob, cfg.k, levels_up_to(cfg.levels), cfg.tau);
  const ConvergenceRow& last = rows.back();
  // Exact reproduction or the expected order on the final step.
  bool pass = last.err_u <= 1e-10 || last.order_u >= cfg.k + 0.8;
  for (const ConvergenceRow& r : rows) pass = pass && r.residual <= 1e-10;
  std::vector<std::string> comments = {
      hdg_cmd_comment("converge", cfg),
      "pass rule: final err_u <= 1e-10 or final order_u >= k+0.8, all "
      "residuals <= 1e-10",
      std::string("verdict: ") + (pass ? "pass" : "fail")};
  write_hdg_outputs(cfg, rows, comments, true);
  std::cout << cfg.problem << " k=" << cfg.k << " levels=1.." << cfg.levels
            << ": final order_u=" << format_g17(last.order_u)
            << " err_u=" << format_g17(last.err_u) << " -> "
            << (pass ? "pass" : "fail") << "\n";
  return pass ? 0 : 1;
}

int run_hdg_stability(const HdgConfig& cfg) {
  const Problem& prob = get_problem(cfg.problem);
  StabilityResult res =
      stability_sweep(prob, cfg.k, levels_up_to(cfg.levels), cfg.tau);
  std::vector<std::string> comments = {
      hdg_cmd_comment("stability", cfg),
      "pass rule: energy max/min <= 2 and |loglog slope| <= 0.1",
      "note: " + res.note,
      std::string("verdict: ") + (res.pass ? "pass" : "fail")};
  write_hdg_outputs(cfg, res.rows, comments, false);
  std::cout << cfg.problem << " k=" << cfg.k << " levels=1.." << cfg.levels
            << ": " << res.note << " -> " << (res.pass ? "pass" : "fail")
            << "\n";
  return res.pass ? 0 : 1;
}

std::string joined(const std::vector<std::string>& names) {
  std::string all;
  for (const std::string& n : names) {
    if (!all.empty()) all += ", ";
    all += n;
  }
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Hybrid finite element workbench: simplicial meshes, sharp-constant "
      "inequality audits under refinement, and a condensed hybrid solver "
      "for the Poisson problem.\n"
      "Exit codes: 0 success, 1 verdict/invariant failure, 2 usage or "
      "input error."};
  app.require_subcommand(1);
  int rc = 0;

  // mesh gen / mesh check
  auto* mesh_cmd = app.add_subcommand("mesh", "Generate or validate meshes");
  mesh_cmd->require_subcommand(1);
  MeshGenConfig gen_cfg;
  auto* gen = mesh_cmd->add_subcommand(
      "gen", "Write a structured triangulation of the unit square");
  gen->add_option("--n", gen_cfg.n, "Squares per side (two triangles each)")
      ->capture_default_str()
      ->check(CLI::Range(1, 4096));
  gen->add_option("--tags", gen_cfg.tags, "Boundary tag rule")
      ->capture_default_str()
      ->check(CLI::IsMember({"all-dirichlet", "left-dirichlet",
                             "all-neumann"}));
  gen->add_option("--out", gen_cfg.out, "Output mesh file")
      ->capture_default_str();
  gen->callback([&] { rc = run_mesh_gen(gen_cfg); });

  std::string check_path;
  auto* check = mesh_cmd->add_subcommand(
      "check", "Validate a mesh file and print its regularity report");
  check->add_option("file", check_path, "Mesh file to validate")->required();
  check->callback([&] { rc = run_mesh_check(check_path); });

  // audit
  AuditConfig audit_cfg;
  auto* audit_cmd = app.add_subcommand(
      "audit",
      "Certify one inequality's sharp constant across refinement levels");
  audit_cmd
      ->add_option("--ineq", audit_cfg.ineq,
                   "Inequality id; one of: " + joined(audit_inequality_ids()))
      ->required();
  audit_cmd->add_option("--k", audit_cfg.k, "Polynomial degree")
      ->capture_default_str()
      ->check(CLI::Range(0, 4));
  audit_cmd
      ->add_option("--levels", audit_cfg.levels,
                   "Run levels 1..L (level l is the 2^l x 2^l mesh)")
      ->capture_default_str()
      ->check(CLI::Range(1, 7));
  audit_cmd->add_option("--mode", audit_cfg.mode, "Constant evaluation mode")
      ->capture_default_str()
      ->check(CLI::IsMember({"eigen", "sample"}));
  audit_cmd
      ->add_option("--samples", audit_cfg.samples,
                   "Random draws per level (sample mode)")
      ->capture_default_str()
      ->check(CLI::Range(1, 1000000));
  auto* seed_opt =
      audit_cmd
          ->add_option("--seed", audit_cfg.seed,
                       "RNG seed; required in sample mode")
          ->capture_default_str();
  audit_cmd->add_option("--tags", audit_cfg.tags, "Boundary tag rule")
      ->capture_default_str()
      ->check(CLI::IsMember({"all-dirichlet", "left-dirichlet",
                             "all-neumann"}));
  audit_cmd->add_option("--out", audit_cfg.out, "Output CSV file")
      ->capture_default_str();
  audit_cmd->add_option("--svg", audit_cfg.svg,
                        "Optional SVG log-log plot of the constants");
  audit_cmd->callback([&] {
    audit_cfg.seed_given = seed_opt->count() > 0;
    rc = run_audit(audit_cfg);
  });

  // hdg solve / converge / stability
  auto* hdg_cmd = app.add_subcommand("hdg", "Condensed hybrid Poisson solver");
  hdg_cmd->require_subcommand(1);
  HdgConfig hdg_cfg;
  auto add_hdg_flags = [&](CLI::App* sub, const char* levels_help) {
    sub->add_option("--problem", hdg_cfg.problem,
                    "Problem name; one of: " + joined(problem_names()))
        ->required();
    sub->add_option("--k", hdg_cfg.k, "Polynomial degree")
        ->capture_default_str()
        ->check(CLI::Range(0, 4));
    sub->add_option("--levels", hdg_cfg.levels, levels_help)
        ->capture_default_str()
        ->check(CLI::Range(1, 7));
    sub->add_option("--tau", hdg_cfg.tau, "Stabilization constant (> 0)")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    sub->add_option("--out", hdg_cfg.out, "Output CSV file")
        ->capture_default_str();
    sub->add_option("--svg", hdg_cfg.svg, "Optional SVG log-log plot");
  };
  auto* solve = hdg_cmd->add_subcommand(
      "solve", "Solve one problem at a single refinement level");
  add_hdg_flags(solve, "Refinement level of the single solve");
  solve->callback([&] { rc = run_hdg_solve(hdg_cfg); });
  auto* converge = hdg_cmd->add_subcommand(
      "converge", "Convergence table against the exact solution");
  add_hdg_flags(converge, "Run levels 1..L (level l is the 2^l x 2^l mesh)");
  converge->callback([&] { rc = run_hdg_converge(hdg_cfg); });
  auto* stability = hdg_cmd->add_subcommand(
      "stability", "Stabilization-energy boundedness sweep");
  add_hdg_flags(stability, "Run levels 1..L (level l is the 2^l x 2^l mesh)");
  stability->callback([&] { rc = run_hdg_stability(hdg_cfg); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return rc;
}

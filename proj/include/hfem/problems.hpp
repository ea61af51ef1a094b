// Named boundary value problems for the solver studies, plus the refinement
// drivers built on them: convergence tables against known exact solutions
// and stabilization-energy sweeps for rough data.  Problems are keyed by the
// names used on the command line.

#ifndef HFEM_PROBLEMS_HPP
#define HFEM_PROBLEMS_HPP

#include <array>
#include <string>
#include <vector>

#include "hfem/hdg.hpp"
#include "hfem/report.hpp"

namespace hfem {

struct Problem {
  std::string name;
  std::string tag_rule;  // boundary tagging handed to build_structured
  ScalarFn f;
  ScalarFn u_D;  // empty when the rule tags no Dirichlet face
  ScalarFn u_N;  // empty when the rule tags no Neumann face
  ScalarFn u_exact;                      // empty when unknown
  std::array<ScalarFn, 2> grad_exact;    // empty when unknown
  Gauge gauge = Gauge::None;
  int quad_exactness = 0;  // 0 keeps the solver default; rough data use 20
};

// Registered names: manufactured-sine, affine-exact, rough-indicator,
// rough-dirichlet, pure-neumann.  Throws std::invalid_argument for unknown
// names, listing the valid ones.
const Problem& get_problem(const std::string& name);
std::vector<std::string> problem_names();

// Assemble the solver data for a registered problem.
BVPData bvp_data(const Problem& prob, double tau = 1.0);

// L2 errors of u and p = -grad u against the exact solution, by quadrature.
struct SolutionErrors {
  double err_u = 0.0;
  double err_p = 0.0;
};
SolutionErrors solution_errors(const FeSpace& space, const Problem& prob,
                               const Solution& sol);

// One structured-mesh solve per level (level l is the 2^l x 2^l mesh);
// orders are log2(e_coarse / e_fine) stored on the finer row.
std::vector<ConvergenceRow> hdg_converge(const Problem& prob, int k,
                                         const std::vector<int>& levels,
                                         double tau = 1.0);

// Stabilization-energy sweep ||p||^2 + tau||u-uhat||^2 + ||uhat||^2_{Gamma_D}
// under refinement; passes when max/min <= max_ratio and the log-log slope
// stays within max_slope.  tau_equals_h replaces tau by h_max per level.
struct StabilityResult {
  std::vector<ConvergenceRow> rows;
  bool pass = false;
  std::string note;
};
StabilityResult stability_sweep(const Problem& prob, int k,
                                const std::vector<int>& levels,
                                double tau = 1.0, bool tau_equals_h = false,
                                double max_ratio = 2.0,
                                double max_slope = 0.1);

}  // namespace hfem

#endif  // HFEM_PROBLEMS_HPP

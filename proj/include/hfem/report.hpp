// Deterministic result reporting: CSV emission for audit sweeps and solver
// convergence studies (fixed schemas, full-precision numbers, '#'-prefixed
// configuration comments) and a minimal self-contained SVG log-log plot so
// runs can be inspected without external tooling.

#ifndef HFEM_REPORT_HPP
#define HFEM_REPORT_HPP

#include <ostream>
#include <string>
#include <vector>

#include "hfem/audit.hpp"

namespace hfem {

// Shortest decimal form that round-trips a double (printf %.17g).
std::string format_g17(double v);

// Audit sweep rows.  Header:
//   inequality,k,level,h_max,n_dof,mode,lambda,sample_max,samples,seed,verdict
// lambda prints "unbounded" on unbounded rows and stays empty in pure sample
// mode; sample_max stays empty when no draws were evaluated.  The verdict
// column repeats the sweep verdict on every row.
void write_audit_csv(std::ostream& os, const std::vector<AuditResult>& rows,
                     bool pass,
                     const std::vector<std::string>& comments = {});

// One refinement level of a solver study; orders are 0 on the coarsest row.
struct ConvergenceRow {
  std::string experiment;
  int k = 0;
  int level = 0;
  double h_max = 0.0;
  int n_dof = 0;
  double energy = 0.0;
  double err_u = 0.0;
  double err_p = 0.0;
  double order_u = 0.0;
  double order_p = 0.0;
  double residual = 0.0;  // worst local equation residual, relative
};

// Header: experiment,k,level,h_max,n_dof,energy,err_u,err_p,order_u,order_p,
// residual
void write_convergence_csv(std::ostream& os,
                           const std::vector<ConvergenceRow>& rows,
                           const std::vector<std::string>& comments = {});

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;  // only strictly positive points are drawn
};

// Standalone SVG 1.1 document: log-log axes with decade ticks, one polyline
// per series, legend in the top-right corner.
void write_svg_loglog(std::ostream& os, const std::string& title,
                      const std::string& xlabel, const std::string& ylabel,
                      const std::vector<PlotSeries>& series);

}  // namespace hfem

#endif  // HFEM_REPORT_HPP

// Implementation of the CSV and SVG writers.  All numbers go through one
// %.17g formatter so identical inputs produce byte-identical files.

#include "hfem/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace hfem {

std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

void write_comments(std::ostream& os, const std::vector<std::string>& lines) {
  for (const auto& line : lines) os << "# " << line << "\n";
}

const char* mode_name(AuditMode mode) {
  return mode == AuditMode::Eigen ? "eigen" : "sample";
}

}  // namespace

void write_audit_csv(std::ostream& os, const std::vector<AuditResult>& rows,
                     bool pass, const std::vector<std::string>& comments) {
  write_comments(os, comments);
  os << "inequality,k,level,h_max,n_dof,mode,lambda,sample_max,samples,seed,"
        "verdict\n";
  const char* verdict = pass ? "pass" : "fail";
  for (const AuditResult& r : rows) {
    os << r.inequality << ',' << r.k << ',' << r.level << ','
       << format_g17(r.h_max) << ',' << r.n_dof << ',' << mode_name(r.mode)
       << ',';
    if (r.unbounded)
      os << "unbounded";
    else if (r.mode == AuditMode::Eigen)
      os << format_g17(r.lambda);
    os << ',';
    if (r.samples > 0) os << format_g17(r.sample_max);
    os << ',' << r.samples << ',' << r.seed << ',' << verdict << "\n";
  }
}

void write_convergence_csv(std::ostream& os,
                           const std::vector<ConvergenceRow>& rows,
                           const std::vector<std::string>& comments) {
  write_comments(os, comments);
  os << "experiment,k,level,h_max,n_dof,energy,err_u,err_p,order_u,order_p,"
        "residual\n";
  for (const ConvergenceRow& r : rows) {
    os << r.experiment << ',' << r.k << ',' << r.level << ','
       << format_g17(r.h_max) << ',' << r.n_dof << ','
       << format_g17(r.energy) << ',' << format_g17(r.err_u) << ','
       << format_g17(r.err_p) << ',' << format_g17(r.order_u) << ','
       << format_g17(r.order_p) << ',' << format_g17(r.residual) << "\n";
  }
}

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 480.0;
constexpr double kMarginL = 70.0;
constexpr double kMarginR = 20.0;
constexpr double kMarginT = 40.0;
constexpr double kMarginB = 50.0;

const char* kPalette[6] = {"#1f77b4", "#d62728", "#2ca02c",
                           "#9467bd", "#ff7f0e", "#17becf"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

void write_svg_loglog(std::ostream& os, const std::string& title,
                      const std::string& xlabel, const std::string& ylabel,
                      const std::vector<PlotSeries>& series) {
  double lxmin = std::numeric_limits<double>::infinity(), lxmax = -lxmin;
  double lymin = lxmin, lymax = -lxmin;
  for (const PlotSeries& s : series) {
    const std::size_t n = std::min(s.x.size(), s.y.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (!(s.x[i] > 0.0) || !(s.y[i] > 0.0)) continue;
      lxmin = std::min(lxmin, std::log10(s.x[i]));
      lxmax = std::max(lxmax, std::log10(s.x[i]));
      lymin = std::min(lymin, std::log10(s.y[i]));
      lymax = std::max(lymax, std::log10(s.y[i]));
    }
  }
  if (!(lxmin <= lxmax)) {  // no drawable point: keep a unit window
    lxmin = lymin = -1.0;
    lxmax = lymax = 1.0;
  }
  if (lxmax - lxmin < 1e-9) {
    lxmin -= 0.5;
    lxmax += 0.5;
  }
  if (lymax - lymin < 1e-9) {
    lymin -= 0.5;
    lymax += 0.5;
  }
  const double plot_w = kWidth - kMarginL - kMarginR;
  const double plot_h = kHeight - kMarginT - kMarginB;
  auto px = [&](double lx) {
    return kMarginL + (lx - lxmin) / (lxmax - lxmin) * plot_w;
  };
  auto py = [&](double ly) {
    return kMarginT + (lymax - ly) / (lymax - lymin) * plot_h;
  };

  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" "
        "width=\""
     << fmt(kWidth) << "\" height=\"" << fmt(kHeight) << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << fmt(kWidth / 2) << "\" y=\"22\" "
        "text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
     << xml_escape(title) << "</text>\n";

  // frame
  os << "<rect x=\"" << fmt(kMarginL) << "\" y=\"" << fmt(kMarginT)
     << "\" width=\"" << fmt(plot_w) << "\" height=\"" << fmt(plot_h)
     << "\" fill=\"none\" stroke=\"black\"/>\n";

  // decade ticks
  for (int d = static_cast<int>(std::ceil(lxmin));
       d <= static_cast<int>(std::floor(lxmax)); ++d) {
    const double x = px(d);
    os << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(kMarginT) << "\" x2=\""
       << fmt(x) << "\" y2=\"" << fmt(kMarginT + plot_h)
       << "\" stroke=\"#cccccc\" stroke-dasharray=\"3,3\"/>\n";
    os << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(kMarginT + plot_h + 18)
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
          "font-size=\"12\">1e"
       << d << "</text>\n";
  }
  for (int d = static_cast<int>(std::ceil(lymin));
       d <= static_cast<int>(std::floor(lymax)); ++d) {
    const double y = py(d);
    os << "<line x1=\"" << fmt(kMarginL) << "\" y1=\"" << fmt(y) << "\" x2=\""
       << fmt(kMarginL + plot_w) << "\" y2=\"" << fmt(y)
       << "\" stroke=\"#cccccc\" stroke-dasharray=\"3,3\"/>\n";
    os << "<text x=\"" << fmt(kMarginL - 8) << "\" y=\"" << fmt(y + 4)
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
          "font-size=\"12\">1e"
       << d << "</text>\n";
  }

  // axis labels
  os << "<text x=\"" << fmt(kMarginL + plot_w / 2) << "\" y=\""
     << fmt(kHeight - 12)
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        "font-size=\"13\">"
     << xml_escape(xlabel) << "</text>\n";
  os << "<text x=\"16\" y=\"" << fmt(kMarginT + plot_h / 2)
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        "font-size=\"13\" transform=\"rotate(-90 16 "
     << fmt(kMarginT + plot_h / 2) << ")\">" << xml_escape(ylabel)
     << "</text>\n";

  // series
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % 6];
    const PlotSeries& ps = series[s];
    const std::size_t n = std::min(ps.x.size(), ps.y.size());
    std::string pts;
    for (std::size_t i = 0; i < n; ++i) {
      if (!(ps.x[i] > 0.0) || !(ps.y[i] > 0.0)) continue;
      const double x = px(std::log10(ps.x[i]));
      const double y = py(std::log10(ps.y[i]));
      pts += fmt(x) + "," + fmt(y) + " ";
      os << "<circle cx=\"" << fmt(x) << "\" cy=\"" << fmt(y)
         << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    if (!pts.empty()) {
      os << "<polyline points=\"" << pts << "\" fill=\"none\" stroke=\""
         << color << "\" stroke-width=\"1.5\"/>\n";
    }
    const double ly = kMarginT + 14 + 16 * static_cast<double>(s);
    const double lx = kMarginL + plot_w - 150;
    os << "<line x1=\"" << fmt(lx) << "\" y1=\"" << fmt(ly - 4) << "\" x2=\""
       << fmt(lx + 24) << "\" y2=\"" << fmt(ly - 4) << "\" stroke=\"" << color
       << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << fmt(lx + 30) << "\" y=\"" << fmt(ly)
       << "\" font-family=\"sans-serif\" font-size=\"12\">"
       << xml_escape(ps.label) << "</text>\n";
  }
  os << "</svg>\n";
}

}  // namespace hfem

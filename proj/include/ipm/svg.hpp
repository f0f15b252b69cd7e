#pragma once

#include "ipm/experiments.hpp"
#include "ipm/io.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

namespace ipm::svg {

// Plot area mapping; y grows upward in data space.
struct Frame {
  double x0, x1, y0, y1;
  bool log_x = false, log_y = false;
  double width = 640, height = 420, margin = 60;

  double tx(double x) const {
    const double a = log_x ? std::log10(x0) : x0, b = log_x ? std::log10(x1) : x1;
    const double v = log_x ? std::log10(x) : x;
    return margin + (v - a) / (b - a) * (width - 2 * margin);
  }
  double ty(double y) const {
    const double a = log_y ? std::log10(y0) : y0, b = log_y ? std::log10(y1) : y1;
    const double v = log_y ? std::log10(y) : y;
    return height - margin - (v - a) / (b - a) * (height - 2 * margin);
  }
};

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

inline void open(std::ostringstream& o, const Frame& f) {
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.width << "\" height=\"" << f.height
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

inline void axes(std::ostringstream& o, const Frame& f, const std::string& xlabel, const std::string& ylabel) {
  const double l = f.margin, r = f.width - f.margin, t = f.margin, b = f.height - f.margin;
  o << "<g stroke=\"black\" fill=\"none\"><line x1=\"" << l << "\" y1=\"" << b << "\" x2=\"" << r << "\" y2=\"" << b
    << "\"/><line x1=\"" << l << "\" y1=\"" << t << "\" x2=\"" << l << "\" y2=\"" << b << "\"/></g>\n";
  auto ticks = [](double a, double b, bool lg) {
    std::vector<double> v;
    if (lg) {
      for (int e = static_cast<int>(std::floor(std::log10(a))); e <= static_cast<int>(std::ceil(std::log10(b))); ++e) {
        const double p = std::pow(10.0, e);
        if (p >= a * (1 - 1e-12) && p <= b * (1 + 1e-12)) v.push_back(p);
      }
    } else {
      for (int i = 0; i <= 4; ++i) v.push_back(a + (b - a) * i / 4);
    }
    return v;
  };
  for (double x : ticks(f.x0, f.x1, f.log_x))
    o << "<text x=\"" << num(f.tx(x)) << "\" y=\"" << num(b + 16) << "\" text-anchor=\"middle\">" << fmt(x)
      << "</text>\n";
  for (double y : ticks(f.y0, f.y1, f.log_y)) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", y);
    o << "<text x=\"" << num(l - 6) << "\" y=\"" << num(f.ty(y) + 4) << "\" text-anchor=\"end\">" << buf
      << "</text>\n";
  }
  o << "<text x=\"" << num((l + r) / 2) << "\" y=\"" << num(f.height - 16) << "\" text-anchor=\"middle\">"
    << escape(xlabel) << "</text>\n"
    << "<text x=\"16\" y=\"" << num((t + b) / 2) << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
    << num((t + b) / 2) << ")\">" << escape(ylabel) << "</text>\n";
}

inline double kernel_position(const KernelSpec& s) {
  return s.variant == KernelVariant::multiscale ? s.sigmas.front() : s.sigma;
}

// Per-trial values as dots, per-kernel aggregate as a line. metric: "beta" or "divergence".
inline std::string sweep_plot(const SweepResult& r, const std::string& metric) {
  require(metric == "beta" || metric == "divergence", "sweep_plot: metric must be 'beta' or 'divergence'");
  const bool beta = metric == "beta";
  double xmin = INFINITY, xmax = 0, ymax = beta ? 1.0 : 1.0;
  for (const auto& k : r.kernels) {
    xmin = std::min(xmin, kernel_position(k));
    xmax = std::max(xmax, kernel_position(k));
  }
  for (const auto& row : r.rows) {
    const double v = beta ? row.beta : row.divergence_fraction;
    if (row.error.empty() && std::isfinite(v)) ymax = std::max(ymax, v);
  }
  Frame f{xmin / 2, xmax * 2, 0.0, ymax * 1.05};
  f.log_x = true;
  std::ostringstream o;
  open(o, f);
  axes(o, f, "kernel width sigma", beta ? "normalized Wasserstein beta" : "divergence fraction");
  for (const auto& row : r.rows) {
    const double v = beta ? row.beta : row.divergence_fraction;
    if (!row.error.empty() || !std::isfinite(v)) continue;
    o << "<circle cx=\"" << num(f.tx(kernel_position(r.kernels[static_cast<std::size_t>(row.kernel_index)])))
      << "\" cy=\"" << num(f.ty(v)) << "\" r=\"2.5\" fill=\"steelblue\" fill-opacity=\"0.5\"/>\n";
  }
  std::vector<std::pair<double, double>> line;
  for (std::size_t k = 0; k < r.summary.size(); ++k) {
    const double v = beta ? r.summary[k].median_beta : r.summary[k].mean_divergence_fraction;
    if (std::isfinite(v)) line.emplace_back(kernel_position(r.kernels[k]), v);
  }
  std::sort(line.begin(), line.end());
  o << "<polyline fill=\"none\" stroke=\"crimson\" stroke-width=\"2\" points=\"";
  for (const auto& [x, y] : line) o << num(f.tx(x)) << "," << num(f.ty(y)) << " ";
  o << "\"/>\n</svg>\n";
  return o.str();
}

// 2-d trajectories: one <path> per generated point, a cross at its final
// position, circles at true points, optional 100x100 discriminator heatmap.
inline std::string trajectory_plot(const Scenario& sc, const std::vector<Snapshot>& snaps,
                                   const DiscriminatorState* heat = nullptr, int grid = 100) {
  require(sc.pr.dim() == 2, "trajectory plot needs 2-d points");
  require(!snaps.empty(), "trajectory plot needs snapshots");
  double lo = -1.5, hi = 1.5;
  auto widen = [&](double v) {
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  };
  for (int j = 0; j < sc.pr.size(); ++j) widen(sc.pr.point(j)(0)), widen(sc.pr.point(j)(1));
  for (const auto& s : snaps)
    for (Eigen::Index j = 0; j < s.points.cols(); ++j) widen(s.points(0, j)), widen(s.points(1, j));
  const double pad = 0.05 * (hi - lo);
  Frame f{lo - pad, hi + pad, lo - pad, hi + pad};
  f.width = f.height = 520;
  std::ostringstream o;
  open(o, f);
  if (heat) {
    Vector x(2);
    std::vector<double> vals(static_cast<std::size_t>(grid * grid));
    double vmax = 0.0;
    for (int a = 0; a < grid; ++a)
      for (int b = 0; b < grid; ++b) {
        x << f.x0 + (a + 0.5) * (f.x1 - f.x0) / grid, f.y0 + (b + 0.5) * (f.y1 - f.y0) / grid;
        const double v = heat->eval(x);
        vals[static_cast<std::size_t>(a * grid + b)] = v;
        if (std::isfinite(v)) vmax = std::max(vmax, std::abs(v));
      }
    const double cw = (f.width - 2 * f.margin) / grid;
    o << "<g shape-rendering=\"crispEdges\">\n";
    for (int a = 0; a < grid; ++a)
      for (int b = 0; b < grid; ++b) {
        const double v = vals[static_cast<std::size_t>(a * grid + b)];
        const double t = vmax > 0 && std::isfinite(v) ? v / vmax : 0.0;  // in [-1, 1]
        const int red = t > 0 ? 255 : static_cast<int>(255 * (1 + t));
        const int blue = t < 0 ? 255 : static_cast<int>(255 * (1 - t));
        const int green = static_cast<int>(255 * (1 - std::abs(t)));
        o << "<rect x=\"" << num(f.margin + a * cw) << "\" y=\"" << num(f.height - f.margin - (b + 1) * cw)
          << "\" width=\"" << num(cw) << "\" height=\"" << num(cw) << "\" fill=\"rgb(" << red << "," << green << ","
          << blue << ")\"/>\n";
      }
    o << "</g>\n";
  }
  axes(o, f, "x_0", "x_1");
  const auto n = snaps.front().points.cols();
  for (Eigen::Index j = 0; j < n; ++j) {
    o << "<path fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.2\" d=\"";
    char cmd = 'M';
    for (const auto& s : snaps) {
      if (!std::isfinite(s.points(0, j)) || !std::isfinite(s.points(1, j))) break;
      o << cmd << num(f.tx(s.points(0, j))) << "," << num(f.ty(s.points(1, j))) << " ";
      cmd = 'L';
    }
    o << "\"/>\n";
  }
  const Matrix& last = snaps.back().points;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (!std::isfinite(last(0, j)) || !std::isfinite(last(1, j))) continue;
    const double cx = f.tx(last(0, j)), cy = f.ty(last(1, j));
    o << "<g stroke=\"black\" stroke-width=\"1.5\"><line x1=\"" << num(cx - 5) << "\" y1=\"" << num(cy - 5)
      << "\" x2=\"" << num(cx + 5) << "\" y2=\"" << num(cy + 5) << "\"/><line x1=\"" << num(cx - 5) << "\" y1=\""
      << num(cy + 5) << "\" x2=\"" << num(cx + 5) << "\" y2=\"" << num(cy - 5) << "\"/></g>\n";
  }
  for (int j = 0; j < sc.pr.size(); ++j)
    o << "<circle cx=\"" << num(f.tx(sc.pr.point(j)(0))) << "\" cy=\"" << num(f.ty(sc.pr.point(j)(1)))
      << "\" r=\"5\" fill=\"orange\" stroke=\"black\"/>\n";
  o << "</svg>\n";
  return o.str();
}

// Distance to the true point against step, log-y.
inline std::string concat_plot(const std::vector<ConcatCurve>& curves) {
  double ymin = INFINITY, ymax = 0, xmax = 1;
  for (const auto& c : curves)
    for (std::size_t i = 0; i < c.distance.size(); ++i)
      if (std::isfinite(c.distance[i]) && c.distance[i] > 0) {
        ymin = std::min(ymin, c.distance[i]);
        ymax = std::max(ymax, c.distance[i]);
        xmax = std::max(xmax, static_cast<double>(c.steps[i]));
      }
  if (!(ymax > 0)) ymin = 1e-3, ymax = 10;
  Frame f{0, xmax, std::max(ymin, 1e-12) / 2, ymax * 2};
  f.log_y = true;
  std::ostringstream o;
  open(o, f);
  axes(o, f, "step", "distance to true point");
  const char* colors[] = {"steelblue", "seagreen", "darkorange", "crimson", "purple", "gray"};
  for (std::size_t k = 0; k < curves.size(); ++k) {
    const auto& c = curves[k];
    const char* col = colors[k % 6];
    o << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < c.distance.size(); ++i)
      if (std::isfinite(c.distance[i]) && c.distance[i] > 0)
        o << num(f.tx(static_cast<double>(c.steps[i]))) << "," << num(f.ty(c.distance[i])) << " ";
    o << "\"/>\n<text x=\"" << num(f.width - f.margin - 150) << "\" y=\"" << num(f.margin + 16 * k) << "\" fill=\""
      << col << "\">" << escape(c.spec.label()) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace ipm::svg

namespace ipm {

// Writes sweep.csv, summary.json, figures, and (with trajectories) per-trial
// snapshot CSVs. timings.csv only with timing on; everything else is
// deterministic for a fixed config.
inline void emit_outputs(const SweepResult& r, const ExperimentConfig& cfg, const std::filesystem::path& dir,
                         bool heatmap = false) {
  ensure_writable_dir(dir);
  write_text(dir / "sweep.csv", sweep_csv(r, cfg.timing));
  write_text(dir / "summary.json", sweep_summary_json(r, cfg).dump(2) + "\n");
  if (cfg.timing) write_text(dir / "timings.csv", timings_csv(r));
  write_text(dir / "beta_vs_sigma.svg", svg::sweep_plot(r, "beta"));
  write_text(dir / "divergence_vs_sigma.svg", svg::sweep_plot(r, "divergence"));
  if (!cfg.trajectories) return;
  for (const auto& row : r.rows) {
    if (!row.error.empty() || row.snapshots.empty()) continue;
    const std::string stem = "trajectory_" + kernel_id(static_cast<std::size_t>(row.kernel_index)) + "_t" +
                             std::to_string(row.trial);
    TrainingTrace t;
    t.snapshots = row.snapshots;
    write_text(dir / (stem + ".csv"), trace_csv(t));
    const Scenario& sc = r.scenarios[static_cast<std::size_t>(row.trial)];
    if (sc.pr.dim() == 2)
      write_text(dir / (stem + ".svg"),
                 svg::trajectory_plot(sc, row.snapshots,
                                      heatmap && row.final_discriminator ? &*row.final_discriminator : nullptr));
  }
}

inline void emit_concat(const std::vector<ConcatCurve>& curves, const std::filesystem::path& dir) {
  ensure_writable_dir(dir);
  std::ostringstream csv;
  csv << "kernel_id,kernel,step,distance\n";
  Json summary = Json::array();
  for (std::size_t k = 0; k < curves.size(); ++k) {
    const auto& c = curves[k];
    for (std::size_t i = 0; i < c.steps.size(); ++i)
      csv << kernel_id(k) << ",\"" << c.spec.label() << "\"," << c.steps[i] << "," << fmt(c.distance[i]) << "\n";
    summary.push_back({{"kernel_id", kernel_id(k)},
                       {"kernel", to_json(c.spec)},
                       {"final_distance", c.distance.empty() ? Json(nullptr) : num(c.distance.back())},
                       {"diverged", c.diverged},
                       {"error", c.error}});
  }
  write_text(dir / "concat.csv", csv.str());
  write_text(dir / "concat_summary.json", summary.dump(2) + "\n");
  write_text(dir / "concat.svg", svg::concat_plot(curves));
}

}  // namespace ipm

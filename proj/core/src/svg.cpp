#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "gcrl/analysis.hpp"
#include "gcrl/errors.hpp"

namespace gcrl::analysis {

namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 55.0;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                "#9467bd", "#8c564b", "#17becf"};

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = 0.0;
  double hi = 1.0;
};

// Expands [lo, hi] to round tick values, five or so intervals.
Range nice(double lo, double hi, std::vector<double>& ticks) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double raw = (hi - lo) / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double norm = raw / mag;
  const double step = (norm < 1.5 ? 1.0 : norm < 3.0 ? 2.0 : norm < 7.0 ? 5.0 : 10.0) * mag;
  Range r{std::floor(lo / step + 1e-9) * step, std::ceil(hi / step - 1e-9) * step};
  ticks.clear();
  for (double v = r.lo; v <= r.hi + step * 1e-6; v += step) {
    ticks.push_back(std::abs(v) < step * 1e-9 ? 0.0 : v);
  }
  return r;
}

class Plot {
 public:
  Plot(std::string title, std::string xlabel, std::string ylabel, double x0, double x1, double y0,
       double y1)
      : title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)) {
    x_ = nice(x0, x1, xticks_);
    y_ = nice(y0, y1, yticks_);
  }

  double px(double x) const {
    return kLeft + (x - x_.lo) / (x_.hi - x_.lo) * (kWidth - kLeft - kRight);
  }
  double py(double y) const {
    return kHeight - kBottom - (y - y_.lo) / (y_.hi - y_.lo) * (kHeight - kTop - kBottom);
  }

  void point(double x, double y, const char* color) {
    body_ += "<circle cx=\"" + fmt("%.2f", px(x)) + "\" cy=\"" + fmt("%.2f", py(y)) +
             "\" r=\"3\" fill=\"" + color + "\" fill-opacity=\"0.6\"/>\n";
  }

  void bar(double x0, double x1, double y, const char* color) {
    const double top = py(std::max(y, y_.lo));
    body_ += "<rect x=\"" + fmt("%.2f", px(x0)) + "\" y=\"" + fmt("%.2f", top) + "\" width=\"" +
             fmt("%.2f", px(x1) - px(x0)) + "\" height=\"" + fmt("%.2f", py(y_.lo) - top) +
             "\" fill=\"" + color + "\" fill-opacity=\"0.35\"/>\n";
  }

  void line(const std::vector<double>& xs, const std::vector<double>& ys, const char* color) {
    if (xs.empty()) return;
    body_ += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
             "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (i) body_ += ' ';
      body_ += fmt("%.2f", px(xs[i])) + "," + fmt("%.2f", py(ys[i]));
    }
    body_ += "\"/>\n";
  }

  void legend(const std::string& label, const char* color) {
    const double y = kTop + 14.0 * static_cast<double>(legend_++);
    body_ += "<rect x=\"" + fmt("%.2f", kWidth - kRight - 120.0) + "\" y=\"" + fmt("%.2f", y) +
             "\" width=\"10\" height=\"10\" fill=\"" + color + "\"/>\n";
    body_ += "<text x=\"" + fmt("%.2f", kWidth - kRight - 105.0) + "\" y=\"" +
             fmt("%.2f", y + 9.0) + "\" font-size=\"11\">" + escape(label) + "</text>\n";
  }

  std::string svg() const {
    std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt("%.0f", kWidth) +
         "\" height=\"" + fmt("%.0f", kHeight) + "\" viewBox=\"0 0 " + fmt("%.0f", kWidth) + " " +
         fmt("%.0f", kHeight) + "\" font-family=\"sans-serif\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += "<text x=\"" + fmt("%.2f", kWidth / 2) + "\" y=\"22\" font-size=\"14\" " +
         "text-anchor=\"middle\">" + escape(title_) + "</text>\n";
    const double x0 = px(x_.lo), x1 = px(x_.hi), y0 = py(y_.lo), y1 = py(y_.hi);
    s += "<g stroke=\"#000\" stroke-width=\"1\">\n";
    s += "<line x1=\"" + fmt("%.2f", x0) + "\" y1=\"" + fmt("%.2f", y0) + "\" x2=\"" +
         fmt("%.2f", x1) + "\" y2=\"" + fmt("%.2f", y0) + "\"/>\n";
    s += "<line x1=\"" + fmt("%.2f", x0) + "\" y1=\"" + fmt("%.2f", y0) + "\" x2=\"" +
         fmt("%.2f", x0) + "\" y2=\"" + fmt("%.2f", y1) + "\"/>\n";
    for (double v : xticks_) {
      s += "<line x1=\"" + fmt("%.2f", px(v)) + "\" y1=\"" + fmt("%.2f", y0) + "\" x2=\"" +
           fmt("%.2f", px(v)) + "\" y2=\"" + fmt("%.2f", y0 + 5.0) + "\"/>\n";
    }
    for (double v : yticks_) {
      s += "<line x1=\"" + fmt("%.2f", x0 - 5.0) + "\" y1=\"" + fmt("%.2f", py(v)) + "\" x2=\"" +
           fmt("%.2f", x0) + "\" y2=\"" + fmt("%.2f", py(v)) + "\"/>\n";
    }
    s += "</g>\n<g font-size=\"11\">\n";
    for (double v : xticks_) {
      s += "<text x=\"" + fmt("%.2f", px(v)) + "\" y=\"" + fmt("%.2f", y0 + 18.0) +
           "\" text-anchor=\"middle\">" + fmt("%g", v) + "</text>\n";
    }
    for (double v : yticks_) {
      s += "<text x=\"" + fmt("%.2f", x0 - 8.0) + "\" y=\"" + fmt("%.2f", py(v) + 4.0) +
           "\" text-anchor=\"end\">" + fmt("%g", v) + "</text>\n";
    }
    s += "</g>\n";
    s += "<text x=\"" + fmt("%.2f", (x0 + x1) / 2) + "\" y=\"" + fmt("%.2f", kHeight - 15.0) +
         "\" font-size=\"12\" text-anchor=\"middle\">" + escape(xlabel_) + "</text>\n";
    s += "<text x=\"18\" y=\"" + fmt("%.2f", (y0 + y1) / 2) +
         "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
         fmt("%.2f", (y0 + y1) / 2) + ")\">" + escape(ylabel_) + "</text>\n";
    s += body_;
    s += "</svg>\n";
    return s;
  }

 private:
  std::string title_, xlabel_, ylabel_;
  Range x_, y_;
  std::vector<double> xticks_, yticks_;
  std::string body_;
  int legend_ = 0;
};

template <typename T, typename F>
Range extent(const std::vector<T>& rows, F value, Range fallback) {
  if (rows.empty()) return fallback;
  Range r{value(rows.front()), value(rows.front())};
  for (const auto& row : rows) {
    r.lo = std::min(r.lo, value(row));
    r.hi = std::max(r.hi, value(row));
  }
  return r;
}

}  // namespace

std::string render_reward_distance_svg(const Tables& t) {
  const Range x = extent(t.episodes, [](const EpisodeRow& r) { return r.target_distance; },
                         Range{0.0, 0.6});
  Plot p("Episode reward vs target distance", "target distance (m)", "cumulative reward",
         std::min(x.lo, 0.0), x.hi, -60.0, 0.0);
  const std::pair<const char*, const char*> kinds[] = {
      {"grab", kPalette[0]}, {"punch", kPalette[1]}, {"none", "#7f7f7f"}};
  for (const auto& [kind, color] : kinds) {
    bool any = false;
    for (const auto& r : t.episodes) {
      if (r.kind != kind) continue;
      p.point(r.target_distance, r.cumulative_reward, color);
      any = true;
    }
    if (any) p.legend(kind, color);
  }
  return p.svg();
}

std::string render_attempts_svg(const Tables& t) {
  const Range a = extent(t.episodes, [](const EpisodeRow& r) { return double(r.attempts); },
                         Range{0.0, 5.0});
  Plot p("Attempts per episode vs steps remaining", "attempts", "steps remaining at success",
         0.0, std::max(a.hi, 1.0), 0.0, 60.0);
  for (const auto& r : t.episodes) {
    if (r.first_success_step < 0) continue;
    p.point(r.attempts, r.steps_remaining, kPalette[0]);
  }
  return p.svg();
}

std::string render_success_density_svg(const Tables& t) {
  const Range x = extent(t.success_vs_x, [](const SuccessBin& b) { return b.x_lo; },
                         Range{0.0, 1.0});
  const Range xh = extent(t.success_vs_x, [](const SuccessBin& b) { return b.x_hi; },
                          Range{0.0, 1.0});
  const Range d = extent(t.success_vs_x, [](const SuccessBin& b) { return b.success_density; },
                         Range{0.0, 1.0});
  Plot p("Success density along x", "target x (m)", "density of successful targets", x.lo,
         xh.hi, 0.0, std::max(d.hi, 1e-9));
  std::map<std::string, std::vector<const SuccessBin*>> by_variant;
  for (const auto& b : t.success_vs_x) by_variant[b.variant].push_back(&b);
  std::size_t color = 0;
  for (const auto& [variant, bins] : by_variant) {
    const char* c = kPalette[color++ % std::size(kPalette)];
    std::vector<double> xs, ys;
    for (const auto* b : bins) {
      xs.push_back(0.5 * (b->x_lo + b->x_hi));
      ys.push_back(b->success_density);
    }
    p.line(xs, ys, c);
    p.legend(variant, c);
  }
  return p.svg();
}

std::vector<std::string> render_plots(const Tables& t, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<std::string> written;
  const std::pair<const char*, std::string> plots[] = {
      {"reward_vs_distance.svg", render_reward_distance_svg(t)},
      {"attempts.svg", render_attempts_svg(t)},
      {"success_density.svg", render_success_density_svg(t)}};
  for (const auto& [name, svg] : plots) {
    const std::string path = (fs::path(dir) / name).string();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + path + "'");
    out << svg;
    written.push_back(path);
  }
  return written;
}

}  // namespace gcrl::analysis

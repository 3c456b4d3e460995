#include "crashml/report_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace crashml {

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string num2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string width_label(double w) { return num(w) + " ft"; }

}  // namespace

void atomic_write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw std::runtime_error("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::string kruskal_to_csv(const KruskalWallisResult& result) {
  std::string out = "chi_squared,degrees_of_freedom,p_value\n";
  out += num(result.h) + "," + std::to_string(result.df) + "," + format_pvalue(result.p) + "\n";
  return out;
}

std::string percent_changes_to_csv(const PercentChangeTable& table) {
  std::string out = "lane_width_from_ft,lane_width_to_ft,percent_change\n";
  for (const auto& row : table.rows) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%+.1f\n", row.width_from, row.width_to,
                  row.percent);
    out += buf;
  }
  out += "grand_mean," + num(table.grand_mean) + ",\n";
  return out;
}

std::string pairwise_to_csv(const PairwiseMatrix& matrix) {
  const auto k = matrix.labels.size();
  std::string out = "lane_width";
  for (std::size_t j = 0; j + 1 < k; ++j) {
    out += "," + std::to_string(j + 1) + ": " + matrix.labels[j];
  }
  out += "\n";
  for (std::size_t i = 1; i < k; ++i) {
    out += std::to_string(i + 1) + ": " + matrix.labels[i];
    for (std::size_t j = 0; j + 1 < k; ++j) {
      out += ",";
      if (j < i) {
        out += format_pvalue(
            matrix.p(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
      } else {
        out += "-";
      }
    }
    out += "\n";
  }
  return out;
}

std::string boxplot_data_to_csv(const EffectReport& report) {
  std::string out =
      "lane_width_ft,n,mean,min,q1,median,q3,max,whisker_lo,whisker_hi,outlier_count\n";
  for (std::size_t g = 0; g < report.groups.size(); ++g) {
    const auto& s = report.groups[g];
    out += num(report.widths[g]) + "," + std::to_string(s.n) + "," + num(s.mean) + "," +
           num(s.min) + "," + num(s.q1) + "," + num(s.median) + "," + num(s.q3) + "," +
           num(s.max) + "," + num(s.whisker_lo) + "," + num(s.whisker_hi) + "," +
           std::to_string(s.outliers.size()) + "\n";
  }
  return out;
}

std::string sensitivity_to_csv(const std::vector<SensitivityCurve>& curves) {
  std::string out = "model,trees,test_mae,test_mse\n";
  for (const auto& curve : curves) {
    for (const auto& pt : curve.points) {
      out += family_name(curve.family) + "," + std::to_string(pt.trees) + "," + num(pt.mae) +
             "," + num(pt.mse) + "\n";
    }
  }
  return out;
}

namespace {

struct Canvas {
  std::string body;
  double width, height;

  void line(double x1, double y1, double x2, double y2, const char* stroke, double sw = 1.0) {
    body += "<line x1=\"" + num2(x1) + "\" y1=\"" + num2(y1) + "\" x2=\"" + num2(x2) +
            "\" y2=\"" + num2(y2) + "\" stroke=\"" + stroke + "\" stroke-width=\"" + num2(sw) +
            "\"/>\n";
  }
  void rect(double x, double y, double w, double h, const char* fill, const char* stroke) {
    body += "<rect x=\"" + num2(x) + "\" y=\"" + num2(y) + "\" width=\"" + num2(w) +
            "\" height=\"" + num2(h) + "\" fill=\"" + fill + "\" stroke=\"" + stroke + "\"/>\n";
  }
  void circle(double cx, double cy, double r, const char* fill) {
    body += "<circle cx=\"" + num2(cx) + "\" cy=\"" + num2(cy) + "\" r=\"" + num2(r) +
            "\" fill=\"" + fill + "\"/>\n";
  }
  void text(double x, double y, const std::string& s, int size, const char* anchor) {
    body += "<text x=\"" + num2(x) + "\" y=\"" + num2(y) + "\" font-size=\"" +
            std::to_string(size) + "\" font-family=\"sans-serif\" text-anchor=\"" + anchor +
            "\">" + s + "</text>\n";
  }
  void vtext(double x, double y, const std::string& s, int size) {
    body += "<text x=\"" + num2(x) + "\" y=\"" + num2(y) + "\" font-size=\"" +
            std::to_string(size) +
            "\" font-family=\"sans-serif\" text-anchor=\"middle\" transform=\"rotate(-90 " +
            num2(x) + " " + num2(y) + ")\">" + s + "</text>\n";
  }
  void polyline(const std::string& pts, const char* stroke, double sw) {
    body += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + stroke +
            "\" stroke-width=\"" + num2(sw) + "\"/>\n";
  }
  std::string finish() const {
    return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num2(width) + "\" height=\"" +
           num2(height) + "\" viewBox=\"0 0 " + num2(width) + " " + num2(height) + "\">\n" +
           "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n" + body + "</svg>\n";
  }
};

std::vector<double> nice_ticks(double lo, double hi, int target) {
  if (!(hi > lo)) hi = lo + 1.0;
  const double raw = (hi - lo) / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double mult : {1.0, 2.0, 5.0, 10.0}) {
    if (mag * mult >= raw) {
      step = mag * mult;
      break;
    }
  }
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-12 * step; t += step) {
    ticks.push_back(t);
  }
  return ticks;
}

}  // namespace

std::string render_boxplot_svg(const EffectReport& report, const std::string& title,
                               const std::string& y_label) {
  const double width = 640, height = 480;
  const double left = 70, right = 40, top = 50, bottom = 60;
  Canvas canvas{"", width, height};

  double lo = report.groups.front().min, hi = report.groups.front().max;
  for (const auto& g : report.groups) {
    lo = std::min(lo, g.min);
    hi = std::max(hi, g.max);
  }
  if (!(hi > lo)) hi = lo + 1.0;
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;

  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;
  const auto y_of = [&](double v) { return top + plot_h * (1.0 - (v - lo) / (hi - lo)); };
  const auto n_groups = report.groups.size();
  const auto x_of = [&](std::size_t g) {
    return left + plot_w * (static_cast<double>(g) + 0.5) / static_cast<double>(n_groups);
  };

  canvas.text(width / 2, 24, title, 16, "middle");
  canvas.line(left, top, left, top + plot_h, "black");
  canvas.line(left, top + plot_h, left + plot_w, top + plot_h, "black");
  for (double t : nice_ticks(lo, hi, 6)) {
    const double y = y_of(t);
    canvas.line(left - 4, y, left, y, "black");
    canvas.text(left - 8, y + 4, num(t), 11, "end");
  }
  canvas.vtext(20, top + plot_h / 2, y_label, 12);

  const double half_box = plot_w / static_cast<double>(n_groups) * 0.18;
  std::string means_pts;
  for (std::size_t g = 0; g < n_groups; ++g) {
    const auto& s = report.groups[g];
    const double x = x_of(g);
    canvas.line(x, y_of(s.whisker_lo), x, y_of(s.q1), "black");
    canvas.line(x, y_of(s.q3), x, y_of(s.whisker_hi), "black");
    canvas.line(x - half_box / 2, y_of(s.whisker_lo), x + half_box / 2, y_of(s.whisker_lo), "black");
    canvas.line(x - half_box / 2, y_of(s.whisker_hi), x + half_box / 2, y_of(s.whisker_hi), "black");
    canvas.rect(x - half_box, y_of(s.q3), 2 * half_box, y_of(s.q1) - y_of(s.q3), "#c6dbef",
                "black");
    canvas.line(x - half_box, y_of(s.median), x + half_box, y_of(s.median), "black", 2.0);
    for (double o : s.outliers) canvas.circle(x, y_of(o), 1.6, "#00000055");
    means_pts += num2(x) + "," + num2(y_of(s.mean)) + " ";
    canvas.circle(x, y_of(s.mean), 3.0, "#d62728");
    canvas.text(x, top + plot_h + 18, width_label(report.widths[g]), 12, "middle");
  }
  canvas.polyline(means_pts, "#d62728", 1.5);
  canvas.text(width / 2, height - 16, "lane width", 12, "middle");
  return canvas.finish();
}

std::string render_sensitivity_svg(const std::vector<SensitivityCurve>& curves, bool use_mse,
                                   const std::string& title) {
  const double width = 640, height = 440;
  const double left = 80, right = 40, top = 50, bottom = 60;
  Canvas canvas{"", width, height};

  double x_lo = 1e300, x_hi = -1e300, y_lo = 1e300, y_hi = -1e300;
  for (const auto& curve : curves) {
    for (const auto& pt : curve.points) {
      const double v = use_mse ? pt.mse : pt.mae;
      x_lo = std::min(x_lo, static_cast<double>(pt.trees));
      x_hi = std::max(x_hi, static_cast<double>(pt.trees));
      y_lo = std::min(y_lo, v);
      y_hi = std::max(y_hi, v);
    }
  }
  if (!(x_hi > x_lo)) x_hi = x_lo + 1.0;
  if (!(y_hi > y_lo)) y_hi = y_lo + 1.0;
  const double pad = 0.06 * (y_hi - y_lo);
  y_lo -= pad;
  y_hi += pad;

  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;
  const auto x_of = [&](double k) { return left + plot_w * (k - x_lo) / (x_hi - x_lo); };
  const auto y_of = [&](double v) { return top + plot_h * (1.0 - (v - y_lo) / (y_hi - y_lo)); };

  canvas.text(width / 2, 24, title, 16, "middle");
  canvas.line(left, top, left, top + plot_h, "black");
  canvas.line(left, top + plot_h, left + plot_w, top + plot_h, "black");
  for (double t : nice_ticks(y_lo, y_hi, 6)) {
    canvas.line(left - 4, y_of(t), left, y_of(t), "black");
    canvas.text(left - 8, y_of(t) + 4, num(t), 11, "end");
  }
  for (double t : nice_ticks(x_lo, x_hi, 8)) {
    canvas.line(x_of(t), top + plot_h, x_of(t), top + plot_h + 4, "black");
    canvas.text(x_of(t), top + plot_h + 18, num(t), 11, "middle");
  }
  canvas.text(width / 2, height - 16, "number of trees", 12, "middle");

  const char* colors[] = {"#1f77b4", "#d62728"};
  int c = 0;
  for (const auto& curve : curves) {
    std::string pts;
    for (const auto& pt : curve.points) {
      pts += num2(x_of(pt.trees)) + "," + num2(y_of(use_mse ? pt.mse : pt.mae)) + " ";
    }
    const char* color = colors[c % 2];
    canvas.polyline(pts, color, 1.8);
    canvas.text(left + plot_w - 4, top + 16 + 16 * c, family_name(curve.family), 12, "end");
    canvas.line(left + plot_w - 70, top + 12 + 16 * c, left + plot_w - 50, top + 12 + 16 * c,
                color, 1.8);
    ++c;
  }
  return canvas.finish();
}

}  // namespace crashml

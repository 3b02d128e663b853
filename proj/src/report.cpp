#include "haystack/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include <fmt/format.h>

#include "haystack/analysis.hpp"

namespace haystack {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string f2(double v) {
  auto s = fmt::format("{:.2f}", v);
  return s == "-0.00" ? "0.00" : s;
}

std::string escape(const std::string& s) {
  std::string out;
  for (const char c : s) {
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

std::string points_attr(const std::vector<std::pair<double, double>>& pts) {
  std::string out;
  for (const auto& [x, y] : pts) {
    if (!out.empty()) out += ' ';
    out += f2(x) + "," + f2(y);
  }
  return out;
}

}  // namespace

Svg::Svg(double width, double height) : width_(width), height_(height) {}

void Svg::rect(double x, double y, double w, double h, const std::string& fill, const std::string& stroke) {
  body_ += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\" stroke=\"{}\"/>\n", f2(x), f2(y),
                       f2(w), f2(h), fill, stroke);
}

void Svg::line(double x1, double y1, double x2, double y2, const std::string& stroke, double width,
               const std::string& dash) {
  body_ += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"{}\"{}/>\n", f2(x1),
                       f2(y1), f2(x2), f2(y2), stroke, f2(width),
                       dash.empty() ? "" : " stroke-dasharray=\"" + dash + "\"");
}

void Svg::polyline(const std::vector<std::pair<double, double>>& points, const std::string& stroke, double width,
                   const std::string& dash) {
  body_ += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{}\"{}/>\n",
                       points_attr(points), stroke, f2(width),
                       dash.empty() ? "" : " stroke-dasharray=\"" + dash + "\"");
}

void Svg::polygon(const std::vector<std::pair<double, double>>& points, const std::string& fill, double opacity) {
  body_ += fmt::format("<polygon points=\"{}\" fill=\"{}\" fill-opacity=\"{}\" stroke=\"none\"/>\n", points_attr(points),
                       fill, f2(opacity));
}

void Svg::circle(double cx, double cy, double r, const std::string& fill) {
  body_ += fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{}\"/>\n", f2(cx), f2(cy), f2(r), fill);
}

void Svg::text(double x, double y, const std::string& s, double size, const std::string& anchor) {
  body_ += fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"{}\" font-family=\"sans-serif\" text-anchor=\"{}\">{}</text>\n",
                       f2(x), f2(y), f2(size), anchor, escape(s));
}

std::string Svg::str() const {
  return fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n"
      "<rect x=\"0\" y=\"0\" width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n{2}</svg>\n",
      f2(width_), f2(height_), body_);
}

std::string ramp_color(double t) {
  static constexpr double stops[][3] = {
      {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
  t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0) * 4.0;
  const int k = std::min(3, static_cast<int>(std::floor(t)));
  const double u = t - k;
  int rgb[3];
  for (int c = 0; c < 3; ++c) rgb[c] = static_cast<int>(std::lround(stops[k][c] + u * (stops[k + 1][c] - stops[k][c])));
  return fmt::format("#{:02x}{:02x}{:02x}", rgb[0], rgb[1], rgb[2]);
}

namespace {

constexpr const char* kBlue = "#1f77b4";
constexpr const char* kRed = "#d62728";
constexpr const char* kGrey = "#7f7f7f";
const char* const kNeedleColors[] = {"#2ca02c", "#9467bd", "#ff7f0e"};

void write_file(const fs::path& path, const std::string& contents, std::vector<fs::path>& written) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << contents;
  written.push_back(path);
}

struct Frame {
  double x0, y0, w, h;        // pixel box
  double xmin, xmax, ymin, ymax;  // data box
  double px(double x) const { return x0 + (x - xmin) / (xmax - xmin) * w; }
  double py(double y) const { return y0 + h - (y - ymin) / (ymax - ymin) * h; }
};

void axes(Svg& svg, const Frame& f, const std::string& xlabel, const std::string& ylabel, int xticks, int yticks) {
  svg.line(f.x0, f.y0 + f.h, f.x0 + f.w, f.y0 + f.h, "black");
  svg.line(f.x0, f.y0, f.x0, f.y0 + f.h, "black");
  for (int t = 0; t <= xticks; ++t) {
    const double v = f.xmin + (f.xmax - f.xmin) * t / xticks;
    svg.line(f.px(v), f.y0 + f.h, f.px(v), f.y0 + f.h + 4, "black");
    svg.text(f.px(v), f.y0 + f.h + 16, fmt::format("{:g}", std::round(v * 100) / 100), 10, "middle");
  }
  for (int t = 0; t <= yticks; ++t) {
    const double v = f.ymin + (f.ymax - f.ymin) * t / yticks;
    svg.line(f.x0 - 4, f.py(v), f.x0, f.py(v), "black");
    svg.text(f.x0 - 6, f.py(v) + 3, fmt::format("{:g}", std::round(v * 100) / 100), 10, "end");
  }
  svg.text(f.x0 + f.w / 2, f.y0 + f.h + 32, xlabel, 11, "middle");
  svg.text(f.x0 - 40, f.y0 - 8, ylabel, 11, "start");
}

std::string stem_of(const json& t) {
  return t["judge"].get<std::string>() + "__" + t["needle"].get<std::string>() + "__" + t["hay"].get<std::string>();
}

const json* find_cell(const json& t, int i, int j) {
  for (const auto& c : t["cells"])
    if (c["i"] == i && c["j"] == j) return &c;
  return nullptr;
}

// ---------------------------------------------------------------------------

void heatmap(const json& t, const json& x, const fs::path& dir, std::vector<fs::path>& written) {
  const int n = t["k_max"].get<int>() + 1;
  const double cell = 56, left = 50, top = 50;
  Svg svg(left + n * cell + 90, top + n * cell + 30);
  svg.text(left, 24, stem_of(t) + ": upper EMD((i,j),(j,i)), lower KDE (i,j) red vs (j,i) blue", 12);

  double max_emd = 0.0;
  for (const auto& e : t["emd_grid"]) max_emd = std::max(max_emd, e["emd"].get<double>());
  const double scale = max_emd > 0 ? max_emd : 1.0;

  std::string csv = "kind,row,col,source_i,source_j,x,value\n";
  for (const auto& e : t["emd_grid"]) {
    const int i = e["i"], j = e["j"];
    const double v = e["emd"];
    svg.rect(left + j * cell, top + i * cell, cell, cell, ramp_color(v / scale), "white");
    svg.text(left + j * cell + cell / 2, top + i * cell + cell / 2 + 4, fmt::format("{:.1f}", v), 10, "middle");
    csv += fmt::format("emd,{},{},{},{},,{}\n", i, j, i, j, format_number(v));
  }
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      const double x0 = left + j * cell, y0 = top + i * cell;
      svg.rect(x0, y0, cell, cell, "#f7f7f7", "white");
      const json* a = find_cell(t, i, j);
      const json* b = i == j ? nullptr : find_cell(t, j, i);
      double ymax = 0.0;
      for (const json* c : {a, b})
        if (c)
          for (const auto& d : (*c)["kde"]["density"]) ymax = std::max(ymax, d.get<double>());
      if (ymax <= 0) continue;
      int series = 0;
      for (const json* c : {a, b}) {
        ++series;
        if (!c) continue;
        const auto& d = (*c)["kde"]["density"];
        std::vector<std::pair<double, double>> pts;
        for (std::size_t k = 0; k < d.size(); ++k) {
          pts.emplace_back(x0 + 2 + x[k].get<double>() / 100.0 * (cell - 4), y0 + cell - 2 - d[k].get<double>() / ymax * (cell - 6));
          csv += fmt::format("kde,{},{},{},{},{},{}\n", i, j, (*c)["i"].get<int>(), (*c)["j"].get<int>(),
                             format_number(x[k]), format_number(d[k]));
        }
        svg.polyline(pts, series == 1 ? kRed : kBlue, 1.0);
      }
    }
  for (int k = 0; k < n; ++k) {
    svg.text(left + k * cell + cell / 2, top - 6, "j=" + std::to_string(k), 10, "middle");
    svg.text(left - 6, top + k * cell + cell / 2 + 4, "i=" + std::to_string(k), 10, "end");
  }
  // color bar
  for (int s = 0; s < 20; ++s)
    svg.rect(left + n * cell + 20, top + (19 - s) * (n * cell / 20.0), 14, n * cell / 20.0, ramp_color(s / 19.0));
  svg.text(left + n * cell + 38, top + 10, fmt::format("{:.2f}", scale), 10);
  svg.text(left + n * cell + 38, top + n * cell, "0", 10);

  write_file(dir / ("heatmap_" + stem_of(t) + ".svg"), svg.str(), written);
  write_file(dir / ("heatmap_" + stem_of(t) + ".csv"), csv, written);
}

void length_panel(const json& t, const fs::path& dir, std::vector<fs::path>& written) {
  const auto& curve = t["length_curve"];
  const int kmax = curve.back()["k"];
  Svg svg(520, 340);
  const Frame f{60, 40, 420, 240, 1, static_cast<double>(std::max(2, kmax)), 0, 100};
  svg.text(60, 20, stem_of(t) + ": mean score by document length", 12);
  std::vector<std::pair<double, double>> mean, ref, upper, lower;
  std::string csv = "k,n,mean,std,reference\n";
  for (const auto& p : curve) {
    const double k = p["k"], m = p["mean"], s = p["std"], r = p["reference"];
    mean.emplace_back(f.px(k), f.py(m));
    ref.emplace_back(f.px(k), f.py(r));
    upper.emplace_back(f.px(k), f.py(std::min(100.0, m + s)));
    lower.emplace_back(f.px(k), f.py(std::max(0.0, m - s)));
    csv += fmt::format("{},{},{},{},{}\n", p["k"].get<int>(), p["n"].get<std::size_t>(), format_number(m),
                       format_number(s), format_number(r));
  }
  std::vector<std::pair<double, double>> band(upper);
  band.insert(band.end(), lower.rbegin(), lower.rend());
  svg.polygon(band, kBlue, 0.2);
  svg.polyline(ref, kGrey, 1.0, "5,3");
  svg.polyline(mean, kBlue, 2.0);
  for (const auto& [px, py] : mean) svg.circle(px, py, 2.5, kBlue);
  axes(svg, f, "document length k", "score", std::max(1, kmax - 1) > 10 ? 6 : std::max(1, kmax - 1), 5);
  svg.text(480, 300, "dashed: 100(k-1)/k", 10, "end");
  write_file(dir / ("length_" + stem_of(t) + ".svg"), svg.str(), written);
  write_file(dir / ("length_" + stem_of(t) + ".csv"), csv, written);
}

void epb_panel(const json& report, const fs::path& dir, std::vector<fs::path>& written) {
  std::vector<std::pair<std::string, double>> rows;
  std::string csv = "judge,needle,hay,epb\n";
  for (const auto& t : report["triples"]) {
    if (!t.contains("epb")) continue;
    rows.emplace_back(stem_of(t), t["epb"].get<double>());
    csv += fmt::format("{},{},{},{}\n", t["judge"].get<std::string>(), t["needle"].get<std::string>(),
                       t["hay"].get<std::string>(), format_number(t["epb"].get<double>()));
  }
  if (rows.empty()) return;
  double m = 1.0;
  for (const auto& [name, v] : rows) m = std::max(m, std::abs(v));
  m = std::ceil(m * 1.1);
  const double bar = 22;
  Svg svg(620, 60 + rows.size() * bar + 50);
  const Frame f{260, 40, 320, rows.size() * bar, -m, m, 0, 1};
  svg.text(20, 20, "Early-positionality bias per (judge, needle, hay)", 12);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double v = rows[r].second;
    const double y = f.y0 + r * bar + 3;
    svg.rect(std::min(f.px(0), f.px(v)), y, std::abs(f.px(v) - f.px(0)), bar - 6, v >= 0 ? kRed : kBlue);
    svg.text(f.x0 - 6, y + bar / 2, rows[r].first, 10, "end");
    svg.text(f.px(v) + (v >= 0 ? 4 : -4), y + bar / 2, fmt::format("{:.2f}", v), 9, v >= 0 ? "start" : "end");
  }
  svg.line(f.px(0), f.y0, f.px(0), f.y0 + f.h, "black");
  svg.line(f.x0, f.y0 + f.h, f.x0 + f.w, f.y0 + f.h, "black");
  for (int t = 0; t <= 4; ++t) {
    const double v = -m + 2 * m * t / 4;
    svg.text(f.px(v), f.y0 + f.h + 16, fmt::format("{:g}", v), 10, "middle");
  }
  write_file(dir / "epb.svg", svg.str(), written);
  write_file(dir / "epb.csv", csv, written);
}

void centered_panel(const std::string& judge, const std::string& hay, const std::vector<const json*>& rows,
                    const fs::path& dir, std::vector<fs::path>& written) {
  double m = 1.0;
  for (const auto* r : rows) m = std::max(m, (*r)["emd"].get<double>());
  m = std::ceil(m * 1.1);
  Svg svg(460, 320);
  const Frame f{60, 40, 360, 220, 0, static_cast<double>(rows.size()), 0, m};
  svg.text(60, 20, judge + " / " + hay + ": EMD (grey) and centered EMD (blue)", 12);
  std::string csv = "a,b,emd,centered_emd,mean_shift\n";
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = *rows[k];
    const double e = r["emd"], c = r["centered_emd"];
    const double x = f.px(static_cast<double>(k)) + 20;
    svg.rect(x, f.py(e), 30, f.py(0) - f.py(e), kGrey);
    svg.rect(x + 34, f.py(c), 30, f.py(0) - f.py(c), kBlue);
    svg.text(x + 32, f.y0 + f.h + 16, r["a"].get<std::string>() + " vs " + r["b"].get<std::string>(), 10, "middle");
    csv += fmt::format("{},{},{},{},{}\n", r["a"].get<std::string>(), r["b"].get<std::string>(), format_number(e),
                       format_number(c), format_number(r["mean_shift"].get<double>()));
  }
  svg.line(f.x0, f.y0 + f.h, f.x0 + f.w, f.y0 + f.h, "black");
  svg.line(f.x0, f.y0, f.x0, f.y0 + f.h, "black");
  for (int t = 0; t <= 4; ++t) {
    const double v = m * t / 4;
    svg.text(f.x0 - 6, f.py(v) + 3, fmt::format("{:g}", v), 10, "end");
  }
  const auto stem = judge + "__" + hay;
  write_file(dir / ("centered_emd_" + stem + ".svg"), svg.str(), written);
  write_file(dir / ("centered_emd_" + stem + ".csv"), csv, written);
}

void fingerprint_panel(const std::string& judge, const std::string& hay, const std::vector<const json*>& rows,
                       const json& x, const fs::path& dir, std::vector<fs::path>& written) {
  const double slot = 110;
  Svg svg(80 + rows.size() * slot + 20, 340);
  const Frame f{60, 40, rows.size() * slot, 260, 0, static_cast<double>(rows.size()), 0, 100};
  svg.text(60, 20, judge + " / " + hay + ": score distribution by needle", 12);
  std::string csv = "needle,x,density\n";
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = *rows[k];
    const auto& d = r["kde"]["density"];
    double dmax = 0.0;
    for (const auto& v : d) dmax = std::max(dmax, v.get<double>());
    const double cx = f.x0 + (k + 0.5) * slot;
    std::vector<std::pair<double, double>> right, left;
    for (std::size_t q = 0; q < d.size(); ++q) {
      const double half = dmax > 0 ? d[q].get<double>() / dmax * (slot * 0.45) : 0.0;
      right.emplace_back(cx + half, f.py(x[q]));
      left.emplace_back(cx - half, f.py(x[q]));
      csv += fmt::format("{},{},{}\n", r["needle"].get<std::string>(), format_number(x[q]), format_number(d[q]));
    }
    std::vector<std::pair<double, double>> shape(right);
    shape.insert(shape.end(), left.rbegin(), left.rend());
    svg.polygon(shape, kNeedleColors[k % 3], 0.6);
    svg.line(cx - 12, f.py(r["mean"]), cx + 12, f.py(r["mean"]), "black", 1.5);
    svg.text(cx, f.y0 + f.h + 16, r["needle"].get<std::string>(), 11, "middle");
  }
  svg.line(f.x0, f.y0, f.x0, f.y0 + f.h, "black");
  for (int t = 0; t <= 5; ++t) svg.text(f.x0 - 6, f.py(t * 20) + 3, std::to_string(t * 20), 10, "end");
  const auto stem = judge + "__" + hay;
  write_file(dir / ("fingerprints_" + stem + ".svg"), svg.str(), written);
  write_file(dir / ("fingerprints_" + stem + ".csv"), csv, written);
}

void bipolar_panel(const std::string& judge, const std::vector<const json*>& rows, const json& x, const fs::path& dir,
                   std::vector<fs::path>& written) {
  Svg svg(520, 560);
  svg.text(60, 20, judge + ": pooled score density (top) and bipolarization index (bottom)", 12);
  double dmax = 0.0;
  for (const auto* r : rows)
    for (const auto& v : (*r)["kde"]["density"]) dmax = std::max(dmax, v.get<double>());
  if (dmax <= 0) dmax = 1.0;
  const Frame top{60, 40, 420, 200, 0, 100, 0, dmax * 1.05};
  const int kmax = rows.front()->at("curve").back()["k"];
  const Frame bottom{60, 310, 420, 200, 0, static_cast<double>(std::max(1, kmax)), 0, 1};
  std::string csv = "hay,kind,x,value\n";
  for (const auto* r : rows) {
    const auto hay = (*r)["hay"].get<std::string>();
    const char* color = hay == "orig" ? kBlue : kRed;
    const auto& d = (*r)["kde"]["density"];
    std::vector<std::pair<double, double>> pts;
    for (std::size_t q = 0; q < d.size(); ++q) {
      pts.emplace_back(top.px(x[q]), top.py(d[q]));
      csv += fmt::format("{},kde,{},{}\n", hay, format_number(x[q]), format_number(d[q]));
    }
    svg.polyline(pts, color, 1.5);
    pts.clear();
    for (const auto& p : (*r)["curve"]) {
      pts.emplace_back(bottom.px(p["k"].get<double>()), bottom.py(p["B"]));
      csv += fmt::format("{},B,{},{}\n", hay, p["k"].get<int>(), format_number(p["B"]));
    }
    svg.polyline(pts, color, 1.5);
    for (const auto& [px, py] : pts) svg.circle(px, py, 2, color);
  }
  axes(svg, top, "score", "density", 5, 4);
  axes(svg, bottom, "k", "B", 5, 4);
  svg.text(470, 60, "blue: orig, red: rand", 10, "end");
  write_file(dir / ("bipolar_" + judge + ".svg"), svg.str(), written);
  write_file(dir / ("bipolar_" + judge + ".csv"), csv, written);
}

}  // namespace

std::vector<fs::path> emit_figures(const json& report, const fs::path& dir) {
  if (!report.contains("triples") || report["triples"].empty() || !report.contains("meta"))
    throw MissingPanelData("analysis report has no triples");
  fs::create_directories(dir);
  std::vector<fs::path> written;
  const auto& x = report["meta"]["kde_x"];

  for (const auto& t : report["triples"]) {
    if (!t.contains("emd_grid")) continue;  // incomplete grid
    heatmap(t, x, dir, written);
    length_panel(t, dir, written);
  }
  epb_panel(report, dir, written);

  std::map<std::pair<std::string, std::string>, std::vector<const json*>> centered, prints;
  for (const auto& r : report["centered_emd"]) centered[{r["judge"], r["hay"]}].push_back(&r);
  for (const auto& r : report["fingerprints"]) prints[{r["judge"], r["hay"]}].push_back(&r);
  for (const auto& [key, rows] : centered) centered_panel(key.first, key.second, rows, dir, written);
  for (const auto& [key, rows] : prints) fingerprint_panel(key.first, key.second, rows, x, dir, written);

  std::map<std::string, std::vector<const json*>> bipolar;
  for (const auto& r : report["bipolarization"]) bipolar[r["judge"]].push_back(&r);
  for (const auto& [judge, rows] : bipolar) bipolar_panel(judge, rows, x, dir, written);
  return written;
}

}  // namespace haystack

#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace haystack {

struct MissingPanelData : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Minimal SVG builder; every coordinate is written with two decimals so the
/// output bytes depend only on the inputs.
class Svg {
 public:
  Svg(double width, double height);

  void rect(double x, double y, double w, double h, const std::string& fill, const std::string& stroke = "none");
  void line(double x1, double y1, double x2, double y2, const std::string& stroke, double width = 1.0,
            const std::string& dash = "");
  void polyline(const std::vector<std::pair<double, double>>& points, const std::string& stroke, double width = 1.0,
                const std::string& dash = "");
  void polygon(const std::vector<std::pair<double, double>>& points, const std::string& fill, double opacity = 1.0);
  void circle(double cx, double cy, double r, const std::string& fill);
  void text(double x, double y, const std::string& s, double size = 11.0, const std::string& anchor = "start");

  std::string str() const;

 private:
  double width_;
  double height_;
  std::string body_;
};

/// Hex color on a dark-blue to yellow ramp for t in [0, 1].
std::string ramp_color(double t);

/// Writes one SVG and one CSV per panel into `dir` and returns the paths
/// written. Panels: cross-position heatmap and length curve per triple, EPB
/// bars, centered EMD and fingerprint violins per (judge, hay), and
/// bipolarization per judge.
std::vector<std::filesystem::path> emit_figures(const nlohmann::json& report, const std::filesystem::path& dir);

}  // namespace haystack

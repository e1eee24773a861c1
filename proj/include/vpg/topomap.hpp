#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "vpg/core.hpp"

namespace vpg::topo {

struct Point2 {
  double x = 0.0;  // left negative
  double y = 0.0;  // nose positive
};

/// Approximate azimuthal projection of a 10/10 electrode name onto the unit head disc
/// (radius 0.5, Cz at the origin, the Fpz-T7-Oz-T8 ring at radius 0.4).
/// Returns nullopt for names that do not follow the 10/10 pattern.
inline std::optional<Point2> electrode_position(std::string_view name) {
  struct Row {
    std::string_view prefix;
    double midline_y;
    double ring_deg;  // angle from the nose axis where the row meets the 0.4 ring
    bool ring_only;   // row has only ring electrodes (Fp, O, I)
  };
  static constexpr std::array<Row, 13> rows{{
      {"FP", 0.4, 18.0, true},   {"AF", 0.3, 36.0, false},  {"FC", 0.1, 72.0, false},  {"FT", 0.1, 72.0, false},
      {"CP", -0.1, 108.0, false}, {"TP", -0.1, 108.0, false}, {"PO", -0.3, 144.0, false}, {"F", 0.2, 54.0, false},
      {"C", 0.0, 90.0, false},    {"T", 0.0, 90.0, false},    {"P", -0.2, 126.0, false},  {"O", -0.4, 162.0, true},
      {"I", -0.5, 180.0, true},
  }};

  std::string upper;
  for (char c : name) upper.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  for (const auto& row : rows) {
    if (upper.size() <= row.prefix.size() || upper.compare(0, row.prefix.size(), row.prefix) != 0) continue;
    const std::string_view suffix = std::string_view(upper).substr(row.prefix.size());
    if (suffix == "Z") return Point2{0.0, row.midline_y};
    int number = 0;
    auto [ptr, ec] = std::from_chars(suffix.data(), suffix.data() + suffix.size(), number);
    if (ec != std::errc{} || ptr != suffix.data() + suffix.size() || number < 1) continue;
    const double side = (number % 2 == 1) ? -1.0 : 1.0;
    const int step = row.ring_only ? 4 : (number + 1) / 2;
    const double theta = row.ring_deg * std::numbers::pi / 180.0;
    const Point2 ring{side * 0.4 * std::sin(theta), 0.4 * std::cos(theta)};
    if (step >= 5) {
      const double r = 0.4 + 0.1 * (step - 4);
      return Point2{ring.x * r / 0.4, ring.y * r / 0.4};
    }
    const double f = step / 4.0;
    return Point2{f * ring.x, row.midline_y + f * (ring.y - row.midline_y)};
  }
  return std::nullopt;
}

/// Positions for a montage; channels with unrecognised names are spread on an inner circle.
inline std::vector<Point2> montage_positions(const Montage& montage) {
  std::vector<Point2> out;
  std::size_t unknown = 0;
  const auto& names = montage.channel_names();
  for (const auto& n : names)
    if (!electrode_position(n)) ++unknown;
  std::size_t k = 0;
  for (const auto& n : names) {
    if (auto p = electrode_position(n)) {
      out.push_back(*p);
    } else {
      const double a = 2.0 * std::numbers::pi * static_cast<double>(k++) / static_cast<double>(unknown);
      out.push_back({0.25 * std::sin(a), 0.25 * std::cos(a)});
    }
  }
  return out;
}

/// Inverse-distance-weighted (power 2) interpolation; exact at electrode sites.
inline double idw(const std::vector<Point2>& sites, std::span<const double> values, Point2 at) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < sites.size(); ++i) {
    const double dx = at.x - sites[i].x, dy = at.y - sites[i].y;
    const double d2 = dx * dx + dy * dy;
    if (d2 < 1e-18) return values[i];
    num += values[i] / d2;
    den += 1.0 / d2;
  }
  return num / den;
}

/// Diverging blue-white-red map of v / vmax, quantised to 8 bits per component.
inline std::string diverging_color(double v, double vmax) {
  double t = vmax > 0.0 ? std::clamp(v / vmax, -1.0, 1.0) : 0.0;
  int r = 255, g = 255, b = 255;
  if (t > 0) {
    g = b = static_cast<int>(std::lround(255.0 * (1.0 - t)));
  } else if (t < 0) {
    r = g = static_cast<int>(std::lround(255.0 * (1.0 + t)));
  }
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

inline std::string render_svg(std::span<const double> values, const Montage& montage, int grid = 48) {
  require(values.size() == montage.size(), Errc::ChannelMismatch,
          std::to_string(values.size()) + " values for " + std::to_string(montage.size()) + " channels");
  const auto sites = montage_positions(montage);
  double vmax = 0.0;
  for (double v : values) vmax = std::max(vmax, std::abs(v));

  constexpr double size = 400.0, centre = 200.0, scale = 360.0;  // disc radius 0.5 -> 180 px
  auto px = [&](Point2 p) { return Point2{centre + p.x * scale, centre - p.y * scale}; };

  std::ostringstream svg;
  svg.precision(6);
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size + 30
      << "\" viewBox=\"0 0 " << size << ' ' << size + 30 << "\">\n"
      << "<g id=\"map\" shape-rendering=\"crispEdges\">\n";
  const double cell = 1.0 / grid;
  for (int i = 0; i < grid; ++i) {
    for (int j = 0; j < grid; ++j) {
      const Point2 c{-0.5 + (i + 0.5) * cell, -0.5 + (j + 0.5) * cell};
      if (c.x * c.x + c.y * c.y > 0.25) continue;
      const auto tl = px({c.x - cell / 2, c.y + cell / 2});
      svg << "<rect class=\"cell\" x=\"" << tl.x << "\" y=\"" << tl.y << "\" width=\"" << cell * scale
          << "\" height=\"" << cell * scale << "\" fill=\"" << diverging_color(idw(sites, values, c), vmax) << "\"/>\n";
    }
  }
  svg << "</g>\n"
      << "<circle cx=\"200\" cy=\"200\" r=\"180\" fill=\"none\" stroke=\"black\" stroke-width=\"2\"/>\n"
      << "<polygon points=\"185,22 200,4 215,22\" fill=\"none\" stroke=\"black\" stroke-width=\"2\"/>\n";
  for (std::size_t k = 0; k < sites.size(); ++k) {
    const auto p = px(sites[k]);
    svg << "<circle class=\"electrode\" cx=\"" << p.x << "\" cy=\"" << p.y << "\" r=\"2.5\" fill=\"black\"><title>"
        << montage.channel_names()[k] << ": " << values[k] << "</title></circle>\n";
  }
  svg << "<text x=\"200\" y=\"420\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">"
      << "scale: +/-" << vmax << "</text>\n"
      << "</svg>\n";
  return std::move(svg).str();
}

inline void write_values_csv(std::span<const double> values, const Montage& montage, const std::filesystem::path& path) {
  require(values.size() == montage.size(), Errc::ChannelMismatch,
          std::to_string(values.size()) + " values for " + std::to_string(montage.size()) + " channels");
  std::ofstream os(path, std::ios::trunc);
  require(static_cast<bool>(os), Errc::IoError, "cannot write " + path.string());
  os << "channel,value\n";
  char buf[40];
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", values[i]);
    os << montage.channel_names()[i] << ',' << buf << '\n';
  }
  require(static_cast<bool>(os), Errc::IoError, "write failed for " + path.string());
}

/// Reads a `channel,value` CSV and orders the values by `montage`.
inline std::vector<double> read_values_csv(const std::filesystem::path& path, const Montage& montage) {
  std::ifstream in(path);
  require(static_cast<bool>(in), Errc::IoError, "cannot open " + path.string());
  std::vector<double> out(montage.size(), 0.0);
  std::vector<bool> seen(montage.size(), false);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line == "channel,value") continue;
    }
    const auto comma = line.find(',');
    require(comma != std::string::npos, Errc::InvalidArgument, "malformed CSV line: " + line);
    const auto idx = montage.index_of(line.substr(0, comma));
    require(idx.has_value(), Errc::ChannelMismatch, "channel '" + line.substr(0, comma) + "' not in montage");
    try {
      out[*idx] = std::stod(line.substr(comma + 1));
    } catch (const std::exception&) {
      fail(Errc::InvalidArgument, "malformed value in CSV line: " + line);
    }
    seen[*idx] = true;
  }
  require(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; }), Errc::ChannelMismatch,
          "CSV does not cover every montage channel");
  return out;
}

inline void export_topomap(std::span<const double> values, const Montage& montage,
                           const std::filesystem::path& csv_path, const std::filesystem::path& svg_path) {
  require(values.size() == montage.size(), Errc::ChannelMismatch,
          std::to_string(values.size()) + " values for " + std::to_string(montage.size()) + " channels");
  const auto svg = render_svg(values, montage);
  write_values_csv(values, montage, csv_path);
  std::ofstream os(svg_path, std::ios::trunc);
  require(static_cast<bool>(os), Errc::IoError, "cannot write " + svg_path.string());
  os << svg;
  require(static_cast<bool>(os), Errc::IoError, "write failed for " + svg_path.string());
}

/// Writes `<base>.csv` and `<base>.svg`.
inline void export_topomap(std::span<const double> values, const Montage& montage, const std::filesystem::path& base) {
  auto csv = base, svg = base;
  export_topomap(values, montage, csv.replace_extension(".csv"), svg.replace_extension(".svg"));
}

}  // namespace vpg::topo

#include "smoothgauge/svgmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "smoothgauge/errors.hpp"

namespace smoothgauge {

namespace {

using json = nlohmann::json;

PointsXd parse_ring(const json& coords) {
  std::vector<std::array<double, 2>> pts;
  for (const auto& p : coords) {
    if (!p.is_array() || p.size() < 2) throw input_error("GeoJSON: bad coordinate");
    pts.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  if (pts.size() >= 2 && pts.front() == pts.back()) pts.pop_back();
  if (pts.size() < 3) throw input_error("GeoJSON: ring with fewer than 3 points");
  PointsXd ring(static_cast<Eigen::Index>(pts.size()), 2);
  for (size_t k = 0; k < pts.size(); ++k) {
    ring(static_cast<Eigen::Index>(k), 0) = pts[k][0];
    ring(static_cast<Eigen::Index>(k), 1) = pts[k][1];
  }
  return ring;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
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

std::string fmt_label(double x) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

std::string fmt_px(double x) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  std::string s = buf;
  // trim trailing zeros so the output stays compact and stable
  while (s.size() > 1 && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  if (s == "-0") s = "0";
  return s;
}

std::array<int, 3> lerp_rgb(const std::array<int, 3>& a, const std::array<int, 3>& b,
                            double t) {
  std::array<int, 3> out{};
  for (int i = 0; i < 3; ++i)
    out[static_cast<size_t>(i)] = static_cast<int>(std::lround(
        a[static_cast<size_t>(i)] + t * (b[static_cast<size_t>(i)] - a[static_cast<size_t>(i)])));
  return out;
}

std::string hex_color(const std::array<int, 3>& c) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", c[0], c[1], c[2]);
  return buf;
}

}  // namespace

Region region_from_geojson(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw input_error(std::string("GeoJSON parse failure: ") + e.what());
  }
  if (doc.value("type", "") != "FeatureCollection" || !doc.contains("features"))
    throw input_error("GeoJSON: expected a FeatureCollection with features");

  Region region;
  std::map<std::string, int> seen;
  for (const auto& feat : doc["features"]) {
    if (!feat.contains("properties") || !feat["properties"].contains("id"))
      throw input_error("GeoJSON: every feature needs an \"id\" property");
    AreaPolygon poly;
    const auto& idval = feat["properties"]["id"];
    poly.id = idval.is_string() ? idval.get<std::string>() : idval.dump();
    if (seen.count(poly.id)) throw input_error("GeoJSON: duplicate id \"" + poly.id + "\"");
    seen.emplace(poly.id, static_cast<int>(region.size()));
    const auto& geom = feat.at("geometry");
    const std::string type = geom.value("type", "");
    if (type == "Polygon") {
      for (const auto& ring : geom.at("coordinates")) poly.rings.push_back(parse_ring(ring));
    } else if (type == "MultiPolygon") {
      for (const auto& part : geom.at("coordinates"))
        for (const auto& ring : part) poly.rings.push_back(parse_ring(ring));
    } else {
      throw input_error("GeoJSON: unsupported geometry type \"" + type + "\"");
    }
    if (poly.rings.empty())
      throw input_error("GeoJSON: feature \"" + poly.id + "\" has no rings");
    region.push_back(std::move(poly));
  }
  if (region.empty()) throw input_error("GeoJSON: no features");
  return region;
}

Region load_region(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw input_error("cannot open GeoJSON: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return region_from_geojson(buf.str());
}

std::vector<double> quantile_edges(const VectorXd& values, int bins) {
  if (bins < 1) throw input_error("quantile_edges: bins must be >= 1");
  if (values.size() == 0) throw input_error("quantile_edges: no values");
  if (!values.allFinite()) throw input_error("quantile_edges: values must be finite");
  std::vector<double> sorted(values.data(), values.data() + values.size());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> edges;
  edges.reserve(static_cast<size_t>(bins) + 1);
  for (int j = 0; j <= bins; ++j) {
    const double e = quantile_sorted(sorted, static_cast<double>(j) / bins);
    if (edges.empty() || e > edges.back()) edges.push_back(e);
  }
  if (edges.size() == 1) edges.push_back(edges.front());  // all values equal: one bin
  return edges;
}

std::vector<int> bin_values(const VectorXd& values, const std::vector<double>& edges) {
  if (edges.size() < 2) throw input_error("bin_values: need at least two edges");
  if (!std::is_sorted(edges.begin(), edges.end()))
    throw input_error("bin_values: edges must ascend");
  const int k = static_cast<int>(edges.size()) - 1;
  std::vector<int> bin(static_cast<size_t>(values.size()));
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    const double v = values[i];
    // first bin whose upper edge exceeds v; the last bin keeps its upper edge
    const auto it = std::upper_bound(edges.begin() + 1, edges.end() - 1, v);
    bin[static_cast<size_t>(i)] =
        std::clamp(static_cast<int>(it - edges.begin()) - 1, 0, k - 1);
  }
  return bin;
}

std::vector<std::string> color_ramp(int k) {
  if (k < 1) throw input_error("color_ramp: need at least one color");
  const std::array<int, 3> light{255, 247, 236}, mid{252, 141, 89}, dark{127, 0, 0};
  std::vector<std::string> out;
  out.reserve(static_cast<size_t>(k));
  if (k == 1) return {hex_color(mid)};
  for (int i = 0; i < k; ++i) {
    const double t = static_cast<double>(i) / (k - 1);
    out.push_back(hex_color(t < 0.5 ? lerp_rgb(light, mid, 2.0 * t)
                                    : lerp_rgb(mid, dark, 2.0 * t - 1.0)));
  }
  return out;
}

std::string choropleth_svg(const Region& region, const std::vector<std::string>& ids,
                           const VectorXd& values, const ChoroplethOptions& opt) {
  if (ids.size() != static_cast<size_t>(values.size()))
    throw input_error("choropleth: ids and values disagree in length");
  if (!values.allFinite()) throw input_error("choropleth: values must be finite");
  if (!(opt.width > 0)) throw input_error("choropleth: width must be positive");
  if (!(opt.rate_scale > 0)) throw input_error("choropleth: rate_scale must be positive");

  std::map<std::string, double> by_id;
  for (size_t i = 0; i < ids.size(); ++i)
    if (!by_id.emplace(ids[i], values[static_cast<Eigen::Index>(i)]).second)
      throw input_error("choropleth: duplicate rate id \"" + ids[i] + "\"");

  std::vector<std::string> without_value, without_polygon;
  VectorXd area_value(static_cast<Eigen::Index>(region.size()));
  for (size_t a = 0; a < region.size(); ++a) {
    const auto it = by_id.find(region[a].id);
    if (it == by_id.end()) {
      without_value.push_back(region[a].id);
      continue;
    }
    area_value[static_cast<Eigen::Index>(a)] = it->second;
    by_id.erase(it);
  }
  for (const auto& [id, v] : by_id) without_polygon.push_back(id);
  if (!without_value.empty() || !without_polygon.empty()) {
    std::string msg = "choropleth join failure";
    const auto join = [](const std::vector<std::string>& v) {
      std::string s;
      for (const auto& id : v) s += (s.empty() ? "" : ", ") + id;
      return s;
    };
    if (!without_value.empty()) msg += "; areas without a rate: " + join(without_value);
    if (!without_polygon.empty()) msg += "; rates without an area: " + join(without_polygon);
    throw data_error(msg);
  }

  const std::vector<double> edges = quantile_edges(area_value, opt.bins);
  const std::vector<int> bin = bin_values(area_value, edges);
  const int k = static_cast<int>(edges.size()) - 1;
  const std::vector<std::string> fill = color_ramp(k);

  const Box box = bounding_box(region);
  if (!(box.width() > 0) || !(box.height() > 0))
    throw input_error("choropleth: region has a degenerate bounding box");

  const double margin = 12.0, legend_w = 190.0, title_h = opt.title.empty() ? 0.0 : 28.0;
  const double scale = opt.width / box.width();
  const double map_h = box.height() * scale;
  const double legend_row = 22.0, legend_head = 24.0;
  const double legend_h = legend_head + legend_row * k;
  const double total_w = opt.width + legend_w + 3 * margin;
  const double total_h = std::max(map_h, legend_h) + 2 * margin + title_h;
  const auto X = [&](double x) { return margin + (x - box.x0) * scale; };
  const auto Y = [&](double y) { return margin + title_h + (box.y1 - y) * scale; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt_px(total_w)
      << "\" height=\"" << fmt_px(total_h) << "\" viewBox=\"0 0 " << fmt_px(total_w) << " "
      << fmt_px(total_h) << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  if (!opt.title.empty())
    svg << "<text x=\"" << fmt_px(margin) << "\" y=\"" << fmt_px(margin + 14)
        << "\" font-family=\"sans-serif\" font-size=\"16\" font-weight=\"bold\">"
        << xml_escape(opt.title) << "</text>\n";

  for (size_t a = 0; a < region.size(); ++a) {
    std::string d;
    for (const auto& ring : region[a].rings) {
      for (Eigen::Index p = 0; p < ring.rows(); ++p)
        d += (p == 0 ? "M" : "L") + fmt_px(X(ring(p, 0))) + " " + fmt_px(Y(ring(p, 1)));
      d += "Z";
    }
    svg << "<path d=\"" << d << "\" fill=\"" << fill[static_cast<size_t>(bin[a])]
        << "\" fill-rule=\"evenodd\" stroke=\"#4a4a4a\" stroke-width=\"0.8\">"
        << "<title>" << xml_escape(region[a].id) << ": "
        << fmt_label(area_value[static_cast<Eigen::Index>(a)] * opt.rate_scale)
        << "</title></path>\n";
  }

  const double lx = opt.width + 2 * margin, ly = margin + title_h;
  svg << "<text x=\"" << fmt_px(lx) << "\" y=\"" << fmt_px(ly + 12)
      << "\" font-family=\"sans-serif\" font-size=\"13\" font-weight=\"bold\">"
      << xml_escape(opt.legend_title) << "</text>\n";
  for (int j = 0; j < k; ++j) {
    const double ry = ly + legend_head + legend_row * j;
    svg << "<rect x=\"" << fmt_px(lx) << "\" y=\"" << fmt_px(ry)
        << "\" width=\"16\" height=\"16\" fill=\"" << fill[static_cast<size_t>(j)]
        << "\" stroke=\"#4a4a4a\" stroke-width=\"0.5\"/>\n";
    svg << "<text x=\"" << fmt_px(lx + 22) << "\" y=\"" << fmt_px(ry + 12.5)
        << "\" font-family=\"sans-serif\" font-size=\"12\">"
        << fmt_label(edges[static_cast<size_t>(j)] * opt.rate_scale) << " &#8211; "
        << fmt_label(edges[static_cast<size_t>(j) + 1] * opt.rate_scale) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_choropleth(const std::string& path, const Region& region,
                      const std::vector<std::string>& ids, const VectorXd& values,
                      const ChoroplethOptions& opt) {
  std::ofstream f(path);
  if (!f) throw input_error("cannot open for writing: " + path);
  f << choropleth_svg(region, ids, values, opt);
  if (!f) throw input_error("write failure: " + path);
}

}  // namespace smoothgauge

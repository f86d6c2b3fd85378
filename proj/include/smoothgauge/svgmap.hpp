#pragma once

// Quantile-binned choropleth rendering to standalone SVG: flat-colored area
// polygons (even-odd fill keeps holes open), a light-to-dark sequential ramp,
// and a legend whose range labels are scaled rates (per 100,000 by default).

#include <string>
#include <vector>

#include "smoothgauge/numerics.hpp"
#include "smoothgauge/simgen.hpp"

namespace smoothgauge {

struct ChoroplethOptions {
  int bins = 7;              // requested quantile bins; ties collapse edges
  double rate_scale = 1e5;   // legend shows value * rate_scale
  double width = 720;        // map panel width in px; height keeps the aspect
  std::string title;         // optional heading above the map
  std::string legend_title = "rate per 100,000";
};

// GeoJSON FeatureCollection -> polygons in feature order. Every feature needs
// an "id" property and Polygon or MultiPolygon geometry; an explicit closing
// point is dropped.
Region region_from_geojson(const std::string& text);
Region load_region(const std::string& path);

// bins+1 ascending edges at the linear-interpolation quantiles j/bins;
// duplicate edges collapse, so the result can describe fewer bins (all-equal
// input describes exactly one)
std::vector<double> quantile_edges(const VectorXd& values, int bins);

// bin index per value against edges from quantile_edges: half-open
// [e_j, e_{j+1}) with the last bin closed; out-of-range values clamp
std::vector<int> bin_values(const VectorXd& values, const std::vector<double>& edges);

// k fill colors "#rrggbb", light to dark
std::vector<std::string> color_ramp(int k);

// values join to polygons by id; any polygon without a value or value without
// a polygon raises data_error naming every unmatched id
std::string choropleth_svg(const Region& region, const std::vector<std::string>& ids,
                           const VectorXd& values, const ChoroplethOptions& opt = {});

void write_choropleth(const std::string& path, const Region& region,
                      const std::vector<std::string>& ids, const VectorXd& values,
                      const ChoroplethOptions& opt = {});

}  // namespace smoothgauge

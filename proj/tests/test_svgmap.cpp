#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "smoothgauge/errors.hpp"
#include "smoothgauge/svgmap.hpp"

using namespace smoothgauge;
using doctest::Contains;

namespace {

size_t count_occurrences(const std::string& hay, const std::string& needle) {
  size_t n = 0;
  for (size_t pos = hay.find(needle); pos != std::string::npos;
       pos = hay.find(needle, pos + needle.size()))
    ++n;
  return n;
}

const char* two_squares_geojson() {
  return R"({"type":"FeatureCollection","features":[
    {"type":"Feature","properties":{"id":"left"},
     "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1],[0,1],[0,0]]]}},
    {"type":"Feature","properties":{"id":"right"},
     "geometry":{"type":"Polygon","coordinates":[[[1,0],[2,0],[2,1],[1,1],[1,0]]]}}
  ]})";
}

}  // namespace

TEST_CASE("geojson regions load polygons in feature order") {
  const Region region = region_from_geojson(two_squares_geojson());
  REQUIRE(region.size() == 2);
  CHECK(region[0].id == "left");
  CHECK(region[1].id == "right");
  REQUIRE(region[0].rings.size() == 1);
  CHECK(region[0].rings[0].rows() == 4);  // explicit closing point dropped
  CHECK(region[0].rings[0](0, 0) == 0.0);
  CHECK(region[1].rings[0](1, 0) == 2.0);

  SUBCASE("multipolygon parts and numeric ids") {
    const Region multi = region_from_geojson(R"({"type":"FeatureCollection","features":[
      {"type":"Feature","properties":{"id":7},
       "geometry":{"type":"MultiPolygon","coordinates":[
         [[[0,0],[1,0],[1,1]]],
         [[[3,0],[4,0],[4,1],[3,1]]]]}}]})");
    REQUIRE(multi.size() == 1);
    CHECK(multi[0].id == "7");
    REQUIRE(multi[0].rings.size() == 2);
    CHECK(multi[0].rings[0].rows() == 3);
    CHECK(multi[0].rings[1].rows() == 4);
  }

  SUBCASE("holes stay attached to their polygon") {
    const Region holed = region_from_geojson(R"({"type":"FeatureCollection","features":[
      {"type":"Feature","properties":{"id":"donut"},
       "geometry":{"type":"Polygon","coordinates":[
         [[0,0],[10,0],[10,10],[0,10]],
         [[4,4],[6,4],[6,6],[4,6]]]}}]})");
    REQUIRE(holed.size() == 1);
    CHECK(holed[0].rings.size() == 2);
  }

  SUBCASE("rejects malformed collections") {
    CHECK_THROWS_AS(region_from_geojson("not json"), input_error);
    CHECK_THROWS_AS(region_from_geojson(R"({"type":"Feature"})"), input_error);
    CHECK_THROWS_WITH_AS(region_from_geojson(R"({"type":"FeatureCollection","features":[
      {"type":"Feature","properties":{},
       "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1]]]}}]})"),
                         Contains("\"id\" property"), input_error);
    CHECK_THROWS_WITH_AS(region_from_geojson(R"({"type":"FeatureCollection","features":[
      {"type":"Feature","properties":{"id":"a"},
       "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[1,1]]]}},
      {"type":"Feature","properties":{"id":"a"},
       "geometry":{"type":"Polygon","coordinates":[[[2,0],[3,0],[3,1]]]}}]})"),
                         Contains("duplicate id"), input_error);
    CHECK_THROWS_WITH_AS(region_from_geojson(R"({"type":"FeatureCollection","features":[
      {"type":"Feature","properties":{"id":"a"},
       "geometry":{"type":"LineString","coordinates":[[0,0],[1,0]]}}]})"),
                         Contains("unsupported geometry"), input_error);
    CHECK_THROWS_WITH_AS(region_from_geojson(R"({"type":"FeatureCollection","features":[
      {"type":"Feature","properties":{"id":"a"},
       "geometry":{"type":"Polygon","coordinates":[[[0,0],[1,0],[0,0]]]}}]})"),
                         Contains("fewer than 3"), input_error);
    CHECK_THROWS_WITH_AS(
        region_from_geojson(R"({"type":"FeatureCollection","features":[]})"),
        Contains("no features"), input_error);
  }

  SUBCASE("load_region reads a file") {
    const std::string path = "svgmap_fixture_tmp.geojson";
    {
      std::ofstream f(path);
      f << two_squares_geojson();
    }
    const Region loaded = load_region(path);
    CHECK(loaded.size() == 2);
    CHECK(loaded[1].id == "right");
    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_region(path), input_error);
  }
}

TEST_CASE("quantile edges match a hand-computed oracle") {
  VectorXd v(8);
  v << 5, 1, 8, 4, 2, 7, 3, 6;  // order must not matter
  // linear-interpolation quantiles of 1..8 at p = 0, .25, .5, .75, 1:
  // h = 7p -> 0, 1.75, 3.5, 5.25, 7 -> 1, 2.75, 4.5, 6.25, 8
  const std::vector<double> edges = quantile_edges(v, 4);
  REQUIRE(edges.size() == 5);
  CHECK(edges[0] == 1.0);
  CHECK(edges[1] == doctest::Approx(2.75).epsilon(1e-14));
  CHECK(edges[2] == doctest::Approx(4.5).epsilon(1e-14));
  CHECK(edges[3] == doctest::Approx(6.25).epsilon(1e-14));
  CHECK(edges[4] == 8.0);

  SUBCASE("ties collapse edges") {
    VectorXd flat = VectorXd::Constant(5, 3.25);
    const std::vector<double> one = quantile_edges(flat, 7);
    REQUIRE(one.size() == 2);  // a single degenerate bin
    CHECK(one[0] == 3.25);
    CHECK(one[1] == 3.25);

    VectorXd mostly(5);
    mostly << 1, 1, 1, 1, 9;
    const std::vector<double> two = quantile_edges(mostly, 4);
    REQUIRE(two.size() == 2);
    CHECK(two[0] == 1.0);
    CHECK(two[1] == 9.0);
  }

  SUBCASE("rejects bad input") {
    CHECK_THROWS_AS(quantile_edges(v, 0), input_error);
    CHECK_THROWS_AS(quantile_edges(VectorXd(), 3), input_error);
    VectorXd bad(2);
    bad << 1.0, std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(quantile_edges(bad, 2), input_error);
  }
}

TEST_CASE("values land in half-open bins with a closed last bin") {
  const std::vector<double> edges{0.0, 1.0, 2.0};
  VectorXd v(7);
  v << -5, 0, 0.5, 1, 1.5, 2, 7;
  const std::vector<int> bin = bin_values(v, edges);
  const std::vector<int> want{0, 0, 0, 1, 1, 1, 1};
  CHECK(bin == want);
  CHECK_THROWS_AS(bin_values(v, {1.0}), input_error);
  CHECK_THROWS_AS(bin_values(v, {2.0, 1.0, 3.0}), input_error);
}

TEST_CASE("color ramp runs light to dark") {
  const std::vector<std::string> ramp = color_ramp(7);
  REQUIRE(ramp.size() == 7);
  int prev = 1 << 24;
  for (const std::string& c : ramp) {
    REQUIRE(c.size() == 7);
    REQUIRE(c[0] == '#');
    const int r = std::stoi(c.substr(1, 2), nullptr, 16),
              g = std::stoi(c.substr(3, 2), nullptr, 16),
              b = std::stoi(c.substr(5, 2), nullptr, 16);
    const int lum = r + g + b;
    CHECK(lum < prev);
    prev = lum;
  }
  CHECK(color_ramp(1) == std::vector<std::string>{"#fc8d59"});
  CHECK_THROWS_AS(color_ramp(0), input_error);
}

TEST_CASE("two-square fixture renders one path per area") {
  const Region region = region_from_geojson(two_squares_geojson());
  const std::vector<std::string> ids{"left", "right"};
  VectorXd rates(2);
  rates << 2e-4, 4e-4;
  ChoroplethOptions opt;
  opt.bins = 2;
  opt.title = "demo map";
  const std::string svg = choropleth_svg(region, ids, rates, opt);

  CHECK(count_occurrences(svg, "<path ") == 2);
  CHECK(svg.find("</svg>") != std::string::npos);
  CHECK(svg.find("fill-rule=\"evenodd\"") != std::string::npos);
  CHECK(svg.find("rate per 100,000") != std::string::npos);
  CHECK(svg.find("demo map") != std::string::npos);
  // per-100k labels: 2e-4 and 4e-4 become 20 and 40
  CHECK(svg.find(">left: 20<") != std::string::npos);
  CHECK(svg.find(">right: 40<") != std::string::npos);
  CHECK(svg.find("20 &#8211; ") != std::string::npos);
  CHECK(svg.find(" &#8211; 40<") != std::string::npos);
  CHECK(svg == choropleth_svg(region, ids, rates, opt));

  SUBCASE("file output matches the in-memory render") {
    const std::string path = "svgmap_render_tmp.svg";
    write_choropleth(path, region, ids, rates, opt);
    std::ifstream f(path);
    std::stringstream ss;
    ss << f.rdbuf();
    CHECK(ss.str() == svg);
    std::filesystem::remove(path);
  }

  SUBCASE("degenerate geometry is rejected") {
    Region line;
    PointsXd pts(3, 2);
    pts << 0, 0, 0, 1, 0, 2;
    line.push_back({"sliver", {pts}});
    VectorXd one(1);
    one << 1e-4;
    CHECK_THROWS_WITH_AS(choropleth_svg(line, {"sliver"}, one, {}),
                         Contains("degenerate"), input_error);
  }
}

TEST_CASE("equal rates collapse the legend to a single bin") {
  const Region region = region_from_geojson(two_squares_geojson());
  VectorXd rates = VectorXd::Constant(2, 3e-4);
  const std::string svg = choropleth_svg(region, {"left", "right"}, rates, {});
  // one background rect plus exactly one legend swatch
  CHECK(count_occurrences(svg, "<rect ") == 2);
  CHECK(count_occurrences(svg, "fill=\"#fc8d59\"") == 3);  // 2 paths + swatch
  CHECK(svg.find("30 &#8211; 30") != std::string::npos);
}

TEST_CASE("join failures name the unmatched ids") {
  const Region region = region_from_geojson(two_squares_geojson());
  VectorXd one(1);
  one << 1e-4;
  CHECK_THROWS_WITH_AS(choropleth_svg(region, {"left"}, one, {}),
                       Contains("areas without a rate: right"), data_error);
  VectorXd three(3);
  three << 1e-4, 2e-4, 3e-4;
  CHECK_THROWS_WITH_AS(choropleth_svg(region, {"left", "right", "ghost"}, three, {}),
                       Contains("rates without an area: ghost"), data_error);
  VectorXd two(2);
  two << 1e-4, 2e-4;
  CHECK_THROWS_WITH_AS(choropleth_svg(region, {"left", "phantom"}, two, {}),
                       Contains("areas without a rate: right"), data_error);
  CHECK_THROWS_WITH_AS(choropleth_svg(region, {"left", "phantom"}, two, {}),
                       Contains("rates without an area: phantom"), data_error);
  CHECK_THROWS_WITH_AS(choropleth_svg(region, {"left", "left"}, two, {}),
                       Contains("duplicate rate id"), input_error);
}

TEST_CASE("legend edges agree with the quantile oracle") {
  const Region region = lattice_region(2, 4);
  std::vector<std::string> ids;
  for (const auto& poly : region) ids.push_back(poly.id);
  VectorXd rates(8);
  rates << 1e-5, 2e-5, 3e-5, 4e-5, 5e-5, 6e-5, 7e-5, 8e-5;
  ChoroplethOptions opt;
  opt.bins = 4;
  const std::string svg = choropleth_svg(region, ids, rates, opt);
  // scaled per 100k the oracle edges are 1, 2.75, 4.5, 6.25, 8
  CHECK(svg.find(">1 &#8211; 2.75<") != std::string::npos);
  CHECK(svg.find(">2.75 &#8211; 4.5<") != std::string::npos);
  CHECK(svg.find(">4.5 &#8211; 6.25<") != std::string::npos);
  CHECK(svg.find(">6.25 &#8211; 8<") != std::string::npos);
  // four swatches plus the background rect
  CHECK(count_occurrences(svg, "<rect ") == 5);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>

#include "smoothgauge/graph.hpp"
#include "smoothgauge/numerics.hpp"

using namespace smoothgauge;

namespace {

// unit-square grid as a GeoJSON FeatureCollection, ids "sq<r>_<c>"
std::string square_grid_geojson(int rows, int cols) {
  std::string out = R"({"type":"FeatureCollection","features":[)";
  bool first = true;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      if (!first) out += ",";
      first = false;
      const double x = c, y = r;
      out += R"({"type":"Feature","properties":{"id":"sq)" + std::to_string(r) + "_" +
             std::to_string(c) + R"("},"geometry":{"type":"Polygon","coordinates":[[)";
      out += "[" + std::to_string(x) + "," + std::to_string(y) + "],";
      out += "[" + std::to_string(x + 1) + "," + std::to_string(y) + "],";
      out += "[" + std::to_string(x + 1) + "," + std::to_string(y + 1) + "],";
      out += "[" + std::to_string(x) + "," + std::to_string(y + 1) + "],";
      out += "[" + std::to_string(x) + "," + std::to_string(y) + "]";
      out += "]]}}";
    }
  return out + "]}";
}

}  // namespace

TEST_CASE("edge list: path, dedupe, errors with line numbers") {
  const auto g = from_edge_list("a,b\nb,c");
  CHECK(g.size() == 3);
  CHECK(g.degrees[g.index_of("a")] == 1);
  CHECK(g.degrees[g.index_of("b")] == 2);
  CHECK(g.degrees[g.index_of("c")] == 1);
  CHECK(g.n_components == 1);

  const auto dup = from_edge_list("a,b\na,b\nb,a");
  CHECK(dup.W.sum() == 2.0);  // one undirected edge

  CHECK_THROWS_WITH_AS(from_edge_list("a,a"), doctest::Contains("line 1"), input_error);
  CHECK_THROWS_WITH_AS(from_edge_list("a,b\nc"), doctest::Contains("line 2"), input_error);
  CHECK_THROWS_WITH_AS(from_edge_list("a,b\nx,y,z"), doctest::Contains("line 2"),
                       input_error);
}

TEST_CASE("edge list: comments, ids header pinning order, unknown id") {
  const auto g = from_edge_list("# a comment\n# ids: z, y, x\nx,y\n\ny,z # trailing\n");
  CHECK(g.area_ids == std::vector<std::string>{"z", "y", "x"});
  CHECK(g.degrees[0] == 1);  // z
  CHECK(g.degrees[1] == 2);  // y
  CHECK_THROWS_AS(from_edge_list("# ids: a, b\na,c"), input_error);
}

TEST_CASE("edge list: Spain fixture loads with the documented structure") {
  const auto g = load_edge_list(std::string(SMOOTHGAUGE_DATA_DIR) + "/spain47_edges.csv");
  CHECK(g.size() == 47);
  CHECK(g.W.sum() == 2 * 111);
  CHECK(g.n_components == 1);
  // degree histogram of this adjacency
  std::map<int, int> hist;
  for (int i = 0; i < g.size(); ++i) ++hist[static_cast<int>(g.degrees[i])];
  CHECK(hist == std::map<int, int>{{2, 3}, {3, 9}, {4, 9}, {5, 11}, {6, 9}, {7, 4}, {8, 2}});
  CHECK(g.degrees.cwiseInverse().sum() == doctest::Approx(11.27142857142857).epsilon(1e-12));
}

TEST_CASE("polygons: queen 2x2 grid is complete, 3x3 center has degree 8") {
  const auto k4 = from_polygons(square_grid_geojson(2, 2), /*queen=*/true);
  CHECK(k4.size() == 4);
  for (int i = 0; i < 4; ++i) CHECK(k4.degrees[i] == 3);

  const auto g9 = from_polygons(square_grid_geojson(3, 3), true);
  CHECK(g9.degrees[g9.index_of("sq1_1")] == 8);
  // corner cells touch 3 others under queen
  CHECK(g9.degrees[g9.index_of("sq0_0")] == 3);

  // centroids are the square centers
  const int k = g9.index_of("sq2_1");
  CHECK((*g9.centroids)(k, 0) == doctest::Approx(1.5));
  CHECK((*g9.centroids)(k, 1) == doctest::Approx(2.5));
}

TEST_CASE("polygons: disjoint squares form two components; rook equals lattice") {
  const std::string two = R"({"type":"FeatureCollection","features":[
    {"type":"Feature","properties":{"id":"a"},"geometry":{"type":"Polygon",
     "coordinates":[[[0,0],[1,0],[1,1],[0,1],[0,0]]]}},
    {"type":"Feature","properties":{"id":"b"},"geometry":{"type":"Polygon",
     "coordinates":[[[5,5],[6,5],[6,6],[5,6],[5,5]]]}}]})";
  const auto g2 = from_polygons(two, true);
  CHECK(g2.n_components == 2);
  CHECK(g2.W.sum() == 0);

  for (auto [r, c] : {std::pair{2, 2}, {3, 4}}) {
    const auto rook = from_polygons(square_grid_geojson(r, c), /*queen=*/false);
    const auto lat = lattice(r, c);
    CHECK(rook.size() == lat.size());
    // same adjacency under the row-major correspondence of ids
    for (int i = 0; i < lat.size(); ++i)
      for (int j = 0; j < lat.size(); ++j) {
        const int ri = rook.index_of("sq" + std::to_string(i / c) + "_" + std::to_string(i % c));
        const int rj = rook.index_of("sq" + std::to_string(j / c) + "_" + std::to_string(j % c));
        CHECK(rook.W(ri, rj) == lat.W(i, j));
      }
  }

  CHECK_THROWS_AS(from_polygons("{}", true), input_error);
  const std::string dup_id = R"({"type":"FeatureCollection","features":[
    {"type":"Feature","properties":{"id":"a"},"geometry":{"type":"Polygon",
     "coordinates":[[[0,0],[1,0],[1,1],[0,1],[0,0]]]}},
    {"type":"Feature","properties":{"id":"a"},"geometry":{"type":"Polygon",
     "coordinates":[[[2,0],[3,0],[3,1],[2,1],[2,0]]]}}]})";
  CHECK_THROWS_AS(from_polygons(dup_id, true), input_error);
}

TEST_CASE("lattice: path, 4-cycle, 6x6 degree structure") {
  const auto p3 = lattice(1, 3);
  CHECK(p3.degrees[0] == 1);
  CHECK(p3.degrees[1] == 2);
  CHECK(p3.degrees[2] == 1);

  const auto c4 = lattice(2, 2);
  for (int i = 0; i < 4; ++i) CHECK(c4.degrees[i] == 2);

  const auto g = lattice(6, 6);
  CHECK(g.size() == 36);
  CHECK(g.degrees.cwiseInverse().sum() ==
        doctest::Approx(4.0 / 2 + 16.0 / 3 + 16.0 / 4).epsilon(1e-12));
  // centroids at integer grid coordinates
  CHECK((*g.centroids)(7, 0) == 1.0);  // r1c1 -> (col 1, row 1)
  CHECK((*g.centroids)(7, 1) == 1.0);

  CHECK_THROWS_AS(lattice(0, 3), input_error);
}

TEST_CASE("connected components: path, disjoint edges, random reachability oracle") {
  std::vector<int> labels;
  CHECK(connected_components(lattice(1, 3).W, labels) == 1);

  const auto two_edges = from_edge_list("a,b\nc,d");
  CHECK(two_edges.n_components == 2);
  CHECK(two_edges.components[0] == two_edges.components[1]);
  CHECK(two_edges.components[2] == two_edges.components[3]);
  CHECK(two_edges.components[0] != two_edges.components[2]);

  // 20-node random graph vs transitive-closure oracle
  Rng rng(123);
  std::uniform_real_distribution<double> u(0, 1);
  const int A = 20;
  MatrixXd W = MatrixXd::Zero(A, A);
  for (int i = 0; i < A; ++i)
    for (int j = i + 1; j < A; ++j)
      if (u(rng) < 0.08) W(i, j) = W(j, i) = 1;
  MatrixXd reach = W + MatrixXd::Identity(A, A);
  for (int k = 0; k < A; ++k)
    for (int i = 0; i < A; ++i)
      for (int j = 0; j < A; ++j)
        if (reach(i, k) > 0 && reach(k, j) > 0) reach(i, j) = 1;
  connected_components(W, labels);
  for (int i = 0; i < A; ++i)
    for (int j = 0; j < A; ++j)
      CHECK((labels[i] == labels[j]) == (reach(i, j) > 0));
}

TEST_CASE("rank of D - W equals A minus component count") {
  for (const auto& g :
       {lattice(3, 3), from_edge_list("a,b\nc,d"), from_edge_list("a,b\nb,c\nd,e\nf,g")}) {
    MatrixXd q = -g.W;
    q.diagonal() = g.degrees;
    Eigen::Index rank = 0;
    pseudo_inverse(q, 1e-10, &rank);
    CHECK(rank == g.size() - g.n_components);
  }
}

TEST_CASE("centroid attachment by id, missing and duplicate errors") {
  auto g = from_edge_list("a,b\nb,c");
  PointsXd xy(3, 2);
  xy << 0, 0, 1, 0, 2, 0;
  attach_centroids(g, {"c", "a", "b"}, xy);
  CHECK((*g.centroids)(g.index_of("c"), 0) == 0.0);
  CHECK((*g.centroids)(g.index_of("b"), 0) == 2.0);

  PointsXd two(2, 2);
  two << 0, 0, 1, 1;
  auto h = from_edge_list("a,b\nb,c");
  CHECK_THROWS_AS(attach_centroids(h, {"a", "b"}, two), data_error);
  PointsXd three(3, 2);
  three.setZero();
  CHECK_THROWS_AS(attach_centroids(h, {"a", "b", "b"}, three), data_error);
  CHECK_THROWS_AS(attach_centroids(h, {"a", "b", "zz"}, three), data_error);
}

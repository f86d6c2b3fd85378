#pragma once

// shared test utilities: fixture paths, fixture loaders, random graphs

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "smoothgauge/graph.hpp"
#include "smoothgauge/io.hpp"
#include "smoothgauge/numerics.hpp"

namespace testutil {

inline std::string data_path(const std::string& name) {
  return std::string(SMOOTHGAUGE_DATA_DIR) + "/" + name;
}

inline smoothgauge::AdjacencyGraph spain_graph(bool with_centroids = false) {
  auto g = smoothgauge::load_edge_list(data_path("spain47_edges.csv"));
  if (with_centroids) {
    const auto tab = smoothgauge::read_csv_table(data_path("spain47_centroids.csv"));
    std::vector<std::string> ids;
    smoothgauge::PointsXd xy(tab.rows.size(), 2);
    for (size_t k = 0; k < tab.rows.size(); ++k) {
      ids.push_back(tab.rows[k][0]);
      xy(static_cast<Eigen::Index>(k), 0) = std::stod(tab.rows[k][1]);
      xy(static_cast<Eigen::Index>(k), 1) = std::stod(tab.rows[k][2]);
    }
    smoothgauge::attach_centroids(g, ids, xy);
  }
  return g;
}

// connected random graph: uniform spanning-tree skeleton plus extra edges
inline smoothgauge::AdjacencyGraph random_connected_graph(int A, double extra_edge_prob,
                                                          smoothgauge::Rng& rng) {
  using namespace smoothgauge;
  MatrixXd W = MatrixXd::Zero(A, A);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 1; i < A; ++i) {
    std::uniform_int_distribution<int> pick(0, i - 1);
    const int j = pick(rng);
    W(i, j) = W(j, i) = 1;
  }
  for (int i = 0; i < A; ++i)
    for (int j = i + 1; j < A; ++j)
      if (W(i, j) == 0 && u(rng) < extra_edge_prob) W(i, j) = W(j, i) = 1;
  std::vector<std::string> ids;
  for (int i = 0; i < A; ++i) ids.push_back("v" + std::to_string(i));
  return from_matrix(std::move(ids), std::move(W));
}

}  // namespace testutil

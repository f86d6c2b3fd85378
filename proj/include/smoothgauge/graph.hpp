#pragma once

// Areal adjacency: symmetric 0/1 neighbor matrix W, degree vector, connected
// components, optional planar centroids. Built from edge lists, GeoJSON
// polygon collections (queen or rook contiguity), or rook-lattice generators.

#include <optional>
#include <string>
#include <vector>

#include "smoothgauge/numerics.hpp"

namespace smoothgauge {

struct AdjacencyGraph {
  std::vector<std::string> area_ids;            // file order; all matrices index in it
  MatrixXd W;                                   // binary, symmetric, zero diagonal
  VectorXd degrees;                             // w_i+ = row sums of W
  std::vector<int> components;                  // component label per area
  int n_components = 0;
  std::vector<std::vector<int>> neighbors;      // adjacency lists (hot-loop form of W)
  std::optional<PointsXd> centroids;            // planar coordinates, same order

  int size() const { return static_cast<int>(area_ids.size()); }
  int index_of(const std::string& id) const;    // -1 when absent
};

// lines "idA,idB", '#' starts a comment; duplicate edges collapse; self-loops
// and malformed lines are parse errors carrying the 1-based line number.
// An optional "# ids: a,b,c" header pins the area order; otherwise order of
// first appearance is used.
AdjacencyGraph from_edge_list(const std::string& text);
AdjacencyGraph load_edge_list(const std::string& path);

// GeoJSON FeatureCollection with a per-feature "id" property. queen=true joins
// areas sharing at least one boundary point; queen=false (rook) requires a
// positive-length shared border. Centroids are area-weighted.
AdjacencyGraph from_polygons(const std::string& geojson_text, bool queen = true);
AdjacencyGraph load_polygons(const std::string& path, bool queen = true);

// rows x cols rook lattice, row-major ids "r<i>c<j>", centroids (col, row)
AdjacencyGraph lattice(int rows, int cols);

// component count + labels for an externally built W (labels by smallest
// contained area index)
int connected_components(const MatrixXd& W, std::vector<int>& labels);

// attach planar coordinates by id (e.g. from a centroids CSV); every area
// must receive exactly one coordinate pair
void attach_centroids(AdjacencyGraph& g, const std::vector<std::string>& ids,
                      const PointsXd& coords);

// assemble a graph from an explicit W (used by tests and random-graph tools)
AdjacencyGraph from_matrix(std::vector<std::string> ids, MatrixXd W);

}  // namespace smoothgauge

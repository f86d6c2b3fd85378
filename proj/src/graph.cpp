#include "smoothgauge/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace smoothgauge {

namespace {

using json = nlohmann::json;

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

// degrees, adjacency lists, components; call once W and ids are final
void finalize(AdjacencyGraph& g) {
  const int A = g.size();
  g.degrees = g.W.rowwise().sum();
  g.neighbors.assign(A, {});
  for (int i = 0; i < A; ++i)
    for (int j = 0; j < A; ++j)
      if (g.W(i, j) != 0.0) g.neighbors[i].push_back(j);
  g.n_components = connected_components(g.W, g.components);
}

}  // namespace

int AdjacencyGraph::index_of(const std::string& id) const {
  const auto it = std::find(area_ids.begin(), area_ids.end(), id);
  return it == area_ids.end() ? -1 : static_cast<int>(it - area_ids.begin());
}

int connected_components(const MatrixXd& W, std::vector<int>& labels) {
  const int A = static_cast<int>(W.rows());
  labels.assign(A, -1);
  int count = 0;
  std::vector<int> stack;
  for (int s = 0; s < A; ++s) {
    if (labels[s] != -1) continue;
    stack.push_back(s);
    labels[s] = count;
    while (!stack.empty()) {
      const int i = stack.back();
      stack.pop_back();
      for (int j = 0; j < A; ++j)
        if (W(i, j) != 0.0 && labels[j] == -1) {
          labels[j] = count;
          stack.push_back(j);
        }
    }
    ++count;
  }
  return count;
}

AdjacencyGraph from_matrix(std::vector<std::string> ids, MatrixXd W) {
  if (static_cast<Eigen::Index>(ids.size()) != W.rows() || W.rows() != W.cols())
    throw input_error("from_matrix: id count and W shape disagree");
  AdjacencyGraph g;
  g.area_ids = std::move(ids);
  g.W = std::move(W);
  finalize(g);
  return g;
}

AdjacencyGraph from_edge_list(const std::string& text) {
  std::vector<std::string> ids;
  std::map<std::string, int> index;
  auto intern = [&](const std::string& id) {
    const auto it = index.find(id);
    if (it != index.end()) return it->second;
    const int k = static_cast<int>(ids.size());
    ids.push_back(id);
    index.emplace(id, k);
    return k;
  };

  std::vector<std::pair<int, int>> edges;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  bool pinned_ids = false;
  while (std::getline(in, line)) {
    ++lineno;
    std::string body = line;
    if (const auto hash = body.find('#'); hash != std::string::npos) {
      // "# ids: a,b,c" header pins the ordering before any edge is seen
      const std::string comment = trim(body.substr(hash + 1));
      if (comment.rfind("ids:", 0) == 0) {
        if (pinned_ids || !ids.empty())
          throw input_error("edge list line " + std::to_string(lineno) +
                            ": ids header must come first and appear once");
        std::istringstream decl(comment.substr(4));
        std::string id;
        while (std::getline(decl, id, ',')) {
          id = trim(id);
          if (id.empty() || index.count(id))
            throw input_error("edge list line " + std::to_string(lineno) +
                              ": empty or duplicate id in header");
          intern(id);
        }
        pinned_ids = true;
      }
      body = body.substr(0, hash);
    }
    body = trim(body);
    if (body.empty()) continue;
    const auto comma = body.find(',');
    if (comma == std::string::npos || body.find(',', comma + 1) != std::string::npos)
      throw input_error("edge list line " + std::to_string(lineno) +
                        ": expected exactly one comma in \"" + body + "\"");
    const std::string a = trim(body.substr(0, comma));
    const std::string b = trim(body.substr(comma + 1));
    if (a.empty() || b.empty())
      throw input_error("edge list line " + std::to_string(lineno) + ": empty id");
    if (a == b)
      throw input_error("edge list line " + std::to_string(lineno) + ": self-loop on \"" +
                        a + "\"");
    if (pinned_ids && (!index.count(a) || !index.count(b)))
      throw input_error("edge list line " + std::to_string(lineno) +
                        ": id not declared in header");
    edges.emplace_back(intern(a), intern(b));
  }

  AdjacencyGraph g;
  g.area_ids = ids;
  const int A = g.size();
  g.W = MatrixXd::Zero(A, A);
  for (const auto& [i, j] : edges) g.W(i, j) = g.W(j, i) = 1.0;
  finalize(g);
  return g;
}

AdjacencyGraph load_edge_list(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw input_error("cannot open edge list: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return from_edge_list(buf.str());
}

namespace {

struct Ring {
  std::vector<std::array<double, 2>> pts;  // closed: first == last not required
};

struct Shape {
  std::string id;
  std::vector<Ring> rings;  // outer rings and holes of all parts
};

// signed area and centroid of one ring (shoelace)
std::pair<double, std::array<double, 2>> ring_area_centroid(const Ring& r) {
  double a2 = 0, cx = 0, cy = 0;
  const size_t n = r.pts.size();
  for (size_t k = 0; k < n; ++k) {
    const auto& p = r.pts[k];
    const auto& q = r.pts[(k + 1) % n];
    const double cross = p[0] * q[1] - q[0] * p[1];
    a2 += cross;
    cx += (p[0] + q[0]) * cross;
    cy += (p[1] + q[1]) * cross;
  }
  if (a2 == 0) return {0.0, {r.pts.front()[0], r.pts.front()[1]}};
  return {a2 / 2.0, {cx / (3.0 * a2), cy / (3.0 * a2)}};
}

Ring parse_ring(const json& coords) {
  Ring r;
  for (const auto& p : coords) {
    if (!p.is_array() || p.size() < 2) throw input_error("GeoJSON: bad coordinate");
    r.pts.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  if (r.pts.size() >= 2 && r.pts.front() == r.pts.back()) r.pts.pop_back();
  if (r.pts.size() < 3) throw input_error("GeoJSON: ring with fewer than 3 points");
  return r;
}

double dist2(const std::array<double, 2>& a, const std::array<double, 2>& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1];
  return dx * dx + dy * dy;
}

// squared distance from point p to segment [a,b]
double point_segment_dist2(const std::array<double, 2>& p, const std::array<double, 2>& a,
                           const std::array<double, 2>& b) {
  const double vx = b[0] - a[0], vy = b[1] - a[1];
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? ((p[0] - a[0]) * vx + (p[1] - a[1]) * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const std::array<double, 2> proj{a[0] + t * vx, a[1] + t * vy};
  return dist2(p, proj);
}

// overlap length of two collinear-within-tol segments; 0 when not collinear
double collinear_overlap(const std::array<double, 2>& a1, const std::array<double, 2>& a2,
                         const std::array<double, 2>& b1, const std::array<double, 2>& b2,
                         double tol) {
  const double vx = a2[0] - a1[0], vy = a2[1] - a1[1];
  const double len = std::hypot(vx, vy);
  if (len < tol) return 0.0;
  const double ux = vx / len, uy = vy / len;
  // both endpoints of b must lie on the a-line
  const double off1 = std::abs(-uy * (b1[0] - a1[0]) + ux * (b1[1] - a1[1]));
  const double off2 = std::abs(-uy * (b2[0] - a1[0]) + ux * (b2[1] - a1[1]));
  if (off1 > tol || off2 > tol) return 0.0;
  const double s1 = ux * (b1[0] - a1[0]) + uy * (b1[1] - a1[1]);
  const double s2 = ux * (b2[0] - a1[0]) + uy * (b2[1] - a1[1]);
  const double lo = std::max(0.0, std::min(s1, s2));
  const double hi = std::min(len, std::max(s1, s2));
  return std::max(0.0, hi - lo);
}

// queen: any shared boundary point (vertex-to-boundary contact is enough)
bool touches_queen(const Shape& A, const Shape& B, double tol) {
  for (const auto& ra : A.rings)
    for (const auto& pa : ra.pts)
      for (const auto& rb : B.rings) {
        const size_t n = rb.pts.size();
        for (size_t k = 0; k < n; ++k)
          if (point_segment_dist2(pa, rb.pts[k], rb.pts[(k + 1) % n]) <= tol * tol)
            return true;
      }
  for (const auto& rb : B.rings)
    for (const auto& pb : rb.pts)
      for (const auto& ra : A.rings) {
        const size_t n = ra.pts.size();
        for (size_t k = 0; k < n; ++k)
          if (point_segment_dist2(pb, ra.pts[k], ra.pts[(k + 1) % n]) <= tol * tol)
            return true;
      }
  return false;
}

// rook: a positive-length stretch of common border
bool touches_rook(const Shape& A, const Shape& B, double tol) {
  for (const auto& ra : A.rings) {
    const size_t na = ra.pts.size();
    for (size_t i = 0; i < na; ++i)
      for (const auto& rb : B.rings) {
        const size_t nb = rb.pts.size();
        for (size_t j = 0; j < nb; ++j)
          if (collinear_overlap(ra.pts[i], ra.pts[(i + 1) % na], rb.pts[j],
                                rb.pts[(j + 1) % nb], tol) > tol)
            return true;
      }
  }
  return false;
}

}  // namespace

AdjacencyGraph from_polygons(const std::string& geojson_text, bool queen) {
  json doc;
  try {
    doc = json::parse(geojson_text);
  } catch (const json::exception& e) {
    throw input_error(std::string("GeoJSON parse failure: ") + e.what());
  }
  if (doc.value("type", "") != "FeatureCollection" || !doc.contains("features"))
    throw input_error("GeoJSON: expected a FeatureCollection with features");

  std::vector<Shape> shapes;
  std::map<std::string, int> seen;
  for (const auto& feat : doc["features"]) {
    if (!feat.contains("properties") || !feat["properties"].contains("id"))
      throw input_error("GeoJSON: every feature needs an \"id\" property");
    Shape s;
    const auto& idval = feat["properties"]["id"];
    s.id = idval.is_string() ? idval.get<std::string>() : idval.dump();
    if (seen.count(s.id)) throw input_error("GeoJSON: duplicate id \"" + s.id + "\"");
    seen.emplace(s.id, static_cast<int>(shapes.size()));
    const auto& geom = feat.at("geometry");
    const std::string type = geom.value("type", "");
    if (type == "Polygon") {
      for (const auto& ring : geom.at("coordinates")) s.rings.push_back(parse_ring(ring));
    } else if (type == "MultiPolygon") {
      for (const auto& poly : geom.at("coordinates"))
        for (const auto& ring : poly) s.rings.push_back(parse_ring(ring));
    } else {
      throw input_error("GeoJSON: unsupported geometry type \"" + type + "\"");
    }
    if (s.rings.empty()) throw input_error("GeoJSON: feature \"" + s.id + "\" has no rings");
    shapes.push_back(std::move(s));
  }
  if (shapes.empty()) throw input_error("GeoJSON: no features");

  // contact tolerance relative to the overall extent
  double lo_x = 1e300, hi_x = -1e300, lo_y = 1e300, hi_y = -1e300;
  for (const auto& s : shapes)
    for (const auto& r : s.rings)
      for (const auto& p : r.pts) {
        lo_x = std::min(lo_x, p[0]);
        hi_x = std::max(hi_x, p[0]);
        lo_y = std::min(lo_y, p[1]);
        hi_y = std::max(hi_y, p[1]);
      }
  const double tol = 1e-9 * std::max(1.0, std::hypot(hi_x - lo_x, hi_y - lo_y));

  AdjacencyGraph g;
  const int A = static_cast<int>(shapes.size());
  g.W = MatrixXd::Zero(A, A);
  PointsXd cent(A, 2);
  for (int i = 0; i < A; ++i) {
    g.area_ids.push_back(shapes[i].id);
    // area-weighted centroid over rings (holes carry negative signed area)
    double wsum = 0, cx = 0, cy = 0;
    for (const auto& r : shapes[i].rings) {
      const auto [a, c] = ring_area_centroid(r);
      wsum += a;
      cx += a * c[0];
      cy += a * c[1];
    }
    if (wsum == 0) throw input_error("GeoJSON: degenerate polygon \"" + shapes[i].id + "\"");
    cent(i, 0) = cx / wsum;
    cent(i, 1) = cy / wsum;
  }
  for (int i = 0; i < A; ++i)
    for (int j = i + 1; j < A; ++j) {
      const bool touch = queen ? touches_queen(shapes[i], shapes[j], tol)
                               : touches_rook(shapes[i], shapes[j], tol);
      if (touch) g.W(i, j) = g.W(j, i) = 1.0;
    }
  g.centroids = cent;
  finalize(g);
  return g;
}

AdjacencyGraph load_polygons(const std::string& path, bool queen) {
  std::ifstream f(path);
  if (!f) throw input_error("cannot open GeoJSON: " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return from_polygons(buf.str(), queen);
}

AdjacencyGraph lattice(int rows, int cols) {
  if (rows < 1 || cols < 1) throw input_error("lattice: rows and cols must be positive");
  AdjacencyGraph g;
  const int A = rows * cols;
  g.W = MatrixXd::Zero(A, A);
  PointsXd cent(A, 2);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      const int k = i * cols + j;
      g.area_ids.push_back("r" + std::to_string(i) + "c" + std::to_string(j));
      cent(k, 0) = j;
      cent(k, 1) = i;
      if (j + 1 < cols) g.W(k, k + 1) = g.W(k + 1, k) = 1.0;
      if (i + 1 < rows) g.W(k, k + cols) = g.W(k + cols, k) = 1.0;
    }
  g.centroids = cent;
  finalize(g);
  return g;
}

void attach_centroids(AdjacencyGraph& g, const std::vector<std::string>& ids,
                      const PointsXd& coords) {
  if (static_cast<Eigen::Index>(ids.size()) != coords.rows())
    throw input_error("attach_centroids: id count and coordinate count disagree");
  PointsXd cent(g.size(), 2);
  std::vector<bool> set(g.size(), false);
  for (size_t k = 0; k < ids.size(); ++k) {
    const int i = g.index_of(ids[k]);
    if (i < 0) throw data_error("attach_centroids: unknown area id \"" + ids[k] + "\"");
    if (set[i]) throw data_error("attach_centroids: duplicate coordinates for \"" + ids[k] + "\"");
    cent.row(i) = coords.row(k);
    set[i] = true;
  }
  for (int i = 0; i < g.size(); ++i)
    if (!set[i]) throw data_error("attach_centroids: no coordinates for \"" + g.area_ids[i] + "\"");
  g.centroids = cent;
}

}  // namespace smoothgauge

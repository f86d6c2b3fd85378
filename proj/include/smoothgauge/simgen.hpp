#pragma once

// Synthetic disease-rate scenarios over polygonal regions: a point grid
// clipped to the areas, an exposure-driven mean surface on the logit scale,
// Gaussian-process draws with Matern correlation around that mean,
// aggregation to per-area rates, and Poisson replicate counts.

#include <cstdint>
#include <string>
#include <vector>

#include "smoothgauge/numerics.hpp"

namespace smoothgauge {

// polygon rings in planar coordinates; containment uses the even-odd rule
// across all rings, so later rings cut holes out of earlier ones
struct AreaPolygon {
  std::string id;
  std::vector<PointsXd> rings;  // each ring closes implicitly
};
using Region = std::vector<AreaPolygon>;

struct Box {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double diameter() const;  // corner-to-corner distance
};
Box bounding_box(const Region& region);

bool point_in_polygon(double x, double y, const AreaPolygon& poly);

// rows x cols unit squares matching lattice(rows, cols): area "r<i>c<j>"
// covers [j-0.5, j+0.5] x [i-0.5, i+0.5] so its centroid is (j, i)
Region lattice_region(int rows, int cols);

// regular grid of cell centers over the region's bounding box, keeping the
// points that fall inside some area; ties go to the first containing area
struct SimGrid {
  PointsXd points;                        // kept points, one row each
  std::vector<int> area_of;               // area index per kept point
  std::vector<std::string> area_ids;      // region order
  std::vector<std::vector<int>> members;  // point indices per area
  Box box;
  int resolution = 0;  // points per axis actually used
};

// resolution 0 picks the smallest grid averaging >= 25 points per area and
// doubles it until no area is empty; an explicit resolution that leaves an
// area without points is an error asking for a finer grid
SimGrid make_grid(const Region& region, int resolution = 0);

struct ScenarioSpec {
  int grid_resolution = 0;          // 0 = auto
  PointsXd exposure_sites;          // K x 2, at least one
  double mean_base = logit(2e-4);   // logit-scale level far from all sites
  double mean_amplitude = 1.0;      // added at distance zero from one site
  double mean_decay = 0.0;          // e-folding range; 0 = 0.2 * box diameter
  double sigma_c = 0.1;             // surface standard deviation, > 0
  double matern_v = 2.0;            // smoothness
  double matern_phi = 2.0;          // decay
  VectorXd populations;             // one positive entry per area
  int replicates = 50;              // B
  uint64_t seed = 0;
  void validate() const;
};

// canonical site layouts scaled to the region's bounding box:
// 1 = two sites on the main diagonal, 2 = four corner sites,
// 3 = six sites mixing corners and interior
ScenarioSpec scenario_preset(int which, const Region& region);

ScenarioSpec scenario_from_json(const std::string& text);
std::string scenario_to_json(const ScenarioSpec& spec);

// deterministic logit-scale mean: base + amplitude * sum_k exp(-d_k / decay)
VectorXd mean_surface(const SimGrid& grid, const ScenarioSpec& spec);

// reusable factor for repeated surface draws on one grid
class SurfaceSampler {
 public:
  SurfaceSampler(const SimGrid& grid, const ScenarioSpec& spec);
  VectorXd draw(Rng& rng) const;  // mean + sigma_c * chol(R) * z
  const VectorXd& mean() const { return mu_; }

 private:
  VectorXd mu_;
  MatrixXd factor_;
};

// one surface draw; builds the factor each call
VectorXd sample_surface(const SimGrid& grid, const ScenarioSpec& spec, Rng& rng);

// per-area mean of logistic(surface) over member points
VectorXd aggregate_rates(const VectorXd& surface, const SimGrid& grid);

// counts[b][i] ~ Poisson(populations[i] * rates[i]), one derived rng
// stream per replicate so rows are reproducible independently of order
MatrixXd replicate_counts(const VectorXd& rates, const VectorXd& populations,
                          int replicates, uint64_t seed);

struct ReplicateSet {
  std::vector<std::string> area_ids;
  VectorXd true_rates;    // aggregated from one surface draw
  MatrixXd counts;        // replicates x areas
  ScenarioSpec scenario;  // echo with auto fields resolved
};

// grid, surface, rates, counts in one deterministic pass; the echoed
// scenario records the resolution and decay actually used
ReplicateSet generate(const Region& region, const ScenarioSpec& spec);

// counts CSV (area_id, replicate, count), rates CSV (area_id, true_rate),
// manifest JSON (scenario echo, area ids, digests of both CSVs)
void write_replicate_set(const ReplicateSet& rs, const std::string& counts_csv,
                         const std::string& rates_csv,
                         const std::string& manifest_json);
ReplicateSet read_replicate_set(const std::string& counts_csv,
                                const std::string& rates_csv,
                                const std::string& manifest_json);

}  // namespace smoothgauge

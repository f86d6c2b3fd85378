#include "smoothgauge/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "smoothgauge/errors.hpp"
#include "smoothgauge/io.hpp"

namespace smoothgauge {

namespace {

constexpr uint64_t kStreamMix = 0x9E3779B97F4A7C15ull;

// stream for replicate b, disjoint from Rng(seed) used by the surface draw
Rng replicate_rng(uint64_t seed, int b) {
  return Rng(seed ^ (kStreamMix * static_cast<uint64_t>(b + 1)));
}

double resolved_decay(const ScenarioSpec& spec, const Box& box) {
  return spec.mean_decay > 0 ? spec.mean_decay : 0.2 * box.diameter();
}

nlohmann::json scenario_to_jobj(const ScenarioSpec& spec) {
  nlohmann::json sites = nlohmann::json::array();
  for (Eigen::Index k = 0; k < spec.exposure_sites.rows(); ++k)
    sites.push_back({spec.exposure_sites(k, 0), spec.exposure_sites(k, 1)});
  nlohmann::json pops = nlohmann::json::array();
  for (Eigen::Index i = 0; i < spec.populations.size(); ++i)
    pops.push_back(spec.populations[i]);
  return {{"grid_resolution", spec.grid_resolution},
          {"exposure_sites", sites},
          {"mean_base", spec.mean_base},
          {"mean_amplitude", spec.mean_amplitude},
          {"mean_decay", spec.mean_decay},
          {"sigma_c", spec.sigma_c},
          {"matern_v", spec.matern_v},
          {"matern_phi", spec.matern_phi},
          {"populations", pops},
          {"replicates", spec.replicates},
          {"seed", spec.seed}};
}

ScenarioSpec scenario_from_jobj(const nlohmann::json& j) {
  ScenarioSpec spec;
  spec.grid_resolution = j.value("grid_resolution", spec.grid_resolution);
  if (j.contains("exposure_sites")) {
    const auto& sites = j.at("exposure_sites");
    spec.exposure_sites.resize(static_cast<Eigen::Index>(sites.size()), 2);
    Eigen::Index k = 0;
    for (const auto& s : sites) {
      if (!s.is_array() || s.size() != 2)
        throw data_error("scenario json: each exposure site needs [x, y]");
      spec.exposure_sites(k, 0) = s[0].get<double>();
      spec.exposure_sites(k, 1) = s[1].get<double>();
      ++k;
    }
  }
  spec.mean_base = j.value("mean_base", spec.mean_base);
  spec.mean_amplitude = j.value("mean_amplitude", spec.mean_amplitude);
  spec.mean_decay = j.value("mean_decay", spec.mean_decay);
  spec.sigma_c = j.value("sigma_c", spec.sigma_c);
  spec.matern_v = j.value("matern_v", spec.matern_v);
  spec.matern_phi = j.value("matern_phi", spec.matern_phi);
  if (j.contains("populations")) {
    const auto& pops = j.at("populations");
    spec.populations.resize(static_cast<Eigen::Index>(pops.size()));
    Eigen::Index i = 0;
    for (const auto& p : pops) spec.populations[i++] = p.get<double>();
  }
  spec.replicates = j.value("replicates", spec.replicates);
  spec.seed = j.value("seed", spec.seed);
  spec.validate();
  return spec;
}

}  // namespace

double Box::diameter() const { return std::hypot(width(), height()); }

Box bounding_box(const Region& region) {
  if (region.empty()) throw input_error("bounding_box: empty region");
  Box b;
  bool first = true;
  for (const auto& poly : region) {
    if (poly.rings.empty())
      throw input_error("bounding_box: area \"" + poly.id + "\" has no rings");
    for (const auto& ring : poly.rings) {
      if (ring.rows() < 3)
        throw input_error("bounding_box: area \"" + poly.id +
                          "\" has a ring with fewer than 3 points");
      if (!ring.allFinite())
        throw input_error("bounding_box: non-finite coordinate in area \"" + poly.id + "\"");
      for (Eigen::Index i = 0; i < ring.rows(); ++i) {
        const double x = ring(i, 0), y = ring(i, 1);
        if (first) {
          b = {x, y, x, y};
          first = false;
        } else {
          b.x0 = std::min(b.x0, x);
          b.y0 = std::min(b.y0, y);
          b.x1 = std::max(b.x1, x);
          b.y1 = std::max(b.y1, y);
        }
      }
    }
  }
  return b;
}

bool point_in_polygon(double x, double y, const AreaPolygon& poly) {
  bool inside = false;
  for (const auto& ring : poly.rings) {
    const Eigen::Index n = ring.rows();
    for (Eigen::Index i = 0, j = n - 1; i < n; j = i++) {
      const double xi = ring(i, 0), yi = ring(i, 1);
      const double xj = ring(j, 0), yj = ring(j, 1);
      if ((yi > y) != (yj > y) && x < xi + (y - yi) / (yj - yi) * (xj - xi))
        inside = !inside;
    }
  }
  return inside;
}

Region lattice_region(int rows, int cols) {
  if (rows < 1 || cols < 1) throw input_error("lattice_region: need rows, cols >= 1");
  Region region;
  region.reserve(static_cast<size_t>(rows) * cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) {
      AreaPolygon poly;
      poly.id = "r" + std::to_string(i) + "c" + std::to_string(j);
      PointsXd ring(4, 2);
      ring << j - 0.5, i - 0.5, j + 0.5, i - 0.5, j + 0.5, i + 0.5, j - 0.5, i + 0.5;
      poly.rings.push_back(ring);
      region.push_back(std::move(poly));
    }
  return region;
}

namespace {

SimGrid build_grid(const Region& region, const Box& box, int resolution) {
  SimGrid grid;
  grid.box = box;
  grid.resolution = resolution;
  grid.area_ids.reserve(region.size());
  for (const auto& poly : region) grid.area_ids.push_back(poly.id);
  grid.members.assign(region.size(), {});

  const double dx = box.width() / resolution;
  const double dy = box.height() / resolution;
  std::vector<double> xs, ys;
  std::vector<int> owner;
  for (int gy = 0; gy < resolution; ++gy)
    for (int gx = 0; gx < resolution; ++gx) {
      const double x = box.x0 + (gx + 0.5) * dx;
      const double y = box.y0 + (gy + 0.5) * dy;
      for (size_t a = 0; a < region.size(); ++a)
        if (point_in_polygon(x, y, region[a])) {
          grid.members[a].push_back(static_cast<int>(xs.size()));
          xs.push_back(x);
          ys.push_back(y);
          owner.push_back(static_cast<int>(a));
          break;
        }
    }
  grid.points.resize(static_cast<Eigen::Index>(xs.size()), 2);
  for (size_t p = 0; p < xs.size(); ++p) {
    grid.points(static_cast<Eigen::Index>(p), 0) = xs[p];
    grid.points(static_cast<Eigen::Index>(p), 1) = ys[p];
  }
  grid.area_of = std::move(owner);
  return grid;
}

int first_empty_area(const SimGrid& grid) {
  for (size_t a = 0; a < grid.members.size(); ++a)
    if (grid.members[a].empty()) return static_cast<int>(a);
  return -1;
}

}  // namespace

SimGrid make_grid(const Region& region, int resolution) {
  if (resolution < 0) throw input_error("make_grid: resolution must be >= 0");
  const Box box = bounding_box(region);
  if (!(box.width() > 0) || !(box.height() > 0))
    throw input_error("make_grid: region bounding box is degenerate");
  std::set<std::string> seen;
  for (const auto& poly : region)
    if (!seen.insert(poly.id).second)
      throw input_error("make_grid: duplicate area id \"" + poly.id + "\"");

  if (resolution > 0) {
    SimGrid grid = build_grid(region, box, resolution);
    const int empty = first_empty_area(grid);
    if (empty >= 0)
      throw data_error("make_grid: area \"" + grid.area_ids[empty] +
                       "\" contains no grid point at resolution " +
                       std::to_string(resolution) + "; use a finer grid");
    return grid;
  }

  const double want = 25.0 * static_cast<double>(region.size());
  int res = std::max(2, static_cast<int>(std::ceil(std::sqrt(want))));
  constexpr int kMaxResolution = 4096;
  while (true) {
    SimGrid grid = build_grid(region, box, res);
    if (first_empty_area(grid) < 0) return grid;
    if (res >= kMaxResolution) {
      const int empty = first_empty_area(grid);
      throw data_error("make_grid: area \"" + grid.area_ids[empty] +
                       "\" contains no grid point even at resolution " +
                       std::to_string(res) + "; check the polygon");
    }
    res = std::min(kMaxResolution, res * 2);
  }
}

void ScenarioSpec::validate() const {
  if (grid_resolution < 0) throw input_error("scenario: grid_resolution must be >= 0");
  if (exposure_sites.rows() < 1)
    throw input_error("scenario: need at least one exposure site");
  if (!exposure_sites.allFinite())
    throw input_error("scenario: non-finite exposure site coordinate");
  if (!std::isfinite(mean_base) || !std::isfinite(mean_amplitude))
    throw input_error("scenario: mean_base and mean_amplitude must be finite");
  if (!(mean_decay >= 0) || !std::isfinite(mean_decay))
    throw input_error("scenario: mean_decay must be >= 0 (0 = auto)");
  if (!(sigma_c > 0) || !std::isfinite(sigma_c))
    throw input_error("scenario: sigma_c must be positive");
  if (!(matern_v > 0) || !(matern_phi > 0))
    throw input_error("scenario: matern_v and matern_phi must be positive");
  for (Eigen::Index i = 0; i < populations.size(); ++i)
    if (!(populations[i] > 0) || !std::isfinite(populations[i]))
      throw input_error("scenario: populations must be positive");
  if (replicates < 1) throw input_error("scenario: replicates must be >= 1");
}

ScenarioSpec scenario_preset(int which, const Region& region) {
  const Box box = bounding_box(region);
  std::vector<std::pair<double, double>> frac;
  switch (which) {
    case 1:
      frac = {{0.25, 0.25}, {0.75, 0.75}};
      break;
    case 2:
      frac = {{0.2, 0.2}, {0.2, 0.8}, {0.8, 0.2}, {0.8, 0.8}};
      break;
    case 3:
      frac = {{0.2, 0.2}, {0.2, 0.8}, {0.8, 0.2}, {0.8, 0.8}, {0.5, 0.5}, {0.35, 0.65}};
      break;
    default:
      throw input_error("scenario_preset: which must be 1, 2, or 3");
  }
  ScenarioSpec spec;
  spec.exposure_sites.resize(static_cast<Eigen::Index>(frac.size()), 2);
  for (size_t k = 0; k < frac.size(); ++k) {
    spec.exposure_sites(static_cast<Eigen::Index>(k), 0) = box.x0 + frac[k].first * box.width();
    spec.exposure_sites(static_cast<Eigen::Index>(k), 1) = box.y0 + frac[k].second * box.height();
  }
  return spec;
}

ScenarioSpec scenario_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw data_error(std::string("scenario json: ") + e.what());
  }
  try {
    return scenario_from_jobj(j);
  } catch (const nlohmann::json::exception& e) {
    throw data_error(std::string("scenario json: ") + e.what());
  }
}

std::string scenario_to_json(const ScenarioSpec& spec) {
  return scenario_to_jobj(spec).dump(2);
}

VectorXd mean_surface(const SimGrid& grid, const ScenarioSpec& spec) {
  spec.validate();
  const double decay = resolved_decay(spec, grid.box);
  VectorXd mu(grid.points.rows());
  for (Eigen::Index p = 0; p < grid.points.rows(); ++p) {
    double bump = 0;
    for (Eigen::Index k = 0; k < spec.exposure_sites.rows(); ++k) {
      const double d = std::hypot(grid.points(p, 0) - spec.exposure_sites(k, 0),
                                  grid.points(p, 1) - spec.exposure_sites(k, 1));
      bump += std::exp(-d / decay);
    }
    mu[p] = spec.mean_base + spec.mean_amplitude * bump;
  }
  return mu;
}

SurfaceSampler::SurfaceSampler(const SimGrid& grid, const ScenarioSpec& spec) {
  mu_ = mean_surface(grid, spec);
  const MatrixXd dist = pairwise_distances(grid.points);
  const Eigen::Index n = dist.rows();
  MatrixXd corr(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    corr(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const double r = matern(dist(i, j), spec.matern_v, spec.matern_phi);
      corr(i, j) = r;
      corr(j, i) = r;
    }
  }
  factor_ = spec.sigma_c * cholesky_psd(corr);
}

VectorXd SurfaceSampler::draw(Rng& rng) const { return sample_mvn(mu_, factor_, rng); }

VectorXd sample_surface(const SimGrid& grid, const ScenarioSpec& spec, Rng& rng) {
  return SurfaceSampler(grid, spec).draw(rng);
}

VectorXd aggregate_rates(const VectorXd& surface, const SimGrid& grid) {
  if (surface.size() != grid.points.rows())
    throw input_error("aggregate_rates: surface length must match the grid");
  VectorXd rates(static_cast<Eigen::Index>(grid.members.size()));
  for (size_t a = 0; a < grid.members.size(); ++a) {
    if (grid.members[a].empty())
      throw input_error("aggregate_rates: area \"" + grid.area_ids[a] + "\" has no points");
    double acc = 0;
    for (int p : grid.members[a]) acc += inv_logit(surface[p]);
    rates[static_cast<Eigen::Index>(a)] = acc / static_cast<double>(grid.members[a].size());
  }
  return rates;
}

MatrixXd replicate_counts(const VectorXd& rates, const VectorXd& populations,
                          int replicates, uint64_t seed) {
  if (rates.size() != populations.size())
    throw input_error("replicate_counts: rates and populations must align");
  if (rates.size() == 0) throw input_error("replicate_counts: no areas");
  if (replicates < 1) throw input_error("replicate_counts: replicates must be >= 1");
  for (Eigen::Index i = 0; i < rates.size(); ++i) {
    if (!(rates[i] >= 0) || !(rates[i] <= 1))
      throw input_error("replicate_counts: rates must lie in [0, 1]");
    if (!(populations[i] > 0) || !std::isfinite(populations[i]))
      throw input_error("replicate_counts: populations must be positive");
  }
  MatrixXd counts(replicates, rates.size());
  for (int b = 0; b < replicates; ++b) {
    Rng rng = replicate_rng(seed, b);
    for (Eigen::Index i = 0; i < rates.size(); ++i) {
      const double lambda = populations[i] * rates[i];
      if (lambda > 0) {
        std::poisson_distribution<long long> pois(lambda);
        counts(b, i) = static_cast<double>(pois(rng));
      } else {
        counts(b, i) = 0.0;
      }
    }
  }
  return counts;
}

ReplicateSet generate(const Region& region, const ScenarioSpec& spec) {
  spec.validate();
  SimGrid grid = make_grid(region, spec.grid_resolution);
  const auto n_areas = static_cast<Eigen::Index>(grid.area_ids.size());
  if (spec.populations.size() != n_areas)
    throw data_error("generate: need " + std::to_string(n_areas) +
                     " populations, got " + std::to_string(spec.populations.size()));

  ReplicateSet rs;
  rs.area_ids = grid.area_ids;
  rs.scenario = spec;
  rs.scenario.grid_resolution = grid.resolution;
  rs.scenario.mean_decay = resolved_decay(spec, grid.box);

  Rng rng(spec.seed);
  const SurfaceSampler sampler(grid, rs.scenario);
  rs.true_rates = aggregate_rates(sampler.draw(rng), grid);
  rs.counts = replicate_counts(rs.true_rates, spec.populations, spec.replicates, spec.seed);
  return rs;
}

void write_replicate_set(const ReplicateSet& rs, const std::string& counts_csv,
                         const std::string& rates_csv, const std::string& manifest_json) {
  const auto n_areas = static_cast<Eigen::Index>(rs.area_ids.size());
  if (rs.counts.cols() != n_areas || rs.true_rates.size() != n_areas)
    throw input_error("write_replicate_set: inconsistent replicate set");

  std::vector<std::vector<std::string>> count_rows;
  count_rows.reserve(static_cast<size_t>(rs.counts.rows()) * rs.area_ids.size());
  for (Eigen::Index b = 0; b < rs.counts.rows(); ++b)
    for (Eigen::Index i = 0; i < n_areas; ++i)
      count_rows.push_back({rs.area_ids[static_cast<size_t>(i)], std::to_string(b),
                            std::to_string(static_cast<long long>(rs.counts(b, i)))});
  write_csv(counts_csv, {"area_id", "replicate", "count"}, count_rows);

  std::vector<std::vector<std::string>> rate_rows;
  rate_rows.reserve(rs.area_ids.size());
  for (Eigen::Index i = 0; i < n_areas; ++i)
    rate_rows.push_back(
        {rs.area_ids[static_cast<size_t>(i)], format_double(rs.true_rates[i])});
  write_csv(rates_csv, {"area_id", "true_rate"}, rate_rows);

  nlohmann::json manifest = {{"scenario", scenario_to_jobj(rs.scenario)},
                             {"area_ids", rs.area_ids},
                             {"counts_digest", file_digest(counts_csv)},
                             {"rates_digest", file_digest(rates_csv)}};
  std::ofstream out(manifest_json);
  if (!out) throw data_error("write_replicate_set: cannot write " + manifest_json);
  out << manifest.dump(2) << "\n";
}

ReplicateSet read_replicate_set(const std::string& counts_csv, const std::string& rates_csv,
                                const std::string& manifest_json) {
  std::ifstream in(manifest_json);
  if (!in) throw data_error("read_replicate_set: cannot open " + manifest_json);
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::exception& e) {
    throw data_error(std::string("read_replicate_set: manifest: ") + e.what());
  }

  ReplicateSet rs;
  try {
    rs.scenario = scenario_from_jobj(manifest.at("scenario"));
    rs.area_ids = manifest.at("area_ids").get<std::vector<std::string>>();
    if (manifest.at("counts_digest").get<std::string>() != file_digest(counts_csv))
      throw data_error("read_replicate_set: counts file does not match its manifest digest");
    if (manifest.at("rates_digest").get<std::string>() != file_digest(rates_csv))
      throw data_error("read_replicate_set: rates file does not match its manifest digest");
  } catch (const nlohmann::json::exception& e) {
    throw data_error(std::string("read_replicate_set: manifest: ") + e.what());
  }

  const auto n_areas = static_cast<Eigen::Index>(rs.area_ids.size());
  std::map<std::string, Eigen::Index> index;
  for (Eigen::Index i = 0; i < n_areas; ++i) index[rs.area_ids[static_cast<size_t>(i)]] = i;

  const CsvTable rates = read_csv_table(rates_csv);
  const int rid = rates.column("area_id"), rval = rates.column("true_rate");
  if (rid < 0 || rval < 0)
    throw data_error("read_replicate_set: rates file needs area_id and true_rate columns");
  rs.true_rates.resize(n_areas);
  std::vector<bool> seen(static_cast<size_t>(n_areas), false);
  for (const auto& row : rates.rows) {
    const auto it = index.find(row[static_cast<size_t>(rid)]);
    if (it == index.end())
      throw data_error("read_replicate_set: unknown area \"" + row[static_cast<size_t>(rid)] +
                       "\" in rates file");
    rs.true_rates[it->second] = std::stod(row[static_cast<size_t>(rval)]);
    seen[static_cast<size_t>(it->second)] = true;
  }
  for (Eigen::Index i = 0; i < n_areas; ++i)
    if (!seen[static_cast<size_t>(i)])
      throw data_error("read_replicate_set: rates file is missing area \"" +
                       rs.area_ids[static_cast<size_t>(i)] + "\"");

  const CsvTable counts = read_csv_table(counts_csv);
  const int cid = counts.column("area_id"), crep = counts.column("replicate"),
            cval = counts.column("count");
  if (cid < 0 || crep < 0 || cval < 0)
    throw data_error(
        "read_replicate_set: counts file needs area_id, replicate, and count columns");
  rs.counts = MatrixXd::Constant(rs.scenario.replicates, n_areas, -1.0);
  for (const auto& row : counts.rows) {
    const auto it = index.find(row[static_cast<size_t>(cid)]);
    if (it == index.end())
      throw data_error("read_replicate_set: unknown area \"" + row[static_cast<size_t>(cid)] +
                       "\" in counts file");
    const long long b = std::stoll(row[static_cast<size_t>(crep)]);
    if (b < 0 || b >= rs.counts.rows())
      throw data_error("read_replicate_set: replicate index out of range in counts file");
    rs.counts(static_cast<Eigen::Index>(b), it->second) =
        std::stod(row[static_cast<size_t>(cval)]);
  }
  if ((rs.counts.array() < 0).any())
    throw data_error("read_replicate_set: counts file is missing (area, replicate) cells");
  return rs;
}

}  // namespace smoothgauge

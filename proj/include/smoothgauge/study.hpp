#pragma once

// Simulation-study drivers: fit a grid of prior configurations over a
// replicate set, average the empirical smoothing metrics, and pair them
// with the theoretical smoothing (TCV) in one sorted table.

#include <map>
#include <string>
#include <vector>

#include "smoothgauge/graph.hpp"
#include "smoothgauge/mcmc.hpp"
#include "smoothgauge/priors.hpp"
#include "smoothgauge/simgen.hpp"

namespace smoothgauge {

enum class StudyMode { within, across };

// one prior configuration; fixed intervals (low == high) pin a
// hyperparameter, proper intervals give it a uniform hyperprior
struct StudyCell {
  PriorKind kind = PriorKind::iid;
  HyperPriors hypers;
};

struct StudyPlan {
  StudyMode mode = StudyMode::within;
  std::vector<StudyCell> cells;
  ReplicateSet replicates;
  AdjacencyGraph graph;     // same areas, same order as the replicate set
  McmcConfig mcmc;          // per-cell streams derive from mcmc.seed
  std::string output_dir;   // non-empty: CSV + Markdown written here
  std::string scenario_label;  // echoed into every row
  int workers = 0;          // parallel fits; 0 = hardware concurrency
  void validate() const;
};

// 3 chains x 6000 sweeps, burn-in 1000, thinning 25: quick desk scale
McmcConfig desk_mcmc(uint64_t seed = 0);

struct StudyRow {
  PriorKind kind = PriorKind::iid;
  std::string scenario;
  std::map<std::string, double> params;  // pinned hyperparameter values
  std::string params_text;               // rendered configuration
  double tcv = 0, sp = 0, mss = 0, rmss = 0, max_mss = 0, max_rmss = 0;
  double sp_se = 0;  // MC standard error of sp over replicates
  int replicates_ok = 0;
  bool failed = false;        // some replicate fit failed
  std::string error;          // first failure message
  std::string provenance;     // digest of replicate set + sampler config
};

// hyperparameters pinned per cell, metrics averaged over replicates,
// closed-form TCV attached; rows sorted by (prior, sigma2, other params)
std::vector<StudyRow> run_within(const StudyPlan& plan);

// hyperpriors sampled; TCV becomes the posterior-mean theoretical
// smoothing averaged over replicates
std::vector<StudyRow> run_across(const StudyPlan& plan);

// digest stamped into every row: scenario echo, area ids, rates, counts,
// and the sampler configuration
std::string study_provenance(const ReplicateSet& rs, const McmcConfig& cfg);

void write_study_csv(const std::vector<StudyRow>& rows, const std::string& path);
std::string study_markdown(const std::vector<StudyRow>& rows);

}  // namespace smoothgauge

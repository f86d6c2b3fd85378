#pragma once

// Metropolis-within-Gibbs fitting of the Poisson-logitNormal disease-mapping
// model under any of the seven priors:
//     O_i | r_i ~ Poisson(n_i r_i),  logit(r_i) = alpha + kappa_i,
//     kappa ~ N(0, sigma2 * S_prior),  vague uniform hyperpriors.
// Every scalar parameter gets a univariate adaptive random-walk update
// (Robbins-Monro tuning toward 0.44 acceptance, frozen after burn-in).
// Bounded hyperparameters move on a scaled-logit transform with the Jacobian
// in the target; alpha is uniform on a wide interval. For iCAR-structured
// effects (alone or inside BYM-type pairs) the per-component means are
// removed after every sweep and alpha absorbs the overall level, restoring
// identifiability under the flat intercept.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "smoothgauge/graph.hpp"
#include "smoothgauge/numerics.hpp"
#include "smoothgauge/priors.hpp"

namespace smoothgauge {

struct AreaDataset {
  AdjacencyGraph graph;
  VectorXd O;  // observed counts
  VectorXd n;  // populations at risk

  VectorXd crude_rates() const { return O.cwiseQuotient(n); }
  void validate() const;  // lengths match the graph, n > 0, O >= 0 and finite
};

// closed interval for a uniform hyperprior; low == high pins the parameter
struct Interval {
  double low = 0, high = 0;
  bool fixed() const { return low == high; }
  bool contains(double x) const { return x >= low && x <= high; }
};

struct HyperPriors {
  Interval sigma2{0.0, 100.0};
  Interval tau2{0.0, 100.0};   // BYM unstructured variance
  Interval eta{-1.0, 1.0};     // pCAR dependence
  Interval lambda{0.0, 1.0};   // LCAR / BYM2 mixing weight
  Interval psi{0.0, 0.0};      // GP range; (0,0) = up to the max interpoint distance
  Interval alpha{-20.0, 20.0};

  void validate(PriorKind kind) const;
};

struct McmcConfig {
  int chains = 3;
  int iterations = 30000;
  int burn_in = 5000;
  int thin = 75;
  uint64_t seed = 0;
  double target_accept = 0.44;
  bool adapt_during_burnin_only = true;

  int saved_per_chain() const { return (iterations - burn_in) / thin; }
  void validate() const;  // burn_in < iterations, >= 100 saved draws, chains >= 1
};

struct ChainSamples {
  VectorXd alpha;                           // one entry per saved draw
  MatrixXd kappa;                           // saved draws x areas
  std::map<std::string, VectorXd> hypers;   // sigma2 and tau2/eta/lambda/psi as applicable
  std::map<std::string, double> acceptance; // pooled rate per parameter block
  // proposal scales at the end of the run; per-area blocks report the
  // geometric mean. Constant after burn-in when adaptation is frozen.
  std::map<std::string, double> final_scales;
};

struct PosteriorSamples {
  PriorKind kind = PriorKind::iid;
  std::vector<std::string> area_ids;
  std::vector<ChainSamples> chains;
  std::map<std::string, Interval> supports;  // the uniform supports actually used
  int saved_per_chain = 0;
  double wall_seconds = 0;
  McmcConfig config;

  // all chains concatenated, chain order
  VectorXd pooled_alpha() const;
  VectorXd pooled_hyper(const std::string& name) const;
};

PosteriorSamples fit(const AreaDataset& data, PriorKind kind, const HyperPriors& hp,
                     const McmcConfig& cfg);

// sqrt((W (m-1)/m + B/m) / W) for m draws per chain, floored at 1 so that
// identical chains report exactly 1; returns NaN when every chain is
// constant and +inf when chains are constant but separated
double gelman_rubin(const std::vector<VectorXd>& chains);

// N / (1 + 2 sum rho_k), autocorrelations summed over Geyer's initial
// positive sequence of lag pairs; 0 for a constant chain
double effective_sample_size(const VectorXd& draws);

struct FitDiagnostics {
  std::map<std::string, double> rhat;  // alpha, hypers, kappa[<id>]
  std::map<std::string, double> ess;   // per-chain ESS summed
  double max_rhat = 0;
  double min_ess = 0;
};
FitDiagnostics diagnose(const PosteriorSamples& samples);

// posterior mean of r_i = inv_logit(alpha + kappa_i), pooled over chains
VectorXd posterior_rate_means(const PosteriorSamples& samples);

struct TcvSummary {
  double mean = 0;
  double q05 = 0, q95 = 0;  // central 90% interval
  VectorXd draws;           // per saved draw, pooled over chains
};

// evaluate the total conditional variance at every saved hyperparameter draw
TcvSummary posterior_tcv(const PosteriorSamples& samples, const AdjacencyGraph& g);

// long format: chain, iter, name, value
void write_draws_csv(const PosteriorSamples& samples, const std::string& path);

}  // namespace smoothgauge

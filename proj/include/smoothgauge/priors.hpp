#pragma once

// The seven spatial priors on areal effects: iid, GP (exponential
// correlation), iCAR, BYM, pCAR, LCAR, BYM2. This module builds their
// sigma2-free structure matrices, conditional variances, and the total
// conditional variance (TCV), and draws effect vectors from each prior.
//
// Conventions: the prior covariance is sigma2 * S where S is the structure's
// inverse (or generalized inverse); var(r_i | rest) = sigma2 / Q_ii with
// Q = S^-1. For BYM/BYM2 the covariance structure ("mixture") is stored
// directly because Q has no sparse form. GP distances are Euclidean on the
// centroid coordinates exactly as given, so psi is in coordinate units.

#include <optional>
#include <string>
#include <utility>

#include "smoothgauge/graph.hpp"
#include "smoothgauge/numerics.hpp"

namespace smoothgauge {

enum class PriorKind { iid, gp, icar, bym, pcar, lcar, bym2 };

const char* to_string(PriorKind kind);
PriorKind prior_kind_from_string(const std::string& name);
bool is_car_kind(PriorKind kind);  // needs an adjacency with all degrees >= 1

struct PriorSpec {
  PriorKind kind = PriorKind::iid;
  double sigma2 = 1.0;
  std::optional<double> nu;      // BYM: tau2 / sigma2
  std::optional<double> eta;     // pCAR spatial dependence
  std::optional<double> lambda;  // LCAR / BYM2 mixing weight in [0,1]
  std::optional<double> psi;     // GP range, coordinate units

  static PriorSpec iid(double sigma2);
  static PriorSpec gp(double sigma2, double psi);
  static PriorSpec icar(double sigma2);
  static PriorSpec bym(double sigma2, double nu);
  static PriorSpec pcar(double sigma2, double eta);
  static PriorSpec lcar(double sigma2, double lambda);
  static PriorSpec bym2(double sigma2, double lambda);

  // parameter set matches the kind, ranges are sane; throws input_error
  void validate() const;
};

struct StructureResult {
  MatrixXd Q;                      // sigma2-free precision (empty for BYM/BYM2)
  std::optional<MatrixXd> mixture; // BYM/BYM2: covariance structure, Q = mixture^-1
  bool via_inverse = false;        // Q came from inverting a correlation (GP)
  bool singular = false;           // iCAR (and BYM's structured part)
  int rank = 0;
};

// eigensystem of D - W (or of R*) prepared for repeated mixture-diagonal
// evaluation: [( a * pinv + b I )^-1]_ii = sum_j V_ij^2 / (a g_j + b)
struct SpectralStructure {
  VectorXd pinv_values;  // g_j: reciprocals of nonzero eigenvalues, 0 on the null space
  MatrixXd vectors_sq;   // elementwise V^2
  int rank = 0;
};

SpectralStructure icar_spectral(const AdjacencyGraph& g);    // spectrum of D - W
SpectralStructure scaled_spectral(const AdjacencyGraph& g);  // spectrum of R*
VectorXd mixture_inverse_diag(const SpectralStructure& s, double a, double b);

StructureResult structure(const PriorSpec& spec, const AdjacencyGraph& g);

// R* = s (D - W) with s the geometric mean of diag(pinv(D - W)), so that the
// generalized-inverse marginal variances of R* have geometric mean 1
MatrixXd scale_icar(const AdjacencyGraph& g);

VectorXd conditional_variances(const PriorSpec& spec, const AdjacencyGraph& g);

// sum of conditional variances; closed forms where they exist (iid, iCAR,
// pCAR, LCAR), matrix path otherwise
double tcv(const PriorSpec& spec, const AdjacencyGraph& g);

// always goes through the assembled structure matrix; cross-check for tcv
double tcv_matrix(const PriorSpec& spec, const AdjacencyGraph& g);

// (1/eps_min, 1/eps_max) for eps the extreme eigenvalues of D^-1/2 W D^-1/2;
// the upper bound is 1 by construction and asserted
std::pair<double, double> pcar_eta_bounds(const AdjacencyGraph& g);

// draw kappa ~ N(0, sigma2 * S); improper kinds are sampled on the non-null
// eigenspace, which enforces per-component sum-to-zero
VectorXd sample_effects(const PriorSpec& spec, const AdjacencyGraph& g, Rng& rng);

}  // namespace smoothgauge

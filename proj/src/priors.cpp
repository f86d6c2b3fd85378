#include "smoothgauge/priors.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace smoothgauge {

namespace {

MatrixXd laplacian(const AdjacencyGraph& g) {
  MatrixXd q = -g.W;
  q.diagonal() = g.degrees;
  return q;
}

void require_no_islands(const AdjacencyGraph& g, PriorKind kind) {
  for (int i = 0; i < g.size(); ++i)
    if (g.degrees[i] < 1)
      throw data_error(std::string("prior ") + to_string(kind) + ": area \"" +
                       g.area_ids[i] + "\" has no neighbors");
}

const PointsXd& require_centroids(const AdjacencyGraph& g) {
  if (!g.centroids) throw data_error("GP prior: graph has no centroids");
  return *g.centroids;
}

// exponential correlation R_ij = exp(-d_ij / psi)
MatrixXd gp_correlation(const AdjacencyGraph& g, double psi) {
  const MatrixXd d = pairwise_distances(require_centroids(g));
  for (Eigen::Index i = 0; i < d.rows(); ++i)
    for (Eigen::Index j = i + 1; j < d.cols(); ++j)
      if (d(i, j) == 0.0)
        throw data_error("GP prior: duplicate centroids for \"" + g.area_ids[i] +
                         "\" and \"" + g.area_ids[j] + "\" make the correlation singular");
  return (-d / psi).array().exp();
}

MatrixXd invert_spd(const MatrixXd& m, const char* what) {
  Eigen::LLT<MatrixXd> llt(m);
  if (llt.info() != Eigen::Success)
    throw numerical_error(std::string(what) + ": matrix is not positive definite");
  return llt.solve(MatrixXd::Identity(m.rows(), m.cols()));
}

SpectralStructure spectral_of(const MatrixXd& q, int n_components) {
  SpectralStructure s;
  const auto es = sym_eigen(q);
  const double cut = 1e-10 * std::max(1.0, es.values.cwiseAbs().maxCoeff());
  s.pinv_values = VectorXd::Zero(es.values.size());
  for (Eigen::Index j = 0; j < es.values.size(); ++j)
    if (es.values[j] > cut) {
      s.pinv_values[j] = 1.0 / es.values[j];
      ++s.rank;
    }
  if (s.rank != static_cast<int>(q.rows()) - n_components)
    throw numerical_error("structure spectrum: rank does not match component count");
  s.vectors_sq = es.vectors.cwiseProduct(es.vectors);
  return s;
}

}  // namespace

const char* to_string(PriorKind kind) {
  switch (kind) {
    case PriorKind::iid: return "iid";
    case PriorKind::gp: return "gp";
    case PriorKind::icar: return "icar";
    case PriorKind::bym: return "bym";
    case PriorKind::pcar: return "pcar";
    case PriorKind::lcar: return "lcar";
    case PriorKind::bym2: return "bym2";
  }
  return "?";
}

PriorKind prior_kind_from_string(const std::string& name) {
  for (PriorKind k : {PriorKind::iid, PriorKind::gp, PriorKind::icar, PriorKind::bym,
                      PriorKind::pcar, PriorKind::lcar, PriorKind::bym2})
    if (name == to_string(k)) return k;
  throw input_error("unknown prior \"" + name +
                    "\" (expected iid|gp|icar|bym|pcar|lcar|bym2)");
}

bool is_car_kind(PriorKind kind) {
  return kind == PriorKind::icar || kind == PriorKind::bym || kind == PriorKind::pcar ||
         kind == PriorKind::lcar || kind == PriorKind::bym2;
}

PriorSpec PriorSpec::iid(double sigma2) { return {PriorKind::iid, sigma2, {}, {}, {}, {}}; }
PriorSpec PriorSpec::gp(double sigma2, double psi) {
  PriorSpec s{PriorKind::gp, sigma2, {}, {}, {}, {}};
  s.psi = psi;
  return s;
}
PriorSpec PriorSpec::icar(double sigma2) { return {PriorKind::icar, sigma2, {}, {}, {}, {}}; }
PriorSpec PriorSpec::bym(double sigma2, double nu) {
  PriorSpec s{PriorKind::bym, sigma2, {}, {}, {}, {}};
  s.nu = nu;
  return s;
}
PriorSpec PriorSpec::pcar(double sigma2, double eta) {
  PriorSpec s{PriorKind::pcar, sigma2, {}, {}, {}, {}};
  s.eta = eta;
  return s;
}
PriorSpec PriorSpec::lcar(double sigma2, double lambda) {
  PriorSpec s{PriorKind::lcar, sigma2, {}, {}, {}, {}};
  s.lambda = lambda;
  return s;
}
PriorSpec PriorSpec::bym2(double sigma2, double lambda) {
  PriorSpec s{PriorKind::bym2, sigma2, {}, {}, {}, {}};
  s.lambda = lambda;
  return s;
}

void PriorSpec::validate() const {
  if (!(sigma2 > 0)) throw input_error("prior: sigma2 must be positive");
  const bool want_nu = kind == PriorKind::bym;
  const bool want_eta = kind == PriorKind::pcar;
  const bool want_lambda = kind == PriorKind::lcar || kind == PriorKind::bym2;
  const bool want_psi = kind == PriorKind::gp;
  if (nu.has_value() != want_nu || eta.has_value() != want_eta ||
      lambda.has_value() != want_lambda || psi.has_value() != want_psi) {
    std::ostringstream msg;
    msg << "prior " << to_string(kind) << ": parameter set does not match the kind";
    throw input_error(msg.str());
  }
  if (nu && !(*nu >= 0)) throw input_error("prior bym: nu must be >= 0");
  if (lambda && !(*lambda >= 0 && *lambda <= 1))
    throw input_error("prior: lambda must lie in [0,1]");
  if (psi && !(*psi > 0)) throw input_error("prior gp: psi must be positive");
}

SpectralStructure icar_spectral(const AdjacencyGraph& g) {
  return spectral_of(laplacian(g), g.n_components);
}

SpectralStructure scaled_spectral(const AdjacencyGraph& g) {
  return spectral_of(scale_icar(g), g.n_components);
}

VectorXd mixture_inverse_diag(const SpectralStructure& s, double a, double b) {
  // generalized-inverse semantics so the b = 0 limits (pure iCAR / pure R*)
  // fall back to the Laplacian diagonal instead of dividing by zero
  VectorXd inv = a * s.pinv_values + VectorXd::Constant(s.pinv_values.size(), b);
  const double cut = 1e-14 * std::max(1.0, inv.cwiseAbs().maxCoeff());
  for (Eigen::Index j = 0; j < inv.size(); ++j)
    inv[j] = inv[j] > cut ? 1.0 / inv[j] : 0.0;
  return s.vectors_sq * inv;
}

MatrixXd scale_icar(const AdjacencyGraph& g) {
  for (int i = 0; i < g.size(); ++i)
    if (g.degrees[i] < 1)
      throw data_error("scale_icar: area \"" + g.area_ids[i] + "\" is isolated");
  const MatrixXd q = laplacian(g);
  Eigen::Index rank = 0;
  const MatrixXd qp = pseudo_inverse(q, 1e-10, &rank);
  if (rank != q.rows() - g.n_components)
    throw numerical_error("scale_icar: unexpected rank of D - W");
  const double log_gm = qp.diagonal().array().log().mean();
  return std::exp(log_gm) * q;
}

StructureResult structure(const PriorSpec& spec, const AdjacencyGraph& g) {
  spec.validate();
  if (g.size() == 0) throw input_error("structure: empty graph");
  if (is_car_kind(spec.kind)) require_no_islands(g, spec.kind);
  const int A = g.size();
  StructureResult r;
  switch (spec.kind) {
    case PriorKind::iid:
      r.Q = MatrixXd::Identity(A, A);
      r.rank = A;
      break;
    case PriorKind::icar:
      r.Q = laplacian(g);
      r.singular = true;
      r.rank = A - g.n_components;
      break;
    case PriorKind::pcar: {
      const auto [lo, hi] = pcar_eta_bounds(g);
      if (*spec.eta <= lo || *spec.eta >= hi)
        // the fitting protocol still allows eta in (-1,1); flag, don't refuse
        std::fputs("warning: pcar eta outside the proper range\n", stderr);
      r.Q = -*spec.eta * g.W;
      r.Q.diagonal() = g.degrees;
      r.rank = A;
      break;
    }
    case PriorKind::lcar:
      r.Q = *spec.lambda * laplacian(g);
      r.Q.diagonal().array() += 1.0 - *spec.lambda;
      r.singular = *spec.lambda == 1.0;
      r.rank = r.singular ? A - g.n_components : A;
      break;
    case PriorKind::gp:
      r.Q = invert_spd(gp_correlation(g, *spec.psi), "GP correlation");
      r.via_inverse = true;
      r.rank = A;
      break;
    case PriorKind::bym: {
      MatrixXd mix = pseudo_inverse(laplacian(g));
      mix.diagonal().array() += *spec.nu;
      r.mixture = std::move(mix);
      r.rank = A;
      break;
    }
    case PriorKind::bym2: {
      MatrixXd mix = *spec.lambda * pseudo_inverse(scale_icar(g));
      mix.diagonal().array() += 1.0 - *spec.lambda;
      r.mixture = std::move(mix);
      r.rank = A;
      break;
    }
  }
  return r;
}

VectorXd conditional_variances(const PriorSpec& spec, const AdjacencyGraph& g) {
  spec.validate();
  if (g.size() == 0) throw input_error("conditional_variances: empty graph");
  if (is_car_kind(spec.kind)) require_no_islands(g, spec.kind);
  const int A = g.size();
  switch (spec.kind) {
    case PriorKind::iid:
      return VectorXd::Constant(A, spec.sigma2);
    case PriorKind::icar:
    case PriorKind::pcar:
      // diag(D - eta W) = D, so eta never enters
      return spec.sigma2 * g.degrees.cwiseInverse();
    case PriorKind::lcar:
      return spec.sigma2 *
             (*spec.lambda * (g.degrees.array() - 1.0) + 1.0).inverse().matrix();
    case PriorKind::gp: {
      const MatrixXd qinv_diag =
          invert_spd(gp_correlation(g, *spec.psi), "GP correlation");
      return spec.sigma2 * qinv_diag.diagonal().cwiseInverse();
    }
    case PriorKind::bym: {
      const VectorXd d = mixture_inverse_diag(icar_spectral(g), 1.0, *spec.nu);
      return spec.sigma2 * d.cwiseInverse();
    }
    case PriorKind::bym2: {
      const VectorXd d =
          mixture_inverse_diag(scaled_spectral(g), *spec.lambda, 1.0 - *spec.lambda);
      return spec.sigma2 * d.cwiseInverse();
    }
  }
  throw input_error("conditional_variances: unreachable");
}

double tcv(const PriorSpec& spec, const AdjacencyGraph& g) {
  spec.validate();
  if (is_car_kind(spec.kind)) require_no_islands(g, spec.kind);
  switch (spec.kind) {
    case PriorKind::iid:
      return spec.sigma2 * g.size();
    case PriorKind::icar:
    case PriorKind::pcar:
      return spec.sigma2 * g.degrees.cwiseInverse().sum();
    case PriorKind::lcar:
      return spec.sigma2 *
             (*spec.lambda * (g.degrees.array() - 1.0) + 1.0).inverse().sum();
    default:
      return conditional_variances(spec, g).sum();
  }
}

double tcv_matrix(const PriorSpec& spec, const AdjacencyGraph& g) {
  const StructureResult s = structure(spec, g);
  if (s.mixture) {
    const MatrixXd q = pseudo_inverse(*s.mixture);
    return spec.sigma2 * q.diagonal().cwiseInverse().sum();
  }
  return spec.sigma2 * s.Q.diagonal().cwiseInverse().sum();
}

std::pair<double, double> pcar_eta_bounds(const AdjacencyGraph& g) {
  require_no_islands(g, PriorKind::pcar);
  const VectorXd dinv_sqrt = g.degrees.cwiseSqrt().cwiseInverse();
  const MatrixXd norm_adj = dinv_sqrt.asDiagonal() * g.W * dinv_sqrt.asDiagonal();
  const auto es = sym_eigen(norm_adj);
  const double eps_min = es.values.minCoeff();
  const double eps_max = es.values.maxCoeff();
  if (std::abs(eps_max - 1.0) > 1e-8)
    throw numerical_error("pcar_eta_bounds: top eigenvalue of the normalized adjacency "
                          "deviates from 1");
  return {1.0 / eps_min, 1.0};
}

VectorXd sample_effects(const PriorSpec& spec, const AdjacencyGraph& g, Rng& rng) {
  spec.validate();
  if (is_car_kind(spec.kind)) require_no_islands(g, spec.kind);
  const int A = g.size();
  const double sigma = std::sqrt(spec.sigma2);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto standard_normal = [&](int m) {
    VectorXd z(m);
    for (int i = 0; i < m; ++i) z[i] = gauss(rng);
    return z;
  };
  // covariance sigma2 * pinv(q): columns of V scaled by sigma sqrt(g_j); the
  // null space is skipped, which makes every component sum to zero exactly
  auto sample_singular = [&](const MatrixXd& q, double s2) -> VectorXd {
    const auto es = sym_eigen(q);
    const double cut = 1e-10 * std::max(1.0, es.values.cwiseAbs().maxCoeff());
    VectorXd scale = VectorXd::Zero(A);
    for (int j = 0; j < A; ++j)
      if (es.values[j] > cut) scale[j] = std::sqrt(s2 / es.values[j]);
    return MatrixXd(es.vectors * scale.asDiagonal()) * standard_normal(A);
  };
  switch (spec.kind) {
    case PriorKind::iid:
      return sigma * standard_normal(A);
    case PriorKind::icar:
      return sample_singular(laplacian(g), spec.sigma2);
    case PriorKind::bym:
      return sample_singular(laplacian(g), spec.sigma2) +
             std::sqrt(spec.sigma2 * *spec.nu) * standard_normal(A);
    case PriorKind::bym2:
      return sample_singular(scale_icar(g), spec.sigma2 * *spec.lambda) +
             std::sqrt(spec.sigma2 * (1.0 - *spec.lambda)) * standard_normal(A);
    case PriorKind::lcar:
      if (*spec.lambda == 1.0) return sample_singular(laplacian(g), spec.sigma2);
      [[fallthrough]];
    case PriorKind::pcar: {
      // proper Q: kappa = sigma L^-T z has covariance sigma2 Q^-1
      const StructureResult s = structure(spec, g);
      const MatrixXd L = cholesky_psd(s.Q);
      return sigma * L.transpose().triangularView<Eigen::Upper>().solve(standard_normal(A));
    }
    case PriorKind::gp: {
      const MatrixXd L = cholesky_psd(gp_correlation(g, *spec.psi));
      return sigma * (L * standard_normal(A));
    }
  }
  throw input_error("sample_effects: unreachable");
}

}  // namespace smoothgauge

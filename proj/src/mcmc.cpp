#include "smoothgauge/mcmc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>

#include "smoothgauge/errors.hpp"
#include "smoothgauge/io.hpp"

namespace smoothgauge {

namespace {

// Poisson term for one area: O log r - n r with logit(r) = x, stable in both tails
double area_loglik(double x, double O, double n) {
  double log_r, r;
  if (x > 0) {
    const double e = std::exp(-x);
    log_r = -std::log1p(e);
    r = 1.0 / (1.0 + e);
  } else {
    const double e = std::exp(x);
    log_r = x - std::log1p(e);
    r = e / (1.0 + e);
  }
  return O * log_r - n * r;
}

double softplus(double x) { return x > 30 ? x : std::log1p(std::exp(x)); }

struct AdaptiveScale {
  double log_s = std::log(0.5);
  long proposals = 0, accepts = 0;

  double value() const { return std::exp(log_s); }
  void record(bool accepted, bool adapting, double target, long t) {
    ++proposals;
    accepts += accepted;
    if (adapting) {
      const double gam = std::min(1.0, 5.0 / std::pow(static_cast<double>(t) + 1.0, 0.7));
      log_s += gam * ((accepted ? 1.0 : 0.0) - target);
      log_s = std::clamp(log_s, -12.0, 6.0);
    }
  }
};

// bounded hyperparameter moved on the scaled-logit scale; the uniform prior
// density is constant inside the support, so only the Jacobian enters
struct Bounded {
  Interval iv;
  double theta = 0;  // unconstrained position; midpoint of the support at 0
  AdaptiveScale scale;

  bool fixed() const { return iv.fixed(); }
  double value() const {
    return fixed() ? iv.low : iv.low + (iv.high - iv.low) * inv_logit(theta);
  }
  double log_jac() const {
    return std::log(iv.high - iv.low) - softplus(theta) - softplus(-theta);
  }
};

// bounded-size store of inverted GP correlations keyed by quantized psi
struct GpCacheEntry {
  double psi_q = 0;
  MatrixXd Rinv;
  double logdet = 0;
};

class GpCache {
 public:
  explicit GpCache(const MatrixXd* dist) : dist_(dist) {}

  std::shared_ptr<const GpCacheEntry> get(double psi) {
    const double q = quantize(psi);
    for (auto& slot : slots_)
      if (slot.entry && slot.entry->psi_q == q) {
        slot.stamp = ++counter_;
        return slot.entry;
      }
    auto e = std::make_shared<GpCacheEntry>();
    e->psi_q = q;
    const Eigen::Index A = dist_->rows();
    const MatrixXd R = (-(*dist_) / q).array().exp();
    const MatrixXd L = cholesky_psd(R);
    e->logdet = 2.0 * L.diagonal().array().log().sum();
    const MatrixXd eye = MatrixXd::Identity(A, A);
    e->Rinv = L.transpose().triangularView<Eigen::Upper>().solve(
        MatrixXd(L.triangularView<Eigen::Lower>().solve(eye)));
    if (slots_.size() < 64) {
      slots_.push_back({e, ++counter_});
    } else {
      auto oldest = std::min_element(slots_.begin(), slots_.end(),
                                     [](const Slot& a, const Slot& b) { return a.stamp < b.stamp; });
      *oldest = {e, ++counter_};
    }
    return e;
  }

  static double quantize(double psi) {
    return std::max(1e-4, std::round(psi * 1e4) / 1e4);
  }

 private:
  struct Slot {
    std::shared_ptr<GpCacheEntry> entry;
    uint64_t stamp = 0;
  };
  const MatrixXd* dist_;
  std::vector<Slot> slots_;
  uint64_t counter_ = 0;
};

// inputs shared by every chain of one fit
struct FitShared {
  const AreaDataset* data = nullptr;
  PriorKind kind = PriorKind::iid;
  HyperPriors hp;  // psi support already resolved
  McmcConfig cfg;
  int A = 0, ncomp = 0;

  VectorXd norm_adj_eigs;   // pCAR: spectrum of D^-1/2 W D^-1/2
  double sum_log_degree = 0;
  VectorXd lap_eigs;        // LCAR: spectrum of D - W
  double gm_scale = 1.0;    // BYM2: R* = gm_scale * (D - W)
  MatrixXd dist;            // GP
  std::unique_ptr<GpCache> gp_cache;

  bool is_bym_pair() const { return kind == PriorKind::bym || kind == PriorKind::bym2; }
};

class ChainRunner {
 public:
  ChainRunner(const FitShared& sh, uint64_t chain_seed)
      : sh_(sh), g_(sh.data->graph), rng_(chain_seed) {
    const int A = sh_.A;
    kap_ = VectorXd::Zero(A);
    v_ = VectorXd::Zero(A);
    ell_ = VectorXd::Zero(A);
    Wz_ = VectorXd::Zero(A);
    s_kap_.resize(A);
    s_v_.resize(A);

    sigma2_.iv = sh_.hp.sigma2;
    tau2_.iv = sh_.hp.tau2;
    eta_.iv = sh_.hp.eta;
    lambda_.iv = sh_.hp.lambda;
    psi_.iv = sh_.hp.psi;

    use_u_ = true;
    use_v_ = false;
    switch (sh_.kind) {
      case PriorKind::bym:
        use_v_ = !(tau2_.fixed() && tau2_.iv.low == 0.0);
        break;
      case PriorKind::bym2:
        use_u_ = !(lambda_.fixed() && lambda_.iv.low == 0.0);
        use_v_ = !(lambda_.fixed() && lambda_.iv.low == 1.0);
        break;
      default:
        break;
    }
    lcar_as_icar_ = sh_.kind == PriorKind::lcar && lambda_.fixed() && lambda_.iv.low == 1.0;

    const double total_O = sh_.data->O.sum(), total_n = sh_.data->n.sum();
    const double pooled = (total_O + 0.5) / (total_n + 1.0);
    alpha_ = std::clamp(logit(pooled), sh_.hp.alpha.low + 1e-6, sh_.hp.alpha.high - 1e-6);

    if (sh_.kind == PriorKind::gp) gp_cur_ = sh_.gp_cache->get(psi_.value());
    rebuild_state();
    if (!std::isfinite(latent_logp() + ell_.sum()))
      throw numerical_error("mcmc: non-finite log posterior at initialization");
  }

  ChainSamples run() {
    ChainSamples out;
    const int saved = sh_.cfg.saved_per_chain();
    out.alpha.resize(saved);
    out.kappa.resize(saved, sh_.A);
    for (const auto& name : hyper_names()) out.hypers[name] = VectorXd::Zero(saved);

    int s = 0;
    for (long t = 0; t < sh_.cfg.iterations; ++t) {
      const bool adapting = !sh_.cfg.adapt_during_burnin_only || t < sh_.cfg.burn_in;
      sweep(adapting, t);
      if (t >= sh_.cfg.burn_in && (t - sh_.cfg.burn_in + 1) % sh_.cfg.thin == 0 && s < saved) {
        out.alpha[s] = alpha_;
        out.kappa.row(s) = effective_kappa().transpose();
        for (const auto& name : hyper_names()) out.hypers[name][s] = hyper_by_name(name);
        ++s;
      }
    }
    out.acceptance["alpha"] = rate(s_alpha_);
    out.acceptance["kappa"] = pooled_rate(s_kap_, use_u_);
    if (sh_.is_bym_pair()) out.acceptance["v"] = pooled_rate(s_v_, use_v_);
    auto put = [&](const char* name, const Bounded& b) {
      if (!b.fixed()) out.acceptance[name] = rate(b.scale);
    };
    put("sigma2", sigma2_);
    if (sh_.kind == PriorKind::bym) put("tau2", tau2_);
    if (sh_.kind == PriorKind::pcar) put("eta", eta_);
    if (sh_.kind == PriorKind::lcar || sh_.kind == PriorKind::bym2) put("lambda", lambda_);
    if (sh_.kind == PriorKind::gp) put("psi", psi_);

    out.final_scales["alpha"] = s_alpha_.value();
    if (use_u_) out.final_scales["kappa"] = geo_mean_scale(s_kap_);
    if (sh_.is_bym_pair() && use_v_) out.final_scales["v"] = geo_mean_scale(s_v_);
    auto put_scale = [&](const char* name, const Bounded& b) {
      if (!b.fixed()) out.final_scales[name] = b.scale.value();
    };
    put_scale("sigma2", sigma2_);
    if (sh_.kind == PriorKind::bym) put_scale("tau2", tau2_);
    if (sh_.kind == PriorKind::pcar) put_scale("eta", eta_);
    if (sh_.kind == PriorKind::lcar || sh_.kind == PriorKind::bym2)
      put_scale("lambda", lambda_);
    if (sh_.kind == PriorKind::gp) put_scale("psi", psi_);
    return out;
  }

 private:
  static double rate(const AdaptiveScale& a) {
    return a.proposals ? static_cast<double>(a.accepts) / a.proposals : 0.0;
  }
  static double pooled_rate(const std::vector<AdaptiveScale>& v, bool active) {
    if (!active) return 0.0;
    long p = 0, a = 0;
    for (const auto& s : v) {
      p += s.proposals;
      a += s.accepts;
    }
    return p ? static_cast<double>(a) / p : 0.0;
  }
  static double geo_mean_scale(const std::vector<AdaptiveScale>& v) {
    double acc = 0;
    for (const auto& s : v) acc += s.log_s;
    return std::exp(acc / static_cast<double>(v.size()));
  }

  std::vector<std::string> hyper_names() const {
    std::vector<std::string> names = {"sigma2"};
    switch (sh_.kind) {
      case PriorKind::bym: names.push_back("tau2"); break;
      case PriorKind::pcar: names.push_back("eta"); break;
      case PriorKind::lcar:
      case PriorKind::bym2: names.push_back("lambda"); break;
      case PriorKind::gp: names.push_back("psi"); break;
      default: break;
    }
    return names;
  }

  double hyper_by_name(const std::string& name) const {
    if (name == "sigma2") return sigma2_.value();
    if (name == "tau2") return tau2_.value();
    if (name == "eta") return eta_.value();
    if (name == "lambda") return lambda_.value();
    if (name == "psi") return psi_.value();
    throw input_error("unknown hyperparameter " + name);
  }

  VectorXd effective_kappa() const {
    return sh_.is_bym_pair() ? VectorXd(kap_ + v_) : kap_;
  }

  // ---- maintained-state management -------------------------------------

  // recompute every cached quantity from kap_/v_/alpha_
  void rebuild_state() {
    const int A = sh_.A;
    Wz_.setZero();
    for (int i = 0; i < A; ++i)
      for (const int j : g_.neighbors[i]) Wz_[j] += kap_[i];
    zDz_ = (g_.degrees.array() * kap_.array().square()).sum();
    zWz_ = kap_.dot(Wz_);
    zz_ = kap_.squaredNorm();
    vv_ = v_.squaredNorm();
    if (sh_.kind == PriorKind::gp) {
      svec_ = gp_cur_->Rinv * kap_;
      kQk_ = kap_.dot(svec_);
    }
    rebuild_ell();
  }

  void rebuild_ell() {
    const VectorXd x = effective_kappa().array() + alpha_;
    for (int i = 0; i < sh_.A; ++i) ell_[i] = area_loglik(x[i], sh_.data->O[i], sh_.data->n[i]);
  }

  // full log density of the latent effects given current hyperparameters,
  // constants independent of every sampled parameter dropped
  double latent_logp() const {
    const int A = sh_.A;
    const double s2 = sigma2_.value();
    switch (sh_.kind) {
      case PriorKind::iid:
        return -0.5 * A * std::log(s2) - zz_ / (2 * s2);
      case PriorKind::icar:
        return -0.5 * (A - sh_.ncomp) * std::log(s2) - (zDz_ - zWz_) / (2 * s2);
      case PriorKind::pcar: {
        const double eta = eta_.value();
        double logdet = sh_.sum_log_degree;
        for (int j = 0; j < A; ++j) logdet += std::log1p(-eta * sh_.norm_adj_eigs[j]);
        return 0.5 * logdet - 0.5 * A * std::log(s2) - (zDz_ - eta * zWz_) / (2 * s2);
      }
      case PriorKind::lcar: {
        if (lcar_as_icar_)
          return -0.5 * (A - sh_.ncomp) * std::log(s2) - (zDz_ - zWz_) / (2 * s2);
        const double lam = lambda_.value();
        double logdet = 0;
        for (int j = 0; j < A; ++j) logdet += std::log(lam * sh_.lap_eigs[j] + 1 - lam);
        const double q = lam * (zDz_ - zWz_) + (1 - lam) * zz_;
        return 0.5 * logdet - 0.5 * A * std::log(s2) - q / (2 * s2);
      }
      case PriorKind::gp:
        return -0.5 * gp_cur_->logdet - 0.5 * A * std::log(s2) - kQk_ / (2 * s2);
      case PriorKind::bym: {
        double lp = -0.5 * (A - sh_.ncomp) * std::log(s2) - (zDz_ - zWz_) / (2 * s2);
        if (use_v_) {
          const double t2 = tau2_.value();
          lp += -0.5 * A * std::log(t2) - vv_ / (2 * t2);
        }
        return lp;
      }
      case PriorKind::bym2: {
        const double lam = lambda_.value();
        double lp = 0;
        if (use_u_) {
          const double c = s2 * lam;
          lp += -0.5 * (A - sh_.ncomp) * std::log(c) -
                sh_.gm_scale * (zDz_ - zWz_) / (2 * c);
        }
        if (use_v_) {
          const double c = s2 * (1 - lam);
          lp += -0.5 * A * std::log(c) - vv_ / (2 * c);
        }
        return lp;
      }
    }
    throw input_error("latent_logp: unreachable");
  }

  // gradient-free single-coordinate prior change for kap_[i] += delta
  double prior_delta_kap(int i, double delta) const {
    const double s2 = sigma2_.value();
    const double w = g_.degrees[i];
    switch (sh_.kind) {
      case PriorKind::iid:
        return -(2 * kap_[i] * delta + delta * delta) / (2 * s2);
      case PriorKind::icar: {
        const double dq = 2 * delta * (w * kap_[i] - Wz_[i]) + w * delta * delta;
        return -dq / (2 * s2);
      }
      case PriorKind::pcar: {
        const double eta = eta_.value();
        const double dq = 2 * delta * (w * kap_[i] - eta * Wz_[i]) + w * delta * delta;
        return -dq / (2 * s2);
      }
      case PriorKind::lcar: {
        if (lcar_as_icar_) {
          const double dq = 2 * delta * (w * kap_[i] - Wz_[i]) + w * delta * delta;
          return -dq / (2 * s2);
        }
        const double lam = lambda_.value();
        const double pz = lam * (w * kap_[i] - Wz_[i]) + (1 - lam) * kap_[i];
        const double pii = lam * (w - 1) + 1;
        return -(2 * delta * pz + pii * delta * delta) / (2 * s2);
      }
      case PriorKind::gp: {
        const double dq = 2 * delta * svec_[i] + delta * delta * gp_cur_->Rinv(i, i);
        return -dq / (2 * s2);
      }
      case PriorKind::bym: {
        const double dq = 2 * delta * (w * kap_[i] - Wz_[i]) + w * delta * delta;
        return -dq / (2 * s2);
      }
      case PriorKind::bym2: {
        const double c = s2 * lambda_.value();
        const double dq =
            sh_.gm_scale * (2 * delta * (w * kap_[i] - Wz_[i]) + w * delta * delta);
        return -dq / (2 * c);
      }
    }
    throw input_error("prior_delta_kap: unreachable");
  }

  void apply_kap_move(int i, double delta) {
    const double w = g_.degrees[i];
    zDz_ += w * (2 * kap_[i] * delta + delta * delta);
    zWz_ += 2 * delta * Wz_[i];
    zz_ += 2 * kap_[i] * delta + delta * delta;
    for (const int j : g_.neighbors[i]) Wz_[j] += delta;
    if (sh_.kind == PriorKind::gp) {
      kQk_ += 2 * delta * svec_[i] + delta * delta * gp_cur_->Rinv(i, i);
      svec_ += delta * gp_cur_->Rinv.col(i);
    }
    kap_[i] += delta;
  }

  // ---- parameter updates ------------------------------------------------

  void update_alpha(bool adapting, long t) {
    const double prop = alpha_ + s_alpha_.value() * gauss_(rng_);
    bool accepted = false;
    if (prop > sh_.hp.alpha.low && prop < sh_.hp.alpha.high) {
      const VectorXd x_new = effective_kappa().array() + prop;
      double delta_ll = -ell_.sum();
      VectorXd ell_new(sh_.A);
      for (int i = 0; i < sh_.A; ++i) {
        ell_new[i] = area_loglik(x_new[i], sh_.data->O[i], sh_.data->n[i]);
        delta_ll += ell_new[i];
      }
      if (accept(delta_ll)) {
        alpha_ = prop;
        ell_ = std::move(ell_new);
        accepted = true;
      }
    }
    s_alpha_.record(accepted, adapting, sh_.cfg.target_accept, t);
  }

  void update_latents(bool adapting, long t) {
    if (use_u_) {
      for (int i = 0; i < sh_.A; ++i) {
        const double delta = s_kap_[i].value() * gauss_(rng_);
        const double x_new = alpha_ + kap_[i] + delta + (sh_.is_bym_pair() ? v_[i] : 0.0);
        const double ll_new = area_loglik(x_new, sh_.data->O[i], sh_.data->n[i]);
        const double d = ll_new - ell_[i] + prior_delta_kap(i, delta);
        const bool accepted = accept(d);
        if (accepted) {
          apply_kap_move(i, delta);
          ell_[i] = ll_new;
        }
        s_kap_[i].record(accepted, adapting, sh_.cfg.target_accept, t);
      }
    }
    if (sh_.is_bym_pair() && use_v_) {
      const double c = sh_.kind == PriorKind::bym ? tau2_.value()
                                                  : sigma2_.value() * (1 - lambda_.value());
      for (int i = 0; i < sh_.A; ++i) {
        const double delta = s_v_[i].value() * gauss_(rng_);
        const double x_new = alpha_ + kap_[i] + v_[i] + delta;
        const double ll_new = area_loglik(x_new, sh_.data->O[i], sh_.data->n[i]);
        const double d =
            ll_new - ell_[i] - (2 * v_[i] * delta + delta * delta) / (2 * c);
        const bool accepted = accept(d);
        if (accepted) {
          vv_ += 2 * v_[i] * delta + delta * delta;
          v_[i] += delta;
          ell_[i] = ll_new;
        }
        s_v_[i].record(accepted, adapting, sh_.cfg.target_accept, t);
      }
    }
  }

  // generic bounded-hyperparameter move; latent_logp() reads the new value
  // through the Bounded object, so mutate-evaluate-restore
  void update_bounded(Bounded& b, bool adapting, long t, bool is_psi = false) {
    if (b.fixed()) return;
    const double theta_old = b.theta;
    const double lp_old = latent_logp() + b.log_jac();

    std::shared_ptr<const GpCacheEntry> gp_old = gp_cur_;
    const double kQk_old = kQk_;

    b.theta = theta_old + b.scale.value() * gauss_(rng_);
    if (is_psi) {
      gp_cur_ = sh_.gp_cache->get(b.value());
      kQk_ = kap_.dot(gp_cur_->Rinv * kap_);
    }
    const double lp_new = latent_logp() + b.log_jac();

    const bool accepted = accept(lp_new - lp_old);
    if (accepted) {
      if (is_psi) svec_ = gp_cur_->Rinv * kap_;
    } else {
      b.theta = theta_old;
      if (is_psi) {
        gp_cur_ = std::move(gp_old);
        kQk_ = kQk_old;
      }
    }
    b.scale.record(accepted, adapting, sh_.cfg.target_accept, t);
  }

  void update_hypers(bool adapting, long t) {
    update_bounded(sigma2_, adapting, t);
    switch (sh_.kind) {
      case PriorKind::bym:
        if (use_v_) update_bounded(tau2_, adapting, t);
        break;
      case PriorKind::pcar:
        update_bounded(eta_, adapting, t);
        break;
      case PriorKind::lcar:
      case PriorKind::bym2:
        update_bounded(lambda_, adapting, t);
        break;
      case PriorKind::gp:
        update_bounded(psi_, adapting, t, /*is_psi=*/true);
        break;
      default:
        break;
    }
  }

  // remove per-component means of the improper part after each sweep;
  // alpha absorbs the overall level (exact invariance on connected graphs)
  void recenter() {
    const bool car_like = sh_.kind == PriorKind::icar || lcar_as_icar_ ||
                          (sh_.is_bym_pair() && use_u_);
    if (!car_like) return;
    VectorXd comp_mean = VectorXd::Zero(g_.n_components);
    VectorXd comp_size = VectorXd::Zero(g_.n_components);
    for (int i = 0; i < sh_.A; ++i) {
      comp_mean[g_.components[i]] += kap_[i];
      comp_size[g_.components[i]] += 1;
    }
    comp_mean.array() /= comp_size.array();
    for (int i = 0; i < sh_.A; ++i) kap_[i] -= comp_mean[g_.components[i]];
    alpha_ += comp_mean.dot(comp_size) / sh_.A;
    rebuild_state();
  }

  void sweep(bool adapting, long t) {
    update_alpha(adapting, t);
    update_latents(adapting, t);
    update_hypers(adapting, t);
    recenter();
  }

  bool accept(double log_ratio) {
    if (log_ratio >= 0) return true;
    return std::log(unif_(rng_)) < log_ratio;
  }

  const FitShared& sh_;
  const AdjacencyGraph& g_;
  Rng rng_;
  std::normal_distribution<double> gauss_{0.0, 1.0};
  std::uniform_real_distribution<double> unif_{std::numeric_limits<double>::min(), 1.0};

  double alpha_ = 0;
  VectorXd kap_, v_, ell_;
  bool use_u_ = true, use_v_ = false, lcar_as_icar_ = false;

  AdaptiveScale s_alpha_;
  std::vector<AdaptiveScale> s_kap_, s_v_;
  Bounded sigma2_, tau2_, eta_, lambda_, psi_;

  // maintained quantities: Wz = W kap, zDz = kap' D kap, zWz = kap' W kap,
  // zz = kap' kap, vv = v'v; GP: svec = R^-1 kap, kQk = kap' R^-1 kap
  VectorXd Wz_, svec_;
  double zDz_ = 0, zWz_ = 0, zz_ = 0, vv_ = 0, kQk_ = 0;
  std::shared_ptr<const GpCacheEntry> gp_cur_;
};

}  // namespace

void AreaDataset::validate() const {
  const int A = graph.size();
  if (O.size() != A || n.size() != A)
    throw data_error("dataset: count/population vectors do not match the graph order");
  if (A == 0) throw data_error("dataset: empty graph");
  for (int i = 0; i < A; ++i) {
    if (!(n[i] > 0) || !std::isfinite(n[i]))
      throw data_error("dataset: non-positive population for area \"" + graph.area_ids[i] + "\"");
    if (!(O[i] >= 0) || !std::isfinite(O[i]))
      throw data_error("dataset: negative count for area \"" + graph.area_ids[i] + "\"");
  }
}

void HyperPriors::validate(PriorKind kind) const {
  auto check_var = [](const Interval& iv, const char* name, bool allow_fixed_zero) {
    if (iv.low < 0)
      throw input_error(std::string("hyperprior ") + name + ": low must be >= 0");
    if (iv.low > iv.high)
      throw input_error(std::string("hyperprior ") + name + ": low > high");
    if (iv.fixed() && !allow_fixed_zero && !(iv.low > 0))
      throw input_error(std::string("hyperprior ") + name +
                        ": fixed value must be positive");
    if (!iv.fixed() && !(iv.high > 0))
      throw input_error(std::string("hyperprior ") + name +
                        ": upper end must be positive");
  };
  if (!(alpha.low < alpha.high)) throw input_error("hyperprior alpha: need an interval");
  check_var(sigma2, "sigma2", false);
  if (kind == PriorKind::bym)
    check_var(tau2, "tau2", true);  // fixed at 0 turns the unstructured part off
  if (kind == PriorKind::pcar) {
    if (eta.low < -1 || eta.high > 1 || eta.low > eta.high)
      throw input_error("hyperprior eta: support must lie inside [-1,1]");
  }
  if (kind == PriorKind::lcar || kind == PriorKind::bym2) {
    if (lambda.low < 0 || lambda.high > 1 || lambda.low > lambda.high)
      throw input_error("hyperprior lambda: support must lie inside [0,1]");
  }
  if (kind == PriorKind::gp) {
    if (psi.low < 0 || psi.low > psi.high)
      throw input_error("hyperprior psi: need 0 <= low <= high");
  }
}

void McmcConfig::validate() const {
  if (chains < 1) throw input_error("mcmc: need at least one chain");
  if (burn_in < 0 || burn_in >= iterations)
    throw input_error("mcmc: burn_in must lie in [0, iterations)");
  if (thin < 1) throw input_error("mcmc: thin must be >= 1");
  if (saved_per_chain() < 100)
    throw input_error("mcmc: fewer than 100 saved draws per chain; lengthen the run "
                      "or thin less");
  if (!(target_accept > 0 && target_accept < 1))
    throw input_error("mcmc: target acceptance must lie in (0,1)");
}

VectorXd PosteriorSamples::pooled_alpha() const {
  VectorXd out(static_cast<Eigen::Index>(chains.size()) * saved_per_chain);
  Eigen::Index at = 0;
  for (const auto& c : chains) {
    out.segment(at, c.alpha.size()) = c.alpha;
    at += c.alpha.size();
  }
  return out;
}

VectorXd PosteriorSamples::pooled_hyper(const std::string& name) const {
  VectorXd out(static_cast<Eigen::Index>(chains.size()) * saved_per_chain);
  Eigen::Index at = 0;
  for (const auto& c : chains) {
    const auto it = c.hypers.find(name);
    if (it == c.hypers.end())
      throw input_error("samples: no hyperparameter named " + name);
    out.segment(at, it->second.size()) = it->second;
    at += it->second.size();
  }
  return out;
}

PosteriorSamples fit(const AreaDataset& data, PriorKind kind, const HyperPriors& hp,
                     const McmcConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  data.validate();
  cfg.validate();

  FitShared sh;
  sh.data = &data;
  sh.kind = kind;
  sh.hp = hp;
  sh.cfg = cfg;
  sh.A = data.graph.size();
  sh.ncomp = data.graph.n_components;

  if (is_car_kind(kind))
    for (int i = 0; i < sh.A; ++i)
      if (data.graph.degrees[i] < 1)
        throw data_error("mcmc: area \"" + data.graph.area_ids[i] +
                         "\" has no neighbors under a CAR prior");

  switch (kind) {
    case PriorKind::pcar: {
      const VectorXd dinv = data.graph.degrees.cwiseSqrt().cwiseInverse();
      const MatrixXd na = dinv.asDiagonal() * data.graph.W * dinv.asDiagonal();
      sh.norm_adj_eigs = sym_eigen(na).values;
      sh.sum_log_degree = data.graph.degrees.array().log().sum();
      break;
    }
    case PriorKind::lcar:
      sh.lap_eigs =
          sym_eigen(MatrixXd(MatrixXd(data.graph.degrees.asDiagonal()) - data.graph.W))
              .values;
      // clip the numerically-zero null eigenvalues so log(lam*l) stays finite
      for (Eigen::Index j = 0; j < sh.lap_eigs.size(); ++j)
        if (std::abs(sh.lap_eigs[j]) < 1e-10) sh.lap_eigs[j] = 0.0;
      break;
    case PriorKind::bym2:
      sh.gm_scale = scale_icar(data.graph)(0, 0) / data.graph.degrees[0];
      break;
    case PriorKind::gp: {
      if (!data.graph.centroids) throw data_error("mcmc: GP prior needs centroids");
      sh.dist = pairwise_distances(*data.graph.centroids);
      if (sh.hp.psi.fixed() && sh.hp.psi.low == 0.0) {
        const double dmax = sh.dist.maxCoeff();
        if (!(dmax > 0)) throw data_error("mcmc: GP prior needs distinct centroids");
        sh.hp.psi = {0.0, dmax};
      }
      sh.gp_cache = std::make_unique<GpCache>(&sh.dist);
      break;
    }
    default:
      break;
  }
  sh.hp.validate(kind);

  PosteriorSamples out;
  out.kind = kind;
  out.area_ids = data.graph.area_ids;
  out.saved_per_chain = cfg.saved_per_chain();
  out.config = cfg;
  out.supports["alpha"] = sh.hp.alpha;
  out.supports["sigma2"] = sh.hp.sigma2;
  if (kind == PriorKind::bym) out.supports["tau2"] = sh.hp.tau2;
  if (kind == PriorKind::pcar) out.supports["eta"] = sh.hp.eta;
  if (kind == PriorKind::lcar || kind == PriorKind::bym2)
    out.supports["lambda"] = sh.hp.lambda;
  if (kind == PriorKind::gp) out.supports["psi"] = sh.hp.psi;

  for (int c = 0; c < cfg.chains; ++c) {
    const uint64_t chain_seed = cfg.seed ^ (0x9E3779B97F4A7C15ull * (c + 1));
    ChainRunner runner(sh, chain_seed);
    out.chains.push_back(runner.run());
  }

  const VectorXd a = out.pooled_alpha();
  const double margin = 0.02 * (sh.hp.alpha.high - sh.hp.alpha.low);
  if (a.minCoeff() < sh.hp.alpha.low + margin || a.maxCoeff() > sh.hp.alpha.high - margin)
    std::fputs("warning: posterior mass of alpha close to its flat-prior boundary\n",
               stderr);

  out.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

double gelman_rubin(const std::vector<VectorXd>& chains) {
  if (chains.size() < 2) throw input_error("gelman_rubin: need at least 2 chains");
  const Eigen::Index m = static_cast<Eigen::Index>(chains.size());
  const Eigen::Index n = chains[0].size();
  if (n < 10) throw input_error("gelman_rubin: need at least 10 draws per chain");
  for (const auto& c : chains)
    if (c.size() != n) throw input_error("gelman_rubin: chains differ in length");

  double W = 0, scale = 0;
  VectorXd means(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    means[j] = chains[j].mean();
    W += (chains[j].array() - means[j]).square().sum() / (n - 1);
    scale = std::max(scale, chains[j].cwiseAbs().maxCoeff());
  }
  W /= m;
  const double grand = means.mean();
  const double B_over_n = (means.array() - grand).square().sum() / (m - 1);
  const double w_floor = 1e-12 * scale * 1e-12 * scale;  // constant up to rounding
  if (W <= w_floor)
    return B_over_n <= w_floor ? std::numeric_limits<double>::quiet_NaN()
                               : std::numeric_limits<double>::infinity();
  const double var_plus = (n - 1.0) / n * W + B_over_n;
  // floored at 1: below-1 values carry no convergence information and the
  // floor makes identical chains report exactly 1
  return std::max(1.0, std::sqrt(var_plus / W));
}

double effective_sample_size(const VectorXd& draws) {
  const Eigen::Index N = draws.size();
  if (N < 100) throw input_error("effective_sample_size: need at least 100 draws");
  const VectorXd c = draws.array() - draws.mean();
  // constant up to accumulation rounding counts as degenerate
  if (c.cwiseAbs().maxCoeff() <=
      1e-12 * (draws.cwiseAbs().maxCoeff() + std::numeric_limits<double>::min()))
    return 0.0;
  const double c0 = c.squaredNorm() / N;
  if (c0 == 0) return 0.0;
  auto rho = [&](Eigen::Index k) {
    double s = 0;
    for (Eigen::Index t = 0; t + k < N; ++t) s += c[t] * c[t + k];
    return s / (N * c0);
  };
  double acc = 0;
  for (Eigen::Index k = 1; k + 1 < N; k += 2) {
    const double pair = rho(k) + rho(k + 1);
    if (pair <= 0) break;
    acc += pair;
  }
  return N / (1 + 2 * acc);
}

FitDiagnostics diagnose(const PosteriorSamples& samples) {
  if (samples.chains.empty()) throw input_error("diagnose: no chains");
  FitDiagnostics d;
  auto add = [&](const std::string& name, const std::vector<VectorXd>& series) {
    d.rhat[name] = samples.chains.size() >= 2
                       ? gelman_rubin(series)
                       : std::numeric_limits<double>::quiet_NaN();
    double ess = 0;
    for (const auto& s : series) ess += effective_sample_size(s);
    d.ess[name] = ess;
  };

  std::vector<VectorXd> series;
  for (const auto& c : samples.chains) series.push_back(c.alpha);
  add("alpha", series);

  for (const auto& [name, iv] : samples.supports) {
    if (name == "alpha" || iv.fixed()) continue;
    series.clear();
    for (const auto& c : samples.chains) series.push_back(c.hypers.at(name));
    add(name, series);
  }

  const Eigen::Index A = samples.chains[0].kappa.cols();
  for (Eigen::Index i = 0; i < A; ++i) {
    series.clear();
    for (const auto& c : samples.chains) series.push_back(c.kappa.col(i));
    add("kappa[" + samples.area_ids[static_cast<size_t>(i)] + "]", series);
  }

  d.max_rhat = 0;
  d.min_ess = std::numeric_limits<double>::infinity();
  for (const auto& [name, r] : d.rhat)
    if (std::isfinite(r)) d.max_rhat = std::max(d.max_rhat, r);
  for (const auto& [name, e] : d.ess) d.min_ess = std::min(d.min_ess, e);
  return d;
}

VectorXd posterior_rate_means(const PosteriorSamples& samples) {
  if (samples.chains.empty() || samples.chains[0].kappa.rows() == 0)
    throw input_error("posterior_rate_means: no saved draws");
  const Eigen::Index A = samples.chains[0].kappa.cols();
  VectorXd out = VectorXd::Zero(A);
  long total = 0;
  for (const auto& c : samples.chains) {
    for (Eigen::Index s = 0; s < c.alpha.size(); ++s) {
      for (Eigen::Index i = 0; i < A; ++i)
        out[i] += inv_logit(c.alpha[s] + c.kappa(s, i));
      ++total;
    }
  }
  return out / static_cast<double>(total);
}

TcvSummary posterior_tcv(const PosteriorSamples& samples, const AdjacencyGraph& g) {
  if (samples.chains.empty()) throw input_error("posterior_tcv: no chains");
  const int A = g.size();
  const PriorKind kind = samples.kind;

  // kind-specific precomputations reused across draws
  double sum_inv_degree = 0;
  SpectralStructure spec;
  std::map<double, double> gp_factor;  // quantized psi -> sum of 1/[R^-1]_ii
  MatrixXd dist;
  if (is_car_kind(kind)) sum_inv_degree = g.degrees.cwiseInverse().sum();
  if (kind == PriorKind::bym) spec = icar_spectral(g);
  if (kind == PriorKind::bym2) spec = scaled_spectral(g);
  if (kind == PriorKind::gp) {
    if (!g.centroids) throw data_error("posterior_tcv: GP prior needs centroids");
    dist = pairwise_distances(*g.centroids);
  }

  std::vector<double> values;
  for (const auto& c : samples.chains) {
    const VectorXd& s2 = c.hypers.at("sigma2");
    for (Eigen::Index s = 0; s < s2.size(); ++s) {
      double v = 0;
      switch (kind) {
        case PriorKind::iid:
          v = s2[s] * A;
          break;
        case PriorKind::icar:
        case PriorKind::pcar:
          v = s2[s] * sum_inv_degree;
          break;
        case PriorKind::lcar: {
          const double lam = c.hypers.at("lambda")[s];
          v = s2[s] * (lam * (g.degrees.array() - 1.0) + 1.0).inverse().sum();
          break;
        }
        case PriorKind::bym: {
          const double nu = c.hypers.at("tau2")[s] / s2[s];
          v = s2[s] * mixture_inverse_diag(spec, 1.0, nu).cwiseInverse().sum();
          break;
        }
        case PriorKind::bym2: {
          const double lam = c.hypers.at("lambda")[s];
          v = s2[s] * mixture_inverse_diag(spec, lam, 1 - lam).cwiseInverse().sum();
          break;
        }
        case PriorKind::gp: {
          const double q = GpCache::quantize(c.hypers.at("psi")[s]);
          auto it = gp_factor.find(q);
          if (it == gp_factor.end()) {
            const MatrixXd R = (-dist / q).array().exp();
            const MatrixXd L = cholesky_psd(R);
            const MatrixXd Rinv = L.transpose().triangularView<Eigen::Upper>().solve(
                MatrixXd(L.triangularView<Eigen::Lower>().solve(
                    MatrixXd::Identity(A, A))));
            it = gp_factor.emplace(q, Rinv.diagonal().cwiseInverse().sum()).first;
          }
          v = s2[s] * it->second;
          break;
        }
      }
      values.push_back(v);
    }
  }
  TcvSummary out;
  out.draws = Eigen::Map<const VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  out.mean = out.draws.mean();
  std::sort(values.begin(), values.end());
  out.q05 = quantile_sorted(values, 0.05);
  out.q95 = quantile_sorted(values, 0.95);
  return out;
}

void write_draws_csv(const PosteriorSamples& samples, const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  for (size_t c = 0; c < samples.chains.size(); ++c) {
    const auto& chain = samples.chains[c];
    for (Eigen::Index s = 0; s < chain.alpha.size(); ++s) {
      const long iter =
          samples.config.burn_in + (static_cast<long>(s) + 1) * samples.config.thin;
      const std::string chain_id = std::to_string(c + 1), it = std::to_string(iter);
      rows.push_back({chain_id, it, "alpha", format_double(chain.alpha[s])});
      for (const auto& [name, draws] : chain.hypers)
        rows.push_back({chain_id, it, name, format_double(draws[s])});
      for (Eigen::Index i = 0; i < chain.kappa.cols(); ++i)
        rows.push_back({chain_id, it, "kappa[" + samples.area_ids[static_cast<size_t>(i)] + "]",
                        format_double(chain.kappa(s, i))});
    }
  }
  write_csv(path, {"chain", "iter", "name", "value"}, rows);
}

}  // namespace smoothgauge

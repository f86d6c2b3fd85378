#include "smoothgauge/study.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <thread>
#include <tuple>

#include "smoothgauge/errors.hpp"
#include "smoothgauge/io.hpp"
#include "smoothgauge/metrics.hpp"

namespace smoothgauge {

namespace {

constexpr uint64_t kCellMix = 0xD1B54A32D192ED03ull;
constexpr uint64_t kReplicateMix = 0x9E3779B97F4A7C15ull;

// independent sampler stream per (cell, replicate) fit
uint64_t fit_seed(uint64_t base, int cell, int rep) {
  return base ^ (kCellMix * static_cast<uint64_t>(cell + 1)) ^
         (kReplicateMix * static_cast<uint64_t>(rep + 1));
}

std::vector<std::string> relevant_hypers(PriorKind kind) {
  switch (kind) {
    case PriorKind::iid:
    case PriorKind::icar:
      return {"sigma2"};
    case PriorKind::gp:
      return {"sigma2", "psi"};
    case PriorKind::bym:
      return {"sigma2", "tau2"};
    case PriorKind::pcar:
      return {"sigma2", "eta"};
    case PriorKind::lcar:
    case PriorKind::bym2:
      return {"sigma2", "lambda"};
  }
  throw input_error("study: unknown prior kind");
}

const Interval& hyper_interval(const HyperPriors& hp, const std::string& name) {
  if (name == "sigma2") return hp.sigma2;
  if (name == "tau2") return hp.tau2;
  if (name == "eta") return hp.eta;
  if (name == "lambda") return hp.lambda;
  if (name == "psi") return hp.psi;
  throw input_error("study: unknown hyperparameter " + name);
}

// pinned-parameter prior for the closed-form TCV column
PriorSpec cell_prior_spec(const StudyCell& cell) {
  const double s2 = cell.hypers.sigma2.low;
  switch (cell.kind) {
    case PriorKind::iid:
      return PriorSpec::iid(s2);
    case PriorKind::gp:
      return PriorSpec::gp(s2, cell.hypers.psi.low);
    case PriorKind::icar:
      return PriorSpec::icar(s2);
    case PriorKind::bym:
      return PriorSpec::bym(s2, cell.hypers.tau2.low / s2);
    case PriorKind::pcar:
      return PriorSpec::pcar(s2, cell.hypers.eta.low);
    case PriorKind::lcar:
      return PriorSpec::lcar(s2, cell.hypers.lambda.low);
    case PriorKind::bym2:
      return PriorSpec::bym2(s2, cell.hypers.lambda.low);
  }
  throw input_error("study: unknown prior kind");
}

std::string render_params(const StudyCell& cell) {
  std::string out;
  for (const auto& name : relevant_hypers(cell.kind)) {
    const Interval& iv = hyper_interval(cell.hypers, name);
    if (!out.empty()) out += ", ";
    if (iv.fixed())
      out += name + "=" + format_double(iv.low);
    else
      out += name + "~U(" + format_double(iv.low) + "," + format_double(iv.high) + ")";
  }
  return out;
}

void run_jobs(int n_jobs, int workers, const std::function<void(int)>& job) {
  workers = std::max(1, std::min(workers, n_jobs));
  if (workers == 1) {
    for (int j = 0; j < n_jobs; ++j) job(j);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(workers));
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int j = next.fetch_add(1); j < n_jobs; j = next.fetch_add(1)) job(j);
    });
  for (auto& t : pool) t.join();
}

int resolve_workers(const StudyPlan& plan) {
  if (plan.workers > 0) return plan.workers;
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<StudyRow> run_study(const StudyPlan& plan) {
  plan.validate();
  const bool within = plan.mode == StudyMode::within;
  const int n_cells = static_cast<int>(plan.cells.size());
  const int n_reps = static_cast<int>(plan.replicates.counts.rows());
  const VectorXd& pops = plan.replicates.scenario.populations;
  const std::string prov = study_provenance(plan.replicates, plan.mcmc);
  const double nan = std::numeric_limits<double>::quiet_NaN();

  struct JobOut {
    SmoothingReport rep;
    double tcv = 0;
    bool ok = false;
    std::string error;
  };
  std::vector<JobOut> out(static_cast<size_t>(n_cells) * n_reps);

  run_jobs(n_cells * n_reps, resolve_workers(plan), [&](int j) {
    const int c = j / n_reps, b = j % n_reps;
    JobOut& slot = out[static_cast<size_t>(j)];
    try {
      AreaDataset data{plan.graph, plan.replicates.counts.row(b).transpose(), pops};
      McmcConfig cfg = plan.mcmc;
      cfg.seed = fit_seed(plan.mcmc.seed, c, b);
      const PosteriorSamples samples = fit(data, plan.cells[c].kind, plan.cells[c].hypers, cfg);
      const VectorXd post = posterior_rate_means(samples);
      const VectorXd crude = data.crude_rates();
      slot.rep = make_report(post, crude);
      if (!within) slot.tcv = posterior_tcv(samples, plan.graph).mean;
      slot.ok = true;
    } catch (const std::exception& e) {
      slot.error = e.what();
    }
  });

  std::vector<StudyRow> rows(static_cast<size_t>(n_cells));
  for (int c = 0; c < n_cells; ++c) {
    StudyRow& row = rows[static_cast<size_t>(c)];
    const StudyCell& cell = plan.cells[static_cast<size_t>(c)];
    row.kind = cell.kind;
    row.scenario = plan.scenario_label;
    row.params_text = render_params(cell);
    row.provenance = prov;
    for (const auto& name : relevant_hypers(cell.kind)) {
      const Interval& iv = hyper_interval(cell.hypers, name);
      if (iv.fixed()) row.params[name] = iv.low;
    }

    double mss_acc = 0, rmss_acc = 0, mmss_acc = 0, mrmss_acc = 0, tcv_acc = 0;
    std::vector<double> sps;
    sps.reserve(static_cast<size_t>(n_reps));
    for (int b = 0; b < n_reps; ++b) {
      const JobOut& slot = out[static_cast<size_t>(c) * n_reps + static_cast<size_t>(b)];
      if (!slot.ok) {
        row.failed = true;
        if (row.error.empty()) row.error = slot.error;
        continue;
      }
      ++row.replicates_ok;
      mss_acc += slot.rep.mss;
      rmss_acc += slot.rep.rmss;
      mmss_acc += slot.rep.max_mss;
      mrmss_acc += slot.rep.max_rmss;
      sps.push_back(slot.rep.sp);
      tcv_acc += slot.tcv;
    }
    if (row.replicates_ok > 0) {
      row.mss = mss_acc / row.replicates_ok;
      row.rmss = rmss_acc / row.replicates_ok;
      row.max_mss = mmss_acc / row.replicates_ok;
      row.max_rmss = mrmss_acc / row.replicates_ok;
      double sp_mean = 0;
      for (double s : sps) sp_mean += s;
      sp_mean /= static_cast<double>(sps.size());
      row.sp = sp_mean;
      if (sps.size() > 1) {
        double var = 0;
        for (double s : sps) var += (s - sp_mean) * (s - sp_mean);
        var /= static_cast<double>(sps.size() - 1);
        row.sp_se = std::sqrt(var / static_cast<double>(sps.size()));
      } else {
        row.sp_se = nan;
      }
    } else {
      row.mss = row.rmss = row.max_mss = row.max_rmss = row.sp = row.sp_se = nan;
    }

    if (within) {
      try {
        row.tcv = tcv(cell_prior_spec(cell), plan.graph);
      } catch (const std::exception& e) {
        row.tcv = nan;
        row.failed = true;
        if (row.error.empty()) row.error = e.what();
      }
    } else {
      row.tcv = row.replicates_ok > 0 ? tcv_acc / row.replicates_ok : nan;
    }
  }

  const auto get = [](const std::map<std::string, double>& m, const char* k) {
    const auto it = m.find(k);
    return it == m.end() ? 0.0 : it->second;
  };
  std::stable_sort(rows.begin(), rows.end(), [&](const StudyRow& a, const StudyRow& b) {
    return std::make_tuple(static_cast<int>(a.kind), get(a.params, "sigma2"),
                           get(a.params, "tau2"), get(a.params, "eta"),
                           get(a.params, "lambda"), get(a.params, "psi")) <
           std::make_tuple(static_cast<int>(b.kind), get(b.params, "sigma2"),
                           get(b.params, "tau2"), get(b.params, "eta"),
                           get(b.params, "lambda"), get(b.params, "psi"));
  });

  if (!plan.output_dir.empty()) {
    const std::string stem = plan.output_dir + (within ? "/study_within" : "/study_across");
    write_study_csv(rows, stem + ".csv");
    std::ofstream md(stem + ".md");
    if (!md) throw data_error("study: cannot write " + stem + ".md");
    md << study_markdown(rows);
  }
  return rows;
}

}  // namespace

McmcConfig desk_mcmc(uint64_t seed) {
  McmcConfig cfg;
  cfg.chains = 3;
  cfg.iterations = 6000;
  cfg.burn_in = 1000;
  cfg.thin = 25;
  cfg.seed = seed;
  return cfg;
}

void StudyPlan::validate() const {
  if (cells.empty()) throw input_error("study: no prior cells");
  mcmc.validate();
  const auto n_areas = graph.size();
  if (static_cast<Eigen::Index>(replicates.area_ids.size()) != n_areas)
    throw data_error("study: replicate set covers " +
                     std::to_string(replicates.area_ids.size()) + " areas, graph has " +
                     std::to_string(n_areas));
  for (Eigen::Index i = 0; i < n_areas; ++i)
    if (graph.area_ids[static_cast<size_t>(i)] != replicates.area_ids[static_cast<size_t>(i)])
      throw data_error("study: area order mismatch at " + std::to_string(i) + " (\"" +
                       graph.area_ids[static_cast<size_t>(i)] + "\" vs \"" +
                       replicates.area_ids[static_cast<size_t>(i)] + "\")");
  if (replicates.counts.rows() < 1 || replicates.counts.cols() != n_areas)
    throw data_error("study: counts matrix must be replicates x areas");
  if (!replicates.counts.allFinite() || (replicates.counts.array() < 0).any())
    throw data_error("study: counts must be finite and non-negative");
  if (replicates.scenario.populations.size() != n_areas)
    throw data_error("study: scenario populations must cover every area");
  for (Eigen::Index i = 0; i < n_areas; ++i)
    if (!(replicates.scenario.populations[i] > 0))
      throw data_error("study: scenario populations must be positive");

  for (size_t c = 0; c < cells.size(); ++c) {
    cells[c].hypers.validate(cells[c].kind);
    if (mode != StudyMode::within) continue;
    for (const auto& name : relevant_hypers(cells[c].kind)) {
      const Interval& iv = hyper_interval(cells[c].hypers, name);
      if (!iv.fixed())
        throw input_error("study: within mode requires fixed " + name + " in cell " +
                          std::to_string(c) + " (" + to_string(cells[c].kind) + ")");
    }
    if (!(cells[c].hypers.sigma2.low > 0))
      throw input_error("study: within mode needs sigma2 > 0 in cell " + std::to_string(c));
    if (cells[c].kind == PriorKind::gp && !(cells[c].hypers.psi.low > 0))
      throw input_error("study: within mode needs an explicit psi > 0 in cell " +
                        std::to_string(c));
  }
}

std::vector<StudyRow> run_within(const StudyPlan& plan) {
  if (plan.mode != StudyMode::within)
    throw input_error("run_within: plan mode must be 'within'");
  return run_study(plan);
}

std::vector<StudyRow> run_across(const StudyPlan& plan) {
  if (plan.mode != StudyMode::across)
    throw input_error("run_across: plan mode must be 'across'");
  return run_study(plan);
}

std::string study_provenance(const ReplicateSet& rs, const McmcConfig& cfg) {
  std::ostringstream s;
  s << scenario_to_json(rs.scenario) << '\n';
  for (const auto& id : rs.area_ids) s << id << ',';
  s << '\n';
  for (Eigen::Index i = 0; i < rs.true_rates.size(); ++i)
    s << format_double(rs.true_rates[i]) << ',';
  s << '\n';
  for (Eigen::Index b = 0; b < rs.counts.rows(); ++b) {
    for (Eigen::Index i = 0; i < rs.counts.cols(); ++i) s << format_double(rs.counts(b, i)) << ',';
    s << '\n';
  }
  s << "chains=" << cfg.chains << " iterations=" << cfg.iterations
    << " burn_in=" << cfg.burn_in << " thin=" << cfg.thin << " seed=" << cfg.seed
    << " target_accept=" << format_double(cfg.target_accept)
    << " adapt_burnin_only=" << (cfg.adapt_during_burnin_only ? 1 : 0);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx",
                static_cast<unsigned long long>(fnv1a64(s.str())));
  return buf;
}

namespace {

std::string metric_text(double x) { return std::isfinite(x) ? format_double(x) : ""; }

}  // namespace

void write_study_csv(const std::vector<StudyRow>& rows, const std::string& path) {
  std::vector<std::vector<std::string>> body;
  body.reserve(rows.size());
  for (const auto& r : rows)
    body.push_back({r.scenario, to_string(r.kind), r.params_text, metric_text(r.tcv),
                    metric_text(r.sp), metric_text(r.sp_se), metric_text(r.mss),
                    metric_text(r.rmss), metric_text(r.max_mss), metric_text(r.max_rmss),
                    std::to_string(r.replicates_ok), r.failed ? "failed" : "ok", r.error,
                    r.provenance});
  write_csv(path,
            {"scenario", "prior", "params", "tcv", "sp", "sp_se", "mss", "rmss", "max_mss",
             "max_rmss", "replicates_ok", "status", "error", "provenance"},
            body);
}

std::string study_markdown(const std::vector<StudyRow>& rows) {
  std::ostringstream md;
  md << "| scenario | prior | params | TCV | SP | MSS | RMSS | maxMSS | maxRMSS | status |\n";
  md << "|---|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : rows)
    md << "| " << r.scenario << " | " << to_string(r.kind) << " | " << r.params_text << " | "
       << metric_text(r.tcv) << " | " << metric_text(r.sp) << " | " << metric_text(r.mss)
       << " | " << metric_text(r.rmss) << " | " << metric_text(r.max_mss) << " | "
       << metric_text(r.max_rmss) << " | " << (r.failed ? "failed" : "ok") << " |\n";
  return md.str();
}

}  // namespace smoothgauge

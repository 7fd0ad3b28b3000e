#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cnc/analysis.hpp"
#include "cnc/config.hpp"
#include "cnc/csv.hpp"
#include "cnc/halfspace.hpp"
#include "cnc/io.hpp"
#include "cnc/mlp.hpp"
#include "cnc/optimizers.hpp"
#include "cnc/quadratic.hpp"
#include "cnc/spectrum.hpp"

namespace cnc {

using AnyProblem = std::variant<HalfspaceProblem, QuadraticSaddle, TinyMlp>;

inline LossFn make_loss(LossKind kind) {
  switch (kind) {
    case LossKind::sigmoid: return loss_sigmoid();
    case LossKind::linear: return loss_linear();
    case LossKind::quadratic: return loss_quadratic();
  }
  throw ValidationError("unknown loss kind");
}

inline AnyProblem build_problem(const ProblemSpec& spec, std::uint64_t data_seed) {
  switch (spec.kind) {
    case ProblemKind::halfspace:
      return make_gaussian_halfspace(spec.n, spec.d, spec.separation, data_seed,
                                     make_loss(spec.loss), spec.reg_weight);
    case ProblemKind::quadratic: {
      std::size_t d = spec.h_diag.size();
      Vec b = spec.b.empty() ? zeros(d) : spec.b;
      Vec dir = spec.noise_dir.empty() ? unit_vector(d, d - 1) : spec.noise_dir;
      std::vector<NoiseBranch> noise;
      if (spec.noise_sigma > 0.0) noise = two_point_noise(spec.noise_sigma, dir);
      return make_diagonal_saddle(spec.h_diag, b, std::move(noise));
    }
    case ProblemKind::mlp:
      return TinyMlp(spec.layers,
                     make_blob_dataset(spec.n, spec.layers.front(), spec.layers.back(),
                                       data_seed));
  }
  throw ValidationError("unknown problem kind");
}

inline std::size_t problem_dim(const AnyProblem& p) {
  return std::visit([](const auto& obj) { return obj.dim(); }, p);
}

// Descend on h(w) = ||grad f(w)||^2 / 2 (direction H*g obtained by central
// differences of the gradient) and return the first iterate with both a
// small gradient and negative curvature. Descending past that point tends
// to drift into flat regions where the curvature vanishes.
template <Objective Obj>
Vec find_saddle_init(const Obj& obj, Vec w, double eps_g, std::int64_t max_iters) {
  if (!(eps_g > 0.0)) throw ValidationError("eps_g must be positive");
  double alpha = 1.0;
  bool small_grad = false;
  for (std::int64_t it = 0; it < max_iters; ++it) {
    Vec g = obj.grad(w);
    double gn = norm2(g);
    if (gn <= eps_g) {
      small_grad = true;
      if (sym_eig(hessian_of(obj, w)).lambda_min < 0.0) return w;
    }
    double fd = 1e-5 * std::max(1.0, norm2(w)) / std::max(gn, 1e-12);
    Vec wp = w, wm = w;
    axpy(fd, g, wp);
    axpy(-fd, g, wm);
    Vec hg = (1.0 / (2.0 * fd)) * (obj.grad(wp) - obj.grad(wm));
    double h0 = 0.5 * gn * gn;
    double step = std::min(alpha * 2.0, 1e3);
    bool accepted = false;
    while (step > 1e-18) {
      Vec cand = w;
      axpy(-step, hg, cand);
      if (all_finite(cand)) {
        double h1 = 0.5 * norm2_sq(obj.grad(cand));
        if (h1 < h0) {
          w = std::move(cand);
          alpha = step;
          accepted = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!accepted) break;  // stalled; verdict below decides
  }
  if (norm2(obj.grad(w)) > eps_g)
    throw NoSaddleFound("gradient norm did not reach eps_g");
  if (sym_eig(hessian_of(obj, w)).lambda_min < 0.0) return w;
  throw NoSaddleFound(small_grad ? "small-gradient region has no negative curvature"
                                 : "stationary point has no negative curvature");
}

struct SummaryRow {
  std::string method;
  std::uint64_t seed = 0;
  std::optional<std::int64_t> escape_iteration;
  double final_f = std::numeric_limits<double>::quiet_NaN();
  double final_grad_norm = std::numeric_limits<double>::quiet_NaN();
  double final_lambda_min = std::numeric_limits<double>::quiet_NaN();
  std::string status = "ok";
};

struct ExperimentCell {
  std::string method;
  std::uint64_t seed = 0;
  Trajectory trajectory;
  std::string status = "ok";
};

struct ExperimentResult {
  Vec w0;
  double f0 = 0.0;
  double drop_threshold = 0.0;
  int resamples_used = 0;
  std::vector<ExperimentCell> cells;
  std::vector<SummaryRow> summary;
};

namespace detail {

inline std::string config_header(const ExperimentConfig& cfg) {
  std::string out;
  for (const std::string& line : split(trim(cfg.source_text), '\n')) out += "# " + line + "\n";
  return out;
}

template <class Obj>
Trajectory run_method_cell(const Obj& obj, const MethodSpec& m, const Vec& w0, std::int64_t t_max,
                           std::uint64_t run_seed, const RunOptions& opts,
                           const SmoothnessConstants& consts) {
  switch (m.method) {
    case Method::gd:
      return run_gd(obj, w0, m.eta, t_max, opts);
    case Method::sgd:
      return run_sgd(obj, w0, m.eta, t_max, run_seed, opts);
    case Method::iso_pgd:
      return run_iso_pgd(obj, w0, m.eta, m.r, m.g_thres, m.tr, t_max, run_seed, opts);
    case Method::cnc_pgd: {
      PgdParams p;
      if (m.derive_eps) {
        p = derive_pgd_params(consts, *m.derive_eps);
        p.t_max = t_max;  // practical horizon; derived T is astronomically large
      } else {
        p.eta = m.eta;
        p.r = m.r;
        p.g_thres = m.g_thres;
        p.tr = m.tr;
        p.t_max = t_max;
        p.f_thres = m.g_thres * static_cast<double>(m.tr);
      }
      return run_cnc_pgd(obj, w0, p, run_seed, opts).trajectory;
    }
    case Method::cnc_sgd: {
      SgdParams p;
      if (m.derive_eps) {
        p = derive_sgd_params(consts, *m.derive_eps);
        p.t_max = t_max;
      } else {
        p.eta = m.eta;
        p.r = m.r;
        p.tr = m.tr;
        p.t_max = t_max;
      }
      return run_cnc_sgd(obj, w0, p, run_seed, opts).trajectory;
    }
  }
  throw ValidationError("unknown method");
}

}  // namespace detail

// Extended per-iteration CSV with eigenvalue columns. Rows where the
// spectrum was not computed leave the lambda fields empty.
inline std::string trajectory_csv_with_spectrum(const Trajectory& traj, const AnyProblem& problem,
                                                std::int64_t eig_log_every,
                                                const std::string& header) {
  std::string out = header;
  out += "# method=" + method_name(traj.method) + " seed=" + std::to_string(traj.seed) + " " +
         traj.params_echo + "\n";
  out += "iter,f,grad_norm,lambda_min,lambda_max,perturbed_flag\n";
  std::size_t last = traj.f_values.empty() ? 0 : traj.f_values.size() - 1;
  for (std::size_t k = 0; k < traj.f_values.size(); ++k) {
    bool want_eig = eig_log_every > 0 && (k % static_cast<std::size_t>(eig_log_every) == 0);
    want_eig = (want_eig || k == last) && traj.has_snapshot(k);
    std::string lmin, lmax;
    if (want_eig) {
      SpectrumReport spec = std::visit(
          [&](const auto& obj) { return sym_eig(hessian_of(obj, traj.snapshot(k))); }, problem);
      lmin = fmt_double(spec.lambda_min);
      lmax = fmt_double(spec.lambda_max());
    }
    out += join_csv({fmt_int(static_cast<long long>(k)), fmt_double(traj.f_values[k]),
                     fmt_double(traj.grad_norms[k]), lmin, lmax,
                     traj.perturbed_from(k) ? "1" : "0"}) +
           "\n";
  }
  return out;
}

inline std::string summary_to_csv(const ExperimentResult& res, const std::string& header) {
  std::string out = header;
  out += "# w0_f=" + fmt_double(res.f0) + " drop_threshold=" + fmt_double(res.drop_threshold) +
         " resamples=" + std::to_string(res.resamples_used) + "\n";
  out += "method,seed,escape_iteration,final_f,final_grad_norm,final_lambda_min,status\n";
  for (const SummaryRow& row : res.summary) {
    out += join_csv({row.method, std::to_string(row.seed),
                     row.escape_iteration ? fmt_int(*row.escape_iteration) : std::string{},
                     fmt_double(row.final_f), fmt_double(row.final_grad_norm),
                     fmt_double(row.final_lambda_min), row.status}) +
           "\n";
  }
  return out;
}

// First state index whose f value sits at least `drop` below f0; used both
// by the summary pass and by the independent-scan consistency test.
inline std::optional<std::int64_t> escape_iteration(const std::vector<double>& f_values, double f0,
                                                    double drop) {
  if (!(drop > 0.0)) return std::nullopt;
  for (std::size_t k = 0; k < f_values.size(); ++k)
    if (f_values[k] <= f0 - drop) return static_cast<std::int64_t>(k);
  return std::nullopt;
}

// Runs the method x seed grid and emits one trajectory CSV per cell plus a
// summary CSV. Outputs are a pure function of the config document.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                       const std::string& out_dir_override = {}) {
  std::string out_dir = out_dir_override.empty() ? cfg.out_dir : out_dir_override;
  std::filesystem::create_directories(out_dir);

  // problem + start point, resampling the dataset while no saddle is found
  int resamples = 0;
  std::optional<AnyProblem> problem;
  Vec w0;
  for (int attempt = 0;; ++attempt) {
    AnyProblem cand = build_problem(cfg.problem, cfg.problem.data_seed + attempt);
    std::size_t d = problem_dim(cand);
    try {
      switch (cfg.init.kind) {
        case InitKind::origin:
          w0 = zeros(d);
          break;
        case InitKind::explicit_vector:
          if (cfg.init.explicit_vector.size() != d) throw ValidationError("init.vector size");
          w0 = cfg.init.explicit_vector;
          break;
        case InitKind::near_saddle: {
          if (!cfg.init.search_start.empty()) {
            if (cfg.init.search_start.size() != d) throw ValidationError("init.search_start size");
            w0 = std::visit(
                [&](const auto& obj) {
                  return find_saddle_init(obj, cfg.init.search_start, cfg.init.eps_g,
                                          cfg.init.max_iters);
                },
                cand);
            break;
          }
          // multi-start: keep the saddle with the most negative curvature
          Rng search_rng(cfg.init.search_seed);
          Vec best;
          double best_lambda = 0.0;
          for (std::int64_t trial = 0; trial < cfg.init.search_tries; ++trial) {
            Vec start = search_rng.uniform(cfg.init.radius_lo, cfg.init.radius_hi) *
                        search_rng.unit_sphere(d);
            try {
              Vec w = std::visit(
                  [&](const auto& obj) {
                    return find_saddle_init(obj, start, cfg.init.eps_g, cfg.init.max_iters);
                  },
                  cand);
              double lmin = std::visit(
                  [&](const auto& obj) { return sym_eig(hessian_of(obj, w)).lambda_min; }, cand);
              if (lmin < best_lambda) {
                best_lambda = lmin;
                best = std::move(w);
              }
            } catch (const NoSaddleFound&) {
            }
          }
          if (best.empty()) throw NoSaddleFound("no start produced a saddle");
          w0 = std::move(best);
          break;
        }
      }
      problem = std::move(cand);
      resamples = attempt;
      break;
    } catch (const NoSaddleFound&) {
      if (attempt + 1 >= cfg.resample_tries) throw;
    }
  }
  if (cfg.init.offset_scale > 0.0) {
    Rng rng(cfg.init.offset_seed);
    axpy(cfg.init.offset_scale, rng.unit_ball(w0.size()), w0);
  }

  RunOptions opts;
  opts.snapshot_every = cfg.snapshot_thinning;

  ExperimentResult res;
  res.w0 = w0;
  res.resamples_used = resamples;
  res.f0 = std::visit([&](const auto& obj) { return obj.value(w0); }, *problem);

  std::string header = detail::config_header(cfg);

  // run every cell; a failing cell is recorded and does not stop the grid
  for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
    const MethodSpec& m = cfg.methods[mi];
    for (std::uint64_t seed : cfg.seeds) {
      ExperimentCell cell;
      cell.method = method_name(m.method);
      cell.seed = seed;
      std::uint64_t run_seed = derive_seed(seed, static_cast<std::uint64_t>(m.method));
      try {
        cell.trajectory = std::visit(
            [&](const auto& obj) {
              return detail::run_method_cell(obj, m, w0, cfg.t_max, run_seed, opts,
                                             cfg.derive_constants);
            },
            *problem);
      } catch (const Error& e) {
        cell.status = e.what();
      }
      res.cells.push_back(std::move(cell));
    }
  }

  // escape threshold: fraction of the best observed drop anywhere in the grid
  double f_best = res.f0;
  for (const ExperimentCell& cell : res.cells)
    for (double f : cell.trajectory.f_values) f_best = std::min(f_best, f);
  res.drop_threshold = cfg.drop_frac * (res.f0 - f_best);

  for (const ExperimentCell& cell : res.cells) {
    std::string path = out_dir + "/traj_" + cell.method + "_seed" + std::to_string(cell.seed) +
                       ".csv";
    if (cell.status == "ok") {
      write_file(path, trajectory_csv_with_spectrum(cell.trajectory, *problem, cfg.eig_log_every,
                                                    header));
    } else {
      write_file(path, header + "# error=" + cell.status + "\n");
    }

    SummaryRow row;
    row.method = cell.method;
    row.seed = cell.seed;
    row.status = cell.status;
    if (cell.status == "ok" && !cell.trajectory.f_values.empty()) {
      row.escape_iteration =
          escape_iteration(cell.trajectory.f_values, res.f0, res.drop_threshold);
      row.final_f = cell.trajectory.f_values.back();
      row.final_grad_norm = cell.trajectory.grad_norms.back();
      std::size_t last = cell.trajectory.f_values.size() - 1;
      if (cell.trajectory.has_snapshot(last)) {
        row.final_lambda_min = std::visit(
            [&](const auto& obj) {
              return sym_eig(hessian_of(obj, cell.trajectory.snapshot(last))).lambda_min;
            },
            *problem);
      }
    }
    res.summary.push_back(std::move(row));
  }

  write_file(out_dir + "/summary.csv", summary_to_csv(res, header));
  return res;
}

// ---------------------------------------------------------------------------
// Variance measurement sweep (stochastic-gradient vs isotropic noise)
// ---------------------------------------------------------------------------

struct MeasureRow {
  double family = 0.0;  // the swept quantity (d, or depth)
  std::size_t k = 0;
  double lambda = 0.0;
  double mu_raw = 0.0;
  double mu_normalized = 0.0;
  double isotropic = 0.0;
};

struct MeasureResult {
  std::vector<MeasureRow> rows;
  double slope_isotropic = std::numeric_limits<double>::quiet_NaN();
  double slope_cnc = std::numeric_limits<double>::quiet_NaN();
  std::string csv;
};

namespace detail {

template <StochasticObjective Obj>
void measure_family_member(const Obj& obj, double family_value, const MeasureSpec& ms,
                           std::uint64_t member_key, std::vector<MeasureRow>& rows) {
  const std::size_t dim = obj.dim();
  Rng draw_rng(derive_seed(ms.seed, member_key));
  std::vector<MeasureRow> acc;
  for (std::size_t i = 0; i < ms.m; ++i) {
    Vec w;
    if constexpr (std::is_same_v<Obj, TinyMlp>) {
      w = (ms.param_scale / std::sqrt(static_cast<double>(dim))) * draw_rng.normal_vec(dim);
    } else {
      w = ms.param_scale * draw_rng.unit_ball(dim);
    }
    CncEstimate est = estimate_cnc_at(obj, w);
    SpectrumReport spec = sym_eig(hessian_of(obj, w));
    std::vector<double> iso = isotropic_baseline(
        dim, ms.iso_draws, spec.eigenvectors, derive_seed(ms.seed, member_key + 101 + i));
    if (acc.empty()) acc.resize(est.records.size());
    for (std::size_t k = 0; k < est.records.size(); ++k) {
      acc[k].family = family_value;
      acc[k].k = k;
      acc[k].lambda += est.records[k].lambda;
      acc[k].mu_raw += est.records[k].mu_raw;
      acc[k].mu_normalized += est.records[k].mu_normalized;
      acc[k].isotropic += iso[k];
    }
  }
  double inv_m = 1.0 / static_cast<double>(ms.m);
  for (MeasureRow& row : acc) {
    row.lambda *= inv_m;
    row.mu_raw *= inv_m;
    row.mu_normalized *= inv_m;
    row.isotropic *= inv_m;
  }
  rows.insert(rows.end(), acc.begin(), acc.end());
}

}  // namespace detail

inline MeasureResult run_cnc_measurement(const ExperimentConfig& cfg,
                                         const std::string& out_dir_override = {}) {
  const MeasureSpec& ms = cfg.measure;
  MeasureResult res;

  if (ms.kind == ProblemKind::halfspace) {
    for (std::size_t d : ms.dims) {
      HalfspaceProblem p = make_gaussian_halfspace(ms.n, d, cfg.problem.separation,
                                                   derive_seed(ms.seed, 7000 + d),
                                                   make_loss(cfg.problem.loss),
                                                   cfg.problem.reg_weight);
      detail::measure_family_member(p, static_cast<double>(d), ms, 10000 + d, res.rows);
    }
  } else if (ms.kind == ProblemKind::mlp) {
    for (std::size_t depth : ms.depths) {
      std::vector<std::size_t> layers;
      layers.push_back(ms.width);
      for (std::size_t h = 0; h < depth; ++h) layers.push_back(ms.width);
      layers.push_back(ms.classes);
      TinyMlp mlp(layers, make_blob_dataset(ms.n, ms.width, ms.classes,
                                            derive_seed(ms.seed, 31 + depth)));
      detail::measure_family_member(mlp, static_cast<double>(depth), ms, 20000 + depth, res.rows);
    }
  } else {
    throw ValidationError("measure.kind must be halfspace or mlp");
  }

  // slope of the minimum-eigendirection moments against the family value
  std::vector<double> fam, iso0, cnc0;
  for (const MeasureRow& row : res.rows) {
    if (row.k != 0) continue;
    fam.push_back(row.family);
    iso0.push_back(row.isotropic);
    cnc0.push_back(row.mu_raw);
  }
  try {
    res.slope_isotropic = fit_dimension_slope(fam, iso0);
  } catch (const DegenerateInput&) {
  }
  try {
    res.slope_cnc = fit_dimension_slope(fam, cnc0);
  } catch (const DegenerateInput&) {
  }

  std::string csv = detail::config_header(cfg);
  csv += "family,k,lambda,mu_raw,mu_normalized,isotropic\n";
  for (const MeasureRow& row : res.rows) {
    csv += join_csv({fmt_double(row.family), fmt_int(static_cast<long long>(row.k)),
                     fmt_double(row.lambda), fmt_double(row.mu_raw),
                     fmt_double(row.mu_normalized), fmt_double(row.isotropic)}) +
           "\n";
  }
  csv += "# slope_isotropic=" + fmt_double(res.slope_isotropic) +
         " slope_cnc=" + fmt_double(res.slope_cnc) + "\n";
  res.csv = csv;

  std::string out_dir = out_dir_override.empty() ? cfg.out_dir : out_dir_override;
  std::filesystem::create_directories(out_dir);
  write_file(out_dir + "/measure.csv", csv);
  return res;
}

}  // namespace cnc

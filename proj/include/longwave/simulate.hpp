#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "longwave/csv.hpp"
#include "longwave/estimator.hpp"
#include "longwave/longmem.hpp"
#include "longwave/parallel.hpp"
#include "longwave/rng.hpp"
#include "longwave/toml.hpp"
#include "longwave/version.hpp"
#include "longwave/wavelet.hpp"

namespace longwave {

/// The simulation study's univariate test functions. Both integrate to
/// zero over [0,1], so the additive components are identified.
struct TestFunctionSuite {
  static double parabola(double t) {
    const double u = t - 0.5;
    return 8.0 * u * u - 2.0 / 3.0;
  }
  static double coswave(double x) {
    return -std::cos(4.0 * std::numbers::pi * x + 1.0);
  }
  static double zero(double) { return 0.0; }

  static const std::map<std::string, std::function<double(double)>>& registry() {
    static const std::map<std::string, std::function<double(double)>> reg = {
        {"parabola", parabola},
        {"coswave", coswave},
        {"zero", zero},
    };
    return reg;
  }

  /// beta_0 = 0.25 * sample median of the realized component sums.
  static double beta0_rule(std::vector<double> component_sums) {
    if (component_sums.empty()) throw std::invalid_argument("empty sample for beta0 rule");
    return 0.25 * detail::median_of(std::move(component_sums));
  }
};

/// Known heteroskedasticity fields on [0,1]^2, strictly positive.
struct SigmaField {
  std::string id;
  std::function<double(double, double)> evaluator;
};

inline const std::vector<SigmaField>& sigma_field_registry() {
  static const std::vector<SigmaField> fields = {
      {"sigma1", [](double, double) { return 1.0; }},
      {"sigma2", [](double t, double x) { return (t + 0.4) * (x + 0.6); }},
      {"sigma3", [](double t, double x) { return (x + 0.6) * (x + 0.6) * (t + 0.4); }},
      {"sigma4", [](double t, double x) { return (x + 0.6) * std::sqrt(t + 0.4); }},
      {"sigma5",
       [](double t, double x) {
         return (t + 0.4) * (2.0 + std::cos(2.0 * std::numbers::pi * x));
       }},
  };
  return fields;
}

inline const SigmaField& sigma_field(const std::string& id) {
  for (const auto& f : sigma_field_registry())
    if (f.id == id) return f;
  throw ConfigError("unknown sigma field '" + id + "'");
}

/// How the SNR target maps to a noise scale. amplitude_db is the printed
/// definition 20 log10(|U|^2/|sigma eps|^2); power_db is the conventional
/// 10 log10 of the same ratio.
enum class SnrConvention { amplitude_db, power_db };

struct SimulationConfig {
  std::int64_t n = 4096;
  std::vector<double> alphas{0.8, 0.6, 0.4, 0.2};
  std::vector<double> snrs_db{10.0, 15.0};
  std::vector<std::string> sigma_fields{"sigma1", "sigma2", "sigma3", "sigma4",
                                        "sigma5"};
  std::int64_t reps = 1000;
  int vanishing_moments = 3;
  int table_depth = 14;
  int levels = 6;  // finest-resolution override; 0 applies the N/ln N rule
  ThresholdKind regime = ThresholdKind::homoskedastic;
  double gamma = 0.0;        // 0: MAD pilot estimate
  double gamma1 = 0.0;       // 0: gamma * sqrt(ln N)
  double gamma_scale = 1.0;
  std::uint64_t seed = 20250801;
  std::int64_t eval_grid = 256;
  std::int64_t surface_grid = 64;
  std::vector<std::string> export_surfaces{"sigma3", "sigma5"};
  SnrConvention snr_convention = SnrConvention::amplitude_db;
  NoiseMethod noise_method = NoiseMethod::circulant_embedding;

  void validate() const {
    if (n < 16 || (n & (n - 1)) != 0)
      throw ConfigError("n must be a power of two, at least 16");
    if (alphas.empty() || snrs_db.empty() || sigma_fields.empty())
      throw ConfigError("alphas, snrs_db and sigma_fields must be nonempty");
    for (double a : alphas)
      if (!(a > 0.0 && a <= 1.0)) throw ConfigError("alphas must lie in (0,1]");
    if (reps < 1) throw ConfigError("reps must be positive");
    if (eval_grid < 2 || surface_grid < 2) throw ConfigError("grids must be >= 2");
    if (levels < 0 || levels > 20) throw ConfigError("levels out of range");
    for (const auto& id : sigma_fields) sigma_field(id);
  }

  std::string canonical_string() const {
    std::string s = "n=" + std::to_string(n) + ";alphas=";
    for (double a : alphas) s += format_double(a) + ",";
    s += ";snrs=";
    for (double v : snrs_db) s += format_double(v) + ",";
    s += ";sigmas=";
    for (const auto& id : sigma_fields) s += id + ",";
    s += ";reps=" + std::to_string(reps);
    s += ";vm=" + std::to_string(vanishing_moments);
    s += ";depth=" + std::to_string(table_depth);
    s += ";levels=" + std::to_string(levels);
    s += ";regime=" + std::string(regime == ThresholdKind::homoskedastic ? "hom" : "het");
    s += ";gamma=" + format_double(gamma) + ";gamma1=" + format_double(gamma1);
    s += ";gscale=" + format_double(gamma_scale);
    s += ";seed=" + std::to_string(seed);
    s += ";grid=" + std::to_string(eval_grid);
    s += ";sgrid=" + std::to_string(surface_grid);
    s += ";snrconv=" +
         std::string(snr_convention == SnrConvention::amplitude_db ? "amp" : "pow");
    s += ";noise=" + std::string(to_string(noise_method));
    return s;
  }
  std::string config_hash() const { return fnv1a_hex(canonical_string()); }
};

/// n x r i.i.d. Uniform[0,1) design, row-major, reproducible from seed.
inline std::vector<double> generate_design(std::int64_t n, std::int64_t r,
                                           std::uint64_t seed) {
  if (n < 1 || r < 1) throw std::invalid_argument("design dimensions must be positive");
  CounterRng rng(seed);
  std::vector<double> out(static_cast<std::size_t>(n * r));
  for (auto& v : out) v = rng.next_uniform();
  return out;
}

/// Noise scale c making the realized SNR hit the target exactly:
///   amplitude_db: target = 20 log10(|U|^2 / |c sigma eps|^2)
///   power_db:     target = 10 log10(|U|^2 / |c sigma eps|^2)
inline double calibrate_sigma_scale(std::span<const double> u_values,
                                    std::span<const double> raw_noise,
                                    std::span<const double> sigma_values,
                                    double target_snr_db,
                                    SnrConvention convention = SnrConvention::amplitude_db) {
  if (u_values.size() != raw_noise.size() || u_values.size() != sigma_values.size())
    throw std::invalid_argument("calibration arrays must have equal length");
  double u2 = 0.0, e2 = 0.0;
  for (std::size_t i = 0; i < u_values.size(); ++i) {
    u2 += u_values[i] * u_values[i];
    const double se = sigma_values[i] * raw_noise[i];
    e2 += se * se;
  }
  if (e2 <= 0.0) throw NumericalError("noise vector has zero norm; cannot calibrate");
  const double denom = convention == SnrConvention::amplitude_db ? 20.0 : 10.0;
  return std::sqrt(u2 / e2 * std::pow(10.0, -target_snr_db / denom));
}

struct GridCell {
  std::string sigma_id;
  double snr_db = 0.0;
  double alpha = 1.0;
};

struct ReplicateResult {
  double mise_grid = 0.0;  // mean over the evaluation grid of (Uhat - U)^2
  double mise_obs = 0.0;   // mean over observations of (Uhat(t_i,x_i) - y_i)^2
  bool circulant_fallback = false;
};

/// Precomputed per-config state shared by every replicate.
struct SimContext {
  std::shared_ptr<const WaveletBasis> basis;
  std::map<std::string, ThresholdRegime> regimes;  // per sigma field
};

inline SimContext make_sim_context(const SimulationConfig& config) {
  config.validate();
  SimContext ctx;
  ctx.basis = std::make_shared<const WaveletBasis>(
      build_basis(config.vanishing_moments, config.table_depth));
  const int max_level =
      config.levels > 0 ? config.levels : select_max_level(config.n);
  for (const auto& id : config.sigma_fields) {
    ThresholdRegime regime;
    regime.kind = config.regime;
    regime.gamma = config.gamma;
    regime.gamma1 = config.gamma1;
    regime.gamma_scale = config.gamma_scale;
    if (config.regime == ThresholdKind::heteroskedastic) {
      const auto& field = sigma_field(id);
      auto sigma_r = [field](std::span<const double> p) {
        return field.evaluator(p[0], p[1]);
      };
      regime.sigma_psi_integral_zero =
          make_sigma_zero_predicate(sigma_r, *ctx.basis, 2, max_level);
    }
    ctx.regimes[id] = std::move(regime);
  }
  return ctx;
}

namespace detail {

struct ReplicateData {
  AdditiveFit fit;
  std::vector<double> design;  // n x 2
  std::vector<double> responses;
  double beta0 = 0.0;
  bool circulant_fallback = false;
};

inline ReplicateData run_replicate_fit(const SimulationConfig& config,
                                       const SimContext& ctx, const GridCell& cell,
                                       std::int64_t rep_index) {
  // content-derived child seed: (master, sigma, snr, alpha, rep)
  std::uint64_t snr_bits, alpha_bits;
  {
    const double sv = cell.snr_db, av = cell.alpha;
    static_assert(sizeof(double) == sizeof(std::uint64_t));
    __builtin_memcpy(&snr_bits, &sv, 8);
    __builtin_memcpy(&alpha_bits, &av, 8);
  }
  std::uint64_t id_hash = 1469598103934665603ULL;
  for (unsigned char c : cell.sigma_id) id_hash = (id_hash ^ c) * 1099511628211ULL;
  const std::uint64_t cell_seed = derive_seed(
      config.seed, {id_hash, snr_bits, alpha_bits, static_cast<std::uint64_t>(rep_index)});

  const std::int64_t n = config.n;
  ReplicateData out;
  out.design = generate_design(n, 2, derive_seed(cell_seed, {0}));

  LongMemorySpec noise_spec;
  noise_spec.alpha = cell.alpha;
  noise_spec.method = config.noise_method;
  auto noise = generate_noise(noise_spec, n, derive_seed(cell_seed, {1}));
  out.circulant_fallback = noise.circulant_fallback;

  const auto& sigma = sigma_field(cell.sigma_id);
  std::vector<double> u(static_cast<std::size_t>(n)), sig(static_cast<std::size_t>(n)),
      sums(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    const double t = out.design[2 * i], x = out.design[2 * i + 1];
    sums[i] = TestFunctionSuite::parabola(t) + TestFunctionSuite::coswave(x);
    sig[i] = sigma.evaluator(t, x);
  }
  out.beta0 = TestFunctionSuite::beta0_rule(sums);
  for (std::int64_t i = 0; i < n; ++i) u[i] = out.beta0 + sums[i];

  const double scale = calibrate_sigma_scale(u, noise.values, sig, cell.snr_db,
                                             config.snr_convention);
  out.responses.resize(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i)
    out.responses[i] = u[i] + scale * sig[i] * noise.values[i];

  Dataset data;
  data.r = 2;
  data.predictors = out.design;
  data.responses = out.responses;
  data.densities = {DesignDensity::uniform(), DesignDensity::uniform()};

  FitOptions options;
  options.levels_override = config.levels;
  out.fit = fit_additive(data, ctx.basis, ctx.regimes.at(cell.sigma_id), options);
  return out;
}

}  // namespace detail

/// Grid-mean squared error of the fit against the true additive surface.
/// Uses the additive decomposition, so the G x G double sum reduces to
/// one-dimensional sums.
inline double grid_mise(const AdditiveFit& fit, double beta0,
                        const std::function<double(double)>& f_true,
                        const std::function<double(double)>& g_true,
                        std::int64_t grid) {
  const double delta = fit.intercept - beta0;
  double sa = 0.0, sb = 0.0, sa2 = 0.0, sb2 = 0.0;
  for (std::int64_t i = 0; i < grid; ++i) {
    const double t = (static_cast<double>(i) + 0.5) / static_cast<double>(grid);
    const double a = component_value(fit, 0, t) - f_true(t);
    const double b = component_value(fit, 1, t) - g_true(t);
    sa += a;
    sb += b;
    sa2 += a * a;
    sb2 += b * b;
  }
  const double g = static_cast<double>(grid);
  const double ma = sa / g, mb = sb / g;
  return delta * delta + sa2 / g + sb2 / g + 2.0 * delta * ma + 2.0 * delta * mb +
         2.0 * ma * mb;
}

/// One Monte Carlo replicate of a grid cell: simulate, calibrate, fit,
/// and score. Deterministic in (config.seed, cell, rep_index).
inline ReplicateResult run_replicate(const SimulationConfig& config,
                                     const SimContext& ctx, const GridCell& cell,
                                     std::int64_t rep_index) {
  auto rep = detail::run_replicate_fit(config, ctx, cell, rep_index);
  ReplicateResult result;
  result.circulant_fallback = rep.circulant_fallback;
  result.mise_grid =
      grid_mise(rep.fit, rep.beta0, TestFunctionSuite::parabola,
                TestFunctionSuite::coswave, config.eval_grid);
  double obs = 0.0;
  const std::int64_t n = config.n;
  for (std::int64_t i = 0; i < n; ++i) {
    const double pred = rep.fit.intercept +
                        component_value(rep.fit, 0, rep.design[2 * i]) +
                        component_value(rep.fit, 1, rep.design[2 * i + 1]);
    const double d = pred - rep.responses[i];
    obs += d * d;
  }
  result.mise_obs = obs / static_cast<double>(n);
  return result;
}

/// Convenience overload building its own context.
inline ReplicateResult run_replicate(const SimulationConfig& config,
                                     const GridCell& cell, std::int64_t rep_index) {
  return run_replicate(config, make_sim_context(config), cell, rep_index);
}

struct MiseCell {
  std::string sigma_id;
  double snr_db = 0.0;
  double alpha = 1.0;
  double mean_mise = 0.0;
  double se = 0.0;  // NaN when reps == 1 (undefined)
  std::int64_t n_reps = 0;
  double mean_obs_mise = 0.0;
  std::int64_t fallback_count = 0;
};

struct MiseReport {
  std::vector<MiseCell> cells;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::string version;
  double wall_seconds = 0.0;
  bool complete = true;  // false when interrupted mid-grid
};

/// Run the full (sigma x snr x alpha) grid. Replicates are parallel with
/// independently derived seeds; cells complete in config order and are
/// handed to cell_done as they finish (partial results on interrupt).
inline MiseReport run_grid(const SimulationConfig& config, int threads = 1,
                           const std::atomic<bool>* interrupt = nullptr,
                           const std::function<void(const MiseCell&)>& cell_done = {}) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  const SimContext ctx = make_sim_context(config);

  MiseReport report;
  report.seed = config.seed;
  report.config_hash = config.config_hash();
  report.version = kVersion;

  for (const auto& sigma_id : config.sigma_fields) {
    for (double snr : config.snrs_db) {
      for (double alpha : config.alphas) {
        if (interrupt && interrupt->load()) {
          report.complete = false;
          break;
        }
        const GridCell cell{sigma_id, snr, alpha};
        std::vector<ReplicateResult> results(static_cast<std::size_t>(config.reps));
        parallel_for(config.reps, threads, [&](std::int64_t r) {
          results[static_cast<std::size_t>(r)] = run_replicate(config, ctx, cell, r);
        });
        MiseCell out;
        out.sigma_id = sigma_id;
        out.snr_db = snr;
        out.alpha = alpha;
        out.n_reps = config.reps;
        double sum = 0.0, sum_obs = 0.0;
        for (const auto& r : results) {
          sum += r.mise_grid;
          sum_obs += r.mise_obs;
          out.fallback_count += r.circulant_fallback ? 1 : 0;
        }
        out.mean_mise = sum / static_cast<double>(config.reps);
        out.mean_obs_mise = sum_obs / static_cast<double>(config.reps);
        if (config.reps > 1) {
          double ss = 0.0;
          for (const auto& r : results) {
            const double d = r.mise_grid - out.mean_mise;
            ss += d * d;
          }
          out.se = std::sqrt(ss / static_cast<double>(config.reps - 1) /
                             static_cast<double>(config.reps));
        } else {
          out.se = std::numeric_limits<double>::quiet_NaN();
        }
        report.cells.push_back(out);
        if (cell_done) cell_done(out);
      }
      if (!report.complete) break;
    }
    if (!report.complete) break;
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

struct SurfacePoint {
  double t = 0.0, x = 0.0, u_true = 0.0, u_est = 0.0;
};

/// Tabulate the true and fitted surfaces on a grid x grid midpoint lattice
/// for external plotting.
inline std::vector<SurfacePoint> export_surface(
    const AdditiveFit& fit, const std::function<double(double)>& f_true,
    const std::function<double(double)>& g_true, double beta0, std::int64_t grid) {
  if (grid < 1) throw std::invalid_argument("surface grid must be positive");
  std::vector<double> fhat(static_cast<std::size_t>(grid)),
      ghat(static_cast<std::size_t>(grid)), ft(static_cast<std::size_t>(grid)),
      gt(static_cast<std::size_t>(grid)), ts(static_cast<std::size_t>(grid));
  for (std::int64_t i = 0; i < grid; ++i) {
    ts[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(grid);
    fhat[i] = component_value(fit, 0, ts[i]);
    ghat[i] = component_value(fit, 1, ts[i]);
    ft[i] = f_true(ts[i]);
    gt[i] = g_true(ts[i]);
  }
  std::vector<SurfacePoint> points;
  points.reserve(static_cast<std::size_t>(grid * grid));
  for (std::int64_t i = 0; i < grid; ++i) {
    for (std::int64_t j = 0; j < grid; ++j) {
      SurfacePoint p;
      p.t = ts[i];
      p.x = ts[j];
      p.u_true = beta0 + ft[i] + gt[j];
      p.u_est = fit.intercept + fhat[i] + ghat[j];
      points.push_back(p);
    }
  }
  return points;
}

/// Refit one replicate and tabulate its estimated vs true surface, for the
/// figure-style exports.
inline std::vector<SurfacePoint> replicate_surface(const SimulationConfig& config,
                                                   const SimContext& ctx,
                                                   const GridCell& cell,
                                                   std::int64_t rep_index,
                                                   std::int64_t grid) {
  auto rep = detail::run_replicate_fit(config, ctx, cell, rep_index);
  return export_surface(rep.fit, TestFunctionSuite::parabola,
                        TestFunctionSuite::coswave, rep.beta0, grid);
}

inline std::string surface_to_csv(const std::vector<SurfacePoint>& points) {
  std::string out = "t,x,u_true,u_est\n";
  for (const auto& p : points) {
    out += format_double(p.t) + "," + format_double(p.x) + "," +
           format_double(p.u_true) + "," + format_double(p.u_est) + "\n";
  }
  return out;
}

inline std::string report_to_csv(const MiseReport& report) {
  std::string out = "sigma_id,snr_db,alpha,mean_mise,se,n_reps\n";
  for (const auto& c : report.cells) {
    out += c.sigma_id + "," + format_double(c.snr_db) + "," +
           format_double(c.alpha) + "," + format_double(c.mean_mise) + "," +
           format_double(c.se) + "," + std::to_string(c.n_reps) + "\n";
  }
  return out;
}

/// Parse a SimulationConfig from the minimal TOML table form.
inline SimulationConfig config_from_toml(const toml::Table& table) {
  SimulationConfig config;
  auto require_array = [](const toml::Value& v) -> const std::vector<toml::Value>& {
    return v.as_array();
  };
  for (const auto& [key, value] : table) {
    if (key == "n") config.n = value.as_int();
    else if (key == "reps") config.reps = value.as_int();
    else if (key == "seed") config.seed = static_cast<std::uint64_t>(value.as_int());
    else if (key == "levels") config.levels = static_cast<int>(value.as_int());
    else if (key == "vanishing_moments")
      config.vanishing_moments = static_cast<int>(value.as_int());
    else if (key == "table_depth") config.table_depth = static_cast<int>(value.as_int());
    else if (key == "eval_grid") config.eval_grid = value.as_int();
    else if (key == "surface_grid") config.surface_grid = value.as_int();
    else if (key == "gamma") config.gamma = value.as_double();
    else if (key == "gamma1") config.gamma1 = value.as_double();
    else if (key == "gamma_scale") config.gamma_scale = value.as_double();
    else if (key == "alphas") {
      config.alphas.clear();
      for (const auto& v : require_array(value)) config.alphas.push_back(v.as_double());
    } else if (key == "snrs_db") {
      config.snrs_db.clear();
      for (const auto& v : require_array(value)) config.snrs_db.push_back(v.as_double());
    } else if (key == "sigma_fields") {
      config.sigma_fields.clear();
      for (const auto& v : require_array(value))
        config.sigma_fields.push_back(v.as_string());
    } else if (key == "export_surfaces") {
      config.export_surfaces.clear();
      for (const auto& v : require_array(value))
        config.export_surfaces.push_back(v.as_string());
    } else if (key == "regime") {
      const auto& s = value.as_string();
      if (s == "homoskedastic") config.regime = ThresholdKind::homoskedastic;
      else if (s == "heteroskedastic") config.regime = ThresholdKind::heteroskedastic;
      else throw ConfigError("unknown regime '" + s + "'");
    } else if (key == "snr_convention") {
      const auto& s = value.as_string();
      if (s == "amplitude") config.snr_convention = SnrConvention::amplitude_db;
      else if (s == "power") config.snr_convention = SnrConvention::power_db;
      else throw ConfigError("unknown snr_convention '" + s + "'");
    } else if (key == "noise_method") {
      const auto& s = value.as_string();
      if (s == "circulant_embedding")
        config.noise_method = NoiseMethod::circulant_embedding;
      else if (s == "ma_truncation") config.noise_method = NoiseMethod::ma_truncation;
      else throw ConfigError("unknown noise_method '" + s + "'");
    } else {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  config.validate();
  return config;
}

}  // namespace longwave

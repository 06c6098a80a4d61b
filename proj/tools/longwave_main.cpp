// longwave: adaptive wavelet estimation for additive regression under
// long-memory noise. Subcommands: noise, fit, table1, basis-check.
#include <atomic>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "longwave/csv.hpp"
#include "longwave/errors.hpp"
#include "longwave/estimator.hpp"
#include "longwave/longmem.hpp"
#include "longwave/serialize.hpp"
#include "longwave/simulate.hpp"
#include "longwave/version.hpp"
#include "longwave/wavelet.hpp"

namespace fs = std::filesystem;
using namespace longwave;

namespace {

std::atomic<bool> g_interrupted{false};

void handle_sigint(int) { g_interrupted.store(true); }

int resolve_threads(int flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("LONGWAVE_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

nlohmann::ordered_json provenance(std::uint64_t seed, const std::string& config_hash) {
  return {{"version", kVersion}, {"seed", seed}, {"config_hash", config_hash}};
}

int cmd_noise(std::int64_t n, double alpha, std::uint64_t seed,
              const std::string& method, double sd, std::int64_t ma_length,
              const std::string& out_path) {
  LongMemorySpec spec;
  spec.alpha = alpha;
  spec.innovation_sd = sd;
  spec.ma_length = ma_length;
  if (method == "circulant_embedding") spec.method = NoiseMethod::circulant_embedding;
  else if (method == "ma_truncation") spec.method = NoiseMethod::ma_truncation;
  else throw ConfigError("unknown noise method '" + method + "'");
  spec.validate();
  if (n < 1) throw ConfigError("n must be positive");

  const auto noise = generate_noise(spec, n, seed);
  std::string csv = "epsilon\n";
  for (double e : noise.values) csv += format_double(e) + "\n";
  write_text_file(out_path, csv);

  // realized partial-sum variance law over dyadic sizes up to n
  nlohmann::ordered_json slope_json = nullptr;
  std::vector<std::int64_t> sizes;
  for (std::int64_t s = 32; s <= n && sizes.size() < 6; s <<= 1) sizes.push_back(s);
  if (sizes.size() >= 3) {
    const double slope =
        partial_sum_variance_slope(spec, sizes, 200, derive_seed(seed, {17}));
    slope_json = slope;
  }
  nlohmann::ordered_json side;
  side["format"] = "longwave-noise";
  side["alpha"] = spec.alpha;
  side["d"] = spec.d();
  side["innovation_sd"] = spec.innovation_sd;
  side["method_requested"] = to_string(spec.method);
  side["method_used"] = to_string(noise.method_used);
  side["circulant_fallback"] = noise.circulant_fallback;
  side["n"] = n;
  side["partial_sum_variance_slope"] = slope_json;
  side["expected_slope"] = 2.0 - spec.alpha;
  side["provenance"] = provenance(
      seed, fnv1a_hex("noise;" + format_double(alpha) + ";" + std::to_string(n)));
  write_text_file(out_path + ".json", side.dump(2) + "\n");
  if (noise.circulant_fallback)
    std::cerr << "warning: circulant embedding not nonnegative definite; "
                 "fell back to MA truncation\n";
  return 0;
}

int cmd_fit(const std::string& data_path, const std::string& out_dir, int levels,
            int vm, int depth, const std::string& regime_name, double gamma,
            double gamma1, double gamma_scale, double alpha,
            const std::string& sigma_id) {
  const CsvTable table = read_csv_file(data_path);
  if (table.header.size() < 2 || table.header.back() != "y")
    throw DataError(data_path +
                    ": schema error: expected columns t1..tr followed by a final "
                    "'y' column, got " +
                    std::to_string(table.header.size()) + " columns with last '" +
                    (table.header.empty() ? "" : table.header.back()) + "'");
  const std::int64_t r = static_cast<std::int64_t>(table.header.size()) - 1;
  const std::int64_t n = static_cast<std::int64_t>(table.rows.size());
  if (n < 8) throw DataError(data_path + ": need at least 8 rows");

  Dataset data;
  data.r = r;
  data.predictors.resize(static_cast<std::size_t>(n * r));
  data.responses.resize(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t q = 0; q < r; ++q) data.predictors[i * r + q] = table.rows[i][q];
    data.responses[i] = table.rows[i][r];
  }
  for (std::int64_t q = 0; q < r; ++q) data.densities.push_back(DesignDensity::uniform());
  data.validate();

  auto basis = std::make_shared<const WaveletBasis>(build_basis(vm, depth));
  ThresholdRegime regime;
  regime.gamma = gamma;
  regime.gamma1 = gamma1;
  regime.gamma_scale = gamma_scale;
  if (regime_name == "homoskedastic") {
    regime.kind = ThresholdKind::homoskedastic;
  } else if (regime_name == "heteroskedastic") {
    regime.kind = ThresholdKind::heteroskedastic;
    if (alpha <= 0.0)
      throw ConfigError("heteroskedastic regime requires --alpha in (0,1]");
    regime.alpha = alpha;
    if (r != 2)
      throw ConfigError("heteroskedastic regime via the CLI needs r = 2 data");
    const auto& field = sigma_field(sigma_id);
    auto sigma_fn = [field](std::span<const double> p) {
      return field.evaluator(p[0], p[1]);
    };
    const int max_level = levels > 0 ? levels : select_max_level(n);
    regime.sigma_psi_integral_zero =
        make_sigma_zero_predicate(sigma_fn, *basis, r, max_level);
  } else {
    throw ConfigError("unknown regime '" + regime_name + "'");
  }

  FitOptions options;
  options.levels_override = levels;
  const AdditiveFit fit = fit_additive(data, basis, regime, options);

  fs::create_directories(out_dir);
  auto doc = fit_to_json(fit);
  doc["provenance"]["data_file"] = data_path;
  write_text_file((fs::path(out_dir) / "fit.json").string(), doc.dump(2) + "\n");

  std::string pred_csv;
  for (std::int64_t q = 0; q < r; ++q) pred_csv += "t" + std::to_string(q + 1) + ",";
  pred_csv += "y,y_hat\n";
  std::vector<double> point(static_cast<std::size_t>(r));
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t q = 0; q < r; ++q) {
      point[q] = data.predictor(i, q);
      pred_csv += format_double(point[q]) + ",";
    }
    pred_csv += format_double(data.responses[i]) + "," +
                format_double(predict(fit, point)) + "\n";
  }
  write_text_file((fs::path(out_dir) / "predictions.csv").string(), pred_csv);
  return 0;
}

int cmd_table1(const std::string& config_path, const std::string& out_dir,
               std::int64_t seed_override, std::int64_t reps_override,
               int levels_override, int threads) {
  SimulationConfig config;
  if (!config_path.empty()) config = config_from_file(config_path);
  if (seed_override >= 0) config.seed = static_cast<std::uint64_t>(seed_override);
  if (reps_override > 0) config.reps = reps_override;
  if (levels_override > 0) config.levels = levels_override;
  config.validate();

  fs::create_directories(out_dir);
  const fs::path csv_path = fs::path(out_dir) / "mise_report.csv";
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) throw DataError("cannot open '" + csv_path.string() + "' for writing");
  csv << "sigma_id,snr_db,alpha,mean_mise,se,n_reps\n";
  csv.flush();

  std::signal(SIGINT, handle_sigint);
  const MiseReport report =
      run_grid(config, threads, &g_interrupted, [&](const MiseCell& cell) {
        csv << cell.sigma_id << "," << format_double(cell.snr_db) << ","
            << format_double(cell.alpha) << "," << format_double(cell.mean_mise)
            << "," << format_double(cell.se) << "," << cell.n_reps << "\n";
        csv.flush();
      });
  csv.close();

  auto doc = report_to_json(report);
  doc["provenance"]["config_hash"] = config.config_hash();
  write_text_file((fs::path(out_dir) / "mise_report.json").string(),
                  doc.dump(2) + "\n");

  if (report.complete) {
    const SimContext ctx = make_sim_context(config);
    for (const auto& sigma_id : config.export_surfaces) {
      bool active = false;
      for (const auto& id : config.sigma_fields) active = active || id == sigma_id;
      if (!active) continue;
      for (double snr : config.snrs_db) {
        for (double alpha : config.alphas) {
          const auto points = replicate_surface(config, ctx, {sigma_id, snr, alpha},
                                                0, config.surface_grid);
          const std::string name = "surface_" + sigma_id + "_snr" +
                                   format_double(snr) + "_alpha" +
                                   format_double(alpha) + ".csv";
          write_text_file((fs::path(out_dir) / name).string(),
                          surface_to_csv(points));
        }
      }
    }
  }
  if (!report.complete) {
    std::cerr << "interrupted: partial results written to " << out_dir << "\n";
    return 130;
  }
  return 0;
}

int cmd_basis_check(int vm, int depth) {
  const auto basis = build_basis(vm, depth);
  const auto diag = basis_diagnostics(basis);
  const bool haar = vm == 1;
  const double tol_table = haar ? 1e-10 : 1e-6;
  const double tol_gram = haar ? 1e-10 : 1e-4;

  bool ok = true;
  auto check = [&](const std::string& name, double residual, double tol) {
    const bool pass = std::abs(residual) < tol;
    ok = ok && pass;
    std::printf("%-34s %12.3e  (tol %.0e)  %s\n", name.c_str(), residual, tol,
                pass ? "PASS" : "FAIL");
  };
  check("integral of phi minus 1", diag.integral_phi_minus_one, tol_table);
  check("integral of psi", diag.integral_psi, tol_table);
  check("psi L2 norm minus 1", diag.psi_l2_minus_one, haar ? 1e-10 : 1e-4);
  for (std::size_t p = 0; p < diag.psi_moments.size(); ++p)
    check("psi moment p=" + std::to_string(p), diag.psi_moments[p], tol_table);
  check("two-scale residual (sup)", diag.two_scale_residual, tol_table);
  check("partition of unity (sup)", diag.partition_of_unity_residual, tol_table);

  const int max_level = 4;
  const std::int64_t grid = std::int64_t{1} << std::min(depth - 1, 16);
  const auto gram = gram_matrix(basis, max_level, grid);
  double gram_residual = 0.0;
  for (std::size_t a = 0; a < gram.size(); ++a)
    for (std::size_t b = 0; b < gram.size(); ++b)
      gram_residual = std::max(gram_residual,
                               std::abs(gram[a][b] - (a == b ? 1.0 : 0.0)));
  check("gram matrix vs identity (lvl<4)", gram_residual, tol_gram);

  std::printf("basis: daubechies vm=%d depth=%d support=[0,%d]  %s\n", vm, depth,
              basis.support_length, ok ? "ALL CHECKS PASSED" : "CHECKS FAILED");
  if (!ok) throw NumericalError("basis diagnostics exceeded tolerances");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adaptive wavelet estimation for additive regression under "
               "long-memory noise"};
  app.set_version_flag("--version", std::string("longwave ") + kVersion);
  app.require_subcommand(1);

  int threads_flag = 0;
  app.add_option("--threads", threads_flag,
                 "worker threads (default: LONGWAVE_THREADS or hardware)");

  auto* noise = app.add_subcommand("noise", "generate a long-memory noise draw");
  std::int64_t noise_n = 4096;
  double noise_alpha = 0.8;
  std::int64_t noise_seed = 1;
  std::string noise_method = "circulant_embedding";
  double noise_sd = 1.0;
  std::int64_t noise_ma_length = std::int64_t{1} << 16;
  std::string noise_out = "noise.csv";
  noise->add_option("--n", noise_n, "sequence length");
  noise->add_option("--alpha", noise_alpha, "long-memory parameter in (0,1]");
  noise->add_option("--seed", noise_seed, "random seed");
  noise->add_option("--method", noise_method,
                    "circulant_embedding (exact) or ma_truncation");
  noise->add_option("--sd", noise_sd, "innovation standard deviation");
  noise->add_option("--ma-length", noise_ma_length, "MA truncation length");
  noise->add_option("--out", noise_out, "output CSV path (JSON sidecar alongside)");

  auto* fit = app.add_subcommand("fit", "fit the additive model to a CSV dataset");
  std::string fit_data, fit_out = "longwave_fit";
  int fit_levels = 0, fit_vm = 3, fit_depth = 14;
  std::string fit_regime = "homoskedastic", fit_sigma = "sigma1";
  double fit_gamma = 0.0, fit_gamma1 = 0.0, fit_gamma_scale = 0.35, fit_alpha = 0.0;
  fit->add_option("--data", fit_data, "input CSV with header t1..tr,y")->required();
  fit->add_option("--out", fit_out, "output directory");
  fit->add_option("--levels", fit_levels, "finest resolution level J (0: N/ln N rule)");
  fit->add_option("--vm", fit_vm, "Daubechies vanishing moments (1..10)");
  fit->add_option("--depth", fit_depth, "basis table depth (8..20)");
  fit->add_option("--regime", fit_regime, "homoskedastic or heteroskedastic");
  fit->add_option("--gamma", fit_gamma, "threshold constant (0: MAD pilot)");
  fit->add_option("--gamma1", fit_gamma1,
                  "long-memory threshold constant (0: gamma*sqrt(ln N))");
  fit->add_option("--gamma-scale", fit_gamma_scale, "MAD pilot scale factor");
  fit->add_option("--alpha", fit_alpha, "long-memory parameter (heteroskedastic)");
  fit->add_option("--sigma", fit_sigma,
                  "named sigma field for the heteroskedastic predicate");

  auto* table1 = app.add_subcommand("table1", "run the Monte Carlo MISE grid");
  std::string t1_config, t1_out = "longwave_table1";
  std::int64_t t1_seed = -1, t1_reps = 0;
  int t1_levels = 0;
  table1->add_option("--config", t1_config, "TOML or JSON config file");
  table1->add_option("--out", t1_out, "output directory");
  table1->add_option("--seed", t1_seed, "master seed override");
  table1->add_option("--reps", t1_reps, "replicates per cell override");
  table1->add_option("--levels", t1_levels, "finest resolution level override");

  auto* basis_check = app.add_subcommand("basis-check", "wavelet invariant suite");
  int bc_vm = 3, bc_depth = 14;
  basis_check->add_option("--vm", bc_vm, "vanishing moments");
  basis_check->add_option("--depth", bc_depth, "table depth");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*noise)
      return cmd_noise(noise_n, noise_alpha, static_cast<std::uint64_t>(noise_seed),
                       noise_method, noise_sd, noise_ma_length, noise_out);
    if (*fit)
      return cmd_fit(fit_data, fit_out, fit_levels, fit_vm, fit_depth, fit_regime,
                     fit_gamma, fit_gamma1, fit_gamma_scale, fit_alpha, fit_sigma);
    if (*table1)
      return cmd_table1(t1_config, t1_out, t1_seed, t1_reps, t1_levels,
                        resolve_threads(threads_flag));
    if (*basis_check) return cmd_basis_check(bc_vm, bc_depth);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "longwave/errors.hpp"
#include "longwave/parallel.hpp"
#include "longwave/wavelet.hpp"

namespace longwave {

namespace detail {

/// Sum in a canonical order (sorted by value) with Neumaier compensation.
/// Identical multisets of addends give bit-identical sums, so estimates do
/// not depend on observation order or thread schedule.
inline double deterministic_sum(std::vector<double>& terms) {
  std::sort(terms.begin(), terms.end());
  double sum = 0.0, comp = 0.0;
  for (double x : terms) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      comp += (sum - t) + x;
    else
      comp += (x - t) + sum;
    sum = t;
  }
  return sum + comp;
}

inline double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  const std::size_t mid = n / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double hi = v[mid];
  if (n % 2 == 1) return hi;
  std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
  return 0.5 * (v[mid - 1] + hi);
}

}  // namespace detail

/// Known marginal design density on [0,1), uniformly bounded away from 0
/// and infinity. Bounds are enforced on every access.
struct DesignDensity {
  enum class Kind { uniform, user_supplied };
  Kind kind = Kind::uniform;
  std::function<double(double)> evaluator;
  double lower_bound = 1.0;
  double upper_bound = 1.0;

  static DesignDensity uniform() {
    DesignDensity d;
    d.kind = Kind::uniform;
    d.evaluator = [](double) { return 1.0; };
    d.lower_bound = d.upper_bound = 1.0;
    return d;
  }

  static DesignDensity user(std::function<double(double)> fn, double lower,
                            double upper) {
    if (!(lower > 0.0) || !(upper >= lower))
      throw ConfigError("density bounds must satisfy 0 < lower <= upper");
    DesignDensity d;
    d.kind = Kind::user_supplied;
    d.evaluator = std::move(fn);
    d.lower_bound = lower;
    d.upper_bound = upper;
    return d;
  }

  double value_at(double t) const {
    const double v = evaluator(t);
    if (v < lower_bound - 1e-12 || v > upper_bound + 1e-12)
      throw DataError("design density value " + std::to_string(v) +
                      " violates its declared bounds at t=" + std::to_string(t));
    return v;
  }
};

/// Observations (t_1..t_r, y) with known marginal densities.
struct Dataset {
  std::int64_t r = 0;
  std::vector<double> predictors;  // row-major, N x r
  std::vector<double> responses;
  std::vector<DesignDensity> densities;

  std::int64_t size() const { return static_cast<std::int64_t>(responses.size()); }
  double predictor(std::int64_t i, std::int64_t m) const {
    return predictors[static_cast<std::size_t>(i * r + m)];
  }

  void validate() const {
    if (r < 1) throw DataError("dataset needs at least one predictor component");
    if (size() < 2) throw DataError("dataset needs at least two observations");
    if (predictors.size() != static_cast<std::size_t>(size() * r))
      throw DataError("predictor array shape mismatch");
    if (densities.size() != static_cast<std::size_t>(r))
      throw DataError("need one density per predictor component");
    for (double t : predictors)
      if (!(t >= 0.0 && t < 1.0))
        throw DataError("predictors must lie in [0,1)");
  }

  /// y_i / prod_q h_q(t_qi), the common estimator weight.
  double weight(std::int64_t i) const {
    double dens = 1.0;
    for (std::int64_t q = 0; q < r; ++q)
      dens *= densities[static_cast<std::size_t>(q)].value_at(predictor(i, q));
    return responses[static_cast<std::size_t>(i)] / dens;
  }
};

inline Dataset make_bivariate_dataset(std::vector<double> t, std::vector<double> x,
                                      std::vector<double> y, DesignDensity h1,
                                      DesignDensity h2) {
  if (t.size() != y.size() || x.size() != y.size())
    throw DataError("bivariate dataset columns must have equal length");
  Dataset data;
  data.r = 2;
  data.responses = std::move(y);
  data.predictors.resize(2 * data.responses.size());
  for (std::size_t i = 0; i < data.responses.size(); ++i) {
    data.predictors[2 * i] = t[i];
    data.predictors[2 * i + 1] = x[i];
  }
  data.densities = {std::move(h1), std::move(h2)};
  return data;
}

/// Highest resolution level: 2^J ~ N / ln N, i.e. J = floor(log2(N/ln N)),
/// clamped to at least 1.
inline int select_max_level(std::int64_t n) {
  if (n < 8) throw std::invalid_argument("sample size must be at least 8");
  const double j = std::floor(std::log2(static_cast<double>(n) /
                                        std::log(static_cast<double>(n))));
  return std::max(1, static_cast<int>(j));
}

/// Unbiased wavelet coefficient estimator for component m:
///   (1/N) sum_i [ y_i / prod_q h_q(t_qi) ] psi^per_{j,k}(t_mi).
inline double estimate_wavelet_coeff(const Dataset& data, const WaveletBasis& basis,
                                     std::int64_t m, int j, std::int64_t k) {
  const std::int64_t n = data.size();
  std::vector<double> terms(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i)
    terms[i] = data.weight(i) * eval_psi(basis, j, k, data.predictor(i, m));
  return detail::deterministic_sum(terms) / static_cast<double>(n);
}

/// Unbiased scaling coefficient estimator for component m:
///   (1/N) sum_i [ y_i / prod_q h_q(t_qi) ] (phi^per_{j,k}(t_mi) - 2^{-j/2}).
/// The 2^{-j/2} correction removes the intercept leakage, since
/// int phi^per_{j,k} = 2^{-j/2}.
inline double estimate_scaling_coeff(const Dataset& data, const WaveletBasis& basis,
                                     std::int64_t m, int j, std::int64_t k) {
  const std::int64_t n = data.size();
  const double corr = std::pow(2.0, -0.5 * j);
  std::vector<double> terms(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i)
    terms[i] = data.weight(i) * (eval_phi(basis, j, k, data.predictor(i, m)) - corr);
  return detail::deterministic_sum(terms) / static_cast<double>(n);
}

/// Unbiased intercept estimator (1/N) sum_i y_i / prod_q h_q(t_qi).
inline double estimate_intercept(const Dataset& data) {
  const std::int64_t n = data.size();
  std::vector<double> terms(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) terms[i] = data.weight(i);
  return detail::deterministic_sum(terms) / static_cast<double>(n);
}

enum class ThresholdKind { homoskedastic, heteroskedastic };

/// Level thresholds. gamma/gamma1 equal to zero mean "resolve at fit time":
/// gamma from the MAD pilot estimate of the finest-level coefficients scaled
/// by gamma_scale, gamma1 as gamma * sqrt(ln N).
struct ThresholdRegime {
  ThresholdKind kind = ThresholdKind::homoskedastic;
  double gamma = 0.0;
  double gamma1 = 0.0;
  double gamma_scale = 1.0;
  std::optional<double> alpha;
  /// true iff the integral of psi_{j,k}(t_m) sigma(t) over [0,1]^r vanishes
  std::function<bool(std::int64_t m, int j, std::int64_t k)> sigma_psi_integral_zero;

  void validate() const {
    if (kind == ThresholdKind::heteroskedastic) {
      if (!alpha) throw ConfigError("heteroskedastic thresholds require alpha");
      if (!(*alpha > 0.0 && *alpha <= 1.0))
        throw ConfigError("alpha must lie in (0,1]");
      if (!sigma_psi_integral_zero)
        throw ConfigError("heteroskedastic thresholds require the zero-integral predicate");
    }
    if (gamma < 0.0 || gamma1 < 0.0 || gamma_scale <= 0.0)
      throw ConfigError("threshold constants must be nonnegative");
  }
};

/// lambda(j): gamma ln(N)/sqrt(N) in the homoskedastic regime, and in the
/// heteroskedastic regime the same when the sigma-psi integral vanishes,
/// else gamma1 sqrt(ln(N)/N^alpha). gamma/gamma1 must be resolved (> 0).
inline double compute_threshold(const ThresholdRegime& regime, std::int64_t n,
                                std::int64_t m, int j, std::int64_t k) {
  regime.validate();
  const double logn = std::log(static_cast<double>(n));
  const double base = regime.gamma * logn / std::sqrt(static_cast<double>(n));
  if (regime.kind == ThresholdKind::homoskedastic) return base;
  if (regime.sigma_psi_integral_zero(m, j, k)) return base;
  return regime.gamma1 *
         std::sqrt(logn / std::pow(static_cast<double>(n), *regime.alpha));
}

/// Quadrature decision of int_{[0,1]^r} psi^per_{j,k}(t_m) sigma(t) dt = 0.
/// The integral is the 1-D integral of psi against the sigma marginal
/// S_m(t) = int sigma dt_{-m}; |I| < zero_tol * sup|sigma| counts as zero.
inline bool sigma_psi_integral_is_zero(
    const std::function<double(std::span<const double>)>& sigma,
    const WaveletBasis& basis, std::int64_t r, std::int64_t m, int j,
    std::int64_t k, std::int64_t grid, double zero_tol = 1e-8) {
  if (m < 0 || m >= r) throw std::invalid_argument("component index out of range");
  // marginal of sigma over the other coordinates, midpoint tensor rule
  const std::int64_t inner = r == 1 ? 1 : (r == 2 ? 1024 : 64);
  std::vector<double> point(static_cast<std::size_t>(r));
  std::vector<double> marginal(static_cast<std::size_t>(grid));
  double sup = 0.0;
  std::vector<std::int64_t> idx(static_cast<std::size_t>(r), 0);
  const double hin = 1.0 / static_cast<double>(inner);
  for (std::int64_t g = 0; g < grid; ++g) {
    const double t = (static_cast<double>(g) + 0.5) / static_cast<double>(grid);
    point[static_cast<std::size_t>(m)] = t;
    double s = 0.0;
    std::fill(idx.begin(), idx.end(), 0);
    for (;;) {  // odometer over the r-1 inner coordinates
      for (std::int64_t q = 0; q < r; ++q)
        if (q != m)
          point[static_cast<std::size_t>(q)] =
              (static_cast<double>(idx[static_cast<std::size_t>(q)]) + 0.5) * hin;
      const double v = sigma(point);
      sup = std::max(sup, std::abs(v));
      s += v;
      std::int64_t q = 0;
      for (; q < r; ++q) {
        if (q == m) continue;
        if (++idx[static_cast<std::size_t>(q)] < inner) break;
        idx[static_cast<std::size_t>(q)] = 0;
      }
      if (q == r) break;
    }
    double weight = 1.0;
    for (std::int64_t q = 0; q < r; ++q)
      if (q != m) weight *= hin;
    marginal[static_cast<std::size_t>(g)] = s * weight;
  }
  double integral = 0.0;
  for (std::int64_t g = 0; g < grid; ++g) {
    const double t = (static_cast<double>(g) + 0.5) / static_cast<double>(grid);
    integral += eval_psi(basis, j, k, t) * marginal[static_cast<std::size_t>(g)];
  }
  integral /= static_cast<double>(grid);
  return std::abs(integral) < zero_tol * std::max(sup, 1e-300);
}

/// Precompute the zero-integral predicate for every (m, j < max_level, k).
/// The returned callable is immutable and safe to share across threads.
inline std::function<bool(std::int64_t, int, std::int64_t)>
make_sigma_zero_predicate(std::function<double(std::span<const double>)> sigma,
                          const WaveletBasis& basis, std::int64_t r,
                          int max_level, std::int64_t grid = 1 << 16,
                          double zero_tol = 1e-8) {
  auto table = std::make_shared<std::vector<std::vector<char>>>();
  table->resize(static_cast<std::size_t>(r));
  for (std::int64_t m = 0; m < r; ++m) {
    auto& flat = (*table)[static_cast<std::size_t>(m)];
    flat.resize(std::size_t{1} << max_level);
    for (int j = 0; j < max_level; ++j)
      for (std::int64_t k = 0; k < (std::int64_t{1} << j); ++k)
        flat[static_cast<std::size_t>((std::int64_t{1} << j) - 1 + k)] =
            sigma_psi_integral_is_zero(sigma, basis, r, m, j, k, grid, zero_tol)
                ? 1
                : 0;
  }
  return [table, max_level](std::int64_t m, int j, std::int64_t k) {
    if (j >= max_level)
      throw std::invalid_argument("predicate queried beyond its precomputed levels");
    return (*table)[static_cast<std::size_t>(m)]
                   [static_cast<std::size_t>((std::int64_t{1} << j) - 1 + k)] != 0;
  };
}

struct CoeffEntry {
  int j = 0;
  std::int64_t k = 0;
  double value = 0.0;
  double threshold = 0.0;
  bool kept = false;
};

/// Thresholded expansion of one additive component.
struct CoefficientSet {
  std::int64_t component = 0;
  int max_level = 0;           // levels 0 .. max_level-1
  std::vector<CoeffEntry> entries;
  double theta00 = 0.0;        // scaling coefficient at level 0
  double centering = 0.0;      // quadrature mean subtracted at reconstruction
  double gamma = 0.0;          // resolved threshold constants
  double gamma1 = 0.0;
};

struct FitMeta {
  std::int64_t n = 0;
  std::int64_t r = 0;
  ThresholdKind regime = ThresholdKind::homoskedastic;
  std::optional<double> alpha;
  std::vector<int> levels;
  int vanishing_moments = 0;
  int table_depth = 0;
};

struct AdditiveFit {
  double intercept = 0.0;
  std::vector<CoefficientSet> components;
  std::shared_ptr<const WaveletBasis> basis;
  FitMeta meta;
};

struct FitOptions {
  int levels_override = 0;   // 0: select_max_level(N)
  std::int64_t center_grid = 4096;
  int threads = 1;
};

namespace detail {

/// Reconstructed component value before centering.
inline double raw_component_value(const WaveletBasis& basis,
                                  const CoefficientSet& comp, double t) {
  double v = comp.theta00 * eval_phi(basis, 0, 0, t);
  for (const auto& e : comp.entries)
    if (e.kept) v += e.value * eval_psi(basis, e.j, e.k, t);
  return v;
}

}  // namespace detail

/// Full additive hard-thresholding fit: per component, all wavelet
/// coefficients up to the highest resolution level, kept when they clear
/// the level threshold, plus the level-0 scaling coefficient; the
/// intercept; and a quadrature re-centering of every component so the
/// reconstructions integrate to zero.
inline AdditiveFit fit_additive(const Dataset& data,
                                std::shared_ptr<const WaveletBasis> basis,
                                ThresholdRegime regime, FitOptions options = {}) {
  data.validate();
  regime.validate();
  const std::int64_t n = data.size();
  if (n < 8) throw DataError("fit requires at least 8 observations");
  if (options.levels_override < 0 || options.levels_override > 20)
    throw ConfigError("levels override out of range");

  AdditiveFit fit;
  fit.basis = basis;
  fit.meta.n = n;
  fit.meta.r = data.r;
  fit.meta.regime = regime.kind;
  fit.meta.alpha = regime.alpha;
  fit.meta.vanishing_moments = basis->vanishing_moments;
  fit.meta.table_depth = basis->table_depth;
  const double logn = std::log(static_cast<double>(n));

  // weights are shared by every coefficient of the fit
  std::vector<double> weights(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) weights[i] = data.weight(i);

  fit.components.resize(static_cast<std::size_t>(data.r));
  for (std::int64_t m = 0; m < data.r; ++m) {
    auto& comp = fit.components[static_cast<std::size_t>(m)];
    comp.component = m;
    comp.max_level =
        options.levels_override > 0 ? options.levels_override : select_max_level(n);
    fit.meta.levels.push_back(comp.max_level);

    const std::int64_t coeff_count = (std::int64_t{1} << comp.max_level) - 1;
    comp.entries.resize(static_cast<std::size_t>(coeff_count));
    parallel_for(coeff_count, options.threads, [&](std::int64_t idx) {
      // idx -> (j, k) in level order
      int j = 0;
      while ((std::int64_t{2} << j) - 1 <= idx) ++j;
      const std::int64_t k = idx - ((std::int64_t{1} << j) - 1);
      std::vector<double> terms(static_cast<std::size_t>(n));
      for (std::int64_t i = 0; i < n; ++i)
        terms[i] = weights[i] * eval_psi(*basis, j, k, data.predictor(i, m));
      auto& e = comp.entries[static_cast<std::size_t>(idx)];
      e.j = j;
      e.k = k;
      e.value = detail::deterministic_sum(terms) / static_cast<double>(n);
    });

    {
      std::vector<double> terms(static_cast<std::size_t>(n));
      for (std::int64_t i = 0; i < n; ++i)
        terms[i] = weights[i] * (eval_phi(*basis, 0, 0, data.predictor(i, m)) - 1.0);
      comp.theta00 = detail::deterministic_sum(terms) / static_cast<double>(n);
    }

    // resolve threshold constants: MAD pilot on the finest level
    comp.gamma = regime.gamma;
    if (comp.gamma == 0.0) {
      std::vector<double> finest;
      for (const auto& e : comp.entries)
        if (e.j == comp.max_level - 1) finest.push_back(e.value);
      double sigma_mad = 0.0;
      if (finest.size() >= 2) {
        const double med = detail::median_of(finest);
        std::vector<double> dev;
        dev.reserve(finest.size());
        for (double v : finest) dev.push_back(std::abs(v - med));
        sigma_mad = 1.4826 * detail::median_of(dev) * std::sqrt(static_cast<double>(n));
      }
      comp.gamma = regime.gamma_scale * sigma_mad;
    }
    comp.gamma1 = regime.gamma1 == 0.0 ? comp.gamma * std::sqrt(logn) : regime.gamma1;

    ThresholdRegime resolved = regime;
    resolved.gamma = comp.gamma;
    resolved.gamma1 = comp.gamma1;
    for (auto& e : comp.entries) {
      e.threshold = compute_threshold(resolved, n, m, e.j, e.k);
      e.kept = std::abs(e.value) > e.threshold;
    }

    // center: subtract the quadrature mean of the reconstruction
    const std::int64_t g = options.center_grid;
    double mean = 0.0;
    for (std::int64_t i = 0; i < g; ++i) {
      const double t = (static_cast<double>(i) + 0.5) / static_cast<double>(g);
      mean += detail::raw_component_value(*basis, comp, t);
    }
    comp.centering = mean / static_cast<double>(g);
  }

  fit.intercept = estimate_intercept(data);
  return fit;
}

/// Evaluate one centered component at t.
inline double component_value(const AdditiveFit& fit, std::int64_t m, double t) {
  const auto& comp = fit.components[static_cast<std::size_t>(m)];
  return detail::raw_component_value(*fit.basis, comp, t) - comp.centering;
}

/// Predicted regression surface at an r-dimensional point in [0,1)^r.
inline double predict(const AdditiveFit& fit, std::span<const double> point) {
  if (point.size() != fit.components.size())
    throw std::invalid_argument("prediction point has wrong dimension");
  for (double t : point)
    if (!(t >= 0.0 && t < 1.0))
      throw std::invalid_argument("prediction point outside [0,1)^r");
  double v = fit.intercept;
  for (std::size_t m = 0; m < fit.components.size(); ++m)
    v += component_value(fit, static_cast<std::int64_t>(m), point[m]);
  return v;
}

}  // namespace longwave

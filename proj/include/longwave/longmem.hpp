#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "longwave/errors.hpp"
#include "longwave/rng.hpp"

namespace longwave {

enum class NoiseMethod { circulant_embedding, ma_truncation };

inline const char* to_string(NoiseMethod m) {
  return m == NoiseMethod::circulant_embedding ? "circulant_embedding"
                                               : "ma_truncation";
}

/// Stationary Gaussian long-memory noise law. alpha is the long-memory
/// parameter with partial-sum variance growing like N^(2-alpha);
/// alpha = 1 is the i.i.d. boundary case. The fractional differencing
/// parameter is derived, never stored: 2d = 1 - alpha.
struct LongMemorySpec {
  double alpha = 1.0;
  double innovation_sd = 1.0;
  NoiseMethod method = NoiseMethod::circulant_embedding;
  std::int64_t ma_length = std::int64_t{1} << 16;

  double d() const { return (1.0 - alpha) / 2.0; }

  void validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0))
      throw ConfigError("long-memory alpha must lie in (0,1]");
    if (!(innovation_sd > 0.0)) throw ConfigError("innovation_sd must be positive");
    if (ma_length < 1) throw ConfigError("ma_length must be positive");
  }
};

/// ARFIMA(0,d,0) autocovariance
///   gamma(h) = sd^2 * Gamma(1-2d) Gamma(h+d) / (Gamma(d) Gamma(1-d) Gamma(h+1-d)).
/// Reduces to white noise at d = 0.
inline double arfima_autocovariance(const LongMemorySpec& spec, std::int64_t lag) {
  spec.validate();
  if (lag < 0) lag = -lag;
  const double d = spec.d();
  const double s2 = spec.innovation_sd * spec.innovation_sd;
  if (d == 0.0) return lag == 0 ? s2 : 0.0;
  const double lg = std::lgamma(1.0 - 2.0 * d) + std::lgamma(lag + d) -
                    std::lgamma(d) - std::lgamma(1.0 - d) -
                    std::lgamma(lag + 1.0 - d);
  return s2 * std::exp(lg);
}

/// MA(infinity) coefficients of ARFIMA(0,d,0): a_m = Gamma(m+d)/(Gamma(d) m!),
/// a_0 = 1, computed by the stable ratio recursion.
inline std::vector<double> arfima_ma_coefficients(double d, std::int64_t count) {
  std::vector<double> a(static_cast<std::size_t>(count));
  if (count == 0) return a;
  a[0] = 1.0;
  for (std::int64_t m = 1; m < count; ++m)
    a[m] = a[m - 1] * (static_cast<double>(m) - 1.0 + d) / static_cast<double>(m);
  return a;
}

namespace detail {

/// In-place iterative radix-2 FFT, sign convention exp(-2*pi*i*k*n/N).
/// Size must be a power of two.
inline void fft_pow2(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace detail

/// One draw of the noise sequence plus generation metadata.
struct NoiseResult {
  std::vector<double> values;
  NoiseMethod method_used = NoiseMethod::circulant_embedding;
  bool circulant_fallback = false;  // set when embedding was not nonnegative
};

namespace detail {

inline std::vector<double> generate_ma_truncation(const LongMemorySpec& spec,
                                                  std::int64_t n,
                                                  std::uint64_t seed) {
  const std::int64_t len = spec.ma_length;
  const auto a = arfima_ma_coefficients(spec.d(), len);
  CounterRng rng(seed);
  std::vector<double> innov(static_cast<std::size_t>(n + len - 1));
  for (auto& e : innov) e = spec.innovation_sd * rng.next_normal();
  std::vector<double> out(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    double s = 0.0;
    // eps_i = sum_m a_m eta_{i-m}; innov index offset so all lags exist
    for (std::int64_t m = 0; m < len; ++m) s += a[m] * innov[i - m + len - 1];
    out[i] = s;
  }
  return out;
}

inline bool generate_circulant(const LongMemorySpec& spec, std::int64_t n,
                               std::uint64_t seed, std::vector<double>& out) {
  const std::size_t M = next_pow2(static_cast<std::size_t>(2 * n));
  const std::size_t half = M / 2;

  std::vector<double> gamma(half + 1);
  // ratio recursion gamma(h+1) = gamma(h) (h+d)/(h+1-d)
  gamma[0] = arfima_autocovariance(spec, 0);
  const double d = spec.d();
  for (std::size_t h = 0; h < half; ++h)
    gamma[h + 1] = d == 0.0 ? 0.0
                            : gamma[h] * (static_cast<double>(h) + d) /
                                  (static_cast<double>(h) + 1.0 - d);

  std::vector<std::complex<double>> buf(M);
  for (std::size_t j = 0; j <= half; ++j) buf[j] = gamma[j];
  for (std::size_t j = half + 1; j < M; ++j) buf[j] = gamma[M - j];
  fft_pow2(buf);

  std::vector<double> lambda(M);
  double lmax = 0.0, lmin = 0.0;
  for (std::size_t k = 0; k < M; ++k) {
    lambda[k] = buf[k].real();
    lmax = std::max(lmax, lambda[k]);
    lmin = std::min(lmin, lambda[k]);
  }
  if (lmin < -1e-9 * lmax) return false;  // embedding not nonnegative definite

  CounterRng rng(seed);
  const double z0 = rng.next_normal();
  const double z1 = rng.next_normal();
  buf[0] = std::sqrt(std::max(lambda[0], 0.0)) * z0;
  buf[half] = std::sqrt(std::max(lambda[half], 0.0)) * z1;
  for (std::size_t k = 1; k < half; ++k) {
    const double ak = rng.next_normal();
    const double bk = rng.next_normal();
    const double s = std::sqrt(std::max(lambda[k], 0.0) / 2.0);
    buf[k] = std::complex<double>(s * ak, s * bk);
    buf[M - k] = std::conj(buf[k]);
  }
  fft_pow2(buf);
  const double norm = 1.0 / std::sqrt(static_cast<double>(M));
  out.resize(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) out[i] = buf[i].real() * norm;
  return true;
}

}  // namespace detail

/// Draw a zero-mean stationary Gaussian sequence of length n with the
/// ARFIMA(0,d,0) autocovariance of spec. Circulant embedding (Davies-Harte)
/// is exact in law; if its eigenvalues come out negative beyond tolerance
/// it falls back to MA truncation and flags the result. Same seed gives a
/// bit-identical sequence.
inline NoiseResult generate_noise(const LongMemorySpec& spec, std::int64_t n,
                                  std::uint64_t seed) {
  spec.validate();
  if (n < 1) throw std::invalid_argument("noise length must be positive");
  NoiseResult result;
  if (spec.method == NoiseMethod::circulant_embedding) {
    if (detail::generate_circulant(spec, n, seed, result.values)) {
      result.method_used = NoiseMethod::circulant_embedding;
      return result;
    }
    result.circulant_fallback = true;
  }
  result.values = detail::generate_ma_truncation(spec, n, seed);
  result.method_used = NoiseMethod::ma_truncation;
  return result;
}

/// Exact Var(sum_{i<n} eps_i) = n gamma(0) + 2 sum_h (n-h) gamma(h).
inline double exact_partial_sum_variance(const LongMemorySpec& spec,
                                         std::int64_t n) {
  const double d = spec.d();
  double g = arfima_autocovariance(spec, 0);
  double var = static_cast<double>(n) * g;
  for (std::int64_t h = 1; h < n; ++h) {
    g = d == 0.0 ? 0.0
                 : g * (static_cast<double>(h) - 1.0 + d) /
                       (static_cast<double>(h) - d);
    var += 2.0 * static_cast<double>(n - h) * g;
  }
  return var;
}

/// Least-squares slope of log Var(sum eps) against log n over the given
/// sizes, with the variance at each size estimated from `reps` independent
/// draws. The population slope is 2 - alpha for large sizes.
inline double partial_sum_variance_slope(const LongMemorySpec& spec,
                                         const std::vector<std::int64_t>& sizes,
                                         std::int64_t reps, std::uint64_t seed) {
  if (sizes.size() < 2) throw std::invalid_argument("need at least two sizes");
  if (reps < 2) throw std::invalid_argument("need at least two replicates");
  std::vector<double> logn, logv;
  for (std::size_t s = 0; s < sizes.size(); ++s) {
    double sum = 0.0, sumsq = 0.0;
    for (std::int64_t r = 0; r < reps; ++r) {
      const auto noise =
          generate_noise(spec, sizes[s], derive_seed(seed, {s, static_cast<std::uint64_t>(r)}));
      double ps = 0.0;
      for (double e : noise.values) ps += e;
      sum += ps;
      sumsq += ps * ps;
    }
    const double mean = sum / static_cast<double>(reps);
    const double var =
        (sumsq - static_cast<double>(reps) * mean * mean) / static_cast<double>(reps - 1);
    logn.push_back(std::log(static_cast<double>(sizes[s])));
    logv.push_back(std::log(var));
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < logn.size(); ++i) {
    mx += logn[i];
    my += logv[i];
  }
  mx /= static_cast<double>(logn.size());
  my /= static_cast<double>(logn.size());
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < logn.size(); ++i) {
    sxy += (logn[i] - mx) * (logv[i] - my);
    sxx += (logn[i] - mx) * (logn[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace longwave

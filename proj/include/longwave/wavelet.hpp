#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "longwave/errors.hpp"

namespace longwave {

namespace detail {

/// Daubechies scaling filters, extremal phase, normalized so sum h_n = sqrt(2).
/// Index is vanishing moments - 1; filter length is 2p.
inline const std::vector<std::vector<double>>& daubechies_filters() {
  static const std::vector<std::vector<double>> filters = {
      // db1 (Haar)
      {0.70710678118654752, 0.70710678118654752},
      // db2
      {0.48296291314453414, 0.83651630373780791, 0.22414386804201338,
       -0.12940952255126038},
      // db3
      {0.33267055295008262, 0.80689150931109258, 0.45987750211849157,
       -0.13501102001025459, -0.085441273882026662, 0.035226291885709537},
      // db4
      {0.23037781330889650, 0.71484657055291565, 0.63088076792985891,
       -0.027983769416859854, -0.18703481171909308, 0.030841381835560764,
       0.032883011666885200, -0.010597401785069032},
      // db5
      {0.16010239797419291, 0.60382926979718967, 0.72430852843777293,
       0.13842814590132073, -0.24229488706638203, -0.032244869584638375,
       0.077571493840045714, -0.0062414902127982743, -0.012580751999081999,
       0.0033357252854737713},
      // db6
      {0.11154074335010946, 0.49462389039845309, 0.75113390802109535,
       0.31525035170919763, -0.22626469396543982, -0.12976686756726194,
       0.097501605587323049, 0.027522865530305729, -0.031582039317486030,
       0.00055384220116149614, 0.0047772575109455106, -0.0010773010853084796},
      // db7
      {0.077852054085009179, 0.39653931948191731, 0.72913209084623512,
       0.46978228740519312, -0.14390600392856498, -0.22403618499387498,
       0.071309219266830265, 0.080612609151083072, -0.038029936935014414,
       -0.016574541630666881, 0.012550998556099841, 0.00042957797292136652,
       -0.0018016407040474909, 0.00035371379997452025},
      // db8
      {0.054415842243104010, 0.31287159091429997, 0.67563073629728981,
       0.58535468365420671, -0.015829105256349306, -0.28401554296154693,
       0.00047248457391328277, 0.12874742662047846, -0.017369301001807546,
       -0.044088253930794752, 0.013981027917398282, 0.0087460940474057767,
       -0.0048703529934515743, -0.00039174037337694705, 0.00067544940645056937,
       -0.00011747678412476953},
      // db9
      {0.038077947363878347, 0.24383467461259035, 0.60482312369011111,
       0.65728807805130054, 0.13319738582500758, -0.29327378327917491,
       -0.096840783222976461, 0.14854074933810638, 0.030725681479333379,
       -0.067632829061329974, 0.00025094711483145196, 0.022361662123679097,
       -0.0047232047577513973, -0.0042815036824634298, 0.0018476468830562265,
       0.00023038576352319597, -0.00025196318894271014,
       3.9347320316271599e-5},
      // db10
      {0.026670057900555554, 0.18817680007769149, 0.52720118893172559,
       0.68845903945360357, 0.28117234366057746, -0.24984642432731538,
       -0.19594627437737704, 0.12736934033579326, 0.093057364603572351,
       -0.071394147166397087, -0.029457536821875813, 0.033212674059341002,
       0.0036065535669561697, -0.010733175483330575, 0.0013953517470529012,
       0.0019924052951850561, -0.00068585669495971163, -0.00011646685512928545,
       9.3588670320069591e-5, -1.3264202894521245e-5},
  };
  return filters;
}

/// Solve A x = b by Gaussian elimination with partial pivoting.
/// A is row-major n x n, modified in place.
inline std::vector<double> gauss_solve(std::vector<double> a,
                                       std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
    if (std::abs(a[piv * n + col]) < 1e-14)
      throw NumericalError("singular system in scaling-function solve");
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a[piv * n + c], a[col * n + c]);
      std::swap(b[piv], b[col]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r * n + col] / a[col * n + col];
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= a[i * n + c] * x[c];
    x[i] = s / a[i * n + i];
  }
  return x;
}

}  // namespace detail

/// Periodized compactly supported orthonormal wavelet basis on [0,1).
///
/// The unperiodized scaling function phi and mother wavelet psi are
/// tabulated on the dyadic grid of spacing 2^-table_depth over their
/// common support [0, support_length]. Table values at dyadic points are
/// exact (up to rounding): they are produced by solving the two-scale
/// relation at the integers and refining dyadically, so the refinement
/// identity holds node-wise to machine precision. Evaluation between
/// nodes is linear interpolation.
///
/// Immutable after construction; all evaluation is read-only and
/// reentrant.
struct WaveletBasis {
  std::string family;        // "daubechies"
  int vanishing_moments = 0; // p
  int table_depth = 0;       // K: grid spacing 2^-K
  int support_length = 0;    // L = 2p - 1; support of phi and psi is [0, L]
  std::vector<double> eval_table_phi;  // L * 2^K + 1 values
  std::vector<double> eval_table_psi;

  /// Unperiodized phi(x); zero outside [0, support_length].
  double phi_at(double x) const { return table_at(eval_table_phi, x); }
  /// Unperiodized psi(x); zero outside [0, support_length].
  double psi_at(double x) const { return table_at(eval_table_psi, x); }

 private:
  double table_at(const std::vector<double>& table, double x) const {
    if (x < 0.0 || x > static_cast<double>(support_length)) return 0.0;
    const double pos = std::ldexp(x, table_depth);
    const auto i = static_cast<std::size_t>(pos);
    if (i + 1 >= table.size()) return table.back();
    const double frac = pos - static_cast<double>(i);
    return table[i] + frac * (table[i + 1] - table[i]);
  }
};

/// Build a Daubechies basis with the given number of vanishing moments,
/// tabulated at dyadic resolution 2^-table_depth.
///
/// The scaling function values at the integers solve the eigenproblem of
/// the two-scale relation (normalized to sum 1, which is the partition
/// of unity at the integers); each refinement level then fills the odd
/// dyadic nodes from the exact values one level up. psi follows from the
/// quadrature-mirror filter g_n = (-1)^n h_{2p-1-n}.
inline WaveletBasis build_basis(int vanishing_moments, int table_depth) {
  if (vanishing_moments < 1 || vanishing_moments > 10)
    throw ConfigError("vanishing_moments must be in 1..10, got " +
                      std::to_string(vanishing_moments));
  if (table_depth < 8 || table_depth > 20)
    throw ConfigError("table_depth must be in 8..20, got " +
                      std::to_string(table_depth));

  const auto& h = detail::daubechies_filters()[vanishing_moments - 1];
  const int nh = static_cast<int>(h.size());
  const int L = nh - 1;
  const double sqrt2 = std::sqrt(2.0);

  // phi at the integers 0..L.
  std::vector<double> values(static_cast<std::size_t>(L) + 1, 0.0);
  if (vanishing_moments == 1) {
    values[0] = 1.0;  // right-continuous Haar
  } else {
    // (M - I) v = 0 with sum(v) = 1 on the interior integers 1..L-1.
    const std::size_t n = static_cast<std::size_t>(L) - 1;
    std::vector<double> a(n * n, 0.0);
    std::vector<double> b(n, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        const int idx = 2 * (static_cast<int>(r) + 1) - (static_cast<int>(c) + 1);
        double m = (idx >= 0 && idx < nh) ? sqrt2 * h[idx] : 0.0;
        if (r == c) m -= 1.0;
        a[r * n + c] = m;
      }
    }
    for (std::size_t c = 0; c < n; ++c) a[(n - 1) * n + c] = 1.0;
    b[n - 1] = 1.0;
    const auto v = detail::gauss_solve(std::move(a), std::move(b));
    for (std::size_t i = 0; i < n; ++i) values[i + 1] = v[i];
  }

  // Dyadic refinement to depth K.
  for (int q = 0; q < table_depth; ++q) {
    const std::int64_t old_n = static_cast<std::int64_t>(L) << q;
    std::vector<double> next(static_cast<std::size_t>((old_n << 1) + 1), 0.0);
    for (std::int64_t m = 0; m <= old_n; ++m) next[2 * m] = values[m];
    for (std::int64_t m = 1; m <= 2 * old_n; m += 2) {
      double s = 0.0;
      for (int n = 0; n < nh; ++n) {
        const std::int64_t idx = m - (static_cast<std::int64_t>(n) << q);
        if (idx >= 0 && idx <= old_n) s += h[n] * values[idx];
      }
      next[m] = sqrt2 * s;
    }
    values = std::move(next);
  }

  WaveletBasis basis;
  basis.family = "daubechies";
  basis.vanishing_moments = vanishing_moments;
  basis.table_depth = table_depth;
  basis.support_length = L;
  basis.eval_table_phi = std::move(values);

  // psi(m/2^K) = sqrt(2) sum_n g_n phi(m/2^(K-1) - n)
  const std::int64_t nodes = (static_cast<std::int64_t>(L) << table_depth) + 1;
  basis.eval_table_psi.assign(static_cast<std::size_t>(nodes), 0.0);
  const std::int64_t half = std::int64_t{1} << table_depth;
  for (std::int64_t m = 0; m < nodes; ++m) {
    double s = 0.0;
    for (int n = 0; n < nh; ++n) {
      const double g = ((n & 1) ? -1.0 : 1.0) * h[nh - 1 - n];
      const std::int64_t idx = 2 * m - n * half;
      if (idx >= 0 && idx < nodes) s += g * basis.eval_table_phi[idx];
    }
    basis.eval_table_psi[m] = sqrt2 * s;
  }
  return basis;
}

namespace detail {

inline void check_shift(const WaveletBasis&, int j, std::int64_t k, double t) {
  if (j < 0 || j > 30) throw std::invalid_argument("level j out of range");
  if (k < 0 || k >= (std::int64_t{1} << j))
    throw std::invalid_argument("shift k out of range for level " +
                                std::to_string(j));
  if (!(t >= 0.0 && t < 1.0))
    throw std::invalid_argument("evaluation point must lie in [0,1)");
}

template <typename TableAt>
double eval_periodized(const WaveletBasis& basis, int j, std::int64_t k,
                       double t, TableAt&& at) {
  const double scale = static_cast<double>(std::int64_t{1} << j);
  const double amp = std::sqrt(scale);
  const double u = scale * t - static_cast<double>(k);
  const double L = static_cast<double>(basis.support_length);
  // terms with u + l*scale in [0, L]; widen by one on each side and let
  // the table clip.
  const auto lmin = static_cast<std::int64_t>(std::floor(-u / scale)) - 1;
  const auto lmax = static_cast<std::int64_t>(std::ceil((L - u) / scale)) + 1;
  double s = 0.0;
  for (std::int64_t l = lmin; l <= lmax; ++l)
    s += at(u + static_cast<double>(l) * scale);
  return amp * s;
}

}  // namespace detail

/// Periodized wavelet psi^per_{j,k}(t) = sum_l 2^{j/2} psi(2^j (t+l) - k),
/// for t in [0,1). Pure and deterministic.
inline double eval_psi(const WaveletBasis& basis, int j, std::int64_t k, double t) {
  detail::check_shift(basis, j, k, t);
  return detail::eval_periodized(basis, j, k, t,
                                 [&](double x) { return basis.psi_at(x); });
}

/// Periodized scaling function phi^per_{j,k}(t).
inline double eval_phi(const WaveletBasis& basis, int j, std::int64_t k, double t) {
  detail::check_shift(basis, j, k, t);
  return detail::eval_periodized(basis, j, k, t,
                                 [&](double x) { return basis.phi_at(x); });
}

/// Midpoint-rule integral of fn against psi^per_{j,k} over [0,1).
///
/// With a power-of-two grid no coarser than the basis table, the
/// midpoints land on exact table nodes, so piecewise-constant bases
/// (Haar) integrate exactly. Test/oracle use.
inline double quadrature_coefficient(const WaveletBasis& basis,
                                     const std::function<double(double)>& fn,
                                     int j, std::int64_t k, std::int64_t grid_size) {
  if (grid_size < (std::int64_t{1} << (j + 8)))
    throw std::invalid_argument("grid_size must be at least 2^(j+8)");
  const double h = 1.0 / static_cast<double>(grid_size);
  double s = 0.0;
  for (std::int64_t i = 0; i < grid_size; ++i) {
    const double t = (static_cast<double>(i) + 0.5) * h;
    s += fn(t) * eval_psi(basis, j, k, t);
  }
  return s * h;
}

/// phi variant of quadrature_coefficient.
inline double quadrature_scaling_coefficient(
    const WaveletBasis& basis, const std::function<double(double)>& fn, int j,
    std::int64_t k, std::int64_t grid_size) {
  if (grid_size < (std::int64_t{1} << (j + 8)))
    throw std::invalid_argument("grid_size must be at least 2^(j+8)");
  const double h = 1.0 / static_cast<double>(grid_size);
  double s = 0.0;
  for (std::int64_t i = 0; i < grid_size; ++i) {
    const double t = (static_cast<double>(i) + 0.5) * h;
    s += fn(t) * eval_phi(basis, j, k, t);
  }
  return s * h;
}

/// Pairwise inner products of { phi^per_{0,0} } followed by
/// { psi^per_{j,k} : j < max_level, k < 2^j }, by midpoint quadrature.
/// Orthonormality diagnostic; should be close to the identity.
inline std::vector<std::vector<double>> gram_matrix(const WaveletBasis& basis,
                                                    int max_level,
                                                    std::int64_t grid_size) {
  if (max_level < 1 || max_level > 8)
    throw std::invalid_argument("max_level must be in 1..8");
  if (grid_size < (std::int64_t{1} << (max_level + 7)))
    throw std::invalid_argument("grid_size too small for max_level");
  const std::size_t count = std::size_t{1} << max_level;
  const double h = 1.0 / static_cast<double>(grid_size);

  // Evaluate every basis function once over the midpoint grid.
  std::vector<std::vector<double>> vals(count);
  for (auto& v : vals) v.resize(static_cast<std::size_t>(grid_size));
  for (std::int64_t i = 0; i < grid_size; ++i) {
    const double t = (static_cast<double>(i) + 0.5) * h;
    vals[0][i] = eval_phi(basis, 0, 0, t);
    std::size_t f = 1;
    for (int j = 0; j < max_level; ++j)
      for (std::int64_t k = 0; k < (std::int64_t{1} << j); ++k)
        vals[f++][i] = eval_psi(basis, j, k, t);
  }
  std::vector<std::vector<double>> gram(count, std::vector<double>(count, 0.0));
  for (std::size_t a = 0; a < count; ++a) {
    for (std::size_t b = a; b < count; ++b) {
      double s = 0.0;
      for (std::int64_t i = 0; i < grid_size; ++i) s += vals[a][i] * vals[b][i];
      gram[a][b] = gram[b][a] = s * h;
    }
  }
  return gram;
}

/// Diagnostics over the raw tables. Exact at dyadic nodes, so they hold
/// to machine precision for piecewise-constant bases as well.
struct BasisDiagnostics {
  double integral_phi_minus_one = 0.0;
  double integral_psi = 0.0;
  double psi_l2_minus_one = 0.0;
  std::vector<double> psi_moments;       // |int t^p psi dt|, p = 0..vm-1
  double two_scale_residual = 0.0;       // sup over table nodes
  double partition_of_unity_residual = 0.0;
};

/// Midpoint integral of x^p * table(x) over the support, sampling the odd
/// table nodes (cell width 2^-(K-1)), which avoids interpolating across
/// dyadic jumps.
inline double table_moment(const WaveletBasis& basis,
                           const std::vector<double>& table, int p) {
  const std::int64_t cells = static_cast<std::int64_t>(basis.support_length)
                             << (basis.table_depth - 1);
  const double h = std::ldexp(1.0, -(basis.table_depth - 1));
  double s = 0.0;
  for (std::int64_t c = 0; c < cells; ++c) {
    const std::int64_t node = 2 * c + 1;  // odd node = cell midpoint
    const double x = std::ldexp(static_cast<double>(node), -basis.table_depth);
    s += std::pow(x, p) * table[node];
  }
  return s * h;
}

inline BasisDiagnostics basis_diagnostics(const WaveletBasis& basis) {
  BasisDiagnostics d;
  const auto& h = detail::daubechies_filters()[basis.vanishing_moments - 1];
  const int nh = static_cast<int>(h.size());
  const std::int64_t nodes = static_cast<std::int64_t>(basis.eval_table_phi.size());
  const std::int64_t per_unit = std::int64_t{1} << basis.table_depth;

  d.integral_phi_minus_one = table_moment(basis, basis.eval_table_phi, 0) - 1.0;
  d.integral_psi = table_moment(basis, basis.eval_table_psi, 0);
  for (int p = 0; p < basis.vanishing_moments; ++p)
    d.psi_moments.push_back(std::abs(table_moment(basis, basis.eval_table_psi, p)));

  {  // int psi^2 = 1, same odd-node midpoint rule
    const std::int64_t cells = static_cast<std::int64_t>(basis.support_length)
                               << (basis.table_depth - 1);
    const double step = std::ldexp(1.0, -(basis.table_depth - 1));
    double s = 0.0;
    for (std::int64_t c = 0; c < cells; ++c) {
      const double v = basis.eval_table_psi[2 * c + 1];
      s += v * v;
    }
    d.psi_l2_minus_one = s * step - 1.0;
  }

  const double sqrt2 = std::sqrt(2.0);
  for (std::int64_t m = 0; m < nodes; ++m) {
    double s = 0.0;
    for (int n = 0; n < nh; ++n) {
      const std::int64_t idx = 2 * m - static_cast<std::int64_t>(n) * per_unit;
      if (idx >= 0 && idx < nodes) s += h[n] * basis.eval_table_phi[idx];
    }
    d.two_scale_residual = std::max(
        d.two_scale_residual, std::abs(basis.eval_table_phi[m] - sqrt2 * s));
  }

  // sum_k phi(t - k) = 1 at every node offset within one period
  for (std::int64_t o = 0; o < per_unit; ++o) {
    double s = 0.0;
    for (std::int64_t m = o; m < nodes; m += per_unit) s += basis.eval_table_phi[m];
    d.partition_of_unity_residual =
        std::max(d.partition_of_unity_residual, std::abs(s - 1.0));
  }
  return d;
}

}  // namespace longwave

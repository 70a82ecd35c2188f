#pragma once
// Closed-form reference results used as oracles and standalone outputs:
// the pair-coherence (XX) spectrum and its gap, the single-excitation
// impurity problem with its transfer-matrix quantization condition,
// Chebyshev machinery, analytic gaps, and the maximally mixed error-phase
// magnetization distribution.

#include <cmath>
#include <complex>
#include <map>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "wdicke/gdicke.hpp"

namespace wdicke {

enum class FermionParity { Even, Odd };

// U_m(x), second kind, U_{-1} = 0; forward recurrence is stable on the
// band and grows like the dominant root off it, which is what the
// quantization condition needs.
inline double chebyshev_u(int m, double x) {
    if (m < -1) throw std::invalid_argument("chebyshev_u: m >= -1");
    if (m == -1) return 0.0;
    double um1 = 0.0, u = 1.0;
    for (int i = 0; i < m; ++i) {
        const double next = 2.0 * x * u - um1;
        um1 = u;
        u = next;
    }
    return u;
}

// Free-fermion spectrum of the pair-coherence block: E_k = -((g1+g3)/2)(1-cos k),
// with antiperiodic momenta for even fermion number and periodic for odd.
inline std::vector<double> xx_spectrum(int N, double gamma1, double gamma3,
                                       FermionParity parity) {
    if (N < 2) throw std::invalid_argument("xx_spectrum: N >= 2");
    std::vector<double> out;
    out.reserve(N);
    for (int m = 0; m < N; ++m) {
        const double k = parity == FermionParity::Odd
                             ? 2.0 * M_PI * m / N
                             : 2.0 * M_PI * (m + 0.5) / N;
        out.push_back(-0.5 * (gamma1 + gamma3) * (1.0 - std::cos(k)));
    }
    return out;
}

inline double xx_level_sum(const std::vector<double>& spectrum,
                           const std::vector<int>& occupied) {
    double s = 0.0;
    for (int m : occupied) s += spectrum.at(m);
    return s;
}

// Slowest mode of the coherence block: the pair k = +-pi/N at even parity.
inline double offdiag_gap(int N, double gamma1, double gamma3) {
    if (N < 2) throw std::invalid_argument("offdiag_gap: N >= 2");
    return (gamma1 + gamma3) * (1.0 - std::cos(M_PI / N));
}

// Relaxation gap of the single-excitation sector at gamma3 = 0; also the
// inverse preparation-time scale of the target state (quadratic in N).
inline double single_spinup_gap(int N, double gamma1) {
    if (N < 3) throw std::invalid_argument("single_spinup_gap: N >= 3");
    return gamma1 * (1.0 - std::cos(M_PI / (N - 1)));
}

// --- single-excitation impurity problem ---

struct ImpurityProblem {
    int N = 0;
    double k_plus = 0.0;  // one of 2 pi a / N
    double gamma1 = 1.0;
};

// Relative-coordinate hopping matrix of the sector at fixed total momentum
// k_plus: bulk nearest-neighbor hopping of strength cos(k_plus)/2 with an
// on-site energy -1, modified on the three rows next to the coincidence
// point (m = 0) where the pair loss acts. Eigenvalues are sector relaxation
// rates (negated), in units of gamma1.
inline Eigen::MatrixXd impurity_matrix(const ImpurityProblem& p) {
    const int N = p.N;
    if (N < 3) throw std::invalid_argument("impurity_matrix: N >= 3");
    const double c = std::cos(p.k_plus);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(N, N);
    auto at = [&](int r, int m) -> double& { return H(((r % N) + N) % N, m); };
    for (int m = 0; m < N; ++m) {
        if (m == 1) {
            at(m + 1, m) += 0.5 * c;
            at(m, m) += -1.25;
            at(m - 2, m) += -0.25;
        } else if (m == 0) {
            at(m + 1, m) += c;
            at(m, m) += c * c - 1.0;
            at(m - 1, m) += c;
        } else if (m == N - 1) {
            at(m + 2, m) += -0.25;
            at(m, m) += -1.25;
            at(m - 1, m) += 0.5 * c;
        } else {
            at(m + 1, m) += 0.5 * c;
            at(m, m) += -1.0;
            at(m - 1, m) += 0.5 * c;
        }
    }
    return p.gamma1 * H;
}

// Momentum-resolved sector block with complex hopping phases. Unlike the
// real impurity matrix (whose union over k_plus reproduces the sector
// spectrum only for odd N, where the gauge e^{i k m / 2} closes on the
// ring), the union of these blocks over a = 0..N-1 equals the full
// single-excitation sector spectrum for every N.
inline Eigen::MatrixXcd momentum_sector_matrix(int N, int a, double gamma1 = 1.0) {
    if (N < 3) throw std::invalid_argument("momentum_sector_matrix: N >= 3");
    const double k = 2.0 * M_PI * a / N;
    const Complex ek(std::cos(k), std::sin(k)), emk = std::conj(ek);
    Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(N, N);
    auto at = [&](int r, int m) -> Complex& { return H(((r % N) + N) % N, ((m % N) + N) % N); };
    for (int m = 0; m < N; ++m) {
        at(m, m) += -1.0;
        at(m + 1, m) += 0.25 * (1.0 + emk);
        at(m - 1, m) += 0.25 * (1.0 + ek);
    }
    // corrections near the coincidence point
    at(1, 1) += -0.25;
    at(-1, 1) += -0.25 * ek;
    at(0, 1) += -0.25 * (1.0 + ek);
    at(1, -1) += -0.25 * emk;
    at(-1, -1) += -0.25;
    at(0, -1) += -0.25 * (1.0 + emk);
    at(1, 0) += 0.25 * (1.0 + emk);
    at(-1, 0) += 0.25 * (1.0 + ek);
    at(0, 0) += 0.5 * (1.0 + std::cos(k));
    return gamma1 * H;
}

// Quantization condition for the impurity problem, scaled form
//   c^{N-2} + W_{N-2}(E) + W_{N-1}(E),   W_m = c^m U_m((E+1)/c),
// computed by the branch-free recurrence W_m = 2(E+1)W_{m-1} - c^2 W_{m-2}.
// Same roots as the Chebyshev form 1 + U_{N-2} + c U_{N-1}; stays finite
// through cos(k_plus) = 0 and outside the band.
inline double transfer_condition(double E, double k_plus, int N) {
    if (N < 3) throw std::invalid_argument("transfer_condition: N >= 3");
    const double c = std::cos(k_plus);
    const double c2 = c * c, t = 2.0 * (E + 1.0);
    double wm1 = 0.0, w = 1.0;  // W_{-1}, W_0
    for (int m = 1; m <= N - 1; ++m) {
        const double next = t * w - c2 * wm1;
        wm1 = w;
        w = next;
    }
    return std::pow(c, N - 2) + wm1 + w;  // wm1 = W_{N-2}, w = W_{N-1}
}

// Sign-change bisection root locator for the quantization condition.
inline std::vector<double> transfer_roots(int N, double k_plus, int grid_points = 10000,
                                          double lo = -2.5, double hi = 0.1) {
    if (grid_points < 2) throw std::invalid_argument("transfer_roots: grid too small");
    std::vector<double> roots;
    double e0 = lo, f0 = transfer_condition(e0, k_plus, N);
    for (int i = 1; i < grid_points; ++i) {
        const double e1 = lo + (hi - lo) * i / (grid_points - 1);
        const double f1 = transfer_condition(e1, k_plus, N);
        if (f0 == 0.0) {
            roots.push_back(e0);
        } else if (f0 * f1 < 0.0) {
            double a = e0, b = e1, fa = f0;
            for (int it = 0; it < 100 && b - a > 1e-14; ++it) {
                const double mid = 0.5 * (a + b);
                const double fm = transfer_condition(mid, k_plus, N);
                if (fa * fm <= 0.0) {
                    b = mid;
                } else {
                    a = mid;
                    fa = fm;
                }
            }
            roots.push_back(0.5 * (a + b));
        }
        e0 = e1;
        f0 = f1;
    }
    if (f0 == 0.0) roots.push_back(e0);
    return roots;
}

// --- mixed-phase magnetization distribution ---

using Rational = boost::multiprecision::cpp_rational;

// Weight per magnetization of the maximally mixed state orthogonal to both
// dark states: alpha_{S_z} = (binom(N, N/2+S_z) - [S_z = -N/2+1]) / (2^N - 2),
// keyed by qz2 = 2*S_z. The vacuum row S_z = -N/2 is excluded so the weights
// sum to exactly 1; include_vacuum_row = true keeps that row (weight
// 1/(2^N-2)), reproducing the unnormalized tabulated form.
inline std::map<int, Rational> mixed_distribution_exact(int N,
                                                        bool include_vacuum_row = false) {
    if (N < 2 || N > 64)
        throw std::invalid_argument("mixed_distribution_exact: N in [2,64]");
    const BigInt denom = (BigInt(1) << N) - 2;
    std::map<int, Rational> out;
    for (int k = include_vacuum_row ? 0 : 1; k <= N; ++k) {
        BigInt num = binomial_big(N, k);
        if (k == 1) num -= 1;
        out[2 * k - N] = Rational(num, denom);
    }
    return out;
}

inline std::map<int, double> mixed_distribution(int N, bool include_vacuum_row = false) {
    if (N < 2) throw std::invalid_argument("mixed_distribution: N >= 2");
    std::map<int, double> out;
    if (N <= 64) {
        for (const auto& [qz2, w] : mixed_distribution_exact(N, include_vacuum_row))
            out[qz2] = w.convert_to<double>();
        return out;
    }
    // log-space evaluation; the denominator 2^N - 2 collapses to N log 2 at
    // this size
    const double ldenom = N * std::log(2.0) + std::log1p(-std::pow(2.0, 1.0 - N));
    for (int k = include_vacuum_row ? 0 : 1; k <= N; ++k) {
        double lnum;
        if (k == 1) {
            lnum = std::log(double(N) - 1.0);
        } else {
            lnum = std::lgamma(N + 1.0) - std::lgamma(k + 1.0) - std::lgamma(N - k + 1.0);
        }
        out[2 * k - N] = std::exp(lnum - ldenom);
    }
    return out;
}

}  // namespace wdicke

#pragma once
// Spectral and time-domain analysis of dissipative generators:
//   * dense eigendecomposition with kernel classification,
//   * deflated Krylov-Schur iteration for the slowest nonzero mode,
//   * fixed-step RK4 propagation with spectral-radius step control,
//   * least-squares exponent fits on declared windows.
//
// Eigenvalue conventions: generators have spectra in the closed left half
// plane; results are sorted by real part descending; the "gap" is -Re of the
// slowest mode that is not classified as kernel.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "wdicke/sparse.hpp"

namespace wdicke {

using Complex = std::complex<double>;

struct SpectrumResult {
    std::vector<Complex> eigenvalues;  // sorted by Re descending, Im ascending
    int kernel_dim = 0;
    double gap = 0.0;       // -Re(slowest non-kernel eigenvalue)
    double zero_tol = 0.0;  // absolute kernel threshold applied
    Eigen::MatrixXcd kernel_vectors;
    Eigen::MatrixXcd gap_vectors;  // eigenvector(s) attaining the gap
};

namespace detail {

inline bool spectral_less(const Complex& a, const Complex& b) {
    if (a.real() != b.real()) return a.real() > b.real();
    return a.imag() < b.imag();
}

inline SpectrumResult classify_spectrum(std::vector<Complex> evs, const Eigen::MatrixXcd& vecs,
                                        double zero_tol) {
    std::vector<int> order(evs.size());
    for (std::size_t i = 0; i < evs.size(); ++i) order[i] = int(i);
    std::sort(order.begin(), order.end(),
              [&](int i, int j) { return spectral_less(evs[i], evs[j]); });

    SpectrumResult res;
    res.zero_tol = zero_tol;
    res.eigenvalues.reserve(evs.size());
    for (int i : order) res.eigenvalues.push_back(evs[i]);

    std::vector<int> kernel, gap_idx;
    double best_re = -std::numeric_limits<double>::infinity();
    for (int i : order) {
        if (std::abs(evs[i]) < zero_tol)
            kernel.push_back(i);
        else
            best_re = std::max(best_re, evs[i].real());
    }
    res.kernel_dim = int(kernel.size());
    if (std::isfinite(best_re)) {
        res.gap = -best_re;
        for (int i : order)
            if (std::abs(evs[i]) >= zero_tol && std::abs(evs[i].real() - best_re) < 1e-12 * (1.0 + std::abs(best_re)))
                gap_idx.push_back(i);
    }
    if (vecs.size() > 0) {
        res.kernel_vectors.resize(vecs.rows(), kernel.size());
        for (std::size_t j = 0; j < kernel.size(); ++j)
            res.kernel_vectors.col(j) = vecs.col(kernel[j]);
        res.gap_vectors.resize(vecs.rows(), gap_idx.size());
        for (std::size_t j = 0; j < gap_idx.size(); ++j)
            res.gap_vectors.col(j) = vecs.col(gap_idx[j]);
    }
    return res;
}

}  // namespace detail

// Dense eigendecomposition. The kernel threshold is relative to the largest
// eigenvalue magnitude: |lambda| < zero_rel * max|lambda|.
inline SpectrumResult eig_dense(const Eigen::MatrixXd& A, double zero_rel = 1e-10,
                                bool with_vectors = true) {
    if (A.rows() != A.cols()) throw std::invalid_argument("eig_dense: square only");
    if (A.rows() > 4096) throw std::invalid_argument("eig_dense: beyond dense cap 4096");
    Eigen::EigenSolver<Eigen::MatrixXd> es(A, with_vectors);
    if (es.info() != Eigen::Success) throw std::runtime_error("eig_dense: solver failed");
    std::vector<Complex> evs(es.eigenvalues().data(), es.eigenvalues().data() + A.rows());
    double mx = 0.0;
    for (const auto& e : evs) mx = std::max(mx, std::abs(e));
    return detail::classify_spectrum(std::move(evs),
                                     with_vectors ? Eigen::MatrixXcd(es.eigenvectors())
                                                  : Eigen::MatrixXcd(),
                                     zero_rel * mx);
}

inline SpectrumResult eig_dense(const Eigen::MatrixXcd& A, double zero_rel = 1e-10,
                                bool with_vectors = true) {
    if (A.rows() != A.cols()) throw std::invalid_argument("eig_dense: square only");
    if (A.rows() > 4096) throw std::invalid_argument("eig_dense: beyond dense cap 4096");
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(A, with_vectors);
    if (es.info() != Eigen::Success) throw std::runtime_error("eig_dense: solver failed");
    std::vector<Complex> evs(es.eigenvalues().data(), es.eigenvalues().data() + A.rows());
    double mx = 0.0;
    for (const auto& e : evs) mx = std::max(mx, std::abs(e));
    return detail::classify_spectrum(std::move(evs),
                                     with_vectors ? Eigen::MatrixXcd(es.eigenvectors())
                                                  : Eigen::MatrixXcd(),
                                     zero_rel * mx);
}

// Dense eigendecomposition after projecting a known kernel out of both
// sides: eig(P A P), P = I - QQ^T. The known kernel reappears as numerical
// zeros, so kernel_dim counts it; the gap is unpolluted by it. Required for
// conditioning: large collective generators misclassify their kernel when
// diagonalized raw.
inline SpectrumResult eig_dense_deflated(const Eigen::MatrixXd& A,
                                         const Eigen::MatrixXd& known_kernel,
                                         double zero_rel = 1e-10, bool with_vectors = false) {
    if (known_kernel.cols() == 0) return eig_dense(A, zero_rel, with_vectors);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(known_kernel);
    Eigen::MatrixXd Q =
        qr.householderQ() * Eigen::MatrixXd::Identity(A.rows(), known_kernel.cols());
    Eigen::MatrixXd B = A - Q * (Q.transpose() * A);
    B -= (B * Q) * Q.transpose();
    return eig_dense(B, zero_rel, with_vectors);
}

struct ArnoldiOptions {
    int subspace = 64;        // Krylov dimension m
    int max_restarts = 400;
    double tol = 1e-11;       // residual tolerance, relative to |Ritz value| + scale floor
    double zero_tol = 0.0;    // absolute kernel threshold for leaked near-zeros
    std::uint64_t seed = 12345;
};

namespace detail {

// Reorder a complex Schur form so diag(T) is sorted by spectral_less,
// swapping adjacent diagonal entries with Givens rotations.
inline void sort_schur(Eigen::MatrixXcd& T, Eigen::MatrixXcd& U) {
    const int m = int(T.rows());
    for (int pass = 0; pass < m; ++pass) {
        bool swapped = false;
        for (int i = 0; i + 1 < m; ++i) {
            const Complex a = T(i, i), c = T(i + 1, i + 1);
            if (!spectral_less(c, a)) continue;
            // 2x2 block [[a, b], [0, c]]: (b, c-a) is the eigenvector of c.
            // A unitary with that vector (normalized, conjugated) as first
            // row brings c to the leading position.
            const Complex x = T(i, i + 1), y = c - a;
            if (std::abs(y) == 0.0) continue;  // equal eigenvalues, nothing to do
            const double nrm = std::sqrt(std::norm(x) + std::norm(y));
            Eigen::Matrix2cd G;
            G << std::conj(x) / nrm, std::conj(y) / nrm, -y / nrm, x / nrm;
            T.block(i, 0, 2, m) = (G * T.block(i, 0, 2, m)).eval();
            T.block(0, i, m, 2) = (T.block(0, i, m, 2) * G.adjoint()).eval();
            U.block(0, i, m, 2) = (U.block(0, i, m, 2) * G.adjoint()).eval();
            T(i + 1, i) = Complex(0, 0);
            swapped = true;
        }
        if (!swapped) break;
    }
}

}  // namespace detail

// Deflated Krylov-Schur for the eigenvalues of largest real part.
//
// apply_op: y = A x on vectors of length n. known_kernel columns are
// orthonormalized and projected out on both sides, so the iteration never
// sees the exact kernel; leaked near-zero Ritz values (an artifact of
// deflation) are classified by |lambda| < zero_tol and excluded from the
// gap. Throws on non-convergence; silent degradation is never acceptable
// for gap extraction.
inline SpectrumResult eig_gap_arnoldi(
    const std::function<void(const Complex*, Complex*)>& apply_op, std::int64_t n,
    const Eigen::MatrixXcd& known_kernel, int wanted, ArnoldiOptions opt = {}) {
    if (wanted < 1) throw std::invalid_argument("eig_gap_arnoldi: wanted >= 1");
    const int m = std::min<std::int64_t>(std::max(opt.subspace, 3 * wanted + 8), n);
    Eigen::MatrixXcd Q;  // orthonormal deflation basis
    if (known_kernel.cols() > 0) {
        Eigen::HouseholderQR<Eigen::MatrixXcd> qr(known_kernel);
        Q = qr.householderQ() * Eigen::MatrixXcd::Identity(n, known_kernel.cols());
    }
    auto project = [&](Eigen::VectorXcd& x) {
        if (Q.cols() > 0) x -= Q * (Q.adjoint() * x).eval();
    };
    auto apply_defl = [&](const Eigen::VectorXcd& x, Eigen::VectorXcd& y) {
        Eigen::VectorXcd t = x;
        project(t);
        y.resize(n);
        apply_op(t.data(), y.data());
        project(y);
    };

    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> nd;
    Eigen::MatrixXcd V(n, m + 1);
    Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(m + 1, m);
    Eigen::VectorXcd v0(n);
    for (std::int64_t i = 0; i < n; ++i) v0[i] = Complex(nd(rng), nd(rng));
    project(v0);
    if (v0.norm() == 0.0) throw std::runtime_error("eig_gap_arnoldi: start vector deflated away");
    V.col(0) = v0 / v0.norm();

    int p = 0;  // current compressed size; columns [0, p) hold the Schur basis
    double hscale = 0.0;
    for (int restart = 0; restart <= opt.max_restarts; ++restart) {
        // expand Arnoldi factorization from column p to m
        for (int i = p; i < m; ++i) {
            Eigen::VectorXcd w(n);
            apply_defl(V.col(i), w);
            for (int rep = 0; rep < 2; ++rep) {  // CGS2 reorthogonalization
                Eigen::VectorXcd c = V.leftCols(i + 1).adjoint() * w;
                w -= V.leftCols(i + 1) * c;
                H.block(0, i, i + 1, 1) += c;
            }
            const double nw = w.norm();
            H(i + 1, i) = nw;
            hscale = std::max(hscale, H.col(i).head(i + 2).cwiseAbs().maxCoeff());
            if (nw < 1e-14 * std::max(1.0, hscale)) {
                // invariant subspace reached: pad with a fresh random direction
                Eigen::VectorXcd f(n);
                for (std::int64_t t = 0; t < n; ++t) f[t] = Complex(nd(rng), nd(rng));
                project(f);
                Eigen::VectorXcd c = V.leftCols(i + 1).adjoint() * f;
                f -= V.leftCols(i + 1) * c;
                if (f.norm() < 1e-14) throw std::runtime_error("eig_gap_arnoldi: space exhausted");
                V.col(i + 1) = f / f.norm();
                H(i + 1, i) = 0.0;
            } else {
                V.col(i + 1) = w / nw;
            }
        }
        // Schur form of the square part, sorted so wanted modes lead
        Eigen::ComplexSchur<Eigen::MatrixXcd> schur(H.topLeftCorner(m, m));
        if (schur.info() != Eigen::Success) throw std::runtime_error("eig_gap_arnoldi: schur failed");
        Eigen::MatrixXcd T = schur.matrixT(), U = schur.matrixU();
        detail::sort_schur(T, U);
        Eigen::RowVectorXcd r = H.row(m).head(m) * U;  // residual (spike) row

        int converged = 0;
        for (int i = 0; i < wanted; ++i) {
            const double bound = std::abs(r[i]);
            if (bound <= opt.tol * (std::abs(T(i, i)) + 1e-3 * hscale))
                ++converged;
            else
                break;
        }
        if (converged >= wanted || restart == opt.max_restarts) {
            if (converged < wanted)
                throw std::runtime_error("eig_gap_arnoldi: no convergence after " +
                                         std::to_string(opt.max_restarts) + " restarts");
            // Ritz values and vectors of the leading block
            std::vector<Complex> evs(wanted);
            Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(m, wanted);
            for (int i = 0; i < wanted; ++i) {
                evs[i] = T(i, i);
                // back-substitution for the triangular eigenvector
                Eigen::VectorXcd y = Eigen::VectorXcd::Zero(m);
                y[i] = 1.0;
                for (int j = i - 1; j >= 0; --j) {
                    Complex s = 0;
                    for (int l = j + 1; l <= i; ++l) s += T(j, l) * y[l];
                    const Complex d = T(j, j) - T(i, i);
                    y[j] = std::abs(d) > 1e-14 * (1.0 + std::abs(T(i, i))) ? -s / d : Complex(0);
                }
                y.normalize();
                Y.col(i) = y;
            }
            Eigen::MatrixXcd vecs = V.leftCols(m) * (U * Y);
            const double ztol = opt.zero_tol;
            auto res = detail::classify_spectrum(evs, vecs, ztol);
            res.kernel_dim += int(known_kernel.cols());
            return res;
        }
        // Krylov-Schur restart: keep a compressed leading block plus spike
        p = std::min(m - 2, std::max(2 * wanted, wanted + 8));
        Eigen::MatrixXcd Vnew = V.leftCols(m) * U.leftCols(p);
        V.leftCols(p) = Vnew;
        V.col(p) = V.col(m);
        H.setZero();
        H.topLeftCorner(p, p) = T.topLeftCorner(p, p);
        H.block(p, 0, 1, p) = r.head(p);
        // columns [0, p) are now a valid generalized factorization with the
        // spike row sitting in H(p, :p); expansion continues at column p
    }
    throw std::runtime_error("eig_gap_arnoldi: unreachable");
}

inline SpectrumResult eig_gap_arnoldi(const CsrMatrix<double>& A,
                                      const Eigen::MatrixXcd& known_kernel, int wanted,
                                      ArnoldiOptions opt = {}) {
    if (opt.zero_tol == 0.0) opt.zero_tol = 1e-10 * A.inf_norm();
    return eig_gap_arnoldi([&A](const Complex* x, Complex* y) { A.apply(x, y); }, A.rows,
                           known_kernel, wanted, opt);
}

// --- time propagation ---

struct TimeSeries {
    std::vector<double> times;
    std::vector<std::string> names;
    Eigen::MatrixXd values;  // row per time, column per observable (real parts)
    double step = 0.0;
    double rho_est = 0.0;
    double trace_drift_rate = 0.0;  // max |tr(t) - tr(0)| / t over the grid
};

struct EvolveOptions {
    double safety = 1.0;  // h = safety / rho_est; the generator's non-normal
                          // transient growth makes looser steps unreliable well
                          // before the scalar stability limit is reached
    int power_iters = 80;
    std::uint64_t seed = 7;
};

// Classic fixed-step RK4 on v' = A v, sampling observables at t_grid points.
// The trace functional, when given, is monitored and recorded; the state is
// never renormalized.
template <class S, class V>
TimeSeries evolve(const CsrMatrix<S>& A, Eigen::Vector<V, Eigen::Dynamic> v,
                  const std::vector<double>& t_grid,
                  const std::vector<std::pair<std::string, Eigen::RowVector<V, Eigen::Dynamic>>>& obs,
                  const Eigen::RowVector<V, Eigen::Dynamic>& trace_functional = {},
                  EvolveOptions opt = {}) {
    if (t_grid.empty() || t_grid.front() < 0.0)
        throw std::invalid_argument("evolve: bad time grid");
    for (std::size_t i = 1; i < t_grid.size(); ++i)
        if (t_grid[i] < t_grid[i - 1]) throw std::invalid_argument("evolve: grid not sorted");

    TimeSeries ts;
    ts.rho_est = spectral_radius_estimate(A, opt.power_iters, opt.seed);
    const double h = opt.safety / std::max(ts.rho_est, 1e-300);
    ts.step = h;
    ts.times = t_grid;
    for (const auto& o : obs) ts.names.push_back(o.first);
    ts.values.resize(t_grid.size(), obs.size());

    const std::int64_t n = A.rows;
    Eigen::Vector<V, Eigen::Dynamic> k1(n), k2(n), k3(n), k4(n), tmp(n);
    auto step_once = [&](double hh) {
        A.apply(v.data(), k1.data());
        tmp = v + (hh / 2) * k1;
        A.apply(tmp.data(), k2.data());
        tmp = v + (hh / 2) * k2;
        A.apply(tmp.data(), k3.data());
        tmp = v + hh * k3;
        A.apply(tmp.data(), k4.data());
        v += (hh / 6) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    };

    auto real_of = [](V x) { return std::real(Complex(x)); };
    const bool track_trace = trace_functional.size() > 0;
    double tr0 = 0.0, drift = 0.0;
    if (track_trace) tr0 = real_of((trace_functional * v).value());

    double t = 0.0;
    for (std::size_t gi = 0; gi < t_grid.size(); ++gi) {
        const double target = t_grid[gi];
        if (target > t) {
            const int nsub = int(std::ceil((target - t) / h - 1e-12));
            const double hh = (target - t) / nsub;
            for (int s = 0; s < nsub; ++s) step_once(hh);
            t = target;
        }
        for (std::size_t oi = 0; oi < obs.size(); ++oi)
            ts.values(gi, oi) = real_of((obs[oi].second * v).value());
        if (track_trace && t > 0.0) {
            const double tr = real_of((trace_functional * v).value());
            drift = std::max(drift, std::abs(tr - tr0) / t);
        }
    }
    ts.trace_drift_rate = drift;
    return ts;
}

inline std::vector<double> log_time_grid(double t_min, double t_max, int npts,
                                         bool include_zero = true) {
    if (npts < 2 || !(t_max > t_min) || t_min <= 0.0)
        throw std::invalid_argument("log_time_grid: bad parameters");
    std::vector<double> g;
    if (include_zero) g.push_back(0.0);
    for (int i = 0; i < npts; ++i)
        g.push_back(t_min * std::pow(t_max / t_min, double(i) / (npts - 1)));
    return g;
}

// --- exponent fits ---

struct FitResult {
    double value = 0.0;   // fitted exponent or rate
    double stderr_ = 0.0; // standard error of the slope
    int n_points = 0;
    double window_lo = 0.0, window_hi = 0.0;
};

namespace detail {
inline FitResult line_fit(const std::vector<double>& x, const std::vector<double>& y) {
    const int n = int(x.size());
    if (n < 3) throw std::invalid_argument("fit: need at least 3 points");
    double mx = 0, my = 0;
    for (int i = 0; i < n; ++i) { mx += x[i]; my += y[i]; }
    mx /= n; my /= n;
    double sxx = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    const double slope = sxy / sxx;
    const double icpt = my - slope * mx;
    double ss = 0;
    for (int i = 0; i < n; ++i) {
        const double r = y[i] - (icpt + slope * x[i]);
        ss += r * r;
    }
    FitResult f;
    f.value = slope;
    f.stderr_ = std::sqrt(ss / std::max(1, n - 2) / sxx);
    f.n_points = n;
    return f;
}
}  // namespace detail

// Fit y = C x^p on log-log axes; returns p (a decaying quantity gives p < 0).
inline FitResult fit_power_law(const std::vector<std::pair<double, double>>& pts) {
    std::vector<double> lx, ly;
    for (const auto& [x, y] : pts) {
        if (x <= 0.0 || y <= 0.0)
            throw std::invalid_argument("fit_power_law: needs positive coordinates");
        lx.push_back(std::log(x));
        ly.push_back(std::log(y));
    }
    return detail::line_fit(lx, ly);
}

enum class DecayModel { Exponential, PowerLaw };

// Fit a decay exponent on a declared window, after subtracting a declared
// asymptote. Exponential: value = rate r in y ~ e^{-r t}. PowerLaw: value =
// delta in y ~ t^{-delta}. Window end points are recorded in the result;
// fits without an explicit window are deliberately not offered.
inline FitResult fit_decay_exponent(const std::vector<double>& times,
                                    const std::vector<double>& values, double window_lo,
                                    double window_hi, DecayModel model, double asymptote = 0.0) {
    if (times.size() != values.size()) throw std::invalid_argument("fit_decay_exponent: size");
    if (!(window_hi > window_lo)) throw std::invalid_argument("fit_decay_exponent: bad window");
    std::vector<double> x, y;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] < window_lo || times[i] > window_hi) continue;
        const double v = values[i] - asymptote;
        if (v <= 0.0)
            throw std::invalid_argument("fit_decay_exponent: nonpositive value in window");
        if (model == DecayModel::PowerLaw) {
            if (times[i] <= 0.0) continue;
            x.push_back(std::log(times[i]));
        } else {
            x.push_back(times[i]);
        }
        y.push_back(std::log(v));
    }
    FitResult f = detail::line_fit(x, y);
    f.value = -f.value;  // decay rates and exponents reported positive
    f.window_lo = window_lo;
    f.window_hi = window_hi;
    return f;
}

}  // namespace wdicke

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>

#include "wdicke/sparse.hpp"
#include "wdicke/spectral.hpp"

using namespace wdicke;
using Catch::Approx;

namespace {

CsrMatrix<double> to_csr(const Eigen::MatrixXd& A) {
    CooBuilder<double> coo(A.rows(), A.cols());
    for (Eigen::Index r = 0; r < A.rows(); ++r)
        for (Eigen::Index c = 0; c < A.cols(); ++c)
            if (A(r, c) != 0.0) coo.add(r, c, A(r, c));
    return coo.to_csr();
}

// Stable matrix with prescribed well-separated spectrum and a planted
// two-dimensional kernel, for dense/Krylov agreement checks.
struct Planted {
    Eigen::MatrixXd A;
    Eigen::MatrixXd kernel;  // n x 2
};

Planted planted_operator(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd V = Eigen::MatrixXd::Identity(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) V(i, j) += 0.25 * nd(rng) / std::sqrt(double(n));
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) D(i, i) = -0.11 * (i + 1);
    Eigen::MatrixXd M = V * D * V.inverse();
    Eigen::MatrixXd K(n, 2);
    for (int i = 0; i < n; ++i) {
        K(i, 0) = nd(rng);
        K(i, 1) = nd(rng);
    }
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(K);
    Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, 2);
    Eigen::MatrixXd P = Eigen::MatrixXd::Identity(n, n) - Q * Q.transpose();
    return {P * M * P, Q};
}

}  // namespace

TEST_CASE("dense eigendecomposition classifies kernel and gap") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd;
    const int n = 24;
    Eigen::MatrixXd V = Eigen::MatrixXd::Identity(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) V(i, j) += 0.2 * nd(rng);
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
    D(0, 0) = 0.0;
    for (int i = 1; i < n; ++i) D(i, i) = -0.3 - 0.2 * (i - 1);
    Eigen::MatrixXd A = V * D * V.inverse();

    auto res = eig_dense(A);
    CHECK(res.kernel_dim == 1);
    CHECK(res.gap == Approx(0.3).margin(1e-9));
    // sorted by real part descending
    for (std::size_t i = 1; i < res.eigenvalues.size(); ++i)
        CHECK(res.eigenvalues[i - 1].real() >= res.eigenvalues[i].real() - 1e-12);
    // eigenvector at the gap satisfies the eigenproblem
    REQUIRE(res.gap_vectors.cols() >= 1);
    Eigen::VectorXcd gv = res.gap_vectors.col(0);
    CHECK((A * gv + 0.3 * gv).norm() < 1e-8);
}

TEST_CASE("deflated dense eigendecomposition strips a planted kernel") {
    auto pl = planted_operator(60, 17);
    auto res = eig_dense_deflated(pl.A, pl.kernel);
    CHECK(res.kernel_dim == 2);
    auto raw = eig_dense(pl.A);
    CHECK(res.gap == Approx(raw.gap).epsilon(1e-8));
}

TEST_CASE("krylov-schur agrees with dense on leading eigenvalues") {
    auto pl = planted_operator(240, 23);
    const auto A = to_csr(pl.A);
    auto dense = eig_dense(pl.A);

    ArnoldiOptions opt;
    opt.zero_tol = 1e-10 * A.inf_norm();
    auto kry = eig_gap_arnoldi(A, pl.kernel.cast<Complex>(), 5, opt);

    // compare the slowest nonzero modes, skipping deflation leaks
    std::vector<Complex> dnz, knz;
    for (const auto& e : dense.eigenvalues)
        if (std::abs(e) >= dense.zero_tol) dnz.push_back(e);
    for (const auto& e : kry.eigenvalues)
        if (std::abs(e) >= opt.zero_tol) knz.push_back(e);
    REQUIRE(knz.size() >= 3);
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(std::abs(knz[i] - dnz[i]) < 1e-8 * std::max(1.0, std::abs(dnz[i])));
    CHECK(kry.gap == Approx(dense.gap).epsilon(1e-8));

    // the reported gap eigenvector is a genuine eigenvector
    REQUIRE(kry.gap_vectors.cols() >= 1);
    Eigen::VectorXcd gv = kry.gap_vectors.col(0);
    Eigen::VectorXcd Agv(gv.size());
    A.apply(gv.data(), Agv.data());
    CHECK((Agv - Complex(-kry.gap, knz[0].imag()) * gv).norm() < 1e-7);
}

TEST_CASE("krylov-schur reports non-convergence instead of degrading") {
    auto pl = planted_operator(120, 5);
    const auto A = to_csr(pl.A);
    ArnoldiOptions opt;
    opt.subspace = 12;
    opt.max_restarts = 0;  // starve the iteration
    opt.zero_tol = 1e-10 * A.inf_norm();
    CHECK_THROWS_AS(eig_gap_arnoldi(A, pl.kernel.cast<Complex>(), 6, opt), std::runtime_error);
}

TEST_CASE("rk4 propagation converges at fourth order") {
    auto pl = planted_operator(30, 41);
    const auto A = to_csr(pl.A);
    Eigen::VectorXd v0(30);
    std::mt19937_64 rng(9);
    std::normal_distribution<double> nd;
    for (int i = 0; i < 30; ++i) v0[i] = nd(rng);

    std::vector<double> grid = {0.0, 2.0};
    std::vector<std::pair<std::string, Eigen::RowVectorXd>> obs;
    Eigen::RowVectorXd f = Eigen::RowVectorXd::Ones(30);
    obs.emplace_back("sum", f);

    auto run = [&](double safety) {
        EvolveOptions o;
        o.safety = safety;
        return evolve(A, v0, grid, obs, Eigen::RowVectorXd(), o).values(1, 0);
    };
    const double ref = run(0.01);
    const double e1 = std::abs(run(0.8) - ref);
    const double e2 = std::abs(run(0.4) - ref);
    REQUIRE(e1 > 0.0);
    CHECK(e1 / e2 > std::pow(2.0, 3.5));
}

TEST_CASE("evolve preserves a left null functional and reports drift") {
    // build A with an exact left kernel: f^T A = 0
    const int n = 40;
    std::mt19937_64 rng(77);
    std::normal_distribution<double> nd;
    Eigen::MatrixXd M(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) M(i, j) = nd(rng) / std::sqrt(double(n));
    M -= 3.0 * Eigen::MatrixXd::Identity(n, n);
    Eigen::VectorXd fv = Eigen::VectorXd::Ones(n);
    Eigen::MatrixXd A = M - fv * (fv.transpose() * M) / double(n);
    const auto Acsr = to_csr(A);

    Eigen::VectorXd v0 = Eigen::VectorXd::Zero(n);
    v0[0] = 1.0;
    std::vector<double> grid = {0.0, 0.5, 1.0, 2.0, 4.0};
    std::vector<std::pair<std::string, Eigen::RowVectorXd>> obs;
    obs.emplace_back("first", Eigen::RowVectorXd::Unit(n, 0));
    auto ts = evolve(Acsr, v0, grid, obs, Eigen::RowVectorXd(fv.transpose()));
    CHECK(ts.trace_drift_rate < 1e-9);
    CHECK(ts.rho_est > 0.0);
}

TEST_CASE("power-law and decay fits recover planted exponents") {
    std::vector<std::pair<double, double>> pts;
    for (int i = 1; i <= 30; ++i) {
        const double x = 0.1 * i;
        pts.emplace_back(x, 2.7 * std::pow(x, -1.37));
    }
    auto f = fit_power_law(pts);
    CHECK(f.value == Approx(-1.37).margin(1e-10));
    CHECK(f.stderr_ < 1e-10);

    std::vector<double> t, y;
    for (int i = 0; i <= 200; ++i) {
        t.push_back(0.05 * i);
        y.push_back(0.125 + 3.0 * std::exp(-0.71 * t.back()));
    }
    auto g = fit_decay_exponent(t, y, 1.0, 8.0, DecayModel::Exponential, 0.125);
    CHECK(g.value == Approx(0.71).margin(1e-9));
    CHECK(g.window_lo == 1.0);
    CHECK(g.window_hi == 8.0);

    std::vector<double> t2, y2;
    for (int i = 1; i <= 300; ++i) {
        t2.push_back(0.01 * i);
        y2.push_back(0.004 + 1.3 * std::pow(t2.back(), -0.932));
    }
    auto h = fit_decay_exponent(t2, y2, 0.1, 2.0, DecayModel::PowerLaw, 0.004);
    CHECK(h.value == Approx(0.932).margin(1e-9));

    // nonpositive values after asymptote subtraction must refuse, not fit
    CHECK_THROWS_AS(fit_decay_exponent(t, y, 1.0, 8.0, DecayModel::Exponential, 10.0),
                    std::invalid_argument);
}

TEST_CASE("log time grid") {
    auto g = log_time_grid(0.01, 10.0, 7);
    REQUIRE(g.size() == 8);
    CHECK(g[0] == 0.0);
    CHECK(g[1] == Approx(0.01));
    CHECK(g.back() == Approx(10.0));
    CHECK_THROWS_AS(log_time_grid(0.0, 1.0, 5), std::invalid_argument);
}

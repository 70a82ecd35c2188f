#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "wdicke/gdicke.hpp"
#include "wdicke/spectral.hpp"

using namespace wdicke;
using Catch::Approx;

namespace {

JumpRates rates_with(double g1, double g2, double g3) {
    JumpRates r;
    r.gamma1 = g1;
    r.gamma2 = g2;
    r.gamma3 = g3;
    r.gamma3prime = g3;
    r.geometry.lattice = Lattice::AllToAll;
    return r;
}

double functional_annihilation(const Eigen::RowVectorXd& f, const CsrMatrix<double>& L) {
    Eigen::RowVectorXd out(L.cols);
    L.apply_transpose(f.data(), out.data());
    return out.cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("basis enumeration and dimensions") {
    for (int N = 1; N <= 8; ++N) {
        auto b = enumerate_basis(N);
        CHECK(b.dim() == (N + 1) * (N + 2) * (N + 3) / 6);
    }
    for (int N = 2; N <= 12; N += 2) {
        auto s = enumerate_basis(N, 0);
        CHECK(s.dim() == (N / 2 + 1) * (N / 2 + 1));
    }
    auto b = enumerate_basis(6, 0);
    // ordering: q2 descending, qz2 ascending; the vacuum row leads
    CHECK(b.states[0].q2 == 6);
    CHECK(b.states[0].qz2 == -6);
    CHECK(b.find(6, -6, 0) == 0);
    CHECK(b.find(6, -5, 0) == -1);  // parity-invalid index is absent
    CHECK(b.find(8, 0, 0) == -1);
}

TEST_CASE("multiplicities are exact and sum to 4^N") {
    for (int N = 1; N <= 8; ++N) {
        auto b = enumerate_basis(N);
        BigInt total = 0;
        for (const auto& s : b.states) total += multiplicity_exact(s, N);
        BigInt want = BigInt(1) << (2 * N);
        CHECK(total == want);
    }
    // spot values used by the observables
    CHECK(multiplicity_exact({10, -8, 0}, 10) == 10);          // single excitation diag
    CHECK(multiplicity_exact({8, -8, 0}, 10) == 90);           // single-excitation coherences
    CHECK(multiplicity({40, -38, 0}, 40) == Approx(40.0));
    CHECK(multiplicity({38, -38, 0}, 40) == Approx(40.0 * 39.0));
}

TEST_CASE("distinguished states have unit trace and known observables") {
    for (int N : {4, 10, 40, 80}) {
        auto b = enumerate_basis(N, 0);
        const auto tf = trace_functional(b);
        CHECK(tf.dot(vacuum_vector(b)) == Approx(1.0).epsilon(1e-14));
        CHECK(tf.dot(w_state_vector(b)) == Approx(1.0).epsilon(1e-14));
        CHECK(tf.dot(fully_up_vector(b)) == Approx(1.0).epsilon(1e-14));
        CHECK(tf.dot(mixed_vector(b)) == Approx(1.0).epsilon(1e-12));

        CHECK(magnetization_density(b, vacuum_vector(b)) == Approx(0.0).margin(1e-15));
        CHECK(magnetization_density(b, fully_up_vector(b)) == Approx(1.0).epsilon(1e-14));
        CHECK(magnetization_density(b, w_state_vector(b)) == Approx(1.0 / N).epsilon(1e-13));

        // pair correlator of the W state is exactly 2/N
        CHECK(xx_correlator(b, w_state_vector(b)) == Approx(2.0 / N).epsilon(1e-12));
        CHECK(xx_correlator(b, vacuum_vector(b)) == Approx(0.0).margin(1e-15));

        // <W|rho|W> functional: 1 on W, 0 on vacuum
        const auto wf = w_overlap_functional(b);
        CHECK(wf.dot(w_state_vector(b)) == Approx(1.0).epsilon(1e-13));
        CHECK(wf.dot(vacuum_vector(b)) == Approx(0.0).margin(1e-15));
    }
}

TEST_CASE("alpha distribution of the uniform mixture") {
    const int N = 8;
    auto b = enumerate_basis(N, 0);
    auto alpha = alpha_sz_distribution(b, mixed_vector(b));
    double sum = 0.0;
    for (const auto& [qz2, w] : alpha) sum += w;
    CHECK(sum == Approx(1.0).epsilon(1e-13));
    CHECK(alpha.at(-N) == 0.0);  // no vacuum weight in the uniform mixture
    // remaining rows carry binomial weights over 2^N - 1
    CHECK(alpha.at(0) == Approx(70.0 / 255.0).epsilon(1e-13));
    CHECK(alpha.at(-N + 2) == Approx(8.0 / 255.0).epsilon(1e-13));
}

TEST_CASE("generator requires the equal-rate closure") {
    auto b = enumerate_basis(4, 0);
    JumpRates r = rates_with(1.0, 1.0, 0.5);
    r.gamma3prime = 0.25;
    CHECK_THROWS_AS(build_alltoall_lindbladian(b, r), std::invalid_argument);
}

TEST_CASE("trace functional annihilates every assembled generator") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> ud(0.0, 2.0);
    for (int N : {5, 6, 13, 20}) {
        for (int rep = 0; rep < 3; ++rep) {
            auto rates = rates_with(ud(rng), ud(rng), ud(rng));
            auto bfull = enumerate_basis(N);
            auto L = build_alltoall_lindbladian(bfull, rates);
            CHECK(functional_annihilation(trace_functional(bfull), L) <
                  1e-10 * std::max(1.0, L.max_abs()));
            if (N % 2 == 0) {
                auto bsec = enumerate_basis(N, 0);
                auto Ls = build_alltoall_lindbladian(bsec, rates);
                CHECK(functional_annihilation(trace_functional(bsec), Ls) <
                      1e-10 * std::max(1.0, Ls.max_abs()));
            }
        }
    }
}

TEST_CASE("vacuum and w state are dark for all rates") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> ud(0.0, 3.0);
    for (int N : {4, 8, 14, 40}) {
        auto b = enumerate_basis(N, 0);
        for (int rep = 0; rep < 4; ++rep) {
            auto L = build_alltoall_lindbladian(b, rates_with(ud(rng), ud(rng), ud(rng)));
            const double scale = std::max(1.0, L.max_abs());
            CHECK(L.apply(Eigen::VectorXd(vacuum_vector(b))).cwiseAbs().maxCoeff() <
                  1e-12 * scale);
            CHECK(L.apply(Eigen::VectorXd(w_state_vector(b))).cwiseAbs().maxCoeff() <
                  1e-12 * scale);
        }
        // the uniform nonvacuum mixture is dark for the exchange-only generator
        auto L3 = build_alltoall_lindbladian(b, rates_with(0.0, 0.0, 1.0));
        CHECK(L3.apply(Eigen::VectorXd(mixed_vector(b))).cwiseAbs().maxCoeff() <
              1e-12 * std::max(1.0, L3.max_abs()));
    }
}

TEST_CASE("w component is conserved by the exchange-only generator") {
    const int N = 8;
    auto b = enumerate_basis(N, 0);
    auto L3 = build_alltoall_lindbladian(b, rates_with(0.0, 0.0, 1.0));

    // functional annihilation is the sharp statement
    CHECK(functional_annihilation(w_overlap_functional(b), L3) <
          1e-12 * std::max(1.0, L3.max_abs()));

    // and it holds along an integrated trajectory from a random mixture
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    Eigen::VectorXd v0 = Eigen::VectorXd::Zero(b.dim());
    double norm = 0.0;
    for (std::int64_t i = 0; i < b.dim(); ++i) {
        if (b.states[i].q2 != N) continue;  // diagonal rows only, a valid state
        v0[i] = ud(rng);
        norm += multiplicity(b.states[i], N) * v0[i];
    }
    v0 /= norm;
    std::vector<double> grid = {0.0, 0.5, 1.0, 2.0, 5.0};
    std::vector<std::pair<std::string, Eigen::RowVectorXd>> obs;
    obs.emplace_back("w_overlap", w_overlap_functional(b));
    auto ts = evolve(L3, v0, grid, obs, trace_functional(b));
    for (Eigen::Index i = 1; i < ts.values.rows(); ++i)
        CHECK(std::abs(ts.values(i, 0) - ts.values(0, 0)) < 1e-9);
    CHECK(ts.trace_drift_rate < 1e-9);
}

TEST_CASE("kernel dimension is exactly two without exchange") {
    for (int N : {8, 12}) {
        auto b = enumerate_basis(N, 0);
        auto L = build_alltoall_lindbladian(b, rates_with(1.0, 1.0, 0.0));
        auto res = eig_dense(L.dense(), 1e-10, false);
        CHECK(res.kernel_dim == 2);
        CHECK(res.gap > 0.0);
    }
}

TEST_CASE("conditioned collective gaps at N = 20") {
    const int N = 20;
    auto b = enumerate_basis(N, 0);
    Eigen::MatrixXd kern(b.dim(), 2);
    kern.col(0) = vacuum_vector(b);
    kern.col(1) = w_state_vector(b);

    auto gap_at = [&](double g3) {
        auto L = build_alltoall_lindbladian(b, rates_with(1.0, 1.0, g3));
        auto res = eig_dense_deflated(L.dense(), kern, 1e-10, false);
        return res.gap;
    };
    // pumping-only gap is exactly 2*gamma1 for the collective model
    CHECK(gap_at(0.0) == Approx(2.0).margin(1e-9));
    // frozen reference values at N*gamma3 in {1, 2, 5}
    CHECK(gap_at(1.0 / N) == Approx(1.0107).margin(2e-3));
    CHECK(gap_at(2.0 / N) == Approx(0.7367).margin(2e-3));
    CHECK(gap_at(5.0 / N) == Approx(0.3563).margin(2e-3));
}

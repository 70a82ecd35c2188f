#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <random>

#include "wdicke/twosite.hpp"

using namespace wdicke;
using Catch::Approx;

namespace {
constexpr double kR2 = 0.70710678118654752440;
}  // namespace

TEST_CASE("pair basis amplitudes") {
    auto s = two_site_state(TwoSiteState::Singlet00);
    auto t0 = two_site_state(TwoSiteState::Triplet10);
    CHECK(s[0] == 0.0);
    CHECK(s[1] == Approx(kR2).epsilon(1e-15));
    CHECK(s[2] == Approx(-kR2).epsilon(1e-15));
    CHECK(t0[1] == Approx(kR2).epsilon(1e-15));
    CHECK(t0[2] == Approx(kR2).epsilon(1e-15));
    CHECK(two_site_state(TwoSiteState::Triplet1m1)[0] == 1.0);
    CHECK(two_site_state(TwoSiteState::Triplet1p1)[3] == 1.0);
    // orthonormal
    Eigen::Matrix4d B;
    B.col(0) = s;
    B.col(1) = two_site_state(TwoSiteState::Triplet1m1);
    B.col(2) = t0;
    B.col(3) = two_site_state(TwoSiteState::Triplet1p1);
    CHECK((B.transpose() * B - Eigen::Matrix4d::Identity()).norm() < 1e-14);
}

TEST_CASE("jump matrices act as rank-one bond channels") {
    const auto L1 = jump_matrix(JumpFamily::L1);
    const auto L2 = jump_matrix(JumpFamily::L2);
    const auto L3 = jump_matrix(JumpFamily::L3);
    const auto L3p = jump_matrix(JumpFamily::L3prime);

    CHECK(L1(1, 1) == Approx(0.5).epsilon(1e-15));
    CHECK(L1(1, 2) == Approx(-0.5).epsilon(1e-15));
    CHECK(L1(2, 1) == Approx(0.5).epsilon(1e-15));
    CHECK(L1(2, 2) == Approx(-0.5).epsilon(1e-15));
    CHECK(L2(1, 3) == Approx(kR2).epsilon(1e-15));
    CHECK(L2(2, 3) == Approx(kR2).epsilon(1e-15));
    CHECK(L3(1, 3) == Approx(kR2).epsilon(1e-15));
    CHECK(L3(2, 3) == Approx(-kR2).epsilon(1e-15));
    CHECK(L3p(3, 1) == Approx(kR2).epsilon(1e-15));
    CHECK(L3p(3, 2) == Approx(-kR2).epsilon(1e-15));

    // every channel annihilates the triplet zero, the shared target state
    const auto t0 = two_site_state(TwoSiteState::Triplet10);
    for (auto f : kAllFamilies) CHECK((jump_matrix(f) * t0).norm() < 1e-15);
    // L1 moves the singlet onto the triplet zero with unit weight
    CHECK((L1 * two_site_state(TwoSiteState::Singlet00) - t0).norm() < 1e-15);
    // L3prime is the reversed singlet drain
    CHECK((L3p - two_site_state(TwoSiteState::Triplet1p1) *
                     two_site_state(TwoSiteState::Singlet00).transpose())
              .norm() < 1e-15);
    CHECK((L3p - L3.transpose()).norm() < 1e-15);
}

TEST_CASE("embedding addresses the right bits") {
    // L1 on sites (1,2) of a 3-site register: site 0 stays down, the bond
    // singlet on (1,2) maps onto the bond triplet zero.
    const auto A = embed_pair_operator<double>(jump_matrix(JumpFamily::L1), 1, 2, 3);
    Eigen::VectorXd psi = Eigen::VectorXd::Zero(8);
    psi[0b010] = kR2;   // up on site 1
    psi[0b100] = -kR2;  // up on site 2
    Eigen::VectorXd out = A.apply(psi);
    Eigen::VectorXd want = Eigen::VectorXd::Zero(8);
    want[0b010] = kR2;
    want[0b100] = kR2;
    CHECK((out - want).norm() < 1e-15);

    // same channel with the pair order flipped swaps the singlet sign
    const auto B = embed_pair_operator<double>(jump_matrix(JumpFamily::L1), 2, 1, 3);
    Eigen::VectorXd out2 = B.apply(psi);
    CHECK((out2 + want).norm() < 1e-15);

    // embedding is permutation-covariant on the triplet channels
    const auto C = embed_pair_operator<double>(jump_matrix(JumpFamily::L2), 0, 2, 4);
    Eigen::VectorXd phi = Eigen::VectorXd::Zero(16);
    phi[0b0101] = 1.0;  // up on 0 and 2
    Eigen::VectorXd o3 = C.apply(phi);
    CHECK(o3[0b0001] == Approx(kR2).epsilon(1e-14));
    CHECK(o3[0b0100] == Approx(kR2).epsilon(1e-14));
}

TEST_CASE("pair lists") {
    Geometry ata{Lattice::AllToAll, false};
    CHECK(pair_list(ata, 4).size() == 12);
    Geometry open{Lattice::Chain, false};
    CHECK(pair_list(open, 5).size() == 4);
    Geometry per{Lattice::Chain, true};
    CHECK(pair_list(per, 5).size() == 5);
    CHECK(pair_list(per, 2).size() == 1);  // a 2-site ring is a single bond
}

TEST_CASE("gauge conjugation composes additively in the phases") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ud(-3.0, 3.0);
    const int n = 4;
    const auto op = embed_pair_operator<double>(jump_matrix(JumpFamily::L3), 1, 3, n);
    GaugePhaseProfile p, q, pq;
    p.phi.resize(n);
    q.phi.resize(n);
    pq.phi.resize(n);
    for (int i = 0; i < n; ++i) {
        p.phi[i] = ud(rng);
        q.phi[i] = ud(rng);
        pq.phi[i] = p.phi[i] + q.phi[i];
    }
    const auto once = apply_gauge(pq, op);
    const auto twice = apply_gauge(p, apply_gauge(q, op));
    REQUIRE(once.col_idx == twice.col_idx);
    double worst = 0.0;
    for (std::size_t i = 0; i < once.vals.size(); ++i)
        worst = std::max(worst, std::abs(once.vals[i] - twice.vals[i]));
    CHECK(worst < 1e-12);

    // a uniform profile commutes with the excitation-preserving channel L1
    GaugePhaseProfile u;
    u.phi.assign(n, 0.77);
    const auto L1e = embed_pair_operator<double>(jump_matrix(JumpFamily::L1), 0, 1, n);
    const auto g = apply_gauge(u, L1e);
    double dev = 0.0;
    for (std::size_t i = 0; i < g.vals.size(); ++i)
        dev = std::max(dev, std::abs(g.vals[i] - std::complex<double>(L1e.vals[i])));
    CHECK(dev < 1e-14);
}

TEST_CASE("rate warnings") {
    JumpRates r;
    r.gamma3 = 1.0;
    r.gamma3prime = 0.5;
    CHECK_FALSE(rate_warnings(r).empty());
    r.gamma3prime = 1.0;
    CHECK(rate_warnings(r).empty());
}

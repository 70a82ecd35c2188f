#pragma once
// Two-site jump operators, their embedding into an n-site register, and
// site-local phase (gauge) conjugation.
//
// Basis conventions, used everywhere downstream:
//   * global kets are little-endian bitstrings: site k is bit k of the index,
//   * a pair (a,b) is addressed by r = s_a + 2*s_b in {0:dn dn, 1:up dn,
//     2:dn up, 3:up up}, site a in the low bit,
//   * |1,0> = (|up dn> + |dn up>)/sqrt2,  |0,0> = (|up dn> - |dn up>)/sqrt2.

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "wdicke/sparse.hpp"

namespace wdicke {

enum class TwoSiteState { Singlet00, Triplet1m1, Triplet10, Triplet1p1 };

inline Eigen::Vector4d two_site_state(TwoSiteState s) {
    const double r2 = 1.0 / std::sqrt(2.0);
    switch (s) {
        case TwoSiteState::Singlet00: return {0.0, r2, -r2, 0.0};
        case TwoSiteState::Triplet1m1: return {1.0, 0.0, 0.0, 0.0};
        case TwoSiteState::Triplet10: return {0.0, r2, r2, 0.0};
        case TwoSiteState::Triplet1p1: return {0.0, 0.0, 0.0, 1.0};
    }
    throw std::invalid_argument("two_site_state: bad label");
}

// The four dissipative channels acting on a pair:
//   L1       |1,0><0,0|   pumps the bond singlet into the triplet zero,
//   L2       |1,0><1,1|   drains double occupation into the triplet zero,
//   L3       |0,0><1,1|   drains double occupation into the singlet,
//   L3prime  |1,1><0,0|   refills double occupation from the singlet.
enum class JumpFamily { L1, L2, L3, L3prime };

inline Eigen::Matrix4d jump_matrix(JumpFamily f) {
    auto ket = [](TwoSiteState s) { return two_site_state(s); };
    switch (f) {
        case JumpFamily::L1:
            return ket(TwoSiteState::Triplet10) * ket(TwoSiteState::Singlet00).transpose();
        case JumpFamily::L2:
            return ket(TwoSiteState::Triplet10) * ket(TwoSiteState::Triplet1p1).transpose();
        case JumpFamily::L3:
            return ket(TwoSiteState::Singlet00) * ket(TwoSiteState::Triplet1p1).transpose();
        case JumpFamily::L3prime:
            return ket(TwoSiteState::Triplet1p1) * ket(TwoSiteState::Singlet00).transpose();
    }
    throw std::invalid_argument("jump_matrix: bad family");
}

enum class Lattice { AllToAll, Chain };

struct Geometry {
    Lattice lattice = Lattice::Chain;
    bool periodic = true;  // chains only
};

struct JumpRates {
    double gamma1 = 1.0;
    double gamma2 = 1.0;
    double gamma3 = 0.0;
    double gamma3prime = 0.0;
    Geometry geometry{};
    int n_sites = 0;
};

inline double rate_of(const JumpRates& r, JumpFamily f) {
    switch (f) {
        case JumpFamily::L1: return r.gamma1;
        case JumpFamily::L2: return r.gamma2;
        case JumpFamily::L3: return r.gamma3;
        case JumpFamily::L3prime: return r.gamma3prime;
    }
    return 0.0;
}

constexpr std::array<JumpFamily, 4> kAllFamilies = {JumpFamily::L1, JumpFamily::L2,
                                                    JumpFamily::L3, JumpFamily::L3prime};

// Directed pair list: every channel instance acts once per listed (a,b).
// All-to-all couples every ordered pair of distinct sites; a chain couples
// each bond once, in ascending orientation.
inline std::vector<std::pair<int, int>> pair_list(const Geometry& g, int n) {
    std::vector<std::pair<int, int>> out;
    if (g.lattice == Lattice::AllToAll) {
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                if (a != b) out.emplace_back(a, b);
    } else {
        for (int a = 0; a + 1 < n; ++a) out.emplace_back(a, a + 1);
        if (g.periodic && n > 2) out.emplace_back(n - 1, 0);
    }
    return out;
}

// Rate sanity notes, surfaced by the drivers. gamma3 != gamma3prime is legal
// for generic evolution but breaks the closures that assume a single gamma3.
inline std::vector<std::string> rate_warnings(const JumpRates& r) {
    std::vector<std::string> w;
    if (r.gamma3 != r.gamma3prime)
        w.push_back("gamma3 != gamma3prime: collective closure and dP/dt identity assume equal rates");
    if (r.gamma1 < 0 || r.gamma2 < 0 || r.gamma3 < 0 || r.gamma3prime < 0)
        w.push_back("negative rate: generator is not a valid dissipator");
    return w;
}

// Embed a 4x4 pair operator onto sites (a,b) of an n-site register.
// Column y of the result touches only bits a and b of y.
template <class S = double>
inline CsrMatrix<S> embed_pair_operator(const Eigen::Matrix<S, 4, 4>& m, int a, int b, int n) {
    if (a == b || a < 0 || b < 0 || a >= n || b >= n)
        throw std::invalid_argument("embed_pair_operator: bad sites");
    if (n > 24) throw std::invalid_argument("embed_pair_operator: register too large");
    const std::int64_t dim = std::int64_t(1) << n;
    CooBuilder<S> coo(dim, dim);
    for (std::int64_t y = 0; y < dim; ++y) {
        const int r_in = int((y >> a) & 1) + 2 * int((y >> b) & 1);
        const std::int64_t base = y & ~((std::int64_t(1) << a) | (std::int64_t(1) << b));
        for (int r_out = 0; r_out < 4; ++r_out) {
            const S v = m(r_out, r_in);
            if (std::abs(v) == 0.0) continue;
            const std::int64_t x =
                base | (std::int64_t(r_out & 1) << a) | (std::int64_t((r_out >> 1) & 1) << b);
            coo.add(x, y, v);
        }
    }
    return coo.to_csr();
}

struct GaugePhaseProfile {
    std::vector<double> phi;  // one phase per site
};

// Conjugate an embedded operator by U = prod_a exp(i phi_a n_a), n_a the
// local occupation. U is diagonal, so entries pick up the phase difference
// of their row and column occupation patterns. Composition in phi holds
// exactly: apply_gauge(p+q, op) == apply_gauge(p, apply_gauge(q, op)).
template <class S>
inline CsrMatrix<std::complex<double>> apply_gauge(const GaugePhaseProfile& g,
                                                   const CsrMatrix<S>& op) {
    const int n = static_cast<int>(g.phi.size());
    if ((std::int64_t(1) << n) != op.rows || op.rows != op.cols)
        throw std::invalid_argument("apply_gauge: profile length does not match operator");
    auto phase_sum = [&](std::int64_t x) {
        double s = 0.0;
        for (int k = 0; k < n; ++k)
            if ((x >> k) & 1) s += g.phi[k];
        return s;
    };
    std::vector<double> ph(op.rows);
    for (std::int64_t x = 0; x < op.rows; ++x) ph[x] = phase_sum(x);
    CsrMatrix<std::complex<double>> out;
    out.rows = op.rows;
    out.cols = op.cols;
    out.row_ptr = op.row_ptr;
    out.col_idx = op.col_idx;
    out.vals.resize(op.vals.size());
    for (std::int64_t r = 0; r < op.rows; ++r)
        for (std::int64_t p = op.row_ptr[r]; p < op.row_ptr[r + 1]; ++p) {
            const double d = ph[r] - ph[op.col_idx[p]];
            out.vals[p] = std::complex<double>(op.vals[p]) *
                          std::complex<double>(std::cos(d), std::sin(d));
        }
    return out;
}

}  // namespace wdicke

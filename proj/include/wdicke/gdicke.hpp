#pragma once
// Collective (generalized Dicke) representation of the all-to-all model.
//
// A density operator that is permutation symmetric is expanded over
// symmetrized products of single-site matrices with occupations
//   a = up/up, b = dn/dn, g = up/dn, d = dn/up,
// labelled by doubled integer quantum numbers (q2, qz2, sz2) = (2q, 2qz, 2sz):
//   a = (q2 + qz2)/2,  b = (q2 - qz2)/2,  g = (N - q2 + sz2)/2,
//   d = (N - q2 - sz2)/2,   all required to be nonnegative integers.
// The stored coefficient is "renormalized": the physical weight of an index
// is coefficient * multiplicity, with multiplicity the exact trinomial
// count of site assignments. sz2 is conserved by the dynamics.
//
// The generator below is the collective closure of the all-to-all pair
// dissipators, with every ordered pair (a,b), a != b, acting once. Matrix
// elements whose target index leaves the valid set are masked off; that
// boundary rule is exact, not an approximation.

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_int.hpp>

#include "wdicke/sparse.hpp"
#include "wdicke/twosite.hpp"

namespace wdicke {

using BigInt = boost::multiprecision::cpp_int;

struct GDickeIndex {
    int q2 = 0, qz2 = 0, sz2 = 0;  // doubled quantum numbers

    bool valid(int N) const {
        const int a = q2 + qz2, b = q2 - qz2, g = N - q2 + sz2, d = N - q2 - sz2;
        return a >= 0 && b >= 0 && g >= 0 && d >= 0 && a % 2 == 0 && g % 2 == 0;
    }
    bool operator==(const GDickeIndex& o) const {
        return q2 == o.q2 && qz2 == o.qz2 && sz2 == o.sz2;
    }
};

inline BigInt binomial_big(int n, int k) {
    if (k < 0 || k > n) return 0;
    BigInt r = 1;
    for (int i = 0; i < k; ++i) {
        r *= (n - i);
        r /= (i + 1);
    }
    return r;
}

// Exact count of site assignments carrying a given index.
inline BigInt multiplicity_exact(const GDickeIndex& idx, int N) {
    if (!idx.valid(N)) return 0;
    const int a = (idx.q2 + idx.qz2) / 2;
    const int b = (idx.q2 - idx.qz2) / 2;
    const int g = (N - idx.q2 + idx.sz2) / 2;
    return binomial_big(N, a) * binomial_big(N - a, b) * binomial_big(N - a - b, g);
}

inline double multiplicity(const GDickeIndex& idx, int N) {
    return multiplicity_exact(idx, N).convert_to<double>();
}

struct GDickeBasis {
    int N = 0;
    std::optional<int> sector_sz2;  // restrict to one conserved sz2 when set
    std::vector<GDickeIndex> states;
    std::unordered_map<std::int64_t, std::int32_t> lookup;

    std::int64_t key(int q2, int qz2, int sz2) const {
        const std::int64_t span = 2 * N + 1;
        return (std::int64_t(q2) * span + (qz2 + N)) * span + (sz2 + N);
    }
    // -1 when the index is outside the basis (invalid or out of sector)
    std::int32_t find(int q2, int qz2, int sz2) const {
        auto it = lookup.find(key(q2, qz2, sz2));
        return it == lookup.end() ? -1 : it->second;
    }
    std::int64_t dim() const { return static_cast<std::int64_t>(states.size()); }
};

// Ordering: q2 descending, then qz2 ascending, then sz2 ascending.
// Full basis size is (N+1)(N+2)(N+3)/6; the sz2=0 sector of even N has
// (N/2+1)^2 entries.
inline GDickeBasis enumerate_basis(int N, std::optional<int> sector_sz2 = std::nullopt) {
    if (N < 1) throw std::invalid_argument("enumerate_basis: N >= 1");
    GDickeBasis b;
    b.N = N;
    b.sector_sz2 = sector_sz2;
    for (int q2 = N; q2 >= 0; --q2)
        for (int qz2 = -q2; qz2 <= q2; ++qz2)
            for (int sz2 = -(N - q2); sz2 <= N - q2; ++sz2) {
                if (sector_sz2 && *sector_sz2 != sz2) continue;
                GDickeIndex idx{q2, qz2, sz2};
                if (!idx.valid(N)) continue;
                b.lookup.emplace(b.key(q2, qz2, sz2), static_cast<std::int32_t>(b.states.size()));
                b.states.push_back(idx);
            }
    return b;
}

struct GDickeVector {
    std::shared_ptr<const GDickeBasis> basis;
    Eigen::VectorXd coeffs;
};

// Collective Lindbladian on a generalized Dicke basis. Requires
// gamma3 == gamma3prime: the closure below merges L3 and L3prime into one
// family and is only valid at equal rates.
inline CsrMatrix<double> build_alltoall_lindbladian(const GDickeBasis& basis,
                                                    const JumpRates& rates) {
    if (rates.gamma3 != rates.gamma3prime)
        throw std::invalid_argument(
            "build_alltoall_lindbladian: collective closure needs gamma3 == gamma3prime");
    const int N = basis.N;
    const double g1 = rates.gamma1, g2 = rates.gamma2, g3 = rates.gamma3;
    CooBuilder<double> coo(basis.dim(), basis.dim());
    for (std::int64_t j = 0; j < basis.dim(); ++j) {
        const GDickeIndex s = basis.states[j];
        const double q = 0.5 * s.q2, qz = 0.5 * s.qz2, sz = 0.5 * s.sz2;
        const double hN = 0.5 * N;
        auto add = [&](int q2, int qz2, double v) {
            if (v == 0.0) return;
            const auto t = basis.find(q2, qz2, s.sz2);
            if (t >= 0) coo.add(t, j, v);  // invalid targets are masked off
        };
        // diagonal drains
        add(s.q2, s.qz2,
            -2.0 * g1 * ((hN - q) * (hN - q) - sz * sz)
                - g2 * ((hN + qz) * (hN + qz - 1.0) + sz * sz)
                - g3 * ((N - 1.0) * (hN + qz) - 2.0 * q * (hN - q)));
        // singlet pumping lowers q
        add(s.q2 - 2, s.qz2, 2.0 * g1 * ((hN - q + 1.0) * (hN - q + 1.0) - sz * sz));
        // pair drain lowers qz, optionally with q
        add(s.q2, s.qz2 - 2, g2 * (q + qz - 1.0) * (q - qz + 1.0));
        add(s.q2 - 2, s.qz2 - 2, g2 * ((hN - q + 1.0) * (hN - q + 1.0) - sz * sz));
        // singlet exchange (equal-rate L3 + L3prime closure)
        add(s.q2, s.qz2 + 2, g3 * (q + qz) * (q + qz + 1.0));
        add(s.q2, s.qz2 - 2, g3 * (q + qz - 1.0) * (q - qz + 1.0));
        add(s.q2 + 2, s.qz2 + 2, -g3 * (q + qz + 2.0) * (q + qz + 1.0));
        add(s.q2 - 2, s.qz2 - 2, -g3 * ((hN - q + 1.0) * (hN - q + 1.0) - sz * sz));
        add(s.q2 + 2, s.qz2, g3 * (q + qz + 1.0) * (q - qz + 1.0));
        add(s.q2 - 2, s.qz2, g3 * ((hN - q + 1.0) * (hN - q + 1.0) - sz * sz));
    }
    return coo.to_csr();
}

// --- distinguished states, as renormalized coefficient vectors ---

inline Eigen::VectorXd vacuum_vector(const GDickeBasis& b) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(b.dim());
    const auto i = b.find(b.N, -b.N, 0);
    if (i < 0) throw std::invalid_argument("vacuum_vector: vacuum outside basis sector");
    v[i] = 1.0;
    return v;
}

inline Eigen::VectorXd w_state_vector(const GDickeBasis& b) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(b.dim());
    const auto i1 = b.find(b.N, -b.N + 2, 0);
    const auto i2 = b.find(b.N - 2, -b.N + 2, 0);
    if (i1 < 0 || i2 < 0) throw std::invalid_argument("w_state_vector: outside basis sector");
    v[i1] = 1.0 / b.N;
    v[i2] = 1.0 / b.N;
    return v;
}

inline Eigen::VectorXd fully_up_vector(const GDickeBasis& b) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(b.dim());
    const auto i = b.find(b.N, b.N, 0);
    if (i < 0) throw std::invalid_argument("fully_up_vector: outside basis sector");
    v[i] = 1.0;
    return v;
}

// Uniform mixture over all nonvacuum diagonal product states.
inline Eigen::VectorXd mixed_vector(const GDickeBasis& b) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(b.dim());
    const double w = 1.0 / (std::pow(2.0, b.N) - 1.0);
    for (std::int64_t i = 0; i < b.dim(); ++i) {
        const auto& s = b.states[i];
        if (s.q2 == b.N && s.sz2 == 0 && s.qz2 != -b.N) v[i] = w;
    }
    return v;
}

// --- linear functionals over coefficient vectors ---

// Trace: entries with q2 = N (which forces sz2 = 0) weighted by multiplicity.
inline Eigen::RowVectorXd trace_functional(const GDickeBasis& b) {
    Eigen::RowVectorXd f = Eigen::RowVectorXd::Zero(b.dim());
    for (std::int64_t i = 0; i < b.dim(); ++i)
        if (b.states[i].q2 == b.N) f[i] = multiplicity(b.states[i], b.N);
    return f;
}

// Excitation density M = (1/N) sum_a (1+sigma_z_a)/2 read off the diagonal
// rows; fully up -> 1, W -> 1/N, vacuum -> 0.
inline Eigen::RowVectorXd m_functional(const GDickeBasis& b) {
    Eigen::RowVectorXd f = Eigen::RowVectorXd::Zero(b.dim());
    for (std::int64_t i = 0; i < b.dim(); ++i) {
        const auto& s = b.states[i];
        if (s.q2 == b.N) f[i] = multiplicity(s, b.N) * (0.5 + double(s.qz2) / (2.0 * b.N));
    }
    return f;
}

// <W|rho|W>: the two W rows weighted by multiplicity/N.
inline Eigen::RowVectorXd w_overlap_functional(const GDickeBasis& b) {
    Eigen::RowVectorXd f = Eigen::RowVectorXd::Zero(b.dim());
    const auto i1 = b.find(b.N, -b.N + 2, 0);
    const auto i2 = b.find(b.N - 2, -b.N + 2, 0);
    if (i1 < 0 || i2 < 0) throw std::invalid_argument("w_overlap_functional: outside sector");
    f[i1] = multiplicity(b.states[i1], b.N) / b.N;
    f[i2] = multiplicity(b.states[i2], b.N) / b.N;
    return f;
}

inline double magnetization_density(const GDickeBasis& b, const Eigen::VectorXd& v) {
    return m_functional(b).dot(v);
}

// Population per total magnetization: map keyed by qz2 = 2*S_z (doubled so
// odd N stays integral), weight = multiplicity * coefficient at q2 = N.
inline std::map<int, double> alpha_sz_distribution(const GDickeBasis& b,
                                                   const Eigen::VectorXd& v) {
    std::map<int, double> out;
    for (std::int64_t i = 0; i < b.dim(); ++i) {
        const auto& s = b.states[i];
        if (s.q2 == b.N) out[s.qz2] += multiplicity(s, b.N) * v[i];
    }
    return out;
}

// Population of one magnetization value as a linear functional (row vector);
// qz2 = 2*S_z.
inline Eigen::RowVectorXd alpha_functional(const GDickeBasis& b, int qz2) {
    Eigen::RowVectorXd f = Eigen::RowVectorXd::Zero(b.dim());
    for (std::int64_t i = 0; i < b.dim(); ++i) {
        const auto& s = b.states[i];
        if (s.q2 == b.N && s.qz2 == qz2) f[i] = multiplicity(s, b.N);
    }
    return f;
}

// Pair-averaged transverse correlator (1/binom(N,2)) sum_{a<b} <X_a X_b>.
// Reads the q2 = N-2 rows across sz2 in {-2, 0, 2}; sectors absent from the
// basis contribute zero (diagonal dynamics never populates sz2 != 0).
inline Eigen::RowVectorXd xx_functional(const GDickeBasis& b) {
    Eigen::RowVectorXd f = Eigen::RowVectorXd::Zero(b.dim());
    const double w = 2.0 / (double(b.N) * (b.N - 1.0));
    for (std::int64_t i = 0; i < b.dim(); ++i) {
        const auto& st = b.states[i];
        if (st.q2 == b.N - 2 && (st.sz2 == -2 || st.sz2 == 0 || st.sz2 == 2))
            f[i] = w * multiplicity(st, b.N);
    }
    return f;
}

inline double xx_correlator(const GDickeBasis& b, const Eigen::VectorXd& v) {
    return xx_functional(b).dot(v);
}

}  // namespace wdicke

#pragma once
// Vectorized Lindblad superoperators on the full 2^N register, with
// magnetization-difference block structure, the optional boundary-drive
// coherent term, order-parameter observables, and the translation-invariant
// (momentum-zero) sector used for gap scaling on chains.
//
// Vectorization convention: vec(rho)[(ket << N) | bra] = rho(ket, bra),
// kets little-endian in the site index. A real jump matrix L contributes
//   gamma * ( L (x) L  -  1/2 (L^T L (x) I + I (x) L^T L) )
// in this row-major composite indexing.

#include <algorithm>
#include <bit>
#include <cmath>
#include <complex>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "wdicke/sparse.hpp"
#include "wdicke/twosite.hpp"

namespace wdicke {

enum class Boundary { Periodic, Open };

inline std::vector<std::pair<int, int>> nn_bonds(int N, Boundary bc) {
    Geometry g{Lattice::Chain, bc == Boundary::Periodic};
    return pair_list(g, N);
}

// --- composite index sets ---

// A sorted set of (ket << N) | bra labels; the superoperator restricted to
// the set keeps exactly the matrix block these labels select.
struct CompositeSet {
    int N = 0;
    std::vector<std::int64_t> labels;  // sorted ascending

    std::int64_t find(std::int64_t label) const {
        auto it = std::lower_bound(labels.begin(), labels.end(), label);
        if (it == labels.end() || *it != label) return -1;
        return it - labels.begin();
    }
    std::int64_t dim() const { return static_cast<std::int64_t>(labels.size()); }
};

inline CompositeSet full_space(int N) {
    if (N < 2 || N > 8)
        throw std::invalid_argument("full_space: unblocked vectorization handled for N in [2,8]");
    CompositeSet s;
    s.N = N;
    const std::int64_t dim = std::int64_t(1) << (2 * N);
    s.labels.resize(dim);
    for (std::int64_t c = 0; c < dim; ++c) s.labels[c] = c;
    return s;
}

// Blocks labelled by delta_sz = popcount(ket) - popcount(bra); the jump
// families never couple different labels, so each block closes.
struct LiouvilleBlockMap {
    int N = 0;
    std::vector<std::vector<std::int64_t>> blocks;  // index delta_sz + N

    const std::vector<std::int64_t>& block(int delta_sz) const {
        if (delta_sz < -N || delta_sz > N)
            throw std::invalid_argument("LiouvilleBlockMap: label out of range");
        return blocks[delta_sz + N];
    }
};

inline LiouvilleBlockMap liouville_blocks(int N) {
    if (N < 2 || N > 10) throw std::invalid_argument("liouville_blocks: N in [2,10]");
    LiouvilleBlockMap map;
    map.N = N;
    map.blocks.assign(2 * N + 1, {});
    const std::int64_t dim = std::int64_t(1) << N;
    for (std::int64_t i = 0; i < dim; ++i)
        for (std::int64_t j = 0; j < dim; ++j) {
            const int d = std::popcount(std::uint64_t(i)) - std::popcount(std::uint64_t(j));
            map.blocks[d + N].push_back((i << N) | j);
        }
    return map;
}

inline CompositeSet delta_sz_block(int N, int delta_sz) {
    if (N < 2 || N > 10) throw std::invalid_argument("delta_sz_block: N in [2,10]");
    CompositeSet s;
    s.N = N;
    const std::int64_t dim = std::int64_t(1) << N;
    for (std::int64_t i = 0; i < dim; ++i)
        for (std::int64_t j = 0; j < dim; ++j)
            if (std::popcount(std::uint64_t(i)) - std::popcount(std::uint64_t(j)) == delta_sz)
                s.labels.push_back((i << N) | j);
    return s;
}

// Single spin-up kets on both sides, ordered ket-major: label (x, y) at
// position x*N + y.
inline CompositeSet single_spinup_set(int N) {
    if (N < 2 || N > 24) throw std::invalid_argument("single_spinup_set: N in [2,24]");
    CompositeSet s;
    s.N = N;
    for (int x = 0; x < N; ++x)
        for (int y = 0; y < N; ++y)
            s.labels.push_back((std::int64_t(1) << (x + N)) | (std::int64_t(1) << y));
    std::sort(s.labels.begin(), s.labels.end());
    return s;
}

// --- assembly engine ---

namespace detail {

struct FamilyAction {
    double rate = 0.0;
    // column r_in -> list of (r_out, value); K = L^T L
    std::array<std::vector<std::pair<int, double>>, 4> L, K;
};

inline std::vector<FamilyAction> family_actions(const JumpRates& rates) {
    std::vector<FamilyAction> out;
    for (auto f : kAllFamilies) {
        const double g = rate_of(rates, f);
        if (g == 0.0) continue;
        FamilyAction fa;
        fa.rate = g;
        const Eigen::Matrix4d L = jump_matrix(f);
        const Eigen::Matrix4d K = L.transpose() * L;
        for (int c = 0; c < 4; ++c)
            for (int r = 0; r < 4; ++r) {
                if (L(r, c) != 0.0) fa.L[c].emplace_back(r, L(r, c));
                if (K(r, c) != 0.0) fa.K[c].emplace_back(r, K(r, c));
            }
        out.push_back(std::move(fa));
    }
    return out;
}

inline std::int64_t replace_bits(std::int64_t word, int a, int b, int code) {
    word &= ~((std::int64_t(1) << a) | (std::int64_t(1) << b));
    return word | (std::int64_t(code & 1) << a) | (std::int64_t((code >> 1) & 1) << b);
}

// Dissipative part over an arbitrary composite set. Targets outside the set
// are dropped, which is exactly the matrix block the set selects.
inline CsrMatrix<double> assemble_dissipative(const CompositeSet& set,
                                              const std::vector<std::pair<int, int>>& pairs,
                                              const JumpRates& rates) {
    const int N = set.N;
    const auto families = family_actions(rates);
    CooBuilder<double> coo(set.dim(), set.dim());
    const std::int64_t bra_mask = (std::int64_t(1) << N) - 1;
    for (std::int64_t c = 0; c < set.dim(); ++c) {
        const std::int64_t label = set.labels[c];
        const std::int64_t i = label >> N, j = label & bra_mask;
        for (const auto& [a, b] : pairs) {
            const int ri = int((i >> a) & 1) + 2 * int((i >> b) & 1);
            const int rj = int((j >> a) & 1) + 2 * int((j >> b) & 1);
            for (const auto& fam : families) {
                for (const auto& [roi, vi] : fam.L[ri])
                    for (const auto& [roj, vj] : fam.L[rj]) {
                        const std::int64_t ii = replace_bits(i, a, b, roi);
                        const std::int64_t jj = replace_bits(j, a, b, roj);
                        const std::int64_t t = set.find((ii << N) | jj);
                        if (t >= 0) coo.add(t, c, fam.rate * vi * vj);
                    }
                for (const auto& [ro, v] : fam.K[ri]) {
                    const std::int64_t ii = replace_bits(i, a, b, ro);
                    const std::int64_t t = set.find((ii << N) | j);
                    if (t >= 0) coo.add(t, c, -0.5 * fam.rate * v);
                }
                for (const auto& [ro, v] : fam.K[rj]) {
                    const std::int64_t jj = replace_bits(j, a, b, ro);
                    const std::int64_t t = set.find((i << N) | jj);
                    if (t >= 0) coo.add(t, c, -0.5 * fam.rate * v);
                }
            }
        }
    }
    return coo.to_csr();
}

}  // namespace detail

// --- coherent boundary drive ---

struct CoherentTerm {
    bool enabled = false;
    double strength = 1.0;
};

// H = (strength/sqrt2) (sigma^x_0 Pi_0 - Pi_0 sigma^x_{N-1}), with Pi_0 the
// projector onto no excitation among the interior sites 1..N-2. The two
// parts commute with their own Pi_0 factors (disjoint sites), so H is real
// symmetric; H annihilates the uniform single-excitation state.
inline CsrMatrix<double> coherent_hamiltonian(int N, double strength = 1.0) {
    if (N < 3 || N > 10) throw std::invalid_argument("coherent_hamiltonian: N in [3,10]");
    const std::int64_t dim = std::int64_t(1) << N;
    const std::int64_t interior = ((dim - 1) >> 1) & ~std::int64_t(1);  // bits 1..N-2
    CooBuilder<double> coo(dim, dim);
    const double w = strength / std::sqrt(2.0);
    for (std::int64_t y = 0; y < dim; ++y) {
        if ((y & interior) != 0) continue;  // Pi_0 kills interior excitations
        coo.add(y ^ 1, y, w);                           // sigma^x on site 0
        coo.add(y ^ (std::int64_t(1) << (N - 1)), y, -w);  // minus sigma^x on site N-1
    }
    return coo.to_csr();
}

// --- superoperator builders ---

inline CsrMatrix<double> build_nn_superoperator(int N, const JumpRates& rates, Boundary bc,
                                                std::optional<int> block = std::nullopt) {
    if (N < 2 || N > 10)
        throw std::invalid_argument("build_nn_superoperator: N in [2,10]");
    const CompositeSet set = block ? delta_sz_block(N, *block) : full_space(N);
    return detail::assemble_dissipative(set, nn_bonds(N, bc), rates);
}

// Complex variant with the coherent boundary drive; the drive couples
// neighboring delta_sz blocks, so combining it with a block label is refused.
inline CsrMatrix<Complex> build_nn_superoperator(int N, const JumpRates& rates, Boundary bc,
                                                 std::optional<int> block,
                                                 const CoherentTerm& ct) {
    if (block && ct.enabled)
        throw std::invalid_argument(
            "build_nn_superoperator: the coherent drive couples delta_sz blocks; "
            "build it unblocked");
    const CompositeSet set = block ? delta_sz_block(N, *block) : full_space(N);
    const auto dissipative = detail::assemble_dissipative(set, nn_bonds(N, bc), rates);
    CooBuilder<Complex> coo(set.dim(), set.dim());
    for (std::int64_t r = 0; r < dissipative.rows; ++r)
        for (std::int64_t p = dissipative.row_ptr[r]; p < dissipative.row_ptr[r + 1]; ++p)
            coo.add(r, dissipative.col_idx[p], Complex(dissipative.vals[p], 0.0));
    if (ct.enabled) {
        const auto H = coherent_hamiltonian(N, ct.strength);
        // column-major access to H = its row structure (H symmetric)
        const std::int64_t bra_mask = (std::int64_t(1) << N) - 1;
        for (std::int64_t c = 0; c < set.dim(); ++c) {
            const std::int64_t i = set.labels[c] >> N, j = set.labels[c] & bra_mask;
            for (std::int64_t p = H.row_ptr[i]; p < H.row_ptr[i + 1]; ++p) {
                // -i H rho: note H(x, i) = H(i, x) by symmetry
                coo.add((std::int64_t(H.col_idx[p]) << N) | j, c,
                        Complex(0.0, -H.vals[p]));
            }
            for (std::int64_t p = H.row_ptr[j]; p < H.row_ptr[j + 1]; ++p) {
                // +i rho H: contributes along the bra index
                coo.add((i << N) | H.col_idx[p], c, Complex(0.0, H.vals[p]));
            }
        }
    }
    return coo.to_csr();
}

inline CsrMatrix<double> build_alltoall_superoperator(int N, const JumpRates& rates) {
    if (N < 2 || N > 6)
        throw std::invalid_argument("build_alltoall_superoperator: oracle capped at N = 6");
    Geometry g{Lattice::AllToAll, false};
    return detail::assemble_dissipative(full_space(N), pair_list(g, N), rates);
}

// Direct assembly of the single-excitation coherence sector (dimension N^2,
// label (x, y) at x*N + y). The restriction is invariant dynamics when
// gamma3prime = 0; with gamma3prime > 0 it is the exact diagonal block of
// the full generator, losing weight to the two-excitation sector.
inline CsrMatrix<double> single_spinup_superoperator(int N, const JumpRates& rates, Boundary bc) {
    return detail::assemble_dissipative(single_spinup_set(N), nn_bonds(N, bc), rates);
}

// Extract the same sector out of an already-built unblocked superoperator.
inline CsrMatrix<double> project_single_spinup(const CsrMatrix<double>& S, int N) {
    const std::int64_t dim = std::int64_t(1) << (2 * N);
    if (S.rows != dim || S.cols != dim)
        throw std::invalid_argument("project_single_spinup: expects the unblocked superoperator");
    const auto set = single_spinup_set(N);
    std::unordered_map<std::int64_t, std::int64_t> pos;
    // map composite -> x*N + y ordering to keep the documented layout
    for (int x = 0; x < N; ++x)
        for (int y = 0; y < N; ++y)
            pos[(std::int64_t(1) << (x + N)) | (std::int64_t(1) << y)] = x * N + y;
    CooBuilder<double> coo(N * N, N * N);
    for (const auto& [label, row] : pos)
        for (std::int64_t p = S.row_ptr[label]; p < S.row_ptr[label + 1]; ++p) {
            auto it = pos.find(S.col_idx[p]);
            if (it != pos.end()) coo.add(row, it->second, S.vals[p]);
        }
    return coo.to_csr();
}

// --- density matrices and observables ---

struct DensityMatrix {
    int n_sites = 0;
    Eigen::MatrixXcd rho;

    static DensityMatrix pure(const Eigen::VectorXcd& psi) {
        DensityMatrix d;
        d.n_sites = std::bit_width(std::uint64_t(psi.size())) - 1;
        if ((std::int64_t(1) << d.n_sites) != psi.size())
            throw std::invalid_argument("DensityMatrix::pure: dimension not a power of two");
        d.rho = psi * psi.adjoint();
        return d;
    }
    static DensityMatrix from_vector(const Eigen::VectorXcd& v, int N) {
        const std::int64_t dim = std::int64_t(1) << N;
        if (v.size() != dim * dim) throw std::invalid_argument("from_vector: size mismatch");
        DensityMatrix d;
        d.n_sites = N;
        d.rho.resize(dim, dim);
        for (std::int64_t i = 0; i < dim; ++i)
            for (std::int64_t j = 0; j < dim; ++j) d.rho(i, j) = v[(i << N) | j];
        return d;
    }
    Eigen::VectorXcd vectorized() const {
        const std::int64_t dim = rho.rows();
        Eigen::VectorXcd v(dim * dim);
        for (std::int64_t i = 0; i < dim; ++i)
            for (std::int64_t j = 0; j < dim; ++j) v[(i << n_sites) | j] = rho(i, j);
        return v;
    }
    double hermiticity_defect() const { return (rho - rho.adjoint()).cwiseAbs().maxCoeff(); }
    double trace_defect() const { return std::abs(rho.trace() - Complex(1.0)); }
    double min_eigenvalue() const {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(0.5 * (rho + rho.adjoint()));
        return es.eigenvalues().minCoeff();
    }
};

namespace detail {
inline int sites_of(const Eigen::MatrixXcd& rho) {
    const int N = std::bit_width(std::uint64_t(rho.rows())) - 1;
    if ((std::int64_t(1) << N) != rho.rows() || rho.rows() != rho.cols())
        throw std::invalid_argument("density matrix dimension not a power of two");
    return N;
}
}  // namespace detail

// Bond-averaged order parameter
//   P = (1/(N-1)) sum_bonds 1/2 (P_a^dn + P_b^dn + sigma_a^+ sigma_b^- + h.c.),
// the projector onto the dark pair states of each bond. The 1/(N-1)
// normalization is kept on rings as well (N bonds), matching the chain
// convention in which both the vacuum and the uniform single-excitation
// state sit at P = 1 on open chains.
inline double order_parameter_P(const Eigen::MatrixXcd& rho, Boundary bc) {
    const int N = detail::sites_of(rho);
    const std::int64_t dim = rho.rows();
    double tot = 0.0;
    for (const auto& [a, b] : nn_bonds(N, bc)) {
        for (std::int64_t x = 0; x < dim; ++x) {
            const int sa = int((x >> a) & 1), sb = int((x >> b) & 1);
            tot += 0.5 * ((1 - sa) + (1 - sb)) * rho(x, x).real();
            if (sa == 1 && sb == 0) {
                const std::int64_t y = x ^ (std::int64_t(1) << a) ^ (std::int64_t(1) << b);
                tot += (rho(y, x) + rho(x, y)).real() * 0.5;
            }
        }
    }
    return tot / (N - 1);
}

// Companion weights: the bond-averaged singlet population and the
// doubly-excited bond population, same normalization as P.
inline double order_parameter_P00(const Eigen::MatrixXcd& rho, Boundary bc) {
    const int N = detail::sites_of(rho);
    const std::int64_t dim = rho.rows();
    double tot = 0.0;
    for (const auto& [a, b] : nn_bonds(N, bc)) {
        for (std::int64_t x = 0; x < dim; ++x) {
            const int sa = int((x >> a) & 1), sb = int((x >> b) & 1);
            if (sa + sb != 1) continue;
            const std::int64_t y = x ^ (std::int64_t(1) << a) ^ (std::int64_t(1) << b);
            tot += 0.5 * (rho(x, x) - rho(y, x)).real();
        }
    }
    return tot / (N - 1);
}

inline double order_parameter_P11(const Eigen::MatrixXcd& rho, Boundary bc) {
    const int N = detail::sites_of(rho);
    const std::int64_t dim = rho.rows();
    double tot = 0.0;
    for (const auto& [a, b] : nn_bonds(N, bc)) {
        for (std::int64_t x = 0; x < dim; ++x)
            if (((x >> a) & 1) && ((x >> b) & 1)) tot += rho(x, x).real();
    }
    return tot / (N - 1);
}

// Exact drain identity for the order parameter: on position-diagonal
// single-excitation mixtures (and the states they relax through),
//   d<P>/dt = (gamma1 - gamma3prime (Z-1)/2) <P00>,
// Z the lattice coordination. The left side is evaluated from one
// superoperator application; the right side from the state. On generic
// pure states an extra coherence term breaks the identity; that failure is
// physical, not numerical.
inline std::pair<double, double> check_dPdt_identity(const DensityMatrix& rho,
                                                     const JumpRates& rates, int Z) {
    const int N = rho.n_sites;
    const Boundary bc =
        rates.geometry.lattice == Lattice::Chain && !rates.geometry.periodic
            ? Boundary::Open
            : Boundary::Periodic;
    const auto S = rates.geometry.lattice == Lattice::AllToAll
                       ? build_alltoall_superoperator(N, rates)
                       : build_nn_superoperator(N, rates, bc);
    const Eigen::VectorXcd dv = S.apply(Eigen::VectorXcd(rho.vectorized()));
    Eigen::MatrixXcd drho(rho.rho.rows(), rho.rho.cols());
    for (std::int64_t i = 0; i < rho.rho.rows(); ++i)
        for (std::int64_t j = 0; j < rho.rho.cols(); ++j) drho(i, j) = dv[(i << N) | j];
    const double lhs = order_parameter_P(drho, bc);
    const double rhs =
        (rates.gamma1 - rates.gamma3prime * (Z - 1) / 2.0) * order_parameter_P00(rho.rho, bc);
    return {lhs, rhs};
}

// --- functionals over vectorized states ---

template <class V>
Eigen::RowVector<V, Eigen::Dynamic> composite_trace_functional(int N) {
    const std::int64_t dim = std::int64_t(1) << N;
    Eigen::RowVector<V, Eigen::Dynamic> f =
        Eigen::RowVector<V, Eigen::Dynamic>::Zero(dim * dim);
    for (std::int64_t i = 0; i < dim; ++i) f[(i << N) | i] = V(1.0);
    return f;
}

template <class V>
Eigen::RowVector<V, Eigen::Dynamic> composite_m_functional(int N) {
    const std::int64_t dim = std::int64_t(1) << N;
    Eigen::RowVector<V, Eigen::Dynamic> f =
        Eigen::RowVector<V, Eigen::Dynamic>::Zero(dim * dim);
    for (std::int64_t i = 0; i < dim; ++i)
        f[(i << N) | i] = V(double(std::popcount(std::uint64_t(i))) / N);
    return f;
}

// Population of the popcount = k magnetization sector
template <class V>
Eigen::RowVector<V, Eigen::Dynamic> composite_popcount_functional(int N, int k) {
    const std::int64_t dim = std::int64_t(1) << N;
    Eigen::RowVector<V, Eigen::Dynamic> f =
        Eigen::RowVector<V, Eigen::Dynamic>::Zero(dim * dim);
    for (std::int64_t i = 0; i < dim; ++i)
        if (std::popcount(std::uint64_t(i)) == k) f[(i << N) | i] = V(1.0);
    return f;
}

// Pair-averaged <X_a X_b>, matching the collective-basis convention
template <class V>
Eigen::RowVector<V, Eigen::Dynamic> composite_xx_functional(int N) {
    const std::int64_t dim = std::int64_t(1) << N;
    Eigen::RowVector<V, Eigen::Dynamic> f =
        Eigen::RowVector<V, Eigen::Dynamic>::Zero(dim * dim);
    const double w = 2.0 / (double(N) * (N - 1.0));
    for (int a = 0; a < N; ++a)
        for (int b = a + 1; b < N; ++b) {
            const std::int64_t m = (std::int64_t(1) << a) | (std::int64_t(1) << b);
            for (std::int64_t i = 0; i < dim; ++i) f[(i << N) | (i ^ m)] += V(w);
        }
    return f;
}

// <psi| rho |psi> as a linear functional of vec(rho)
inline Eigen::RowVectorXcd state_overlap_functional(const Eigen::VectorXcd& psi) {
    const std::int64_t dim = psi.size();
    const int N = std::bit_width(std::uint64_t(dim)) - 1;
    Eigen::RowVectorXcd f = Eigen::RowVectorXcd::Zero(dim * dim);
    for (std::int64_t i = 0; i < dim; ++i) {
        if (psi[i] == Complex(0.0)) continue;
        for (std::int64_t j = 0; j < dim; ++j)
            if (psi[j] != Complex(0.0)) f[(i << N) | j] = std::conj(psi[i]) * psi[j];
    }
    return f;
}

inline Eigen::VectorXcd w_state_ket(int N) {
    const std::int64_t dim = std::int64_t(1) << N;
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(dim);
    for (int x = 0; x < N; ++x) psi[std::int64_t(1) << x] = 1.0 / std::sqrt(double(N));
    return psi;
}

// --- translation-invariant sector (momentum zero, delta_sz = 0) ---
//
// Orbits of (ket, bra) under simultaneous cyclic shift on a ring; the
// sector basis vector of an orbit O of size s is (1/sqrt s) times the sum
// of its members, so the sector matrix element picks up sqrt(s_src/s_tgt).
// The slowest relaxation out of translation-symmetric initial states lives
// here; the sector reproduces the full delta_sz = 0 gap.
struct TranslationSector {
    int N = 0;
    std::vector<std::uint64_t> reps;  // canonical member per orbit
    std::vector<int> sizes;
    std::unordered_map<std::uint64_t, std::int64_t> orbit_of;
    CsrMatrix<double> op;
    Eigen::VectorXd vacuum, w_state, fully_up;
    Eigen::RowVectorXd trace_func, m_func;
};

namespace detail {

inline std::uint64_t rot1(std::uint64_t x, int N) {
    return ((x << 1) | (x >> (N - 1))) & ((std::uint64_t(1) << N) - 1);
}

inline std::uint64_t canon_pair(std::uint64_t i, std::uint64_t j, int N, int* size = nullptr) {
    std::uint64_t best = (i << N) | j;
    std::uint64_t ci = i, cj = j;
    int period = N;
    for (int r = 1; r < N; ++r) {
        ci = rot1(ci, N);
        cj = rot1(cj, N);
        const std::uint64_t key = (ci << N) | cj;
        if (key == ((i << N) | j) && period == N) period = r;
        best = std::min(best, key);
    }
    if (size) *size = period;
    return best;
}

}  // namespace detail

inline TranslationSector build_translation_sector(int N, const JumpRates& rates) {
    if (N < 3 || N > 14) throw std::invalid_argument("build_translation_sector: N in [3,14]");
    TranslationSector ts;
    ts.N = N;
    const std::uint64_t dim = std::uint64_t(1) << N;
    // enumerate orbits of equal-popcount pairs
    std::vector<std::vector<std::uint64_t>> by_pc(N + 1);
    for (std::uint64_t x = 0; x < dim; ++x) by_pc[std::popcount(x)].push_back(x);
    for (int k = 0; k <= N; ++k)
        for (std::uint64_t i : by_pc[k])
            for (std::uint64_t j : by_pc[k]) {
                int sz = 0;
                const std::uint64_t key = detail::canon_pair(i, j, N, &sz);
                if (ts.orbit_of.emplace(key, ts.reps.size()).second) {
                    ts.reps.push_back(key);
                    ts.sizes.push_back(sz);
                }
            }
    const std::int64_t D = ts.reps.size();

    // assemble on orbit representatives
    const auto families = detail::family_actions(rates);
    const auto bonds = nn_bonds(N, Boundary::Periodic);
    CooBuilder<double> coo(D, D);
    const std::uint64_t bra_mask = dim - 1;
    auto push = [&](std::int64_t src, std::uint64_t ii, std::uint64_t jj, double w) {
        const std::uint64_t key = detail::canon_pair(ii, jj, N);
        const auto it = ts.orbit_of.find(key);
        if (it == ts.orbit_of.end()) return;  // cannot happen within delta_sz = 0
        const std::int64_t tgt = it->second;
        coo.add(tgt, src, w * std::sqrt(double(ts.sizes[src]) / double(ts.sizes[tgt])));
    };
    for (std::int64_t c = 0; c < D; ++c) {
        const std::uint64_t i = ts.reps[c] >> N, j = ts.reps[c] & bra_mask;
        for (const auto& [a, b] : bonds) {
            const int ri = int((i >> a) & 1) + 2 * int((i >> b) & 1);
            const int rj = int((j >> a) & 1) + 2 * int((j >> b) & 1);
            for (const auto& fam : families) {
                for (const auto& [roi, vi] : fam.L[ri])
                    for (const auto& [roj, vj] : fam.L[rj])
                        push(c, detail::replace_bits(std::int64_t(i), a, b, roi),
                             detail::replace_bits(std::int64_t(j), a, b, roj),
                             fam.rate * vi * vj);
                for (const auto& [ro, v] : fam.K[ri])
                    push(c, detail::replace_bits(std::int64_t(i), a, b, ro), j,
                         -0.5 * fam.rate * v);
                for (const auto& [ro, v] : fam.K[rj])
                    push(c, i, detail::replace_bits(std::int64_t(j), a, b, ro),
                         -0.5 * fam.rate * v);
            }
        }
    }
    ts.op = coo.to_csr();

    // distinguished vectors and functionals
    ts.vacuum = Eigen::VectorXd::Zero(D);
    ts.w_state = Eigen::VectorXd::Zero(D);
    ts.fully_up = Eigen::VectorXd::Zero(D);
    ts.trace_func = Eigen::RowVectorXd::Zero(D);
    ts.m_func = Eigen::RowVectorXd::Zero(D);
    ts.vacuum[ts.orbit_of.at(0)] = 1.0;
    ts.fully_up[ts.orbit_of.at(((dim - 1) << N) | (dim - 1))] = 1.0;
    for (std::int64_t o = 0; o < D; ++o) {
        const std::uint64_t i = ts.reps[o] >> N, j = ts.reps[o] & bra_mask;
        const double rs = std::sqrt(double(ts.sizes[o]));
        if (std::popcount(i) == 1 && std::popcount(j) == 1) ts.w_state[o] = rs / N;
        if (i == j) {
            ts.trace_func[o] = rs;
            ts.m_func[o] = rs * double(std::popcount(i)) / N;
        }
    }
    return ts;
}

}  // namespace wdicke

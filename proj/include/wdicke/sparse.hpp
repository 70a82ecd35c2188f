#pragma once
// Minimal CSR sparse matrix with a COO assembly stage.
//
// Conventions kept throughout the library:
//   * column indices strictly increasing within each row,
//   * entries with |v| <= drop_tol are dropped at assembly (no explicit zeros),
//   * matvec accepts a vector of wider scalar than the matrix
//     (a real generator applied to a complex state).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace wdicke {

using Complex = std::complex<double>;

template <class S>
struct CsrMatrix {
    std::int64_t rows = 0;
    std::int64_t cols = 0;
    std::vector<std::int64_t> row_ptr;  // size rows+1
    std::vector<std::int64_t> col_idx;
    std::vector<S> vals;

    std::int64_t nnz() const { return static_cast<std::int64_t>(vals.size()); }

    // y = A x, with x/y of scalar V (V = S, or complex when S is real).
    template <class V>
    void apply(const V* x, V* y) const {
        for (std::int64_t r = 0; r < rows; ++r) {
            V acc{};
            for (std::int64_t p = row_ptr[r]; p < row_ptr[r + 1]; ++p)
                acc += vals[p] * x[col_idx[p]];
            y[r] = acc;
        }
    }

    template <class V>
    Eigen::Vector<V, Eigen::Dynamic> apply(const Eigen::Vector<V, Eigen::Dynamic>& x) const {
        if (x.size() != cols) throw std::invalid_argument("CsrMatrix::apply: size mismatch");
        Eigen::Vector<V, Eigen::Dynamic> y(rows);
        apply(x.data(), y.data());
        return y;
    }

    // y = A^T x (used for row functionals f -> f A)
    template <class V>
    void apply_transpose(const V* x, V* y) const {
        for (std::int64_t c = 0; c < cols; ++c) y[c] = V{};
        for (std::int64_t r = 0; r < rows; ++r)
            for (std::int64_t p = row_ptr[r]; p < row_ptr[r + 1]; ++p)
                y[col_idx[p]] += vals[p] * x[r];
    }

    double inf_norm() const {  // max absolute row sum
        double best = 0.0;
        for (std::int64_t r = 0; r < rows; ++r) {
            double s = 0.0;
            for (std::int64_t p = row_ptr[r]; p < row_ptr[r + 1]; ++p) s += std::abs(vals[p]);
            best = std::max(best, s);
        }
        return best;
    }

    double max_abs() const {
        double best = 0.0;
        for (const S& v : vals) best = std::max(best, std::abs(v));
        return best;
    }

    Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> dense() const {
        Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic> M =
            Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>::Zero(rows, cols);
        for (std::int64_t r = 0; r < rows; ++r)
            for (std::int64_t p = row_ptr[r]; p < row_ptr[r + 1]; ++p) M(r, col_idx[p]) = vals[p];
        return M;
    }
};

// Accumulating COO builder; duplicate (r,c) entries are summed at to_csr().
template <class S>
class CooBuilder {
  public:
    CooBuilder(std::int64_t rows, std::int64_t cols) : rows_(rows), cols_(cols) {}

    void add(std::int64_t r, std::int64_t c, S v) {
        entries_.push_back({r, c, v});
    }

    CsrMatrix<S> to_csr(double drop_tol = 1e-15) {
        std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
            return a.r != b.r ? a.r < b.r : a.c < b.c;
        });
        CsrMatrix<S> A;
        A.rows = rows_;
        A.cols = cols_;
        A.row_ptr.assign(rows_ + 1, 0);
        std::size_t i = 0;
        while (i < entries_.size()) {
            std::size_t j = i;
            S acc{};
            while (j < entries_.size() && entries_[j].r == entries_[i].r &&
                   entries_[j].c == entries_[i].c)
                acc += entries_[j++].v;
            if (std::abs(acc) > drop_tol) {
                A.col_idx.push_back(entries_[i].c);
                A.vals.push_back(acc);
                ++A.row_ptr[entries_[i].r + 1];
            }
            i = j;
        }
        for (std::int64_t r = 0; r < rows_; ++r) A.row_ptr[r + 1] += A.row_ptr[r];
        entries_.clear();
        entries_.shrink_to_fit();
        return A;
    }

  private:
    struct Entry {
        std::int64_t r, c;
        S v;
    };
    std::int64_t rows_, cols_;
    std::vector<Entry> entries_;
};

// Estimate of the spectral radius by power iteration on A itself.
// Adequate for step control of dissipative generators, whose dominant
// eigenvalue in magnitude sits on the (negative) real axis.
template <class S>
double spectral_radius_estimate(const CsrMatrix<S>& A, int iters = 80, std::uint64_t seed = 7) {
    if (A.rows != A.cols) throw std::invalid_argument("spectral_radius_estimate: square only");
    const std::int64_t n = A.rows;
    if (n == 0) return 0.0;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Eigen::Vector<S, Eigen::Dynamic> x(n), y(n);
    for (std::int64_t i = 0; i < n; ++i) x[i] = S(nd(rng));
    x /= x.norm();
    double lam = 0.0;
    for (int it = 0; it < iters; ++it) {
        A.apply(x.data(), y.data());
        lam = y.norm();
        if (lam == 0.0) return 0.0;
        x = y / lam;
    }
    return lam;
}

}  // namespace wdicke

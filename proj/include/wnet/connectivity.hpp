#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace wnet {

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

inline int log2_exact(int n) {
    if (!is_power_of_two(n)) throw std::invalid_argument("log2_exact: " + std::to_string(n) + " is not a power of two");
    int k = 0;
    while ((1 << k) < n) ++k;
    return k;
}

// largest e with 2^e dividing n
inline int two_adic_valuation(int n) {
    if (n <= 0) throw std::invalid_argument("two_adic_valuation: positive argument required");
    int e = 0;
    while (n % 2 == 0) {
        n /= 2;
        ++e;
    }
    return e;
}

// Dyadic channel partitions of a wavelet convolution. The input channel axis
// splits as {D/2, D/4, ..., D/2^k, D/2^k}; the output axis splits the same
// way but reversed, so the widest input piece meets the narrowest output
// piece. kappa = 0 keeps the axis whole (dense convolution).
inline std::vector<int> wconv_partition_in(int channels, int kappa) {
    if (channels <= 0) throw std::invalid_argument("wconv_partition_in: channels must be positive");
    if (kappa < 0) throw std::invalid_argument("wconv_partition_in: depth must be non-negative");
    if (kappa == 0) return {channels};
    if (channels % (1 << kappa) != 0)
        throw std::invalid_argument("wconv_partition_in: 2^" + std::to_string(kappa) + " does not divide " +
                                    std::to_string(channels));
    std::vector<int> pieces;
    for (int i = 1; i <= kappa; ++i) pieces.push_back(channels >> i);
    pieces.push_back(channels >> kappa);
    return pieces;
}

inline std::vector<int> wconv_partition_out(int channels, int kappa) {
    std::vector<int> pieces = wconv_partition_in(channels, kappa);
    return {pieces.rbegin(), pieces.rend()};
}

// Boolean channel-dependency matrix of a layer: bit (i, j) is set iff output
// channel i depends on input channel j.
class AdjacencyMatrix {
public:
    AdjacencyMatrix() = default;
    AdjacencyMatrix(int rows, int cols, bool value = false)
        : rows_(rows), cols_(cols), bits_(static_cast<std::size_t>(rows) * cols, value ? 1 : 0) {
        if (rows <= 0 || cols <= 0) throw std::invalid_argument("AdjacencyMatrix: extents must be positive");
    }

    static AdjacencyMatrix identity(int n) {
        AdjacencyMatrix a(n, n);
        for (int i = 0; i < n; ++i) a.set(i, i, true);
        return a;
    }

    static AdjacencyMatrix full_matrix(int rows, int cols) { return AdjacencyMatrix(rows, cols, true); }

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    bool get(int i, int j) const { return bits_[static_cast<std::size_t>(i) * cols_ + j] != 0; }
    void set(int i, int j, bool v) { bits_[static_cast<std::size_t>(i) * cols_ + j] = v ? 1 : 0; }

    bool operator==(const AdjacencyMatrix& o) const {
        return rows_ == o.rows_ && cols_ == o.cols_ && bits_ == o.bits_;
    }

    std::string to_ascii() const {
        std::string out;
        out.reserve(static_cast<std::size_t>(rows_) * (2 * cols_ + 1));
        for (int i = 0; i < rows_; ++i) {
            for (int j = 0; j < cols_; ++j) {
                out += get(i, j) ? '1' : '.';
                if (j + 1 < cols_) out += ' ';
            }
            out += '\n';
        }
        return out;
    }

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<std::uint8_t> bits_;
};

// ell(A): number of nonzero entries
inline std::int64_t nnz(const AdjacencyMatrix& a) {
    std::int64_t count = 0;
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j)
            if (a.get(i, j)) ++count;
    return count;
}

// A is full iff every output channel depends on every input channel.
inline bool is_full(const AdjacencyMatrix& a) {
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j)
            if (!a.get(i, j)) return false;
    return true;
}

// Boolean matrix product modelling sequential application, with `upstream`
// applied first: (a ∘ b)(i, l) = OR_j a(i, j) AND b(j, l).
inline AdjacencyMatrix compose(const AdjacencyMatrix& a, const AdjacencyMatrix& upstream) {
    if (a.cols() != upstream.rows())
        throw std::invalid_argument("compose: inner dimensions differ, " + std::to_string(a.cols()) + " vs " +
                                    std::to_string(upstream.rows()));
    AdjacencyMatrix out(a.rows(), upstream.cols());
    for (int i = 0; i < a.rows(); ++i) {
        for (int j = 0; j < a.cols(); ++j) {
            if (!a.get(i, j)) continue;
            for (int l = 0; l < upstream.cols(); ++l) {
                if (upstream.get(j, l)) out.set(i, l, true);
            }
        }
    }
    return out;
}

// Adjacency of a wavelet convolution: block support induced by aligning the
// input partition with the reversed output partition. Piece p of the output
// depends on piece p of the input and nothing else.
inline AdjacencyMatrix adjacency_of_wconv(int in_channels, int out_channels, int kappa) {
    std::vector<int> pin = wconv_partition_in(in_channels, kappa);
    std::vector<int> pout = wconv_partition_out(out_channels, kappa);
    AdjacencyMatrix a(out_channels, in_channels);
    int row = 0;
    int col = 0;
    for (std::size_t p = 0; p < pin.size(); ++p) {
        for (int i = 0; i < pout[p]; ++i)
            for (int j = 0; j < pin[p]; ++j) a.set(row + i, col + j, true);
        row += pout[p];
        col += pin[p];
    }
    return a;
}

enum class HaarSign {
    algorithm2, // difference block is high half minus low half
    matrix      // low half minus high half, as the displayed H_D writes it
};

inline HaarSign haar_sign_from_string(const std::string& s) {
    if (s == "algorithm2") return HaarSign::algorithm2;
    if (s == "matrix") return HaarSign::matrix;
    throw std::invalid_argument("unknown sign convention '" + s + "' (expected algorithm2 or matrix)");
}

inline const char* to_string(HaarSign s) { return s == HaarSign::algorithm2 ? "algorithm2" : "matrix"; }

// Modified Haar matrix of size D with depth kappa, entries in {-1, 0, +1}.
// Row blocks have sizes {D/2, D/4, ..., D/2^kappa, D/2^kappa}: one block of
// difference rows per split level, then the remaining running-sum rows.
class HaarMatrix {
public:
    HaarMatrix() = default;
    HaarMatrix(int size, int depth, HaarSign sign, std::vector<int> entries)
        : size_(size), depth_(depth), sign_(sign), entries_(std::move(entries)) {}

    int size() const { return size_; }
    int depth() const { return depth_; }
    HaarSign sign() const { return sign_; }

    int get(int i, int j) const { return entries_[static_cast<std::size_t>(i) * size_ + j]; }

    std::vector<int> block_sizes() const { return wconv_partition_in(size_, depth_); }

    AdjacencyMatrix support() const {
        AdjacencyMatrix a(size_, size_);
        for (int i = 0; i < size_; ++i)
            for (int j = 0; j < size_; ++j) a.set(i, j, get(i, j) != 0);
        return a;
    }

    std::string to_ascii() const {
        std::string out;
        for (int i = 0; i < size_; ++i) {
            for (int j = 0; j < size_; ++j) {
                int v = get(i, j);
                out += (v < 0) ? "-1" : (v > 0 ? " 1" : " 0");
                if (j + 1 < size_) out += ' ';
            }
            out += '\n';
        }
        return out;
    }

    bool operator==(const HaarMatrix& o) const {
        return size_ == o.size_ && depth_ == o.depth_ && entries_ == o.entries_;
    }

private:
    int size_ = 0;
    int depth_ = 0;
    HaarSign sign_ = HaarSign::algorithm2;
    std::vector<int> entries_;
};

// Dense matrix whose broadcast over the channel axis equals the fast
// transform at the same depth. Built by tracing the transform symbolically
// (each working row is a vector of integer coefficients over the inputs), so
// layer and matrix agree by construction. Level i emits the difference of
// the working tensor's high and low halves and keeps their sum.
inline HaarMatrix haar_matrix(int size, int kappa, HaarSign sign = HaarSign::algorithm2) {
    int k = log2_exact(size);
    if (kappa < 0 || kappa > k)
        throw std::invalid_argument("haar_matrix: depth " + std::to_string(kappa) + " out of range for size " +
                                    std::to_string(size));
    std::vector<std::vector<int>> work(size, std::vector<int>(size, 0));
    for (int i = 0; i < size; ++i) work[i][i] = 1;

    std::vector<int> entries;
    entries.reserve(static_cast<std::size_t>(size) * size);
    auto emit = [&](const std::vector<int>& row) { entries.insert(entries.end(), row.begin(), row.end()); };

    for (int level = 0; level < kappa; ++level) {
        int n = static_cast<int>(work.size());
        int half = n / 2;
        std::vector<std::vector<int>> next(half, std::vector<int>(size, 0));
        for (int j = 0; j < half; ++j) {
            std::vector<int> diff(size, 0);
            for (int c = 0; c < size; ++c) {
                int lo = work[j][c];
                int hi = work[half + j][c];
                diff[c] = (sign == HaarSign::algorithm2) ? hi - lo : lo - hi;
                next[j][c] = hi + lo;
            }
            emit(diff);
        }
        work = std::move(next);
    }
    for (const auto& row : work) emit(row);
    return HaarMatrix(size, kappa, sign, std::move(entries));
}

// The recursive Kronecker form:
//   H_2 = [[1, -1], [1, 1]],  H_{2D} = [ I_D (x) [1, -1] ; H_D (x) [1, 1] ].
// Kept as a reference only: its difference rows pair adjacent channels, not
// halves. Relabeling every column index by bit reversal (and each level's
// rows by bit reversal within the block) turns it into haar_matrix(D, log2 D,
// matrix) entry for entry.
inline std::vector<std::vector<int>> haar_matrix_kronecker(int size) {
    int k = log2_exact(size);
    std::vector<std::vector<int>> h = {{1, -1}, {1, 1}};
    for (int level = 1; level < k; ++level) {
        int n = 1 << level;      // current side
        int m = n * 2;           // next side
        std::vector<std::vector<int>> next(m, std::vector<int>(m, 0));
        for (int i = 0; i < n; ++i) { // I_n (x) [1, -1]
            next[i][2 * i] = 1;
            next[i][2 * i + 1] = -1;
        }
        for (int i = 0; i < n; ++i) { // H_n (x) [1, 1]
            for (int j = 0; j < n; ++j) {
                next[n + i][2 * j] = h[i][j];
                next[n + i][2 * j + 1] = h[i][j];
            }
        }
        h = std::move(next);
    }
    if (size == 1) return {{1}};
    return h;
}

inline int bit_reverse(int value, int bits) {
    int out = 0;
    for (int b = 0; b < bits; ++b)
        if (value & (1 << b)) out |= 1 << (bits - 1 - b);
    return out;
}

// A(W) = |H_D|: the elementwise absolute-value support of the Haar matrix.
// The support does not depend on the sign convention.
inline AdjacencyMatrix adjacency_of_dfwt(int channels, int kappa) {
    return haar_matrix(channels, kappa, HaarSign::algorithm2).support();
}

// Region-counting lower bound on ell(M) over all boolean M that make
// compose(A, M) full: rows of A with identical support impose one region,
// and each of M's columns needs at least one nonzero inside every region.
inline std::int64_t minimality_lower_bound(const AdjacencyMatrix& a) {
    std::vector<std::vector<int>> supports;
    for (int i = 0; i < a.rows(); ++i) {
        std::vector<int> s;
        for (int j = 0; j < a.cols(); ++j)
            if (a.get(i, j)) s.push_back(j);
        bool seen = false;
        for (const auto& t : supports)
            if (t == s) {
                seen = true;
                break;
            }
        if (!seen) supports.push_back(std::move(s));
    }
    return static_cast<std::int64_t>(supports.size()) * a.cols();
}

// Exhaustive Theorem-1 check, D = 4 only (65536 candidate matrices): the
// minimum ell(M) over all boolean 4x4 M with compose(A_wconv(4,4,2), M) full.
inline int minimality_exhaustive(int channels) {
    if (channels != 4)
        throw std::invalid_argument("minimality_exhaustive: only D = 4 is supported (search space 2^(D*D))");
    AdjacencyMatrix a = adjacency_of_wconv(4, 4, 2);
    int best = 17;
    for (int mask = 0; mask < (1 << 16); ++mask) {
        int bits = __builtin_popcount(static_cast<unsigned>(mask));
        if (bits >= best) continue;
        AdjacencyMatrix m(4, 4);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) m.set(i, j, (mask >> (i * 4 + j)) & 1);
        if (is_full(compose(a, m))) best = bits;
    }
    return best;
}

} // namespace wnet

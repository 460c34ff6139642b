#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "wnet/layers.hpp"
#include "wnet/models.hpp"

namespace wnet {

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

namespace checks {

// The printed 8x8 adjacency and modified Haar matrices, kept as literal
// reference data.
inline const int kAdjacency8[8][8] = {
    {1, 1, 1, 1, 0, 0, 0, 0}, {0, 0, 0, 0, 1, 1, 0, 0}, {0, 0, 0, 0, 0, 0, 1, 0}, {0, 0, 0, 0, 0, 0, 1, 0},
    {0, 0, 0, 0, 0, 0, 0, 1}, {0, 0, 0, 0, 0, 0, 0, 1}, {0, 0, 0, 0, 0, 0, 0, 1}, {0, 0, 0, 0, 0, 0, 0, 1}};

inline const int kHaar8[8][8] = {
    {1, 0, 0, 0, -1, 0, 0, 0}, {0, 1, 0, 0, 0, -1, 0, 0}, {0, 0, 1, 0, 0, 0, -1, 0}, {0, 0, 0, 1, 0, 0, 0, -1},
    {1, 0, -1, 0, 1, 0, -1, 0}, {0, 1, 0, -1, 0, 1, 0, -1}, {1, -1, 1, -1, 1, -1, 1, -1}, {1, 1, 1, 1, 1, 1, 1, 1}};

// Claim-1 set construction, written directly from the sets A', A'' and A_p
// (with the A_p column interval anchored to the displayed D=8 matrix rather
// than the printed off-by-one endpoints). Independent of the partition
// arithmetic in adjacency_of_wconv.
inline AdjacencyMatrix claim1_adjacency(int k) {
    const int d = 1 << k;
    AdjacencyMatrix a(d, d);
    for (int j = 0; j <= d / 2 - 1; ++j) a.set(0, j, true);          // A'
    for (int i = d / 2; i <= d - 1; ++i) a.set(i, d - 1, true);      // A''
    for (int p = 1; p <= k - 1; ++p) {                               // A_p
        for (int i = (1 << (p - 1)); i <= (1 << p) - 1; ++i)
            for (int j = d - d / (1 << p); j <= d - d / (1 << (p + 1)) - 1; ++j) a.set(i, j, true);
    }
    return a;
}

// Dense broadcast of an integer Haar matrix over the channel axis.
template <typename T>
Tensor<T> haar_broadcast(const HaarMatrix& h, const Tensor<T>& x) {
    const int d = h.size();
    Tensor<T> y(x.shape());
    const std::size_t positions = x.size() / d;
    const T* xp = x.data();
    T* yp = y.data();
    for (std::size_t p = 0; p < positions; ++p, xp += d, yp += d)
        for (int i = 0; i < d; ++i) {
            double acc = 0.0;
            for (int j = 0; j < d; ++j) acc += h.get(i, j) * static_cast<double>(xp[j]);
            yp[i] = static_cast<T>(acc);
        }
    return y;
}

// Scatters per-piece WConv weights into a dense kernel whose support is the
// wavelet adjacency, zeros elsewhere.
template <typename T>
Tensor<T> scatter_to_dense(const WConvLayer<T>& layer) {
    const WConvSpec& spec = layer.spec();
    const int kernel = spec.kernel_size;
    Tensor<T> dense(kernel, kernel, spec.in_channels, spec.out_channels);
    int ci0 = 0, co0 = 0;
    for (std::size_t p = 0; p < layer.pieces_in().size(); ++p) {
        const Tensor<T>& w = const_cast<WConvLayer<T>&>(layer).weights()[p]->value;
        for (int kh = 0; kh < kernel; ++kh)
            for (int kw = 0; kw < kernel; ++kw)
                for (int a = 0; a < layer.pieces_in()[p]; ++a)
                    for (int b = 0; b < layer.pieces_out()[p]; ++b)
                        dense.at(kh, kw, ci0 + a, co0 + b) = w.at(kh, kw, a, b);
        ci0 += layer.pieces_in()[p];
        co0 += layer.pieces_out()[p];
    }
    return dense;
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(static_cast<double>(a[i]) - b[i]));
    return m;
}

// Central finite differences against the tape gradient for every parameter
// entry of a forward closure. `forward` must rerun the computation from the
// current parameter values. Relative error uses the denominator
// max(|numeric|, |analytic|, 1e-8).
//
// An entry that misses the tolerance is re-probed at eps/10 and eps/100:
// a probe that straddles a ReLU6 kink (batch norm parks activations near
// zero, so this happens at any fixed eps) has error proportional to eps and
// converges; a wrong gradient does not.
template <typename T>
struct FdOutcome {
    double max_rel_err = 0.0;
    std::string worst;
};

template <typename T>
FdOutcome<T> finite_difference_check(const std::vector<ParamRef<T>>& params,
                                     const std::function<NodePtr<T>(Tape<T>*)>& forward, double eps = 1e-3,
                                     double tolerance = 1e-3) {
    for (const auto& p : params) p.node->zero_grad();
    Tape<T> tape;
    auto loss = forward(&tape);
    tape.backward(loss);

    FdOutcome<T> out;
    for (const auto& p : params) {
        Tensor<T>& w = p.node->value;
        const Tensor<T>& g = p.node->grad();
        for (std::size_t i = 0; i < w.size(); ++i) {
            const double analytic = static_cast<double>(g[i]);
            double rel = 0.0, numeric = 0.0;
            for (double e = eps; e >= eps * 0.009; e /= 10.0) {
                const T saved = w[i];
                w[i] = static_cast<T>(saved + e);
                const double lp = forward(nullptr)->value[0];
                w[i] = static_cast<T>(saved - e);
                const double lm = forward(nullptr)->value[0];
                w[i] = saved;
                numeric = (lp - lm) / (2.0 * e);
                rel = std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-8});
                if (rel <= tolerance) break;
            }
            if (rel > out.max_rel_err) {
                out.max_rel_err = rel;
                std::ostringstream os;
                os << p.name << "[" << i << "]: numeric " << numeric << " vs analytic " << analytic;
                out.worst = os.str();
            }
        }
    }
    return out;
}

} // namespace checks

// ---------------------------------------------------------------------------
// named property suites; exit status of `wnet verify` is derived from these
// ---------------------------------------------------------------------------

inline std::vector<CheckResult> verify_connectivity() {
    std::vector<CheckResult> results;
    auto add = [&](const std::string& name, bool ok, const std::string& detail = "") {
        results.push_back({name, ok, detail});
    };

    {
        bool ok = true;
        std::string detail;
        for (int k = 2; k <= 8 && ok; ++k) {
            const int d = 1 << k;
            for (int kappa = 1; kappa <= k && ok; ++kappa) {
                if (!is_full(compose(adjacency_of_wconv(d, d, kappa), adjacency_of_dfwt(d, kappa)))) {
                    ok = false;
                    detail = "not full at D=" + std::to_string(d) + " kappa=" + std::to_string(kappa);
                }
            }
        }
        add("wconv-dfwt composition full for D=2^k, k=2..8, all kappa", ok, detail);
    }
    {
        bool ok = true;
        std::string detail;
        for (int k = 2; k <= 8 && ok; ++k) {
            const int d = 1 << k;
            const std::int64_t expected = d + static_cast<std::int64_t>(d / 4) * (k - 1);
            const std::int64_t got = nnz(adjacency_of_wconv(d, d, k));
            if (got != expected) {
                ok = false;
                detail = "D=" + std::to_string(d) + ": " + std::to_string(got) + " != " + std::to_string(expected);
            }
        }
        add("claim-1 nonzero count D + (D/4)(log2 D - 1) for k=2..8", ok, detail);
    }
    {
        AdjacencyMatrix a = adjacency_of_wconv(8, 8, 3);
        bool ok = true;
        for (int i = 0; i < 8; ++i)
            for (int j = 0; j < 8; ++j)
                if (a.get(i, j) != (checks::kAdjacency8[i][j] != 0)) ok = false;
        add("adjacency A(8,8,3) equals the printed 8x8 matrix", ok);
    }
    {
        bool ok = true;
        std::string detail;
        for (int k = 2; k <= 8 && ok; ++k) {
            if (!(adjacency_of_wconv(1 << k, 1 << k, k) == checks::claim1_adjacency(k))) {
                ok = false;
                detail = "mismatch at k=" + std::to_string(k);
            }
        }
        add("adjacency equals the claim-1 set construction for k=2..8", ok, detail);
    }
    {
        bool ok = true;
        std::string detail;
        for (int d = 2; d <= 256 && ok; d *= 2) {
            for (int kappa = 0; kappa <= log2_exact(d) && ok; ++kappa) {
                for (HaarSign sign : {HaarSign::algorithm2, HaarSign::matrix}) {
                    HaarMatrix h = haar_matrix(d, kappa, sign);
                    for (int i = 0; i < d && ok; ++i)
                        for (int j = i + 1; j < d && ok; ++j) {
                            std::int64_t dot = 0;
                            for (int c = 0; c < d; ++c) dot += h.get(i, c) * h.get(j, c);
                            if (dot != 0) {
                                ok = false;
                                detail = "rows " + std::to_string(i) + "," + std::to_string(j) + " at D=" +
                                         std::to_string(d) + " kappa=" + std::to_string(kappa);
                            }
                        }
                }
            }
        }
        add("haar rows pairwise orthogonal for D<=256, all kappa", ok, detail);
    }
    {
        bool ok = true;
        for (int d = 4; d <= 64; d *= 2)
            for (int kappa = 0; kappa <= log2_exact(d); ++kappa)
                if (!(haar_matrix(d, kappa, HaarSign::algorithm2).support() ==
                      haar_matrix(d, kappa, HaarSign::matrix).support()))
                    ok = false;
        add("haar support invariant under sign convention", ok);
    }
    {
        bool ok = true;
        std::string detail;
        for (int d = 4; d <= 64; d *= 2) {
            for (int kappa = 0; kappa <= log2_exact(d); ++kappa) {
                const std::int64_t got = nnz(adjacency_of_dfwt(d, kappa));
                const std::int64_t expected = static_cast<std::int64_t>(kappa + 1) * d;
                if (got != expected) {
                    ok = false;
                    detail = "D=" + std::to_string(d) + " kappa=" + std::to_string(kappa);
                }
            }
        }
        add("dfwt adjacency has (kappa+1)*D nonzeros", ok, detail);
    }
    {
        const bool ok = minimality_lower_bound(adjacency_of_wconv(4, 4, 2)) == 12 &&
                        minimality_lower_bound(adjacency_of_wconv(8, 8, 3)) == 32 &&
                        minimality_lower_bound(AdjacencyMatrix::full_matrix(6, 6)) == 6;
        add("region-counting lower bounds (12, 32, D)", ok);
    }
    {
        const int exhaustive = minimality_exhaustive(4);
        const std::int64_t dfwt_cost = nnz(adjacency_of_dfwt(4, 2));
        const std::int64_t bound = minimality_lower_bound(adjacency_of_wconv(4, 4, 2));
        const bool ok = exhaustive == 12 && dfwt_cost == 12 && bound == 12;
        add("theorem-1 at D=4: exhaustive min = |H_4| cost = lower bound = 12", ok,
            "min=" + std::to_string(exhaustive) + " dfwt=" + std::to_string(dfwt_cost) +
                " bound=" + std::to_string(bound));
    }
    return results;
}

inline std::vector<CheckResult> verify_oracle(std::uint64_t seed = 0) {
    std::vector<CheckResult> results;
    auto add = [&](const std::string& name, bool ok, const std::string& detail = "") {
        results.push_back({name, ok, detail});
    };
    Rng rng(seed);

    {
        HaarMatrix h = haar_matrix(8, 3, HaarSign::matrix);
        bool ok = true;
        for (int i = 0; i < 8; ++i)
            for (int j = 0; j < 8; ++j)
                if (h.get(i, j) != checks::kHaar8[i][j]) ok = false;
        add("haar_matrix(8,3,matrix) equals the printed H_8", ok);
    }
    {
        Tensor<float> x(1, 1, 1, 4);
        for (int c = 0; c < 4; ++c) x[c] = static_cast<float>(c + 1);
        Tensor<float> y = dfwt_fw(x, 2, HaarSign::algorithm2);
        const bool ok = y[0] == 2 && y[1] == 2 && y[2] == 2 && y[3] == 10;
        add("algorithm-2 trace of [1,2,3,4] gives [2,2,2,10]", ok);
    }
    {
        bool ok = true;
        std::string detail;
        double worst = 0.0;
        for (int d : {4, 8, 16, 64}) {
            for (int kappa = 0; kappa <= log2_exact(d); ++kappa) {
                for (HaarSign sign : {HaarSign::algorithm2, HaarSign::matrix}) {
                    HaarMatrix h = haar_matrix(d, kappa, sign);
                    for (int trial = 0; trial < 5; ++trial) {
                        Tensor<float> x(2, 3, 3, d);
                        x.fill_uniform(rng, -2.0, 2.0);
                        const double diff = checks::max_abs_diff(dfwt_fw(x, kappa, sign), checks::haar_broadcast(h, x));
                        worst = std::max(worst, diff);
                        if (diff > 1e-6) ok = false;
                    }
                }
            }
        }
        std::ostringstream os;
        os << "max abs diff " << worst;
        add("fast dfwt equals dense haar broadcast (D in {4,8,16,64})", ok, os.str());
    }
    {
        // at full depth, x = H^T (y / row_norms^2)
        bool ok = true;
        for (int d : {4, 8, 16}) {
            const int k = log2_exact(d);
            HaarMatrix h = haar_matrix(d, k, HaarSign::algorithm2);
            Tensor<float> x(1, 2, 2, d);
            x.fill_uniform(rng, -1.0, 1.0);
            Tensor<float> y = dfwt_fw(x, k, HaarSign::algorithm2);
            std::vector<double> norms(d, 0.0);
            for (int i = 0; i < d; ++i)
                for (int j = 0; j < d; ++j) norms[i] += h.get(i, j) * h.get(i, j);
            Tensor<float> recon(x.shape());
            const std::size_t positions = x.size() / d;
            for (std::size_t p = 0; p < positions; ++p)
                for (int j = 0; j < d; ++j) {
                    double acc = 0.0;
                    for (int i = 0; i < d; ++i) acc += h.get(i, j) * y[p * d + i] / norms[i];
                    recon[p * d + j] = static_cast<float>(acc);
                }
            if (checks::max_abs_diff(recon, x) > 1e-5) ok = false;
        }
        add("dfwt inverts through H^T and row norms at full depth", ok);
    }
    {
        Rng wrng(seed + 1);
        WConvLayer<float> dense_piece(WConvSpec{8, 8, 0, 1, 1}, wrng);
        Tensor<float> x(1, 4, 4, 8);
        x.fill_uniform(rng, -1.0, 1.0);
        auto xin = make_leaf(x);
        Tensor<float> via_wconv = dense_piece.forward(nullptr, xin, false)->value;
        Tensor<float> via_conv = conv2d_fw(x, dense_piece.weights()[0]->value, 1);
        add("wconv at kappa=0 is bit-identical to the dense conv",
            checks::max_abs_diff(via_wconv, via_conv) == 0.0);
    }
    {
        bool ok = true;
        double worst = 0.0;
        for (int kappa : {1, 2, 3}) {
            Rng wrng(seed + 10 + kappa);
            WConvLayer<float> layer(WConvSpec{8, 8, kappa, 1, 1}, wrng);
            Tensor<float> x(2, 3, 3, 8);
            x.fill_uniform(rng, -1.0, 1.0);
            auto xin = make_leaf(x);
            Tensor<float> fast = layer.forward(nullptr, xin, false)->value;
            Tensor<float> dense = conv2d_fw(x, checks::scatter_to_dense(layer), 1);
            const double diff = checks::max_abs_diff(fast, dense);
            worst = std::max(worst, diff);
            if (diff > 1e-6) ok = false;
        }
        std::ostringstream os;
        os << "max abs diff " << worst;
        add("wconv equals dense conv with weights scattered into A's support", ok, os.str());
    }
    {
        bool ok = true;
        for (int d : {8, 16, 64})
            for (int kappa = 0; kappa <= log2_exact(d); ++kappa)
                if (haar_matrix(d, kappa).block_sizes() != wconv_partition_in(d, kappa)) ok = false;
        add("dfwt output blocks align with the wconv input partition", ok);
    }
    {
        // Kronecker recursion matches the traced matrix after bit-reversal
        // relabeling of columns and per-level rows.
        bool ok = true;
        for (int d : {4, 8, 16, 32}) {
            const int k = log2_exact(d);
            auto kron = haar_matrix_kronecker(d);
            HaarMatrix traced = haar_matrix(d, k, HaarSign::matrix);
            // level blocks: rows [0, d/2), [d/2, 3d/4), ...; final row is the sum
            int row0 = 0;
            for (int level = 0; level < k; ++level) {
                const int rows = d >> (level + 1);
                const int bits = k - level - 1;
                for (int r = 0; r < rows; ++r)
                    for (int j = 0; j < d; ++j)
                        if (kron[row0 + r][j] != traced.get(row0 + bit_reverse(r, bits), bit_reverse(j, k))) ok = false;
                row0 += rows;
            }
            for (int j = 0; j < d; ++j)
                if (kron[d - 1][j] != traced.get(d - 1, bit_reverse(j, k))) ok = false;
        }
        add("kronecker recursion = traced matrix under bit-reversal relabeling", ok);
    }
    return results;
}

inline std::vector<CheckResult> verify_gradients(std::uint64_t seed = 0) {
    std::vector<CheckResult> results;
    auto add = [&](const std::string& name, bool ok, const std::string& detail = "") {
        results.push_back({name, ok, detail});
    };
    using D = double;

    // fixed projection makes the scalar loss sensitive to every output entry
    auto projected_loss = [](Tape<D>* tape, const NodePtr<D>& out, std::uint64_t pseed) {
        Rng prng(pseed);
        Tensor<D> proj(out->value.shape());
        proj.fill_uniform(prng, 0.5, 1.5);
        auto pnode = make_leaf(std::move(proj));
        // elementwise multiply then sum, recorded as one step
        Tensor<D> prod(out->value.shape());
        for (std::size_t i = 0; i < prod.size(); ++i) prod[i] = out->value[i] * pnode->value[i];
        auto mul = tape ? tape->emit(std::move(prod)) : make_leaf(std::move(prod));
        if (tape)
            tape->record([out, pnode, mul] {
                for (std::size_t i = 0; i < mul->grad().size(); ++i)
                    out->grad()[i] += mul->grad()[i] * pnode->value[i];
            });
        return reduce_sum(tape, mul);
    };

    {
        bool ok = true;
        double worst = 0.0;
        std::string detail;
        for (int kappa : {0, 1, 3}) {
            Rng wrng(seed + kappa);
            WConvLayer<D> layer(WConvSpec{8, 8, kappa, 1, 1}, wrng);
            Tensor<D> x(2, 3, 3, 8);
            Rng xrng(seed + 100 + kappa);
            x.fill_uniform(xrng, -1.0, 1.0);
            auto xin = make_leaf(x, true);
            std::vector<ParamRef<D>> params;
            layer.collect_params("wconv", params);
            params.push_back({"input", xin, false});
            auto fwd = [&](Tape<D>* tape) {
                return projected_loss(tape, layer.forward(tape, xin, true), seed + 7);
            };
            auto fd = checks::finite_difference_check<D>(params, fwd);
            worst = std::max(worst, fd.max_rel_err);
            if (fd.max_rel_err > 1e-3) {
                ok = false;
                detail = "kappa=" + std::to_string(kappa) + ": " + fd.worst;
            }
        }
        std::ostringstream os;
        os << "max rel err " << worst;
        add("wconv gradients (D=D'=8, kappa in {0,1,3}) vs finite differences", ok, ok ? os.str() : detail);
    }
    {
        Tensor<D> x(2, 3, 3, 8);
        Rng xrng(seed + 200);
        x.fill_uniform(xrng, -1.0, 1.0);
        auto xin = make_leaf(x, true);
        std::vector<ParamRef<D>> params{{"input", xin, false}};
        auto fwd = [&](Tape<D>* tape) { return projected_loss(tape, dfwt(tape, xin, 3), seed + 8); };
        auto fd = checks::finite_difference_check<D>(params, fwd);
        std::ostringstream os;
        os << "max rel err " << fd.max_rel_err;
        add("dfwt gradients (D=8, kappa=3) vs finite differences", fd.max_rel_err <= 1e-3,
            fd.max_rel_err <= 1e-3 ? os.str() : fd.worst);
    }
    {
        UnitSpec spec;
        spec.in_channels = 8;
        spec.out_channels = 8;
        spec.expansion = 2;
        spec.kappa1 = 0;
        spec.kappa2 = 3;
        spec.kappa3 = 3;
        spec.stride = 1;
        Rng wrng(seed + 300);
        WaveletUnit<D> unit(spec, wrng);
        Tensor<D> x(2, 4, 4, 8);
        Rng xrng(seed + 301);
        x.fill_uniform(xrng, -1.0, 1.0);
        auto xin = make_leaf(x, true);
        std::vector<ParamRef<D>> params;
        unit.collect_params("unit", params);
        auto fwd = [&](Tape<D>* tape) { return projected_loss(tape, unit.forward(tape, xin, true), seed + 9); };
        auto fd = checks::finite_difference_check<D>(params, fwd);
        std::ostringstream os;
        os << "max rel err " << fd.max_rel_err << " over " << params.size() << " parameter tensors";
        add("full waveletnet unit gradients vs finite differences", fd.max_rel_err <= 1e-3,
            fd.max_rel_err <= 1e-3 ? os.str() : fd.worst);
    }
    return results;
}

inline std::vector<CheckResult> verify_suite(const std::string& suite, std::uint64_t seed = 0) {
    std::vector<CheckResult> all;
    auto append = [&](std::vector<CheckResult> v) { all.insert(all.end(), v.begin(), v.end()); };
    if (suite == "connectivity" || suite == "all") append(verify_connectivity());
    if (suite == "oracle" || suite == "all") append(verify_oracle(seed));
    if (suite == "gradients" || suite == "all") append(verify_gradients(seed));
    if (all.empty()) throw std::invalid_argument("unknown suite '" + suite + "' (connectivity|oracle|gradients|all)");
    return all;
}

} // namespace wnet

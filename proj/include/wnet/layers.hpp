#pragma once

#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wnet/connectivity.hpp"
#include "wnet/ops.hpp"
#include "wnet/rng.hpp"

namespace wnet {

template <typename T>
struct ParamRef {
    std::string name;
    NodePtr<T> node;
    bool weight_decay = true;
};

template <typename T>
struct Module {
    virtual ~Module() = default;
    virtual NodePtr<T> forward(Tape<T>* tape, const NodePtr<T>& x, bool training) = 0;
    virtual void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) = 0;
};

// ---------------------------------------------------------------------------
// layer hyperparameter records
// ---------------------------------------------------------------------------

struct WConvSpec {
    int in_channels = 0;
    int out_channels = 0;
    int depth = 0; // logarithmic depth kappa; 0 = dense
    int kernel_size = 1;
    int stride = 1;

    void validate() const {
        if (kernel_size != 1 && kernel_size != 3)
            throw std::invalid_argument("WConvSpec: kernel size " + std::to_string(kernel_size) + " unsupported");
        wconv_partition_in(in_channels, depth);   // throws on divisibility violation
        wconv_partition_out(out_channels, depth);
    }
};

struct DFWTSpec {
    int channels = 0;
    int depth = 0;
    HaarSign sign_convention = HaarSign::algorithm2;

    void validate() const {
        if (depth > 0 && channels % (1 << depth) != 0)
            throw std::invalid_argument("DFWTSpec: 2^" + std::to_string(depth) + " does not divide " +
                                        std::to_string(channels) + " channels");
    }
};

struct UnitSpec {
    int in_channels = 0;
    int out_channels = 0;
    int expansion = 6;
    int kappa1 = 0;
    int kappa2 = 3;
    int kappa3 = 3;
    int stride = 1;
    bool use_dfwt = true;             // false builds the ablation twin
    bool omit_expansion_when_t1 = true;

    int expanded_channels() const { return in_channels * expansion; }
    bool has_expansion() const { return !(expansion == 1 && omit_expansion_when_t1); }
    bool has_residual() const { return stride == 1 && in_channels == out_channels; }

    void validate() const {
        if (kappa2 != kappa3)
            throw std::invalid_argument("UnitSpec: kappa2 and kappa3 must match (DFWT blocks align with the "
                                        "projection partition), got " +
                                        std::to_string(kappa2) + " and " + std::to_string(kappa3));
        if (has_expansion()) WConvSpec{in_channels, expanded_channels(), kappa1, 1, 1}.validate();
        DFWTSpec{expanded_channels(), kappa2}.validate();
        WConvSpec{expanded_channels(), out_channels, kappa3, 1, 1}.validate();
    }
};

// ---------------------------------------------------------------------------
// parameterized layers
// ---------------------------------------------------------------------------

template <typename T>
class Conv2dLayer : public Module<T> {
public:
    Conv2dLayer(int in_c, int out_c, int kernel, int stride, Rng& rng) : stride_(stride) {
        Tensor<T> w(kernel, kernel, in_c, out_c);
        const double fan_in = static_cast<double>(kernel) * kernel * in_c;
        w.fill_truncated_normal(rng, 0.0, std::sqrt(2.0 / fan_in));
        weight_ = make_leaf(std::move(w), true);
    }

    NodePtr<T> forward(Tape<T>* tape, const NodePtr<T>& x, bool) override {
        return conv2d(tape, x, weight_, stride_);
    }

    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
        out.push_back({prefix + ".weight", weight_, true});
    }

    NodePtr<T>& weight() { return weight_; }
    int stride() const { return stride_; }

private:
    NodePtr<T> weight_;
    int stride_;
};

template <typename T>
class DepthwiseConv2dLayer : public Module<T> {
public:
    DepthwiseConv2dLayer(int channels, int kernel, int stride, Rng& rng) : stride_(stride) {
        Tensor<T> w(kernel, kernel, channels, 1);
        const double fan_in = static_cast<double>(kernel) * kernel;
        w.fill_truncated_normal(rng, 0.0, std::sqrt(2.0 / fan_in));
        weight_ = make_leaf(std::move(w), true);
    }

    NodePtr<T> forward(Tape<T>* tape, const NodePtr<T>& x, bool) override {
        return depthwise_conv2d(tape, x, weight_, stride_);
    }

    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
        out.push_back({prefix + ".weight", weight_, true});
    }

    NodePtr<T>& weight() { return weight_; }

private:
    NodePtr<T> weight_;
    int stride_;
};

template <typename T>
class BatchNormLayer : public Module<T> {
public:
    explicit BatchNormLayer(int channels, double momentum = 0.9, double eps = 1e-5)
        : momentum_(momentum), eps_(eps), running_mean_(channels, 0.0), running_var_(channels, 1.0) {
        Tensor<T> g(1, 1, 1, channels);
        g.fill(T(1));
        gamma_ = make_leaf(std::move(g), true);
        beta_ = make_leaf(Tensor<T>(1, 1, 1, channels), true);
    }

    NodePtr<T> forward(Tape<T>* tape, const NodePtr<T>& x, bool training) override {
        return batch_norm(tape, x, gamma_, beta_, running_mean_, running_var_, training, momentum_, eps_);
    }

    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
        out.push_back({prefix + ".gamma", gamma_, false});
        out.push_back({prefix + ".beta", beta_, false});
    }

    NodePtr<T>& gamma() { return gamma_; }
    NodePtr<T>& beta() { return beta_; }

private:
    double momentum_, eps_;
    NodePtr<T> gamma_, beta_;
    std::vector<double> running_mean_, running_var_;
};

// Wavelet convolution: one standard KxK convolution per aligned piece pair
// (input piece i -> output piece i), outputs concatenated in order. The
// aligned partitions pair the widest input piece with the narrowest output
// piece, so parameters thin out dyadically with depth.
template <typename T>
class WConvLayer : public Module<T> {
public:
    WConvLayer(const WConvSpec& spec, Rng& rng) : spec_(spec) {
        spec_.validate();
        pieces_in_ = wconv_partition_in(spec.in_channels, spec.depth);
        pieces_out_ = wconv_partition_out(spec.out_channels, spec.depth);
        for (std::size_t p = 0; p < pieces_in_.size(); ++p) {
            Tensor<T> w(spec.kernel_size, spec.kernel_size, pieces_in_[p], pieces_out_[p]);
            const double fan_in = static_cast<double>(spec.kernel_size) * spec.kernel_size * pieces_in_[p];
            w.fill_truncated_normal(rng, 0.0, std::sqrt(2.0 / fan_in));
            weights_.push_back(make_leaf(std::move(w), true));
        }
    }

    NodePtr<T> forward(Tape<T>* tape, const NodePtr<T>& x, bool) override {
        if (x->value.channels() != spec_.in_channels)
            throw std::invalid_argument("WConv: input " + x->value.shape_str() + " does not carry " +
                                        std::to_string(spec_.in_channels) + " channels");
        if (pieces_in_.size() == 1) return conv2d(tape, x, weights_[0], spec_.stride);
        std::vector<NodePtr<T>> outputs;
        int begin = 0;
        for (std::size_t p = 0; p < pieces_in_.size(); ++p) {
            auto piece = slice_channels(tape, x, begin, pieces_in_[p]);
            outputs.push_back(conv2d(tape, piece, weights_[p], spec_.stride));
            begin += pieces_in_[p];
        }
        return concat_channels(tape, outputs);
    }

    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
        for (std::size_t p = 0; p < weights_.size(); ++p)
            out.push_back({prefix + ".piece" + std::to_string(p), weights_[p], true});
    }

    const WConvSpec& spec() const { return spec_; }
    const std::vector<int>& pieces_in() const { return pieces_in_; }
    const std::vector<int>& pieces_out() const { return pieces_out_; }
    std::vector<NodePtr<T>>& weights() { return weights_; }

    std::int64_t param_count() const {
        std::int64_t total = 0;
        for (std::size_t p = 0; p < pieces_in_.size(); ++p)
            total += static_cast<std::int64_t>(spec_.kernel_size) * spec_.kernel_size * pieces_in_[p] * pieces_out_[p];
        return total;
    }

private:
    WConvSpec spec_;
    std::vector<int> pieces_in_, pieces_out_;
    std::vector<NodePtr<T>> weights_;
};

// Parameter-free conjugate layer; forward is the fast transform.
template <typename T>
class DFWTLayer : public Module<T> {
public:
    explicit DFWTLayer(const DFWTSpec& spec) : spec_(spec) { spec_.validate(); }

    NodePtr<T> forward(Tape<T>* tape, const NodePtr<T>& x, bool) override {
        if (x->value.channels() != spec_.channels)
            throw std::invalid_argument("DFWT: input " + x->value.shape_str() + " does not carry " +
                                        std::to_string(spec_.channels) + " channels");
        return dfwt(tape, x, spec_.depth, spec_.sign_convention);
    }

    void collect_params(const std::string&, std::vector<ParamRef<T>>&) override {}

    const DFWTSpec& spec() const { return spec_; }

private:
    DFWTSpec spec_;
};

template <typename T>
class ReLU6Layer : public Module<T> {
public:
    NodePtr<T> forward(Tape<T>* tape, const NodePtr<T>& x, bool) override { return relu6(tape, x); }
    void collect_params(const std::string&, std::vector<ParamRef<T>>&) override {}
};

// The WaveletNet unit: an inverted-residual bottleneck whose pointwise convs
// are wavelet convolutions and whose projection is fed through the conjugate
// DFWT.
//
//   1x1 WConv(k1) D -> tD, BN, ReLU6
//   3x3 depthwise (stride s), BN, ReLU6
//   DFWT(k2)
//   1x1 WConv(k3) tD -> D', BN
//   (+ input when stride = 1 and D = D')
//
// With k1 = k2 = k3 = 0 every stage is dense or the identity and the block
// reduces to the MobileNetV2 unit. When expansion = 1 the first conv is
// omitted (configurable), matching the MobileNetV2 reference layout.
template <typename T>
class WaveletUnit : public Module<T> {
public:
    WaveletUnit(const UnitSpec& spec, Rng& rng) : spec_(spec) {
        spec_.validate();
        const int expanded = spec.expanded_channels();
        if (spec.has_expansion()) {
            expand_.emplace(WConvSpec{spec.in_channels, expanded, spec.kappa1, 1, 1}, rng);
            bn1_.emplace(expanded);
        }
        dw_.emplace(expanded, 3, spec.stride, rng);
        bn2_.emplace(expanded);
        if (spec.use_dfwt) dfwt_.emplace(DFWTSpec{expanded, spec.kappa2});
        proj_.emplace(WConvSpec{expanded, spec.out_channels, spec.kappa3, 1, 1}, rng);
        bn3_.emplace(spec.out_channels);
    }

    NodePtr<T> forward(Tape<T>* tape, const NodePtr<T>& x, bool training) override {
        NodePtr<T> h = x;
        if (expand_) {
            h = expand_->forward(tape, h, training);
            h = bn1_->forward(tape, h, training);
            h = relu6(tape, h);
        }
        h = dw_->forward(tape, h, training);
        h = bn2_->forward(tape, h, training);
        h = relu6(tape, h);
        if (dfwt_) h = dfwt_->forward(tape, h, training);
        h = proj_->forward(tape, h, training);
        h = bn3_->forward(tape, h, training);
        if (spec_.has_residual()) h = add(tape, x, h);
        return h;
    }

    void collect_params(const std::string& prefix, std::vector<ParamRef<T>>& out) override {
        if (expand_) {
            expand_->collect_params(prefix + ".expand", out);
            bn1_->collect_params(prefix + ".bn1", out);
        }
        dw_->collect_params(prefix + ".dw", out);
        bn2_->collect_params(prefix + ".bn2", out);
        proj_->collect_params(prefix + ".proj", out);
        bn3_->collect_params(prefix + ".bn3", out);
    }

    const UnitSpec& spec() const { return spec_; }

private:
    UnitSpec spec_;
    std::optional<WConvLayer<T>> expand_;
    std::optional<BatchNormLayer<T>> bn1_;
    std::optional<DepthwiseConv2dLayer<T>> dw_;
    std::optional<BatchNormLayer<T>> bn2_;
    std::optional<DFWTLayer<T>> dfwt_;
    std::optional<WConvLayer<T>> proj_;
    std::optional<BatchNormLayer<T>> bn3_;
};

template <typename T>
class GlobalAvgPoolLayer : public Module<T> {
public:
    NodePtr<T> forward(Tape<T>* tape, const NodePtr<T>& x, bool) override { return global_avg_pool(tape, x); }
    void collect_params(const std::string&, std::vector<ParamRef<T>>&) override {}
};

// Adjacency of a unit's sparse mixing chain: everything downstream of the
// dense expansion, i.e. depthwise (identity on channels) -> [DFWT] ->
// projection WConv. This is the composition Theorem 1 speaks about; with the
// DFWT it is full, without it it is just the projection's sparse support.
inline AdjacencyMatrix unit_mixing_adjacency(const UnitSpec& spec) {
    const int expanded = spec.expanded_channels();
    AdjacencyMatrix chain = AdjacencyMatrix::identity(expanded); // 3x3 DWConv mixes space, not channels
    if (spec.use_dfwt && spec.kappa2 > 0) chain = compose(adjacency_of_dfwt(expanded, spec.kappa2), chain);
    return compose(adjacency_of_wconv(expanded, spec.out_channels, spec.kappa3), chain);
}

} // namespace wnet

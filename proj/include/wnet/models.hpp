#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "wnet/complexity.hpp"
#include "wnet/layers.hpp"

namespace wnet {

// MobileNet-style channel rounding: nearest multiple of `divisor`, at least
// `divisor`, never dropping below 90% of the unrounded value. Multiples of 8
// keep kappa = 3 partitions integral under every width multiplier used here.
inline int make_divisible(double v, int divisor = 8) {
    int nv = std::max(divisor, static_cast<int>(v + divisor / 2.0) / divisor * divisor);
    if (static_cast<double>(nv) < 0.9 * v) nv += divisor;
    return nv;
}

struct StageSpec {
    std::string op = "block"; // "block" = WaveletNet unit
    int out_channels = 0;
    int repeat = 1;
    int stride = 1;
    int kappa1 = 0, kappa2 = 3, kappa3 = 3;
    int expansion = -1; // -1: use the model-wide default
};

struct ModelConfig {
    std::string name = "model";
    int input_resolution = 224;
    int input_channels = 3;
    int num_classes = 1000;
    double width_mult = 1.0;
    int expansion = 6;
    int stem_channels = 32;
    int stem_kernel = 3;
    int stem_stride = 2;
    std::vector<StageSpec> stages;
    std::string head = "dense"; // "dense" | "wconv" | "none"
    int head_channels = 1280;
    int head_kappa = 3;
    bool head_scales_with_width = true;
    bool strict_divisibility = false; // true: error instead of clamping kappa
    bool use_dfwt = true;             // false: the ablation twin
    bool omit_expansion_when_t1 = true;
};

inline void to_json(nlohmann::json& j, const StageSpec& s) {
    j = nlohmann::json{{"operator", s.op},      {"C", s.out_channels}, {"repeat", s.repeat}, {"stride", s.stride},
                       {"kappa1", s.kappa1},    {"kappa2", s.kappa2},  {"kappa3", s.kappa3}};
    if (s.expansion >= 0) j["expansion"] = s.expansion;
}

inline void from_json(const nlohmann::json& j, StageSpec& s) {
    s.op = j.value("operator", "block");
    j.at("C").get_to(s.out_channels);
    s.repeat = j.value("repeat", 1);
    s.stride = j.value("stride", 1);
    s.kappa1 = j.value("kappa1", 0);
    s.kappa2 = j.value("kappa2", 3);
    s.kappa3 = j.value("kappa3", 3);
    s.expansion = j.value("expansion", -1);
}

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"name", c.name},
                       {"input_resolution", c.input_resolution},
                       {"input_channels", c.input_channels},
                       {"num_classes", c.num_classes},
                       {"width_mult", c.width_mult},
                       {"expansion", c.expansion},
                       {"stem_channels", c.stem_channels},
                       {"stem_kernel", c.stem_kernel},
                       {"stem_stride", c.stem_stride},
                       {"stages", c.stages},
                       {"head", c.head},
                       {"head_channels", c.head_channels},
                       {"head_kappa", c.head_kappa},
                       {"head_scales_with_width", c.head_scales_with_width},
                       {"strict_divisibility", c.strict_divisibility},
                       {"use_dfwt", c.use_dfwt},
                       {"omit_expansion_when_t1", c.omit_expansion_when_t1}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
    ModelConfig d;
    c.name = j.value("name", d.name);
    c.input_resolution = j.value("input_resolution", d.input_resolution);
    c.input_channels = j.value("input_channels", d.input_channels);
    c.num_classes = j.value("num_classes", d.num_classes);
    c.width_mult = j.value("width_mult", d.width_mult);
    c.expansion = j.value("expansion", d.expansion);
    c.stem_channels = j.value("stem_channels", d.stem_channels);
    c.stem_kernel = j.value("stem_kernel", d.stem_kernel);
    c.stem_stride = j.value("stem_stride", d.stem_stride);
    c.stages = j.value("stages", std::vector<StageSpec>{});
    c.head = j.value("head", d.head);
    c.head_channels = j.value("head_channels", d.head_channels);
    c.head_kappa = j.value("head_kappa", d.head_kappa);
    c.head_scales_with_width = j.value("head_scales_with_width", d.head_scales_with_width);
    c.strict_divisibility = j.value("strict_divisibility", d.strict_divisibility);
    c.use_dfwt = j.value("use_dfwt", d.use_dfwt);
    c.omit_expansion_when_t1 = j.value("omit_expansion_when_t1", d.omit_expansion_when_t1);
}

inline std::string config_hash(const ModelConfig& c) {
    const std::string s = nlohmann::json(c).dump();
    std::uint64_t h = 1469598103934665603ull; // FNV-1a
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

// ---------------------------------------------------------------------------
// model planning: resolve channel counts, depths and spatial extents
// ---------------------------------------------------------------------------

struct ModelPlan {
    ModelConfig config;
    std::vector<LayerDesc> descs; // structural rows for complexity accounting

    struct UnitEntry {
        std::string name;
        UnitSpec spec;
    };
    std::vector<UnitEntry> units;
    bool has_head = false;
    bool head_is_wconv = false;
    int head_in_c = 0, head_out_c = 0, head_kappa = 0;
    int classifier_in_c = 0;
    std::array<int, 3> kappas{0, 0, 0}; // representative (kappa1, kappa2, kappa3)
};

namespace detail {

inline int clamp_kappa(const char* what, int requested, int feasible, bool strict) {
    if (requested <= feasible) return requested;
    if (strict)
        throw std::invalid_argument(std::string(what) + ": depth " + std::to_string(requested) +
                                    " infeasible (max " + std::to_string(feasible) + ") under strict divisibility");
    return feasible;
}

} // namespace detail

inline ModelPlan plan_model(const ModelConfig& config) {
    ModelPlan plan;
    plan.config = config;
    const bool strict = config.strict_divisibility;
    int h = config.input_resolution, w = config.input_resolution;
    int channels = config.input_channels;

    auto push = [&](LayerDesc d) { plan.descs.push_back(std::move(d)); };
    auto ceil_div = [](int a, int s) { return (a + s - 1) / s; };

    // stem
    const int stem_c = make_divisible(config.stem_channels * config.width_mult);
    {
        LayerDesc d;
        d.name = "stem";
        d.kind = LayerKind::conv;
        d.kernel = config.stem_kernel;
        d.stride = config.stem_stride;
        d.in_h = h; d.in_w = w; d.in_c = channels;
        h = ceil_div(h, d.stride); w = ceil_div(w, d.stride);
        d.out_h = h; d.out_w = w; d.out_c = stem_c;
        push(d);
        push({"stem.bn", LayerKind::batchnorm, h, w, stem_c, h, w, stem_c});
        channels = stem_c;
    }

    bool kappas_set = false;
    for (std::size_t si = 0; si < config.stages.size(); ++si) {
        const StageSpec& stage = config.stages[si];
        const int out_c = make_divisible(stage.out_channels * config.width_mult);
        const int t = stage.expansion >= 0 ? stage.expansion : config.expansion;
        for (int r = 0; r < stage.repeat; ++r) {
            const int stride = (r == 0) ? stage.stride : 1;
            const std::string name = "stage" + std::to_string(si + 1) + ".unit" + std::to_string(r);
            const int expanded = channels * t;

            UnitSpec unit;
            unit.in_channels = channels;
            unit.out_channels = out_c;
            unit.expansion = t;
            unit.stride = stride;
            unit.use_dfwt = config.use_dfwt;
            unit.omit_expansion_when_t1 = config.omit_expansion_when_t1;
            unit.kappa1 = detail::clamp_kappa((name + ".expand").c_str(), stage.kappa1,
                                              std::min(two_adic_valuation(channels), two_adic_valuation(expanded)),
                                              strict);
            const int k23 = detail::clamp_kappa(
                (name + ".proj").c_str(), std::min(stage.kappa2, stage.kappa3),
                std::min(two_adic_valuation(expanded), two_adic_valuation(out_c)), strict);
            unit.kappa2 = k23;
            unit.kappa3 = k23;
            if (!kappas_set) {
                plan.kappas = {unit.kappa1, unit.kappa2, unit.kappa3};
                kappas_set = true;
            }

            if (unit.has_expansion()) {
                LayerDesc d;
                d.name = name + ".expand";
                d.kind = LayerKind::wconv;
                d.in_h = h; d.in_w = w; d.in_c = channels;
                d.out_h = h; d.out_w = w; d.out_c = expanded;
                d.kappa = unit.kappa1;
                d.requested_kappa = stage.kappa1;
                push(d);
                push({name + ".bn1", LayerKind::batchnorm, h, w, expanded, h, w, expanded});
            }
            {
                LayerDesc d;
                d.name = name + ".dw";
                d.kind = LayerKind::dwconv;
                d.kernel = 3;
                d.stride = stride;
                d.in_h = h; d.in_w = w; d.in_c = expanded;
                h = ceil_div(h, stride); w = ceil_div(w, stride);
                d.out_h = h; d.out_w = w; d.out_c = expanded;
                push(d);
                push({name + ".bn2", LayerKind::batchnorm, h, w, expanded, h, w, expanded});
            }
            if (config.use_dfwt && unit.kappa2 > 0) {
                LayerDesc d;
                d.name = name + ".dfwt";
                d.kind = LayerKind::dfwt;
                d.in_h = h; d.in_w = w; d.in_c = expanded;
                d.out_h = h; d.out_w = w; d.out_c = expanded;
                d.kappa = unit.kappa2;
                d.requested_kappa = stage.kappa2;
                push(d);
            }
            {
                LayerDesc d;
                d.name = name + ".proj";
                d.kind = LayerKind::wconv;
                d.in_h = h; d.in_w = w; d.in_c = expanded;
                d.out_h = h; d.out_w = w; d.out_c = out_c;
                d.kappa = unit.kappa3;
                d.requested_kappa = stage.kappa3;
                push(d);
                push({name + ".bn3", LayerKind::batchnorm, h, w, out_c, h, w, out_c});
            }
            plan.units.push_back({name, unit});
            channels = out_c;
        }
    }

    if (config.head != "none" && config.head_channels > 0) {
        const int head_c = config.head_scales_with_width ? make_divisible(config.head_channels * config.width_mult)
                                                         : config.head_channels;
        plan.has_head = true;
        plan.head_in_c = channels;
        plan.head_out_c = head_c;
        LayerDesc d;
        d.name = "head";
        d.in_h = h; d.in_w = w; d.in_c = channels;
        d.out_h = h; d.out_w = w; d.out_c = head_c;
        if (config.head == "wconv") {
            plan.head_is_wconv = true;
            plan.head_kappa = detail::clamp_kappa("head", config.head_kappa,
                                                  std::min(two_adic_valuation(channels), two_adic_valuation(head_c)),
                                                  strict);
            d.kind = LayerKind::wconv;
            d.kappa = plan.head_kappa;
            d.requested_kappa = config.head_kappa;
        } else {
            d.kind = LayerKind::conv;
        }
        push(d);
        push({"head.bn", LayerKind::batchnorm, h, w, head_c, h, w, head_c});
        channels = head_c;
    }

    push({"pool", LayerKind::pool, h, w, channels, 1, 1, channels});
    plan.classifier_in_c = channels;
    push({"classifier", LayerKind::conv, 1, 1, channels, 1, 1, config.num_classes});
    return plan;
}

inline ComplexityReport report_for(const ModelConfig& config) {
    const ModelPlan plan = plan_model(config);
    return make_report(config.name, config.width_mult, plan.kappas, plan.descs);
}

// ---------------------------------------------------------------------------
// canned configurations
// ---------------------------------------------------------------------------

// The ImageNet table: stem conv to 32w, seven unit stages
// (16,1,1)(24,2,2)(32,3,2)(64,4,2)(96,3,1)(160,3,2)(320,1,1) with
// (kappa1, kappa2, kappa3) = (0, kappa, kappa), a 1280 head, pool, and a
// 1000-way classifier. The first stage runs at expansion 1, the rest at t.
inline ModelConfig imagenet_config(double width_mult = 1.0, int kappa = 3, int t = 6) {
    ModelConfig c;
    c.name = "imagenet";
    c.input_resolution = 224;
    c.num_classes = 1000;
    c.width_mult = width_mult;
    c.expansion = t;
    c.stem_channels = 32;
    c.stem_stride = 2;
    const int table[7][3] = {{16, 1, 1}, {24, 2, 2}, {32, 3, 2}, {64, 4, 2}, {96, 3, 1}, {160, 3, 2}, {320, 1, 1}};
    for (int i = 0; i < 7; ++i) {
        StageSpec s;
        s.out_channels = table[i][0];
        s.repeat = table[i][1];
        s.stride = table[i][2];
        s.kappa1 = 0;
        s.kappa2 = kappa;
        s.kappa3 = kappa;
        if (i == 0) s.expansion = 1;
        c.stages.push_back(s);
    }
    c.head = "dense";
    c.head_channels = 1280;
    c.head_kappa = kappa;
    return c;
}

// Three stages of M identical units at widths {16, 32, 64}w, stride 2 into
// stages two and three; 9M + 2 counted conv layers in total.
inline ModelConfig cifar_config(int m, double width_mult = 1.0) {
    ModelConfig c;
    c.name = "cifar";
    c.input_resolution = 32;
    c.num_classes = 10;
    c.width_mult = width_mult;
    c.expansion = 6;
    c.stem_channels = 16;
    c.stem_stride = 1;
    const int widths[3] = {16, 32, 64};
    for (int i = 0; i < 3; ++i) {
        StageSpec s;
        s.out_channels = widths[i];
        s.repeat = m;
        s.stride = (i == 0) ? 1 : 2;
        s.kappa1 = 0;
        s.kappa2 = 3;
        s.kappa3 = 3;
        c.stages.push_back(s);
    }
    c.head = "none";
    c.head_channels = 0;
    return c;
}

// Desk-scale model for the toy training profiles: one stage of three units
// at width 16 on small inputs.
inline ModelConfig tiny_config(int resolution = 8, int units = 3, int width = 16) {
    ModelConfig c;
    c.name = "tiny";
    c.input_resolution = resolution;
    c.num_classes = 10;
    c.stem_channels = width;
    c.stem_stride = 1;
    StageSpec s;
    s.out_channels = width;
    s.repeat = units;
    s.stride = 1;
    s.kappa1 = 0;
    s.kappa2 = 3;
    s.kappa3 = 3;
    c.stages.push_back(s);
    c.head = "none";
    c.head_channels = 0;
    return c;
}

// The DFWT-less twin: every DFWT becomes the identity, nothing else moves.
// Parameter count and parameter shapes are identical to the original.
inline ModelConfig ablation_of(ModelConfig config) {
    config.use_dfwt = false;
    config.name += "-ablation";
    return config;
}

// ---------------------------------------------------------------------------
// runtime model
// ---------------------------------------------------------------------------

template <typename T>
class Model {
public:
    Model(const ModelPlan& plan, std::uint64_t seed) : plan_(plan), seed_(seed), hash_(config_hash(plan.config)) {
        Rng rng(seed);
        const ModelConfig& c = plan.config;
        const int stem_c = plan.descs.front().out_c;
        stem_ = std::make_unique<Conv2dLayer<T>>(c.input_channels, stem_c, c.stem_kernel, c.stem_stride, rng);
        stem_bn_ = std::make_unique<BatchNormLayer<T>>(stem_c);
        for (const auto& entry : plan.units) units_.push_back(std::make_unique<WaveletUnit<T>>(entry.spec, rng));
        if (plan.has_head) {
            WConvSpec hs{plan.head_in_c, plan.head_out_c, plan.head_is_wconv ? plan.head_kappa : 0, 1, 1};
            head_ = std::make_unique<WConvLayer<T>>(hs, rng);
            head_bn_ = std::make_unique<BatchNormLayer<T>>(plan.head_out_c);
        }
        classifier_ = std::make_unique<Conv2dLayer<T>>(plan.classifier_in_c, c.num_classes, 1, 1, rng);
    }

    // Returns the class logits (batch x 1 x 1 x classes).
    NodePtr<T> forward(Tape<T>* tape, const NodePtr<T>& x, bool training) {
        auto h = stem_->forward(tape, x, training);
        h = stem_bn_->forward(tape, h, training);
        h = relu6(tape, h);
        for (auto& unit : units_) h = unit->forward(tape, h, training);
        if (head_) {
            h = head_->forward(tape, h, training);
            h = head_bn_->forward(tape, h, training);
            h = relu6(tape, h);
        }
        h = global_avg_pool(tape, h);
        return classifier_->forward(tape, h, training);
    }

    Tensor<T> infer(const Tensor<T>& x) {
        auto in = make_leaf<T>(x);
        return forward(nullptr, in, false)->value;
    }

    std::vector<ParamRef<T>> parameters() {
        std::vector<ParamRef<T>> out;
        stem_->collect_params("stem", out);
        stem_bn_->collect_params("stem.bn", out);
        for (std::size_t i = 0; i < units_.size(); ++i) units_[i]->collect_params(plan_.units[i].name, out);
        if (head_) {
            head_->collect_params("head", out);
            head_bn_->collect_params("head.bn", out);
        }
        classifier_->collect_params("classifier", out);
        return out;
    }

    std::int64_t param_count() {
        std::int64_t n = 0;
        for (const auto& p : parameters()) n += static_cast<std::int64_t>(p.node->value.size());
        return n;
    }

    const ModelPlan& plan() const { return plan_; }
    std::uint64_t seed() const { return seed_; }
    const std::string& hash() const { return hash_; }

private:
    ModelPlan plan_;
    std::uint64_t seed_;
    std::string hash_;
    std::unique_ptr<Conv2dLayer<T>> stem_;
    std::unique_ptr<BatchNormLayer<T>> stem_bn_;
    std::vector<std::unique_ptr<WaveletUnit<T>>> units_;
    std::unique_ptr<WConvLayer<T>> head_;
    std::unique_ptr<BatchNormLayer<T>> head_bn_;
    std::unique_ptr<Conv2dLayer<T>> classifier_;
};

} // namespace wnet

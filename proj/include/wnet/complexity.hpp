#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "wnet/connectivity.hpp"

namespace wnet {

enum class LayerKind { conv, dwconv, wconv, dfwt, batchnorm, pool };

inline const char* to_string(LayerKind k) {
    switch (k) {
        case LayerKind::conv: return "conv";
        case LayerKind::dwconv: return "dwconv";
        case LayerKind::wconv: return "wconv";
        case LayerKind::dfwt: return "dfwt";
        case LayerKind::batchnorm: return "batchnorm";
        case LayerKind::pool: return "pool";
    }
    return "?";
}

// Structural description of one layer in a built model; the complexity
// counters work off these records alone.
struct LayerDesc {
    std::string name;
    LayerKind kind = LayerKind::conv;
    int in_h = 0, in_w = 0, in_c = 0;
    int out_h = 0, out_w = 0, out_c = 0;
    int kernel = 1;
    int stride = 1;
    int kappa = 0;           // effective depth after any clamping
    int requested_kappa = 0; // depth asked for by the config
};

// Exact trainable scalar count by structural enumeration. Convolutions carry
// no bias (a batch norm follows every conv); batch norm carries the affine
// pair per channel.
inline std::int64_t count_params(const LayerDesc& l) {
    const std::int64_t k2 = static_cast<std::int64_t>(l.kernel) * l.kernel;
    switch (l.kind) {
        case LayerKind::conv: return k2 * l.in_c * l.out_c;
        case LayerKind::dwconv: return k2 * l.in_c;
        case LayerKind::wconv: {
            const std::vector<int> pin = wconv_partition_in(l.in_c, l.kappa);
            const std::vector<int> pout = wconv_partition_out(l.out_c, l.kappa);
            std::int64_t total = 0;
            for (std::size_t p = 0; p < pin.size(); ++p) total += k2 * pin[p] * pout[p];
            return total;
        }
        case LayerKind::batchnorm: return 2 * static_cast<std::int64_t>(l.out_c);
        case LayerKind::dfwt:
        case LayerKind::pool: return 0;
    }
    return 0;
}

// Multiply-accumulates: weights applied once per output spatial position.
// Batch norm, activations, pooling and the (addition-only) DFWT count zero,
// matching the convention under which MobileNetV2 is the 300M comparator.
inline std::int64_t count_macs(const LayerDesc& l) {
    const std::int64_t positions = static_cast<std::int64_t>(l.out_h) * l.out_w;
    switch (l.kind) {
        case LayerKind::conv:
        case LayerKind::dwconv:
        case LayerKind::wconv: return count_params(l) * positions;
        default: return 0;
    }
}

// Implementer-derived exact closed form for a 1x1 WConv with depth >= 1:
// two end pieces contribute DD'/2^(kappa+1) each and the kappa-1 middle
// pieces DD'/2^(kappa+2) each, summing to DD'(kappa+3)/2^(kappa+2).
inline std::int64_t wconv_exact_params_closed_form(int d, int dprime, int kappa) {
    if (kappa == 0) return static_cast<std::int64_t>(d) * dprime;
    return static_cast<std::int64_t>(d) * dprime * (kappa + 3) >> (kappa + 2);
}

struct ClosedForm {
    double macs = 0.0;
    double params = 0.0;
};

// The printed complexity table, formula for formula. `aux` is the depth for
// the wconv kinds and the group count for gconv1x1. Note the printed WConv
// row reads DD'(kappa+1)/2^kappa, which overstates the count implied by the
// layer's own piece arithmetic; reconcile() surfaces the difference.
inline ClosedForm table1_closed_form(const std::string& kind, int n, int d, int dprime, int aux) {
    const double nn = static_cast<double>(n) * n;
    const double dd = static_cast<double>(d) * dprime;
    if (kind == "dwconv3x3") return {9.0 * nn * dprime, 9.0 * d};
    if (kind == "conv1x1") return {nn * dd, dd};
    if (kind == "gconv1x1") return {nn * dd / aux, dd / aux};
    if (kind == "wconv1x1") {
        const double f = dd * (aux + 1) / std::pow(2.0, aux);
        return {nn * f, f};
    }
    if (kind == "wconv1x1_max") {
        const double f = d * std::log2(static_cast<double>(dprime));
        return {nn * f, f};
    }
    throw std::invalid_argument("table1_closed_form: unknown kind '" + kind + "'");
}

struct Discrepancy {
    std::string name;
    std::string kind;
    std::int64_t exact_params = 0;
    double closed_form_params = 0.0;
    std::int64_t exact_macs = 0;
    double closed_form_macs = 0.0;
    double ratio = 0.0; // exact / closed form (params)
};

struct LayerReport {
    LayerDesc desc;
    std::int64_t params = 0;
    std::int64_t macs = 0;
};

struct ComplexityReport {
    std::string model;
    double width_mult = 1.0;
    std::array<int, 3> kappas{0, 0, 0};
    std::vector<LayerReport> layers;
    std::vector<Discrepancy> discrepancies;
    std::vector<std::string> clamped_layers;
    std::int64_t total_params = 0;
    std::int64_t total_macs = 0;
    std::int64_t conv_layer_count = 0; // stem + unit convs + head + classifier
};

// Which Table-1 row, if any, covers this layer.
inline std::string table1_kind(const LayerDesc& l) {
    if (l.kind == LayerKind::dwconv && l.kernel == 3) return "dwconv3x3";
    if (l.kind == LayerKind::conv && l.kernel == 1) return "conv1x1";
    if (l.kind == LayerKind::wconv && l.kernel == 1) return "wconv1x1";
    return "";
}

// Compares the exact enumeration against the printed closed form per layer
// and records every disagreement (relative difference above float slack).
inline std::vector<Discrepancy> reconcile(const std::vector<LayerReport>& layers) {
    std::vector<Discrepancy> out;
    for (const auto& lr : layers) {
        const std::string kind = table1_kind(lr.desc);
        if (kind.empty()) continue;
        const ClosedForm cf =
            table1_closed_form(kind, lr.desc.out_h, lr.desc.in_c, lr.desc.out_c, lr.desc.kappa);
        const double expected = cf.params;
        if (expected <= 0.0) continue;
        const double rel = std::abs(static_cast<double>(lr.params) - expected) / expected;
        if (rel > 1e-9) {
            Discrepancy d;
            d.name = lr.desc.name;
            d.kind = kind;
            d.exact_params = lr.params;
            d.closed_form_params = cf.params;
            d.exact_macs = lr.macs;
            d.closed_form_macs = cf.macs;
            d.ratio = static_cast<double>(lr.params) / expected;
            out.push_back(std::move(d));
        }
    }
    return out;
}

inline ComplexityReport make_report(std::string model, double width_mult, std::array<int, 3> kappas,
                                    const std::vector<LayerDesc>& descs) {
    ComplexityReport r;
    r.model = std::move(model);
    r.width_mult = width_mult;
    r.kappas = kappas;
    for (const auto& d : descs) {
        LayerReport lr;
        lr.desc = d;
        lr.params = count_params(d);
        lr.macs = count_macs(d);
        r.total_params += lr.params;
        r.total_macs += lr.macs;
        if (d.kind == LayerKind::conv || d.kind == LayerKind::dwconv || d.kind == LayerKind::wconv)
            ++r.conv_layer_count;
        if (d.kappa != d.requested_kappa) r.clamped_layers.push_back(d.name);
        r.layers.push_back(std::move(lr));
    }
    r.discrepancies = reconcile(r.layers);
    return r;
}

inline nlohmann::json to_json(const ComplexityReport& r) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& lr : r.layers) {
        layers.push_back({{"name", lr.desc.name},
                          {"kind", to_string(lr.desc.kind)},
                          {"in_shape", {lr.desc.in_h, lr.desc.in_w, lr.desc.in_c}},
                          {"out_shape", {lr.desc.out_h, lr.desc.out_w, lr.desc.out_c}},
                          {"kernel", lr.desc.kernel},
                          {"stride", lr.desc.stride},
                          {"kappa", lr.desc.kappa},
                          {"kappa_requested", lr.desc.requested_kappa},
                          {"params", lr.params},
                          {"macs", lr.macs}});
    }
    nlohmann::json discrepancies = nlohmann::json::array();
    for (const auto& d : r.discrepancies) {
        discrepancies.push_back({{"name", d.name},
                                 {"kind", d.kind},
                                 {"exact_params", d.exact_params},
                                 {"closed_form_params", d.closed_form_params},
                                 {"exact_macs", d.exact_macs},
                                 {"closed_form_macs", d.closed_form_macs},
                                 {"ratio", d.ratio}});
    }
    return nlohmann::json{{"schema", "wnet.report/1"},
                          {"model", r.model},
                          {"width_mult", r.width_mult},
                          {"kappas", r.kappas},
                          {"total_params", r.total_params},
                          {"total_macs", r.total_macs},
                          {"conv_layer_count", r.conv_layer_count},
                          {"clamped_layers", r.clamped_layers},
                          {"layers", layers},
                          {"discrepancies", discrepancies}};
}

} // namespace wnet

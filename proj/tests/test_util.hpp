#pragma once

// Test-side oracles and helpers. These deliberately reimplement the
// arithmetic they check (dumb loops, double precision) and stay independent
// of the library's kernels.

#include <cstdio>
#include <fstream>
#include <functional>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <json.hpp>

#include "wnet/autograd.hpp"
#include "wnet/layers.hpp"
#include "wnet/tensor.hpp"

namespace testutil {

// The printed 8x8 matrices, re-typed here so the tests carry their own copy.
inline const int kA8[8][8] = {
    {1, 1, 1, 1, 0, 0, 0, 0}, {0, 0, 0, 0, 1, 1, 0, 0}, {0, 0, 0, 0, 0, 0, 1, 0}, {0, 0, 0, 0, 0, 0, 1, 0},
    {0, 0, 0, 0, 0, 0, 0, 1}, {0, 0, 0, 0, 0, 0, 0, 1}, {0, 0, 0, 0, 0, 0, 0, 1}, {0, 0, 0, 0, 0, 0, 0, 1}};

inline const int kH8[8][8] = {
    {1, 0, 0, 0, -1, 0, 0, 0}, {0, 1, 0, 0, 0, -1, 0, 0}, {0, 0, 1, 0, 0, 0, -1, 0}, {0, 0, 0, 1, 0, 0, 0, -1},
    {1, 0, -1, 0, 1, 0, -1, 0}, {0, 1, 0, -1, 0, 1, 0, -1}, {1, -1, 1, -1, 1, -1, 1, -1}, {1, 1, 1, 1, 1, 1, 1, 1}};

// Direct per-output-scalar convolution with "same" ceil(N/stride) padding,
// written from the definition.
template <typename T>
wnet::Tensor<double> naive_conv2d(const wnet::Tensor<T>& x, const wnet::Tensor<T>& w, int stride) {
    const int kernel = w.shape()[0], cin = w.shape()[2], cout = w.shape()[3];
    const int out_h = (x.height() + stride - 1) / stride;
    const int out_w = (x.width() + stride - 1) / stride;
    const int pad_top = std::max((out_h - 1) * stride + kernel - x.height(), 0) / 2;
    const int pad_left = std::max((out_w - 1) * stride + kernel - x.width(), 0) / 2;
    wnet::Tensor<double> y(x.batch(), out_h, out_w, cout);
    for (int n = 0; n < x.batch(); ++n)
        for (int oh = 0; oh < out_h; ++oh)
            for (int ow = 0; ow < out_w; ++ow)
                for (int co = 0; co < cout; ++co) {
                    double acc = 0.0;
                    for (int kh = 0; kh < kernel; ++kh)
                        for (int kw = 0; kw < kernel; ++kw)
                            for (int ci = 0; ci < cin; ++ci) {
                                const int ih = oh * stride + kh - pad_top;
                                const int iw = ow * stride + kw - pad_left;
                                if (ih < 0 || ih >= x.height() || iw < 0 || iw >= x.width()) continue;
                                acc += static_cast<double>(x.at(n, ih, iw, ci)) * w.at(kh, kw, ci, co);
                            }
                    y.at(n, oh, ow, co) = acc;
                }
    return y;
}

template <typename T>
wnet::Tensor<double> naive_depthwise(const wnet::Tensor<T>& x, const wnet::Tensor<T>& w, int stride) {
    const int kernel = w.shape()[0], channels = w.shape()[2];
    const int out_h = (x.height() + stride - 1) / stride;
    const int out_w = (x.width() + stride - 1) / stride;
    const int pad_top = std::max((out_h - 1) * stride + kernel - x.height(), 0) / 2;
    const int pad_left = std::max((out_w - 1) * stride + kernel - x.width(), 0) / 2;
    wnet::Tensor<double> y(x.batch(), out_h, out_w, channels);
    for (int n = 0; n < x.batch(); ++n)
        for (int oh = 0; oh < out_h; ++oh)
            for (int ow = 0; ow < out_w; ++ow)
                for (int c = 0; c < channels; ++c) {
                    double acc = 0.0;
                    for (int kh = 0; kh < kernel; ++kh)
                        for (int kw = 0; kw < kernel; ++kw) {
                            const int ih = oh * stride + kh - pad_top;
                            const int iw = ow * stride + kw - pad_left;
                            if (ih < 0 || ih >= x.height() || iw < 0 || iw >= x.width()) continue;
                            acc += static_cast<double>(x.at(n, ih, iw, c)) * w.at(kh, kw, c, 0);
                        }
                    y.at(n, oh, ow, c) = acc;
                }
    return y;
}

template <typename A, typename B>
double max_abs_diff(const wnet::Tensor<A>& a, const wnet::Tensor<B>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    return m;
}

// Central finite differences on a scalar-valued closure, one parameter entry
// at a time. The epsilon ladder resolves ReLU6 kink crossings (error
// proportional to eps) without hiding genuinely wrong gradients.
template <typename T>
double fd_max_rel_err(const std::vector<wnet::NodePtr<T>>& params,
                      const std::function<wnet::NodePtr<T>(wnet::Tape<T>*)>& forward, double eps = 1e-3,
                      double tolerance = 1e-3) {
    for (const auto& p : params) p->zero_grad();
    wnet::Tape<T> tape;
    auto loss = forward(&tape);
    tape.backward(loss);
    double worst = 0.0;
    for (const auto& p : params) {
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double analytic = static_cast<double>(p->grad()[i]);
            double rel = 0.0;
            for (double e = eps; e >= eps * 0.009; e /= 10.0) {
                const T saved = p->value[i];
                p->value[i] = static_cast<T>(saved + e);
                const double lp = forward(nullptr)->value[0];
                p->value[i] = static_cast<T>(saved - e);
                const double lm = forward(nullptr)->value[0];
                p->value[i] = saved;
                const double numeric = (lp - lm) / (2.0 * e);
                rel = std::abs(numeric - analytic) / std::max({std::abs(numeric), std::abs(analytic), 1e-8});
                if (rel <= tolerance) break;
            }
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

// Scalar loss: fixed random projection of a tensor, recorded on the tape.
template <typename T>
wnet::NodePtr<T> projected_sum(wnet::Tape<T>* tape, const wnet::NodePtr<T>& out, std::uint64_t pseed) {
    wnet::Rng prng(pseed);
    wnet::Tensor<T> proj(out->value.shape());
    proj.fill_uniform(prng, 0.5, 1.5);
    auto pnode = wnet::make_leaf(std::move(proj));
    wnet::Tensor<T> prod(out->value.shape());
    for (std::size_t i = 0; i < prod.size(); ++i) prod[i] = out->value[i] * pnode->value[i];
    auto mul = tape ? tape->emit(std::move(prod)) : wnet::make_leaf(std::move(prod));
    if (tape)
        tape->record([out, pnode, mul] {
            for (std::size_t i = 0; i < mul->grad().size(); ++i) out->grad()[i] += mul->grad()[i] * pnode->value[i];
        });
    return wnet::reduce_sum(tape, mul);
}

struct CmdResult {
    int exit_code = -1;
    std::string out;
};

inline CmdResult run_cli(const std::string& args) {
    const std::string cmd = std::string(WNET_CLI_PATH) + " " + args + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    CmdResult result;
    if (!pipe) return result;
    char buf[4096];
    while (std::size_t n = std::fread(buf, 1, sizeof(buf), pipe)) result.out.append(buf, n);
    const int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

// Minimal structural validator for the subset of JSON Schema the shipped
// schemas use: type, properties, required, items, enum.
inline bool validate_schema(const nlohmann::json& schema, const nlohmann::json& value, std::string* err = nullptr) {
    auto fail = [&](const std::string& why) {
        if (err) *err = why;
        return false;
    };
    if (schema.contains("enum")) {
        for (const auto& option : schema["enum"])
            if (option == value) return true;
        return fail("value not in enum");
    }
    if (schema.contains("type")) {
        const std::string type = schema["type"].get<std::string>();
        if (type == "object" && !value.is_object()) return fail("expected object");
        if (type == "array" && !value.is_array()) return fail("expected array");
        if (type == "string" && !value.is_string()) return fail("expected string");
        if (type == "integer" && !value.is_number_integer()) return fail("expected integer");
        if (type == "number" && !value.is_number()) return fail("expected number");
        if (type == "boolean" && !value.is_boolean()) return fail("expected boolean");
    }
    if (schema.contains("required"))
        for (const auto& key : schema["required"])
            if (!value.contains(key.get<std::string>())) return fail("missing required key " + key.get<std::string>());
    if (schema.contains("properties") && value.is_object())
        for (auto& [key, sub] : schema["properties"].items())
            if (value.contains(key) && !validate_schema(sub, value[key], err)) {
                if (err) *err = key + ": " + *err;
                return false;
            }
    if (schema.contains("items") && value.is_array())
        for (const auto& element : value)
            if (!validate_schema(schema["items"], element, err)) return false;
    return true;
}

inline nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return nlohmann::json::parse(in);
}

} // namespace testutil

#pragma once

#include <array>
#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "wnet/rng.hpp"

namespace wnet {

// Dense rank-4 tensor, channels-last: (batch, height, width, channels).
// The channel axis is innermost so a per-position channel vector is
// contiguous, which is the access pattern every layer here cares about.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    Tensor(int n, int h, int w, int c) : shape_{n, h, w, c} {
        if (n < 0 || h < 0 || w < 0 || c < 0) throw std::invalid_argument("Tensor: negative extent");
        data_.assign(static_cast<std::size_t>(n) * h * w * c, T(0));
    }

    explicit Tensor(const std::array<int, 4>& s) : Tensor(s[0], s[1], s[2], s[3]) {}

    const std::array<int, 4>& shape() const { return shape_; }
    int batch() const { return shape_[0]; }
    int height() const { return shape_[1]; }
    int width() const { return shape_[2]; }
    int channels() const { return shape_[3]; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }

    T& at(int n, int h, int w, int c) { return data_[offset(n, h, w, c)]; }
    const T& at(int n, int h, int w, int c) const { return data_[offset(n, h, w, c)]; }

    T& operator[](std::size_t i) { return data_[i]; }
    T operator[](std::size_t i) const { return data_[i]; }

    void fill(T v) { data_.assign(data_.size(), v); }

    void fill_uniform(Rng& rng, double lo, double hi) {
        for (auto& v : data_) v = static_cast<T>(rng.uniform(lo, hi));
    }

    void fill_truncated_normal(Rng& rng, double mean, double stddev) {
        for (auto& v : data_) v = static_cast<T>(rng.truncated_normal(mean, stddev));
    }

    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    std::string shape_str() const {
        std::ostringstream os;
        os << shape_[0] << "x" << shape_[1] << "x" << shape_[2] << "x" << shape_[3];
        return os.str();
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(shape_[0], shape_[1], shape_[2], shape_[3]);
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return out;
    }

private:
    std::size_t offset(int n, int h, int w, int c) const {
        return ((static_cast<std::size_t>(n) * shape_[1] + h) * shape_[2] + w) * shape_[3] + c;
    }

    std::array<int, 4> shape_{0, 0, 0, 0};
    std::vector<T> data_;
};

using TensorF = Tensor<float>;

inline void check_same_shape(const char* who, const std::array<int, 4>& a, const std::array<int, 4>& b) {
    if (a != b) {
        std::ostringstream os;
        os << who << ": shape mismatch " << a[0] << "x" << a[1] << "x" << a[2] << "x" << a[3] << " vs "
           << b[0] << "x" << b[1] << "x" << b[2] << "x" << b[3];
        throw std::invalid_argument(os.str());
    }
}

} // namespace wnet

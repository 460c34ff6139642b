#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "wnet/rng.hpp"
#include "wnet/tensor.hpp"

namespace wnet {

struct Dataset {
    Tensor<float> images; // (count, H, W, C)
    std::vector<int> labels;
    std::string split;

    int count() const { return images.batch(); }
};

// ---------------------------------------------------------------------------
// CIFAR-10 binary format: records of 3073 bytes, 1 label byte followed by
// 3072 pixel bytes (channel-planar R, G, B; each plane row-major 32x32).
// ---------------------------------------------------------------------------

namespace detail {

inline void read_cifar_file(const std::string& path, std::vector<float>& pixels, std::vector<int>& labels) {
    constexpr int kRecord = 3073;
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cifar10: cannot open " + path);
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.empty() || bytes.size() % kRecord != 0)
        throw std::runtime_error("cifar10: " + path + " holds " + std::to_string(bytes.size()) +
                                 " bytes, not a multiple of the 3073-byte record");
    const std::size_t records = bytes.size() / kRecord;
    for (std::size_t r = 0; r < records; ++r) {
        const unsigned char* rec = reinterpret_cast<const unsigned char*>(bytes.data()) + r * kRecord;
        const int label = rec[0];
        if (label >= 10)
            throw std::runtime_error("cifar10: " + path + " record " + std::to_string(r) + " has label " +
                                     std::to_string(label) + " >= 10");
        labels.push_back(label);
        // planar RGB to interleaved HWC
        for (int h = 0; h < 32; ++h)
            for (int w = 0; w < 32; ++w)
                for (int c = 0; c < 3; ++c)
                    pixels.push_back(static_cast<float>(rec[1 + c * 1024 + h * 32 + w]) / 255.0f);
    }
}

inline Dataset pack(std::vector<float> pixels, std::vector<int> labels, const std::string& split) {
    Dataset d;
    d.split = split;
    d.labels = std::move(labels);
    d.images = Tensor<float>(static_cast<int>(d.labels.size()), 32, 32, 3);
    std::copy(pixels.begin(), pixels.end(), d.images.data());
    return d;
}

} // namespace detail

// Loads the six standard binary batches from `dir` (or dir/cifar-10-
// batches-bin) and normalizes both splits with the per-channel mean and
// standard deviation of the training split.
inline std::pair<Dataset, Dataset> load_cifar10(const std::string& dir) {
    namespace fs = std::filesystem;
    std::string root = dir;
    if (!fs::exists(fs::path(root) / "data_batch_1.bin") && fs::exists(fs::path(root) / "cifar-10-batches-bin"))
        root = (fs::path(root) / "cifar-10-batches-bin").string();

    std::vector<float> train_px, test_px;
    std::vector<int> train_lb, test_lb;
    for (int b = 1; b <= 5; ++b)
        detail::read_cifar_file((fs::path(root) / ("data_batch_" + std::to_string(b) + ".bin")).string(), train_px,
                                train_lb);
    detail::read_cifar_file((fs::path(root) / "test_batch.bin").string(), test_px, test_lb);

    Dataset train = detail::pack(std::move(train_px), std::move(train_lb), "train");
    Dataset test = detail::pack(std::move(test_px), std::move(test_lb), "test");

    double mean[3] = {0, 0, 0}, var[3] = {0, 0, 0};
    const std::size_t per_channel = train.images.size() / 3;
    for (std::size_t i = 0; i < train.images.size(); i += 3)
        for (int c = 0; c < 3; ++c) mean[c] += train.images[i + c];
    for (int c = 0; c < 3; ++c) mean[c] /= static_cast<double>(per_channel);
    for (std::size_t i = 0; i < train.images.size(); i += 3)
        for (int c = 0; c < 3; ++c) {
            const double d = train.images[i + c] - mean[c];
            var[c] += d * d;
        }
    for (int c = 0; c < 3; ++c) var[c] /= static_cast<double>(per_channel);
    for (Dataset* d : {&train, &test})
        for (std::size_t i = 0; i < d->images.size(); i += 3)
            for (int c = 0; c < 3; ++c)
                d->images[i + c] = static_cast<float>((d->images[i + c] - mean[c]) / std::sqrt(var[c] + 1e-8));
    return {std::move(train), std::move(test)};
}

// Class-conditional Gaussian blobs with fixed per-class channel means,
// stratified over classes (sample i gets class i mod classes). Higher
// noise_sigma makes the task harder; at sigma -> 0 the classes are linearly
// separable from pooled channel statistics alone.
inline Dataset synth_dataset(std::uint64_t seed, int n, int classes, int size, int channels,
                             double noise_sigma = 1.0) {
    Dataset d;
    d.split = "synth-" + std::to_string(seed);
    d.images = Tensor<float>(n, size, size, channels);
    d.labels.resize(n);

    // per-(class, channel) means drawn once from a fixed stream so the task
    // itself does not depend on `seed`
    Rng mean_rng(12345);
    std::vector<double> means(static_cast<std::size_t>(classes) * channels);
    for (auto& m : means) m = mean_rng.uniform(-1.0, 1.0);

    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        const int label = i % classes;
        d.labels[i] = label;
        for (int h = 0; h < size; ++h)
            for (int w = 0; w < size; ++w)
                for (int c = 0; c < channels; ++c)
                    d.images.at(i, h, w, c) =
                        static_cast<float>(means[static_cast<std::size_t>(label) * channels + c] +
                                           noise_sigma * rng.normal());
    }
    return d;
}

// Pad-4 / random-crop / horizontal-flip augmentation of one image from a
// batch, written into `out`. The evaluation path never calls this.
inline void augment_into(const Tensor<float>& images, int index, Rng& rng, float* out) {
    const int h = images.height(), w = images.width(), c = images.channels();
    const int pad = 4;
    const int dy = rng.uniform_int(2 * pad + 1) - pad;
    const int dx = rng.uniform_int(2 * pad + 1) - pad;
    const bool flip = rng.coin();
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int sy = y + dy;
            const int sx = flip ? (w - 1 - (x + dx)) : (x + dx);
            for (int k = 0; k < c; ++k) {
                const bool inside = sy >= 0 && sy < h && sx >= 0 && sx < w;
                out[(static_cast<std::size_t>(y) * w + x) * c + k] = inside ? images.at(index, sy, sx, k) : 0.0f;
            }
        }
}

inline Tensor<float> augment(const Tensor<float>& images, Rng& rng) {
    Tensor<float> out(images.shape());
    for (int n = 0; n < images.batch(); ++n) augment_into(images, n, rng, &out.at(n, 0, 0, 0));
    return out;
}

} // namespace wnet

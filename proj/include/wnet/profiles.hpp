#pragma once

#include <algorithm>
#include <string>
#include <utility>

#include "wnet/data.hpp"
#include "wnet/models.hpp"
#include "wnet/train.hpp"

namespace wnet {

// A desk-scale training setup: data, model config and optimizer settings
// that finish in minutes on one core.
struct ToyProfile {
    Dataset train;
    Dataset test;
    ModelConfig model;
    TrainConfig optimizer;
};

// Synthetic Gaussian-blob classification on 8x8x3 inputs with a three-unit
// width-16 model. Noise level 2.5 keeps test error well away from both
// chance and zero.
inline ToyProfile toy_synth_profile(std::uint64_t seed, int steps = 500) {
    ToyProfile p;
    p.train = synth_dataset(seed, 2000, 10, 8, 3, 2.5);
    p.test = synth_dataset(seed + 9000, 512, 10, 8, 3, 2.5);
    p.model = tiny_config(8, 3, 16);
    p.optimizer.lr = 0.05;
    p.optimizer.batch_size = 32;
    p.optimizer.epochs = 1 << 20; // bounded by max_steps
    p.optimizer.max_steps = steps;
    p.optimizer.weight_decay = 2e-4;
    p.optimizer.seed = seed;
    return p;
}

inline Dataset head_of(const Dataset& d, int count) {
    Dataset s;
    s.split = d.split;
    count = std::min(count, d.count());
    s.images = Tensor<float>(count, d.images.height(), d.images.width(), d.images.channels());
    std::copy(d.images.data(), d.images.data() + s.images.size(), s.images.data());
    s.labels.assign(d.labels.begin(), d.labels.begin() + count);
    return s;
}

// A 2000/1000-sample slice of CIFAR-10 under a one-block-per-stage
// half-width model.
inline ToyProfile toy_cifar_profile(const std::string& root, std::uint64_t seed, int steps = 500) {
    auto [train, test] = load_cifar10(root);
    ToyProfile p;
    p.train = head_of(train, 2000);
    p.test = head_of(test, 1000);
    p.model = cifar_config(1, 0.5);
    p.optimizer.lr = 0.05;
    p.optimizer.batch_size = 64;
    p.optimizer.epochs = 1 << 20;
    p.optimizer.max_steps = steps;
    p.optimizer.augment = true;
    p.optimizer.seed = seed;
    return p;
}

struct AblationPairResult {
    TrainLog with_log, without_log;
    double with_err = 0.0, without_err = 0.0;
    double gap = 0.0; // without minus with; positive favors the DFWT
};

// Trains the model and its DFWT-less twin from identical initial weights
// (same seed, and the DFWT never draws from the stream) on an identical
// batch order, then evaluates both.
inline AblationPairResult run_ablation_pair(const ToyProfile& profile, std::uint64_t seed) {
    AblationPairResult r;
    Model<float> with_model(plan_model(profile.model), seed);
    Model<float> without_model(plan_model(ablation_of(profile.model)), seed);
    TrainConfig tc = profile.optimizer;
    tc.seed = seed;
    r.with_log = train(with_model, profile.train, tc, &profile.test);
    r.without_log = train(without_model, profile.train, tc, &profile.test);
    r.with_err = evaluate(with_model, profile.test);
    r.without_err = evaluate(without_model, profile.test);
    r.gap = r.without_err - r.with_err;
    return r;
}

} // namespace wnet

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "wnet/data.hpp"
#include "wnet/models.hpp"

namespace wnet {

struct TrainConfig {
    double lr = 0.1;
    double momentum = 0.9;
    double weight_decay = 2e-4;
    std::string schedule = "constant"; // constant | cifar-step | imagenet-linear
    int batch_size = 128;
    int epochs = 1;
    int max_steps = 0; // 0 = no cap
    bool augment = false;
    std::uint64_t seed = 0;

    void validate() const {
        if (lr <= 0.0) throw std::invalid_argument("TrainConfig: learning rate must be positive");
        if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("TrainConfig: momentum must be in [0, 1)");
        if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch size must be >= 1");
    }
};

// Learning rate for a given epoch. The step schedule starts at `base` and
// drops tenfold at epoch 82; the linear schedule decays to zero over 120
// epochs.
inline double schedule_lr(const std::string& schedule, double base, int epoch) {
    if (schedule == "constant") return base;
    if (schedule == "cifar-step") return epoch < 82 ? base : base * 0.1;
    if (schedule == "imagenet-linear") return std::max(base * (1.0 - static_cast<double>(epoch) / 120.0), 0.0);
    throw std::invalid_argument("schedule_lr: unknown schedule '" + schedule + "'");
}

// Momentum SGD with coupled weight decay: v <- m*v + (g + wd*w), w <- w - lr*v.
// Decay applies to convolution weights only, never to the batch-norm affine
// pair.
template <typename T>
class SgdMomentum {
public:
    SgdMomentum(std::vector<ParamRef<T>> params, double momentum, double weight_decay)
        : params_(std::move(params)), momentum_(momentum), weight_decay_(weight_decay) {
        for (const auto& p : params_) velocity_.emplace_back(p.node->value.shape());
    }

    void step(double lr) {
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto& w = params_[i].node->value;
            auto& g = params_[i].node->grad();
            auto& v = velocity_[i];
            const T wd = params_[i].weight_decay ? static_cast<T>(weight_decay_) : T(0);
            for (std::size_t j = 0; j < w.size(); ++j) {
                v[j] = static_cast<T>(momentum_) * v[j] + g[j] + wd * w[j];
                w[j] -= static_cast<T>(lr) * v[j];
            }
        }
    }

    void zero_grad() {
        for (auto& p : params_) p.node->zero_grad();
    }

private:
    std::vector<ParamRef<T>> params_;
    std::vector<Tensor<T>> velocity_;
    double momentum_, weight_decay_;
};

struct EpochLog {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double test_err = -1.0; // percent; -1 when no test set was given
};

struct TrainLog {
    std::vector<EpochLog> epochs;
    int steps = 0;
    double first_step_loss = 0.0; // loss of the first batch at the initial weights

    double initial_loss() const { return first_step_loss; }
    double final_loss() const { return epochs.empty() ? 0.0 : epochs.back().train_loss; }

    bool loss_monotone() const {
        for (std::size_t i = 1; i < epochs.size(); ++i)
            if (epochs[i].train_loss > epochs[i - 1].train_loss) return false;
        return true;
    }
};

inline nlohmann::json to_json(const EpochLog& e) {
    return nlohmann::json{{"epoch", e.epoch},
                          {"lr", e.lr},
                          {"train_loss", e.train_loss},
                          {"train_acc", e.train_acc},
                          {"test_err", e.test_err}};
}

// Top-1 error percentage over a dataset, evaluated with running statistics
// and no augmentation.
template <typename T>
double evaluate(Model<T>& model, const Dataset& data, int batch_size = 64) {
    const int n = data.count();
    const int h = data.images.height(), w = data.images.width(), c = data.images.channels();
    int wrong = 0;
    for (int begin = 0; begin < n; begin += batch_size) {
        const int bs = std::min(batch_size, n - begin);
        Tensor<T> batch(bs, h, w, c);
        for (int i = 0; i < bs; ++i)
            std::copy(&data.images.at(begin + i, 0, 0, 0), &data.images.at(begin + i, 0, 0, 0) + h * w * c,
                      &batch.at(i, 0, 0, 0));
        Tensor<T> logits = model.infer(batch);
        const int classes = logits.channels();
        for (int i = 0; i < bs; ++i) {
            int best = 0;
            for (int k = 1; k < classes; ++k)
                if (logits.at(i, 0, 0, k) > logits.at(i, 0, 0, best)) best = k;
            if (best != data.labels[begin + i]) ++wrong;
        }
    }
    return 100.0 * wrong / static_cast<double>(n);
}

// Momentum-SGD training loop. Deterministic given the seed: sequential
// kernels, a private shuffle stream, and a private augmentation stream.
// Throws if the loss stops being finite.
template <typename T>
TrainLog train(Model<T>& model, const Dataset& data, const TrainConfig& config, const Dataset* test = nullptr) {
    config.validate();
    TrainLog log;
    SgdMomentum<T> opt(model.parameters(), config.momentum, config.weight_decay);
    Rng shuffle_rng(config.seed * 2654435761u + 1);
    Rng augment_rng(config.seed * 2654435761u + 2);

    const int n = data.count();
    const int h = data.images.height(), w = data.images.width(), c = data.images.channels();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

    int steps = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = schedule_lr(config.schedule, config.lr, epoch);
        // Fisher-Yates on the private stream
        for (int i = n - 1; i > 0; --i) std::swap(order[i], order[shuffle_rng.uniform_int(i + 1)]);

        double loss_sum = 0.0;
        int seen = 0, correct = 0;
        for (int begin = 0; begin + config.batch_size <= n; begin += config.batch_size) {
            const int bs = config.batch_size;
            Tensor<T> batch(bs, h, w, c);
            std::vector<int> labels(bs);
            for (int i = 0; i < bs; ++i) {
                const int idx = order[begin + i];
                labels[i] = data.labels[idx];
                if (config.augment)
                    augment_into(data.images, idx, augment_rng, &batch.at(i, 0, 0, 0));
                else
                    std::copy(&data.images.at(idx, 0, 0, 0), &data.images.at(idx, 0, 0, 0) + h * w * c,
                              &batch.at(i, 0, 0, 0));
            }
            Tape<T> tape;
            auto x = make_leaf<T>(std::move(batch));
            auto logits = model.forward(&tape, x, true);
            auto loss = softmax_cross_entropy(&tape, logits, labels);
            const double loss_value = loss->value[0];
            if (!std::isfinite(loss_value))
                throw std::runtime_error("train: loss diverged (non-finite) at step " + std::to_string(steps));
            if (steps == 0) log.first_step_loss = loss_value;
            opt.zero_grad();
            tape.backward(loss);
            opt.step(lr);

            loss_sum += loss_value * bs;
            seen += bs;
            const int classes = logits->value.channels();
            for (int i = 0; i < bs; ++i) {
                int best = 0;
                for (int k = 1; k < classes; ++k)
                    if (logits->value.at(i, 0, 0, k) > logits->value.at(i, 0, 0, best)) best = k;
                if (best == labels[i]) ++correct;
            }
            ++steps;
            if (config.max_steps > 0 && steps >= config.max_steps) break;
        }
        EpochLog e;
        e.epoch = epoch;
        e.lr = lr;
        e.train_loss = seen > 0 ? loss_sum / seen : 0.0;
        e.train_acc = seen > 0 ? 100.0 * correct / seen : 0.0;
        if (test) e.test_err = evaluate(model, *test);
        log.epochs.push_back(e);
        if (config.max_steps > 0 && steps >= config.max_steps) break;
    }
    log.steps = steps;
    return log;
}

} // namespace wnet

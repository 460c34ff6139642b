#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "wnet/tensor.hpp"

namespace wnet {

template <typename T>
class Tape;

// A tensor in the computation graph: a value plus a lazily allocated
// gradient buffer of the same shape. Leaves (parameters, inputs) have a null
// tape; anything produced by a taped op is stamped with the tape that owns
// its backward step.
template <typename T>
struct Node {
    Tensor<T> value;
    bool requires_grad = false;
    const Tape<T>* producer = nullptr;

    explicit Node(Tensor<T> v, bool rg = false) : value(std::move(v)), requires_grad(rg) {}

    Tensor<T>& grad() {
        if (grad_.empty() && value.size() > 0) grad_ = Tensor<T>(value.shape());
        return grad_;
    }
    bool has_grad() const { return !grad_.empty(); }
    void zero_grad() {
        if (!grad_.empty()) grad_.fill(T(0));
    }

private:
    Tensor<T> grad_;
};

template <typename T>
using NodePtr = std::shared_ptr<Node<T>>;

template <typename T>
NodePtr<T> make_leaf(Tensor<T> value, bool requires_grad = false) {
    return std::make_shared<Node<T>>(std::move(value), requires_grad);
}

// Ordered record of executed primitives. Backward replays the recorded steps
// exactly once each, in reverse execution order; each step reads its output
// node's gradient and accumulates into its inputs' gradients.
template <typename T>
class Tape {
public:
    NodePtr<T> emit(Tensor<T> value) {
        auto node = make_leaf<T>(std::move(value));
        node->producer = this;
        return node;
    }

    void record(std::function<void()> step) { steps_.push_back(std::move(step)); }

    std::size_t steps() const { return steps_.size(); }

    // Seeds d(loss)/d(loss) = 1 and sweeps the tape backward. The loss must
    // be a scalar produced under this tape.
    void backward(const NodePtr<T>& loss) {
        if (!loss || loss->producer != this)
            throw std::runtime_error("backward: tensor was not produced under this tape");
        if (loss->value.size() != 1)
            throw std::runtime_error("backward: loss must be a scalar, got shape " + loss->value.shape_str());
        loss->grad().fill(T(1));
        for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
    }

private:
    std::vector<std::function<void()>> steps_;
};

using NodeF = Node<float>;
using NodePtrF = NodePtr<float>;
using TapeF = Tape<float>;

} // namespace wnet

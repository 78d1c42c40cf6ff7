#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ssn/tensor.hpp"

namespace ssn {

namespace detail {

struct Node {
    Tensor value;
    Tensor grad;  // allocated on first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    // Reads this node's grad and accumulates into parents.
    std::function<void(Node&)> backward_fn;

    Tensor& grad_buffer();
};

}  // namespace detail

/// Handle to a value in the recorded computation graph.
class Var {
public:
    Var() = default;
    explicit Var(Tensor value, bool requires_grad = false);

    const Tensor& value() const { return node_->value; }
    const Shape& shape() const { return node_->value.shape(); }
    std::size_t numel() const { return node_->value.numel(); }
    bool requires_grad() const { return node_ && node_->requires_grad; }
    bool defined() const { return static_cast<bool>(node_); }

    /// Gradient accumulated by the last backward(); zeros if never touched.
    Tensor grad() const;
    void zero_grad();

    /// Parameter update in place. Only valid on leaves. Var is a shared handle,
    /// so this is available through const references too.
    Tensor& mutable_value() const;

    Var detach() const { return Var(node_->value, false); }

    const std::shared_ptr<detail::Node>& node() const { return node_; }

    static Var from_node(std::shared_ptr<detail::Node> n) {
        Var v;
        v.node_ = std::move(n);
        return v;
    }

private:
    std::shared_ptr<detail::Node> node_;
};

/// Builds an op output. Records parents and the backward closure only when
/// grad mode is on and some parent requires grad. Throws NumericError on
/// non-finite output.
Var make_result(Tensor value, std::vector<Var> parents, std::function<void(detail::Node&)> backward_fn,
                const char* op_name);

/// Reverse-mode sweep from a scalar. Each reachable node runs its backward once.
void backward(const Var& loss);

bool grad_enabled();

/// Disables graph recording for the lifetime of the guard (inference).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

}  // namespace ssn

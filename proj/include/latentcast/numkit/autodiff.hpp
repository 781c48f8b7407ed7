#pragma once

#include "latentcast/numkit/tensor.hpp"

#include <deque>
#include <functional>
#include <string>
#include <vector>

namespace latentcast::numkit {

/// A trainable array with its gradient accumulator.
template <typename Scalar>
struct BasicParameter {
    std::string name;
    BasicTensor<Scalar> value;
    BasicTensor<Scalar> grad;

    void zero_grad() { grad = BasicTensor<Scalar>(value.shape()); }
};

template <typename Scalar>
class BasicGraph;

/// Handle to a node on a graph's tape. Cheap to copy; valid while the graph lives.
template <typename Scalar>
class BasicVar {
public:
    BasicVar() = default;
    BasicVar(BasicGraph<Scalar>* graph, int id) : graph_(graph), id_(id) {}

    const BasicTensor<Scalar>& value() const { return graph_->value(id_); }
    const Shape& shape() const { return value().shape(); }
    BasicGraph<Scalar>& graph() const { return *graph_; }
    int id() const { return id_; }
    bool valid() const { return graph_ != nullptr; }

private:
    BasicGraph<Scalar>* graph_ = nullptr;
    int id_ = -1;
};

/// Reverse-mode tape. Nodes are appended in creation order, which is a
/// topological order, so backward() is a single reverse sweep. Node storage is
/// a deque so references returned by value() survive later appends.
template <typename Scalar>
class BasicGraph {
public:
    using Tensor = BasicTensor<Scalar>;
    using Var = BasicVar<Scalar>;
    using BackwardFn = std::function<void(BasicGraph&, int self)>;

    struct Node {
        const char* op = "";
        Tensor value;
        Tensor grad;
        std::vector<int> parents;
        BackwardFn backward;
        BasicParameter<Scalar>* param = nullptr;
        bool requires_grad = false;
    };

    BasicGraph() = default;
    BasicGraph(const BasicGraph&) = delete;
    BasicGraph& operator=(const BasicGraph&) = delete;

    Var constant(Tensor value);
    /// Differentiable leaf whose gradient is read back with grad().
    Var leaf(Tensor value);
    /// Leaf bound to a parameter; backward() accumulates into param.grad.
    Var parameter(BasicParameter<Scalar>& param);

    /// Records an op result. `backward` is dropped when no parent requires grad.
    Var record(const char* op, Tensor value, std::vector<int> parents, BackwardFn backward);

    /// Requires a single-element loss. Node gradients are recomputed from
    /// scratch on every call; parameter gradients accumulate.
    void backward(Var loss);

    const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
    const Tensor& grad(Var v) const;
    bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
    const Node& node(int id) const { return nodes_[static_cast<std::size_t>(id)]; }

    /// Gradient buffer of a node, allocated as zeros on first use. For use by
    /// backward closures only.
    Tensor& grad_buffer(int id);
    const Tensor& upstream(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }

    std::size_t size() const { return nodes_.size(); }

private:
    std::deque<Node> nodes_;
};

using Graph = BasicGraph<float>;
using Var = BasicVar<float>;
using Parameter = BasicParameter<float>;

extern template class BasicGraph<float>;
extern template class BasicGraph<double>;

}  // namespace latentcast::numkit

#include "latentcast/numkit/autodiff.hpp"

namespace latentcast::numkit {

template <typename Scalar>
auto BasicGraph<Scalar>::constant(Tensor value) -> Var {
    Node n;
    n.op = "constant";
    n.value = std::move(value);
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int>(nodes_.size() - 1));
}

template <typename Scalar>
auto BasicGraph<Scalar>::leaf(Tensor value) -> Var {
    Node n;
    n.op = "leaf";
    n.value = std::move(value);
    n.requires_grad = true;
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int>(nodes_.size() - 1));
}

template <typename Scalar>
auto BasicGraph<Scalar>::parameter(BasicParameter<Scalar>& param) -> Var {
    Node n;
    n.op = "parameter";
    n.value = param.value;
    n.param = &param;
    n.requires_grad = true;
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int>(nodes_.size() - 1));
}

template <typename Scalar>
auto BasicGraph<Scalar>::record(const char* op, Tensor value, std::vector<int> parents, BackwardFn backward)
    -> Var {
    Node n;
    n.op = op;
    n.value = std::move(value);
    for (int p : parents) n.requires_grad = n.requires_grad || nodes_[static_cast<std::size_t>(p)].requires_grad;
    n.parents = std::move(parents);
    if (n.requires_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int>(nodes_.size() - 1));
}

template <typename Scalar>
auto BasicGraph<Scalar>::grad_buffer(int id) -> Tensor& {
    auto& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.shape() != n.value.shape()) n.grad = Tensor(n.value.shape());
    return n.grad;
}

template <typename Scalar>
auto BasicGraph<Scalar>::grad(Var v) const -> const Tensor& {
    const auto& n = nodes_[static_cast<std::size_t>(v.id())];
    if (n.grad.shape() != n.value.shape()) throw std::logic_error("grad: node has no gradient; call backward first");
    return n.grad;
}

template <typename Scalar>
void BasicGraph<Scalar>::backward(Var loss) {
    if (loss.value().size() != 1) {
        throw ShapeError("backward: loss must be a scalar, got shape " + to_string(loss.shape()));
    }
    for (auto& n : nodes_) {
        n.grad = Tensor();
        if (n.requires_grad && n.parents.empty()) n.grad = Tensor(n.value.shape());
    }
    const int root = loss.id();
    if (!nodes_[static_cast<std::size_t>(root)].requires_grad) return;
    grad_buffer(root)[0] = Scalar(1);
    for (int id = root; id >= 0; --id) {
        auto& n = nodes_[static_cast<std::size_t>(id)];
        if (!n.requires_grad || n.grad.shape() != n.value.shape()) continue;
        if (n.backward) n.backward(*this, id);
        if (n.param != nullptr) {
            auto& p = *n.param;
            if (p.grad.shape() != p.value.shape()) p.zero_grad();
            p.grad.array() += n.grad.array();
        }
    }
}

template class BasicGraph<float>;
template class BasicGraph<double>;

}  // namespace latentcast::numkit

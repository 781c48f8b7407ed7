#include "latentcast/numkit/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace latentcast::numkit {
namespace {

template <typename S>
using Mat = RowMatrix<S>;
template <typename S>
using Arr = Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using ConstStrided = Eigen::Map<const Mat<S>, 0, Eigen::OuterStride<>>;
template <typename S>
using Strided = Eigen::Map<Mat<S>, 0, Eigen::OuterStride<>>;

bool is_suffix(const Shape& big, const Shape& small) {
    if (small.size() > big.size()) return false;
    return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

template <typename S>
using Col = Eigen::Array<S, Eigen::Dynamic, 1>;

template <typename S>
BasicGraph<S>& graph_of(const BasicVar<S>& a, const BasicVar<S>& b, const char* op) {
    if (&a.graph() != &b.graph()) throw std::invalid_argument(std::string(op) + ": operands live on different graphs");
    return a.graph();
}

// [reps, cols] view of a tensor whose trailing block has `cols` elements.
template <typename S>
Eigen::Map<const Arr<S>> blocks(const BasicTensor<S>& t, std::int64_t cols) {
    return Eigen::Map<const Arr<S>>(t.ptr(), t.size() / cols, cols);
}
template <typename S>
Eigen::Map<Arr<S>> blocks(BasicTensor<S>& t, std::int64_t cols) {
    return Eigen::Map<Arr<S>>(t.ptr(), t.size() / cols, cols);
}

template <typename S>
Shape with_last(Shape shape, std::int64_t last) {
    shape.back() = last;
    return shape;
}

template <typename S, typename F, typename G>
BasicVar<S> unary(const char* op, BasicVar<S> a, F&& forward, G&& derivative) {
    auto& g = a.graph();
    BasicTensor<S> out(a.shape());
    out.array() = forward(a.value().array());
    const int ia = a.id();
    return g.record(op, std::move(out), {ia}, [ia, derivative](BasicGraph<S>& gr, int self) {
        const auto& up = gr.upstream(self);
        gr.grad_buffer(ia).array() += up.array() * derivative(gr.value(ia).array(), gr.value(self).array());
    });
}

}  // namespace

template <typename S>
BasicVar<S> add(BasicVar<S> a, BasicVar<S> b) {
    auto& g = graph_of(a, b, "add");
    if (!is_suffix(a.shape(), b.shape())) throw ShapeError("add", a.shape(), b.shape());
    const std::int64_t cols = b.value().size();
    BasicTensor<S> out = a.value();
    if (cols > 0) blocks(out, cols).rowwise() += blocks(b.value(), cols).row(0);
    const int ia = a.id(), ib = b.id();
    return g.record("add", std::move(out), {ia, ib}, [ia, ib, cols](BasicGraph<S>& gr, int self) {
        const auto& up = gr.upstream(self);
        if (gr.requires_grad(ia)) gr.grad_buffer(ia).array() += up.array();
        if (gr.requires_grad(ib) && cols > 0) blocks(gr.grad_buffer(ib), cols).row(0) += blocks(up, cols).colwise().sum();
    });
}

template <typename S>
BasicVar<S> sub(BasicVar<S> a, BasicVar<S> b) {
    auto& g = graph_of(a, b, "sub");
    if (!is_suffix(a.shape(), b.shape())) throw ShapeError("sub", a.shape(), b.shape());
    const std::int64_t cols = b.value().size();
    BasicTensor<S> out = a.value();
    if (cols > 0) blocks(out, cols).rowwise() -= blocks(b.value(), cols).row(0);
    const int ia = a.id(), ib = b.id();
    return g.record("sub", std::move(out), {ia, ib}, [ia, ib, cols](BasicGraph<S>& gr, int self) {
        const auto& up = gr.upstream(self);
        if (gr.requires_grad(ia)) gr.grad_buffer(ia).array() += up.array();
        if (gr.requires_grad(ib) && cols > 0) blocks(gr.grad_buffer(ib), cols).row(0) -= blocks(up, cols).colwise().sum();
    });
}

template <typename S>
BasicVar<S> mul(BasicVar<S> a, BasicVar<S> b) {
    auto& g = graph_of(a, b, "mul");
    if (!is_suffix(a.shape(), b.shape())) throw ShapeError("mul", a.shape(), b.shape());
    const std::int64_t cols = b.value().size();
    BasicTensor<S> out = a.value();
    if (cols > 0) blocks(out, cols).rowwise() *= blocks(b.value(), cols).row(0);
    const int ia = a.id(), ib = b.id();
    return g.record("mul", std::move(out), {ia, ib}, [ia, ib, cols](BasicGraph<S>& gr, int self) {
        if (cols == 0) return;
        const auto& up = gr.upstream(self);
        const auto bv = blocks(gr.value(ib), cols);
        if (gr.requires_grad(ia)) blocks(gr.grad_buffer(ia), cols) += blocks(up, cols).rowwise() * bv.row(0);
        if (gr.requires_grad(ib)) {
            blocks(gr.grad_buffer(ib), cols).row(0) +=
                (blocks(up, cols) * blocks(gr.value(ia), cols)).colwise().sum();
        }
    });
}

template <typename S>
BasicVar<S> scale(BasicVar<S> a, S factor) {
    return unary<S>(
        "scale", a, [factor](const auto& x) -> Col<S> { return x * factor; },
        [factor](const auto& x, const auto&) -> Col<S> { return Col<S>::Constant(x.size(), factor); });
}

template <typename S>
BasicVar<S> matmul(BasicVar<S> a, BasicVar<S> w) {
    auto& g = graph_of(a, w, "matmul");
    if (a.value().rank() < 1 || w.value().rank() != 2 || a.shape().back() != w.shape()[0]) {
        throw ShapeError("matmul", a.shape(), w.shape());
    }
    const std::int64_t n = w.shape()[1];
    BasicTensor<S> out(with_last<S>(a.shape(), n));
    out.matrix().noalias() = a.value().matrix() * w.value().matrix();
    const int ia = a.id(), iw = w.id();
    return g.record("matmul", std::move(out), {ia, iw}, [ia, iw](BasicGraph<S>& gr, int self) {
        const auto up = gr.upstream(self).matrix();
        if (gr.requires_grad(ia)) gr.grad_buffer(ia).matrix().noalias() += up * gr.value(iw).matrix().transpose();
        if (gr.requires_grad(iw)) gr.grad_buffer(iw).matrix().noalias() += gr.value(ia).matrix().transpose() * up;
    });
}

template <typename S>
BasicVar<S> softmax(BasicVar<S> a) {
    auto& g = a.graph();
    if (a.value().rank() < 1) throw ShapeError("softmax: needs rank >= 1, got " + to_string(a.shape()));
    BasicTensor<S> out(a.shape());
    auto x = a.value().matrix().array();
    auto y = out.matrix().array();
    y = (x.colwise() - x.rowwise().maxCoeff()).exp();
    y.colwise() /= y.rowwise().sum();
    const int ia = a.id();
    return g.record("softmax", std::move(out), {ia}, [ia](BasicGraph<S>& gr, int self) {
        const auto up = gr.upstream(self).matrix().array();
        const auto yv = gr.value(self).matrix().array();
        Arr<S> dy = up * yv;
        gr.grad_buffer(ia).matrix().array() += dy - yv.colwise() * dy.rowwise().sum();
    });
}

template <typename S>
BasicVar<S> gelu(BasicVar<S> a) {
    constexpr S c = S(0.7978845608028654);
    constexpr S k = S(0.044715);
    return unary<S>(
        "gelu", a,
        [=](const auto& x) -> Col<S> { return S(0.5) * x * (S(1) + (c * (x + k * x.cube())).tanh()); },
        [=](const auto& x, const auto&) -> Col<S> {
            Col<S> t = (c * (x + k * x.cube())).tanh();
            return S(0.5) * (S(1) + t) + S(0.5) * x * (S(1) - t.square()) * c * (S(1) + S(3) * k * x.square());
        });
}

template <typename S>
BasicVar<S> softplus(BasicVar<S> a) {
    return unary<S>(
        "softplus", a, [](const auto& x) -> Col<S> { return x.max(S(0)) + (-x.abs()).exp().log1p(); },
        [](const auto& x, const auto&) -> Col<S> { return S(1) / (S(1) + (-x).exp()); });
}

template <typename S>
BasicVar<S> tanh(BasicVar<S> a) {
    return unary<S>(
        "tanh", a, [](const auto& x) -> Col<S> { return x.tanh(); },
        [](const auto&, const auto& y) -> Col<S> { return S(1) - y.square(); });
}

template <typename S>
BasicVar<S> attention(BasicVar<S> q, BasicVar<S> k, BasicVar<S> v, int heads) {
    auto& g = graph_of(q, k, "attention");
    graph_of(k, v, "attention");
    const auto& qs = q.shape();
    const auto& ks = k.shape();
    if (qs.size() != 3 || ks.size() != 3 || ks != v.shape() || qs[0] != ks[0] || qs[2] != ks[2]) {
        throw ShapeError("attention", qs, ks);
    }
    const std::int64_t batch = qs[0], lq = qs[1], lk = ks[1], d = qs[2];
    if (heads <= 0 || d % heads != 0) {
        throw ShapeError("attention: model dim " + std::to_string(d) + " not divisible by " + std::to_string(heads) +
                         " heads");
    }
    const std::int64_t dh = d / heads;
    const S scale_factor = S(1) / std::sqrt(static_cast<S>(dh));

    BasicTensor<S> out(qs);
    auto probs = std::make_shared<BasicTensor<S>>(Shape{batch, heads, lq, lk});
    const S* qp = q.value().ptr();
    const S* kp = k.value().ptr();
    const S* vp = v.value().ptr();
    for (std::int64_t b = 0; b < batch; ++b) {
        for (std::int64_t h = 0; h < heads; ++h) {
            ConstStrided<S> Q(qp + b * lq * d + h * dh, lq, dh, Eigen::OuterStride<>(d));
            ConstStrided<S> K(kp + b * lk * d + h * dh, lk, dh, Eigen::OuterStride<>(d));
            ConstStrided<S> V(vp + b * lk * d + h * dh, lk, dh, Eigen::OuterStride<>(d));
            Eigen::Map<Mat<S>> P(probs->ptr() + (b * heads + h) * lq * lk, lq, lk);
            P.noalias() = (Q * K.transpose()) * scale_factor;
            P.array().colwise() -= P.array().rowwise().maxCoeff();
            P.array() = P.array().exp();
            P.array().colwise() /= P.array().rowwise().sum();
            Strided<S> O(out.ptr() + b * lq * d + h * dh, lq, dh, Eigen::OuterStride<>(d));
            O.noalias() = P * V;
        }
    }
    const int iq = q.id(), ik = k.id(), iv = v.id();
    return g.record(
        "attention", std::move(out), {iq, ik, iv},
        [=](BasicGraph<S>& gr, int self) {
            const S* up = gr.upstream(self).ptr();
            const S* qv = gr.value(iq).ptr();
            const S* kv = gr.value(ik).ptr();
            const S* vv = gr.value(iv).ptr();
            S* dq = gr.requires_grad(iq) ? gr.grad_buffer(iq).ptr() : nullptr;
            S* dk = gr.requires_grad(ik) ? gr.grad_buffer(ik).ptr() : nullptr;
            S* dv = gr.requires_grad(iv) ? gr.grad_buffer(iv).ptr() : nullptr;
            Mat<S> dP, dS;
            for (std::int64_t b = 0; b < batch; ++b) {
                for (std::int64_t h = 0; h < heads; ++h) {
                    const std::int64_t qo = b * lq * d + h * dh, ko = b * lk * d + h * dh;
                    ConstStrided<S> dO(up + qo, lq, dh, Eigen::OuterStride<>(d));
                    ConstStrided<S> Q(qv + qo, lq, dh, Eigen::OuterStride<>(d));
                    ConstStrided<S> K(kv + ko, lk, dh, Eigen::OuterStride<>(d));
                    ConstStrided<S> V(vv + ko, lk, dh, Eigen::OuterStride<>(d));
                    Eigen::Map<const Mat<S>> P(probs->ptr() + (b * heads + h) * lq * lk, lq, lk);
                    if (dv) Strided<S>(dv + ko, lk, dh, Eigen::OuterStride<>(d)).noalias() += P.transpose() * dO;
                    dP.noalias() = dO * V.transpose();
                    dS = (P.array() * (dP.array().colwise() - (dP.array() * P.array()).rowwise().sum())).matrix();
                    if (dq) Strided<S>(dq + qo, lq, dh, Eigen::OuterStride<>(d)).noalias() += (dS * K) * scale_factor;
                    if (dk) {
                        Strided<S>(dk + ko, lk, dh, Eigen::OuterStride<>(d)).noalias() +=
                            (dS.transpose() * Q) * scale_factor;
                    }
                }
            }
        });
}

template <typename S>
BasicVar<S> mean_pool(BasicVar<S> a) {
    auto& g = a.graph();
    const auto& s = a.shape();
    if (s.size() < 2) throw ShapeError("mean_pool: needs rank >= 2, got " + to_string(s));
    const std::int64_t len = s[s.size() - 2], d = s.back();
    if (len == 0) throw ShapeError("mean_pool: empty pooling axis in " + to_string(s));
    const std::int64_t outer = a.value().size() / (len * d);
    Shape os(s.begin(), s.end() - 2);
    os.push_back(d);
    BasicTensor<S> out(os);
    for (std::int64_t o = 0; o < outer; ++o) {
        Eigen::Map<const Mat<S>> x(a.value().ptr() + o * len * d, len, d);
        Eigen::Map<Mat<S>>(out.ptr() + o * d, 1, d) = x.colwise().mean();
    }
    const int ia = a.id();
    return g.record("mean_pool", std::move(out), {ia}, [=](BasicGraph<S>& gr, int self) {
        const auto& up = gr.upstream(self);
        auto& dx = gr.grad_buffer(ia);
        for (std::int64_t o = 0; o < outer; ++o) {
            Eigen::Map<Mat<S>> dxo(dx.ptr() + o * len * d, len, d);
            dxo.rowwise() += Eigen::Map<const Mat<S>>(up.ptr() + o * d, 1, d).row(0) / static_cast<S>(len);
        }
    });
}

template <typename S>
BasicVar<S> embedding(BasicVar<S> table, std::span<const std::int64_t> indices) {
    auto& g = table.graph();
    if (table.value().rank() != 2) throw ShapeError("embedding: table must be rank 2, got " + to_string(table.shape()));
    const std::int64_t vocab = table.shape()[0], d = table.shape()[1];
    std::vector<std::int64_t> idx(indices.begin(), indices.end());
    BasicTensor<S> out(Shape{static_cast<std::int64_t>(idx.size()), d});
    const auto tm = table.value().matrix();
    auto om = out.matrix();
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 0 || idx[i] >= vocab) {
            throw ShapeError("embedding: index " + std::to_string(idx[i]) + " out of range for table " +
                             to_string(table.shape()));
        }
        om.row(static_cast<Eigen::Index>(i)) = tm.row(idx[i]);
    }
    const int it = table.id();
    return g.record("embedding", std::move(out), {it}, [it, idx = std::move(idx)](BasicGraph<S>& gr, int self) {
        const auto up = gr.upstream(self).matrix();
        auto dt = gr.grad_buffer(it).matrix();
        for (std::size_t i = 0; i < idx.size(); ++i) dt.row(idx[i]) += up.row(static_cast<Eigen::Index>(i));
    });
}

template <typename S>
BasicVar<S> concat_rows(std::span<const BasicVar<S>> parts) {
    if (parts.empty()) throw ShapeError("concat_rows: no operands");
    auto& g = parts.front().graph();
    const std::int64_t cols = parts.front().value().cols();
    std::int64_t rows = 0;
    std::vector<int> ids;
    std::vector<std::int64_t> offsets;
    for (const auto& p : parts) {
        if (&p.graph() != &g) throw std::invalid_argument("concat_rows: operands live on different graphs");
        if (p.value().cols() != cols) throw ShapeError("concat_rows", parts.front().shape(), p.shape());
        ids.push_back(p.id());
        offsets.push_back(rows);
        rows += p.value().rows();
    }
    BasicTensor<S> out(Shape{rows, cols});
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const auto& v = parts[i].value();
        std::copy(v.data().begin(), v.data().end(), out.data().begin() + offsets[i] * cols);
    }
    return g.record("concat_rows", std::move(out), ids, [ids, offsets](BasicGraph<S>& gr, int self) {
        const auto up = gr.upstream(self).data();
        for (std::size_t i = 0; i < ids.size(); ++i) {
            if (!gr.requires_grad(ids[i])) continue;
            auto dst = gr.grad_buffer(ids[i]).data();
            const auto cols = static_cast<std::int64_t>(up.size()) / gr.upstream(self).rows();
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += up[static_cast<std::size_t>(offsets[i] * cols) + j];
        }
    });
}

template <typename S>
BasicVar<S> layer_norm(BasicVar<S> x, BasicVar<S> gamma, BasicVar<S> beta) {
    auto& g = graph_of(x, gamma, "layer_norm");
    const std::int64_t d = x.value().cols();
    if (x.value().rank() < 1 || gamma.value().size() != d || beta.value().size() != d) {
        throw ShapeError("layer_norm", x.shape(), gamma.shape());
    }
    const std::int64_t rows = x.value().rows();
    auto xhat = std::make_shared<BasicTensor<S>>(x.shape());
    auto inv_std = std::make_shared<std::vector<S>>(static_cast<std::size_t>(rows));
    const auto xm = x.value().matrix();
    auto hm = xhat->matrix();
    for (std::int64_t r = 0; r < rows; ++r) {
        const S mu = xm.row(r).mean();
        const S var = (xm.row(r).array() - mu).square().mean();
        const S is = S(1) / std::sqrt(var + static_cast<S>(kLayerNormEpsilon));
        (*inv_std)[static_cast<std::size_t>(r)] = is;
        hm.row(r) = (xm.row(r).array() - mu) * is;
    }
    BasicTensor<S> out(x.shape());
    out.matrix().array() = (hm.array().rowwise() * gamma.value().matrix().row(0).array()).rowwise() +
                           beta.value().matrix().row(0).array();
    const int ix = x.id(), ig = gamma.id(), ib = beta.id();
    return g.record("layer_norm", std::move(out), {ix, ig, ib}, [=](BasicGraph<S>& gr, int self) {
        const auto up = gr.upstream(self).matrix().array();
        const auto h = xhat->matrix().array();
        if (gr.requires_grad(ig)) gr.grad_buffer(ig).matrix().row(0).array() += (up * h).colwise().sum();
        if (gr.requires_grad(ib)) gr.grad_buffer(ib).matrix().row(0).array() += up.colwise().sum();
        if (gr.requires_grad(ix)) {
            Arr<S> dh = up.rowwise() * gr.value(ig).matrix().row(0).array();
            auto dx = gr.grad_buffer(ix).matrix();
            for (std::int64_t r = 0; r < rows; ++r) {
                const S m1 = dh.row(r).mean();
                const S m2 = (dh.row(r) * h.row(r)).mean();
                dx.row(r).array() += (dh.row(r) - m1 - h.row(r) * m2) * (*inv_std)[static_cast<std::size_t>(r)];
            }
        }
    });
}

template <typename S>
BasicVar<S> reshape(BasicVar<S> a, Shape shape) {
    auto& g = a.graph();
    BasicTensor<S> out = a.value().reshaped(std::move(shape));
    const int ia = a.id();
    return g.record("reshape", std::move(out), {ia}, [ia](BasicGraph<S>& gr, int self) {
        gr.grad_buffer(ia).array() += gr.upstream(self).array();
    });
}

template <typename S>
BasicVar<S> slice_rows(BasicVar<S> a, std::int64_t begin, std::int64_t end) {
    auto& g = a.graph();
    const auto& s = a.shape();
    if (s.size() < 2) throw ShapeError("slice_rows: needs rank >= 2, got " + to_string(s));
    const std::int64_t len = s[s.size() - 2], d = s.back();
    if (begin < 0 || end > len || begin > end) {
        throw ShapeError("slice_rows: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") invalid for shape " + to_string(s));
    }
    const std::int64_t outer = a.value().size() / std::max<std::int64_t>(1, len * d);
    const std::int64_t n = end - begin;
    Shape os = s;
    os[os.size() - 2] = n;
    BasicTensor<S> out(os);
    for (std::int64_t o = 0; o < outer; ++o) {
        std::copy_n(a.value().ptr() + (o * len + begin) * d, n * d, out.ptr() + o * n * d);
    }
    const int ia = a.id();
    return g.record("slice_rows", std::move(out), {ia}, [=](BasicGraph<S>& gr, int self) {
        const S* up = gr.upstream(self).ptr();
        S* dx = gr.grad_buffer(ia).ptr();
        for (std::int64_t o = 0; o < outer; ++o) {
            Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>>(dx + (o * len + begin) * d, n * d) +=
                Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>>(up + o * n * d, n * d);
        }
    });
}

template <typename S>
BasicVar<S> slice_cols(BasicVar<S> a, std::int64_t begin, std::int64_t end) {
    auto& g = a.graph();
    const std::int64_t c = a.value().cols();
    if (a.value().rank() < 1 || begin < 0 || end > c || begin > end) {
        throw ShapeError("slice_cols: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") invalid for shape " + to_string(a.shape()));
    }
    BasicTensor<S> out(with_last<S>(a.shape(), end - begin));
    out.matrix() = a.value().matrix().middleCols(begin, end - begin);
    const int ia = a.id();
    return g.record("slice_cols", std::move(out), {ia}, [=](BasicGraph<S>& gr, int self) {
        gr.grad_buffer(ia).matrix().middleCols(begin, end - begin) += gr.upstream(self).matrix();
    });
}

template <typename S>
BasicVar<S> sum(BasicVar<S> a) {
    auto& g = a.graph();
    const int ia = a.id();
    return g.record("sum", BasicTensor<S>::scalar(a.value().array().sum()), {ia}, [ia](BasicGraph<S>& gr, int self) {
        gr.grad_buffer(ia).array() += gr.upstream(self)[0];
    });
}

template <typename S>
BasicVar<S> mean(BasicVar<S> a) {
    auto& g = a.graph();
    const auto n = static_cast<S>(std::max<std::int64_t>(1, a.value().size()));
    const int ia = a.id();
    return g.record("mean", BasicTensor<S>::scalar(a.value().array().sum() / n), {ia},
                    [ia, n](BasicGraph<S>& gr, int self) { gr.grad_buffer(ia).array() += gr.upstream(self)[0] / n; });
}

template <typename S>
BasicVar<S> huber(BasicVar<S> a, S delta) {
    return unary<S>(
        "huber", a,
        [delta](const auto& x) -> Col<S> {
            return (x.abs() <= delta).select(S(0.5) * x.square(), delta * (x.abs() - S(0.5) * delta));
        },
        [delta](const auto& x, const auto&) -> Col<S> { return x.max(-delta).min(delta); });
}

template <typename S>
BasicVar<S> bce_with_logits(BasicVar<S> logits, const BasicTensor<S>& targets) {
    auto& g = logits.graph();
    if (targets.shape() != logits.shape()) throw ShapeError("bce_with_logits", logits.shape(), targets.shape());
    const auto x = logits.value().array();
    const auto t = targets.array();
    BasicTensor<S> out(logits.shape());
    out.array() = x.max(S(0)) - x * t + (-x.abs()).exp().log1p();
    const int il = logits.id();
    return g.record("bce_with_logits", std::move(out), {il}, [il, targets](BasicGraph<S>& gr, int self) {
        const auto xv = gr.value(il).array();
        gr.grad_buffer(il).array() += gr.upstream(self).array() * (S(1) / (S(1) + (-xv).exp()) - targets.array());
    });
}

template <typename S>
BasicVar<S> mse(BasicVar<S> a, const BasicTensor<S>& target) {
    auto& g = a.graph();
    if (target.shape() != a.shape()) throw ShapeError("mse", a.shape(), target.shape());
    const auto n = static_cast<S>(std::max<std::int64_t>(1, a.value().size()));
    const S value = (a.value().array() - target.array()).square().sum() / n;
    const int ia = a.id();
    return g.record("mse", BasicTensor<S>::scalar(value), {ia}, [ia, n, target](BasicGraph<S>& gr, int self) {
        gr.grad_buffer(ia).array() += (S(2) * gr.upstream(self)[0] / n) * (gr.value(ia).array() - target.array());
    });
}

#define LATENTCAST_INSTANTIATE_OPS(S)                                                               \
    template BasicVar<S> add(BasicVar<S>, BasicVar<S>);                                             \
    template BasicVar<S> sub(BasicVar<S>, BasicVar<S>);                                             \
    template BasicVar<S> mul(BasicVar<S>, BasicVar<S>);                                             \
    template BasicVar<S> scale(BasicVar<S>, S);                                                     \
    template BasicVar<S> matmul(BasicVar<S>, BasicVar<S>);                                          \
    template BasicVar<S> softmax(BasicVar<S>);                                                      \
    template BasicVar<S> gelu(BasicVar<S>);                                                         \
    template BasicVar<S> softplus(BasicVar<S>);                                                     \
    template BasicVar<S> tanh(BasicVar<S>);                                                         \
    template BasicVar<S> attention(BasicVar<S>, BasicVar<S>, BasicVar<S>, int);                     \
    template BasicVar<S> mean_pool(BasicVar<S>);                                                    \
    template BasicVar<S> embedding(BasicVar<S>, std::span<const std::int64_t>);                     \
    template BasicVar<S> layer_norm(BasicVar<S>, BasicVar<S>, BasicVar<S>);                         \
    template BasicVar<S> concat_rows(std::span<const BasicVar<S>>);                                 \
    template BasicVar<S> reshape(BasicVar<S>, Shape);                                               \
    template BasicVar<S> slice_rows(BasicVar<S>, std::int64_t, std::int64_t);                       \
    template BasicVar<S> slice_cols(BasicVar<S>, std::int64_t, std::int64_t);                       \
    template BasicVar<S> sum(BasicVar<S>);                                                          \
    template BasicVar<S> mean(BasicVar<S>);                                                         \
    template BasicVar<S> huber(BasicVar<S>, S);                                                     \
    template BasicVar<S> bce_with_logits(BasicVar<S>, const BasicTensor<S>&);                       \
    template BasicVar<S> mse(BasicVar<S>, const BasicTensor<S>&);

LATENTCAST_INSTANTIATE_OPS(float)
LATENTCAST_INSTANTIATE_OPS(double)

}  // namespace latentcast::numkit

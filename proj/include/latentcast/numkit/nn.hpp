#pragma once

#include "latentcast/numkit/ops.hpp"
#include "latentcast/numkit/random.hpp"

#include <map>
#include <string>

namespace latentcast::numkit {

/// Named parameters in deterministic (lexicographic) order. References to
/// entries stay valid for the store's lifetime.
template <typename S>
class BasicParamStore {
public:
    using Parameter = BasicParameter<S>;

    BasicParamStore() = default;
    BasicParamStore(const BasicParamStore&) = delete;
    BasicParamStore& operator=(const BasicParamStore&) = delete;
    BasicParamStore(BasicParamStore&&) = default;
    BasicParamStore& operator=(BasicParamStore&&) = default;

    Parameter& create(const std::string& name, BasicTensor<S> init);
    Parameter& at(const std::string& name);
    const Parameter& at(const std::string& name) const;
    bool contains(const std::string& name) const { return params_.count(name) != 0; }

    void zero_grad();
    std::int64_t parameter_count() const;
    std::size_t size() const { return params_.size(); }

    auto begin() { return params_.begin(); }
    auto end() { return params_.end(); }
    auto begin() const { return params_.begin(); }
    auto end() const { return params_.end(); }

private:
    std::map<std::string, Parameter> params_;
};

using ParamStore = BasicParamStore<float>;

template <typename S>
struct Linear {
    BasicParameter<S>* weight = nullptr;
    BasicParameter<S>* bias = nullptr;

    Linear() = default;
    /// Weights ~ N(0, (gain / sqrt(in))^2); gain 0 gives a zero-initialized layer.
    Linear(BasicParamStore<S>& store, const std::string& name, std::int64_t in, std::int64_t out, Rng& rng,
           bool with_bias = true, double gain = 1.0);

    BasicVar<S> operator()(BasicVar<S> x) const;
};

template <typename S>
struct LayerNorm {
    BasicParameter<S>* scale = nullptr;
    BasicParameter<S>* offset = nullptr;

    LayerNorm() = default;
    LayerNorm(BasicParamStore<S>& store, const std::string& name, std::int64_t dim);

    BasicVar<S> operator()(BasicVar<S> x) const;
};

template <typename S>
struct Mlp {
    Linear<S> fc1, fc2;

    Mlp() = default;
    Mlp(BasicParamStore<S>& store, const std::string& name, std::int64_t dim, std::int64_t hidden, Rng& rng);

    BasicVar<S> operator()(BasicVar<S> x) const;
};

/// Pre-norm transformer block: x + attn(ln(x)), then x + mlp(ln(x)).
template <typename S>
struct SelfAttentionBlock {
    LayerNorm<S> ln_attn, ln_mlp;
    Linear<S> q, k, v, o;
    Mlp<S> mlp;
    int heads = 1;

    SelfAttentionBlock() = default;
    SelfAttentionBlock(BasicParamStore<S>& store, const std::string& name, std::int64_t dim, int heads, Rng& rng,
                       std::int64_t mlp_ratio = 4);

    /// x: [B, L, D]
    BasicVar<S> operator()(BasicVar<S> x) const;
};

/// Queries attend to a separate context sequence, pre-norm on both sides.
template <typename S>
struct CrossAttentionBlock {
    LayerNorm<S> ln_query, ln_context, ln_mlp;
    Linear<S> q, k, v, o;
    Mlp<S> mlp;
    int heads = 1;

    CrossAttentionBlock() = default;
    CrossAttentionBlock(BasicParamStore<S>& store, const std::string& name, std::int64_t dim, int heads, Rng& rng,
                        std::int64_t mlp_ratio = 2);

    /// query: [B, Lq, D], context: [B, Lk, D]
    BasicVar<S> operator()(BasicVar<S> query, BasicVar<S> context) const;
};

/// Fixed sinusoidal features, shape [positions.size(), dim].
template <typename S>
BasicTensor<S> sinusoidal_embedding(std::span<const double> positions, std::int64_t dim, double max_period = 10000.0);

extern template class BasicParamStore<float>;
extern template class BasicParamStore<double>;
extern template struct Linear<float>;
extern template struct Linear<double>;
extern template struct LayerNorm<float>;
extern template struct LayerNorm<double>;
extern template struct Mlp<float>;
extern template struct Mlp<double>;
extern template struct SelfAttentionBlock<float>;
extern template struct SelfAttentionBlock<double>;
extern template struct CrossAttentionBlock<float>;
extern template struct CrossAttentionBlock<double>;

}  // namespace latentcast::numkit

#include "latentcast/numkit/nn.hpp"

#include <cmath>

namespace latentcast::numkit {

template <typename S>
auto BasicParamStore<S>::create(const std::string& name, BasicTensor<S> init) -> Parameter& {
    auto [it, inserted] = params_.try_emplace(name);
    if (!inserted) throw std::invalid_argument("parameter already exists: " + name);
    it->second.name = name;
    it->second.value = std::move(init);
    it->second.zero_grad();
    return it->second;
}

template <typename S>
auto BasicParamStore<S>::at(const std::string& name) -> Parameter& {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
    return it->second;
}

template <typename S>
auto BasicParamStore<S>::at(const std::string& name) const -> const Parameter& {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("unknown parameter: " + name);
    return it->second;
}

template <typename S>
void BasicParamStore<S>::zero_grad() {
    for (auto& [_, p] : params_) p.zero_grad();
}

template <typename S>
std::int64_t BasicParamStore<S>::parameter_count() const {
    std::int64_t n = 0;
    for (const auto& [_, p] : params_) n += p.value.size();
    return n;
}

template <typename S>
Linear<S>::Linear(BasicParamStore<S>& store, const std::string& name, std::int64_t in, std::int64_t out, Rng& rng,
                  bool with_bias, double gain) {
    const double stddev = gain / std::sqrt(static_cast<double>(in));
    weight = &store.create(name + ".weight", rng.normal_tensor<S>({in, out}, stddev));
    if (with_bias) bias = &store.create(name + ".bias", BasicTensor<S>({out}));
}

template <typename S>
BasicVar<S> Linear<S>::operator()(BasicVar<S> x) const {
    auto& g = x.graph();
    auto y = matmul(x, g.parameter(*weight));
    return bias ? add(y, g.parameter(*bias)) : y;
}

template <typename S>
LayerNorm<S>::LayerNorm(BasicParamStore<S>& store, const std::string& name, std::int64_t dim) {
    scale = &store.create(name + ".scale", BasicTensor<S>({dim}, S(1)));
    offset = &store.create(name + ".offset", BasicTensor<S>({dim}));
}

template <typename S>
BasicVar<S> LayerNorm<S>::operator()(BasicVar<S> x) const {
    auto& g = x.graph();
    return layer_norm(x, g.parameter(*scale), g.parameter(*offset));
}

template <typename S>
Mlp<S>::Mlp(BasicParamStore<S>& store, const std::string& name, std::int64_t dim, std::int64_t hidden, Rng& rng)
    : fc1(store, name + ".fc1", dim, hidden, rng), fc2(store, name + ".fc2", hidden, dim, rng) {}

template <typename S>
BasicVar<S> Mlp<S>::operator()(BasicVar<S> x) const {
    return fc2(gelu(fc1(x)));
}

template <typename S>
SelfAttentionBlock<S>::SelfAttentionBlock(BasicParamStore<S>& store, const std::string& name, std::int64_t dim,
                                          int heads_, Rng& rng, std::int64_t mlp_ratio)
    : ln_attn(store, name + ".ln_attn", dim),
      ln_mlp(store, name + ".ln_mlp", dim),
      q(store, name + ".q", dim, dim, rng),
      k(store, name + ".k", dim, dim, rng),
      v(store, name + ".v", dim, dim, rng),
      o(store, name + ".o", dim, dim, rng),
      mlp(store, name + ".mlp", dim, dim * mlp_ratio, rng),
      heads(heads_) {}

template <typename S>
BasicVar<S> SelfAttentionBlock<S>::operator()(BasicVar<S> x) const {
    auto h = ln_attn(x);
    x = add(x, o(attention(q(h), k(h), v(h), heads)));
    return add(x, mlp(ln_mlp(x)));
}

template <typename S>
CrossAttentionBlock<S>::CrossAttentionBlock(BasicParamStore<S>& store, const std::string& name, std::int64_t dim,
                                            int heads_, Rng& rng, std::int64_t mlp_ratio)
    : ln_query(store, name + ".ln_query", dim),
      ln_context(store, name + ".ln_context", dim),
      ln_mlp(store, name + ".ln_mlp", dim),
      q(store, name + ".q", dim, dim, rng),
      k(store, name + ".k", dim, dim, rng),
      v(store, name + ".v", dim, dim, rng),
      o(store, name + ".o", dim, dim, rng),
      mlp(store, name + ".mlp", dim, dim * mlp_ratio, rng),
      heads(heads_) {}

template <typename S>
BasicVar<S> CrossAttentionBlock<S>::operator()(BasicVar<S> query, BasicVar<S> context) const {
    auto c = ln_context(context);
    auto x = add(query, o(attention(q(ln_query(query)), k(c), v(c), heads)));
    return add(x, mlp(ln_mlp(x)));
}

template <typename S>
BasicTensor<S> sinusoidal_embedding(std::span<const double> positions, std::int64_t dim, double max_period) {
    BasicTensor<S> out({static_cast<std::int64_t>(positions.size()), dim});
    const std::int64_t half = dim / 2;
    for (std::size_t i = 0; i < positions.size(); ++i) {
        for (std::int64_t j = 0; j < half; ++j) {
            const double freq = std::exp(-std::log(max_period) * static_cast<double>(j) / static_cast<double>(half));
            const double arg = positions[i] * freq;
            out[static_cast<std::int64_t>(i) * dim + j] = static_cast<S>(std::sin(arg));
            out[static_cast<std::int64_t>(i) * dim + half + j] = static_cast<S>(std::cos(arg));
        }
    }
    return out;
}

template class BasicParamStore<float>;
template class BasicParamStore<double>;
template struct Linear<float>;
template struct Linear<double>;
template struct LayerNorm<float>;
template struct LayerNorm<double>;
template struct Mlp<float>;
template struct Mlp<double>;
template struct SelfAttentionBlock<float>;
template struct SelfAttentionBlock<double>;
template struct CrossAttentionBlock<float>;
template struct CrossAttentionBlock<double>;
template BasicTensor<float> sinusoidal_embedding<float>(std::span<const double>, std::int64_t, double);
template BasicTensor<double> sinusoidal_embedding<double>(std::span<const double>, std::int64_t, double);

}  // namespace latentcast::numkit

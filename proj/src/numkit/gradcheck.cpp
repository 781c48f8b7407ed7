#include "latentcast/numkit/gradcheck.hpp"

#include <cmath>
#include <limits>

namespace latentcast::numkit {
namespace {

double relative_error(double analytic, double numeric) {
    if (!std::isfinite(analytic) || !std::isfinite(numeric)) return std::numeric_limits<double>::infinity();
    return std::abs(analytic - numeric) / (std::abs(analytic) + std::abs(numeric) + 1e-8);
}

// Five-point central stencil; truncation error is O(step^4), so small
// gradient coordinates are not swamped by curvature terms.
template <typename F>
double central_difference(F&& at, double step) {
    return (8.0 * (at(step) - at(-step)) - (at(2.0 * step) - at(-2.0 * step))) / (12.0 * step);
}

}  // namespace

template <typename S>
double grad_check(const InputFunction<S>& fn, const BasicTensor<S>& point, double step) {
    BasicTensor<S> analytic;
    {
        BasicGraph<S> g;
        auto x = g.leaf(point);
        auto loss = fn(g, x);
        g.backward(loss);
        analytic = g.grad(x);
    }
    auto eval = [&](const BasicTensor<S>& at) {
        BasicGraph<S> g;
        return static_cast<double>(fn(g, g.constant(at)).value().item());
    };
    double worst = 0.0;
    BasicTensor<S> probe = point;
    for (std::int64_t i = 0; i < point.size(); ++i) {
        const S original = probe[i];
        const double numeric = central_difference(
            [&](double d) {
                probe[i] = original + static_cast<S>(d);
                return eval(probe);
            },
            step);
        probe[i] = original;
        worst = std::max(worst, relative_error(static_cast<double>(analytic[i]), numeric));
    }
    return worst;
}

template <typename S>
double grad_check_parameters(const ParameterFunction<S>& fn, BasicParamStore<S>& params, double step) {
    params.zero_grad();
    {
        BasicGraph<S> g;
        g.backward(fn(g));
    }
    auto eval = [&] {
        BasicGraph<S> g;
        return static_cast<double>(fn(g).value().item());
    };
    double worst = 0.0;
    for (auto& [name, p] : params) {
        for (std::int64_t i = 0; i < p.value.size(); ++i) {
            const S original = p.value[i];
            const double numeric = central_difference(
                [&](double d) {
                    p.value[i] = original + static_cast<S>(d);
                    return eval();
                },
                step);
            p.value[i] = original;
            worst = std::max(worst, relative_error(static_cast<double>(p.grad[i]), numeric));
        }
    }
    return worst;
}

template double grad_check<float>(const InputFunction<float>&, const BasicTensor<float>&, double);
template double grad_check<double>(const InputFunction<double>&, const BasicTensor<double>&, double);
template double grad_check_parameters<float>(const ParameterFunction<float>&, BasicParamStore<float>&, double);
template double grad_check_parameters<double>(const ParameterFunction<double>&, BasicParamStore<double>&, double);

}  // namespace latentcast::numkit

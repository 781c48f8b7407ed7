#pragma once

#include "latentcast/numkit/nn.hpp"

#include <functional>

namespace latentcast::numkit {

template <typename S>
using InputFunction = std::function<BasicVar<S>(BasicGraph<S>&, BasicVar<S>)>;
template <typename S>
using ParameterFunction = std::function<BasicVar<S>(BasicGraph<S>&)>;

/// Max over coordinates of |analytic - numeric| / (|analytic| + |numeric| + 1e-8),
/// numeric being the five-point central difference with the given step. Returns +inf if
/// anything non-finite shows up.
template <typename S>
double grad_check(const InputFunction<S>& fn, const BasicTensor<S>& point, double step);

/// Same measure, taken over every entry of every parameter in the store.
template <typename S>
double grad_check_parameters(const ParameterFunction<S>& fn, BasicParamStore<S>& params, double step);

}  // namespace latentcast::numkit

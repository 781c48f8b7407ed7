#include "latentcast/numkit/tensor.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

namespace latentcast::numkit {

std::int64_t numel(const Shape& shape) {
    std::int64_t n = 1;
    for (auto d : shape) {
        if (d < 0) throw std::invalid_argument("negative dimension in shape " + to_string(shape));
        n *= d;
    }
    return n;
}

std::string to_string(const Shape& shape) { return fmt::format("[{}]", fmt::join(shape, ", ")); }

ShapeError::ShapeError(const std::string& op, const Shape& a, const Shape& b)
    : std::invalid_argument(fmt::format("{}: incompatible shapes {} and {}", op, to_string(a), to_string(b))) {}

}  // namespace latentcast::numkit

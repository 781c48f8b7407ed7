#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace latentcast::numkit {

using Shape = std::vector<std::int64_t>;

std::int64_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Raised by every op whose operands do not conform. The message names the
/// op and both offending shapes.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
    ShapeError(const std::string& op, const Shape& a, const Shape& b);
};

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense row-major tensor. The trailing axis is the "feature" axis: matrix()
/// views the data as (numel / last) x last.
/// Storage is over-aligned so Eigen's vectorized reductions take the same
/// peeling path on every run; plain malloc alignment made sums run-dependent.
template <typename Scalar>
using AlignedVector = std::vector<Scalar, Eigen::aligned_allocator<Scalar>>;

template <typename Scalar>
class BasicTensor {
public:
    using Storage = AlignedVector<Scalar>;

    using value_type = Scalar;

    BasicTensor() : shape_{0} {}

    explicit BasicTensor(Shape shape, Scalar fill = Scalar(0))
        : shape_(std::move(shape)), data_(static_cast<std::size_t>(numel(shape_)), fill) {}

    BasicTensor(Shape shape, const std::vector<Scalar>& data)
        : BasicTensor(std::move(shape), Storage(data.begin(), data.end())) {}
    BasicTensor(Shape shape, Storage data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (static_cast<std::int64_t>(data_.size()) != numel(shape_)) {
            throw ShapeError("tensor: data length " + std::to_string(data_.size()) +
                             " does not match shape " + to_string(shape_));
        }
    }

    static BasicTensor scalar(Scalar v) { return BasicTensor(Shape{}, Storage{v}); }

    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
    bool empty() const { return data_.empty(); }

    std::int64_t dim(int axis) const {
        const int r = rank();
        if (axis < 0) axis += r;
        if (axis < 0 || axis >= r) throw ShapeError("dim: axis out of range for shape " + to_string(shape_));
        return shape_[static_cast<std::size_t>(axis)];
    }

    std::span<const Scalar> data() const { return data_; }
    std::span<Scalar> data() { return data_; }
    const Scalar* ptr() const { return data_.data(); }
    Scalar* ptr() { return data_.data(); }
    const Storage& storage() const { return data_; }

    Scalar operator[](std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }
    Scalar& operator[](std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }

    Scalar item() const {
        if (data_.size() != 1) throw ShapeError("item: tensor of shape " + to_string(shape_) + " is not a scalar");
        return data_[0];
    }

    std::int64_t cols() const { return shape_.empty() ? 1 : shape_.back(); }
    std::int64_t rows() const { return cols() == 0 ? 0 : size() / cols(); }

    Eigen::Map<const RowMatrix<Scalar>> matrix() const {
        return Eigen::Map<const RowMatrix<Scalar>>(data_.data(), rows(), cols());
    }
    Eigen::Map<RowMatrix<Scalar>> matrix() { return Eigen::Map<RowMatrix<Scalar>>(data_.data(), rows(), cols()); }

    Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>> array() const {
        return Eigen::Map<const Eigen::Array<Scalar, Eigen::Dynamic, 1>>(data_.data(), size());
    }
    Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>> array() {
        return Eigen::Map<Eigen::Array<Scalar, Eigen::Dynamic, 1>>(data_.data(), size());
    }

    BasicTensor reshaped(Shape shape) const {
        if (numel(shape) != size()) throw ShapeError("reshape", shape_, shape);
        return BasicTensor(std::move(shape), data_);
    }

    template <typename To>
    BasicTensor<To> cast() const {
        typename BasicTensor<To>::Storage out(data_.begin(), data_.end());
        return BasicTensor<To>(shape_, std::move(out));
    }

    bool all_finite() const { return array().isFinite().all(); }

    friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    Shape shape_;
    Storage data_;
};

using Tensor = BasicTensor<float>;
using TensorD = BasicTensor<double>;

}  // namespace latentcast::numkit

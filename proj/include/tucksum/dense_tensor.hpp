#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "tucksum/types.hpp"

namespace tucksum {

// Dense tensor of order 1..N with a flat column-major buffer: the first
// index varies fastest, so the mode-0 unfolding is a plain reshape of the
// buffer. Shapes are immutable after construction.
class DenseTensor {
public:
    DenseTensor() = default;
    explicit DenseTensor(std::vector<Index> shape);
    DenseTensor(std::vector<Index> shape, Vector data);
    DenseTensor(const DenseTensor& other);
    DenseTensor(DenseTensor&& other) noexcept;
    DenseTensor& operator=(const DenseTensor& other);
    DenseTensor& operator=(DenseTensor&& other) noexcept;
    ~DenseTensor();

    [[nodiscard]] Index order() const { return static_cast<Index>(shape_.size()); }
    [[nodiscard]] const std::vector<Index>& shape() const { return shape_; }
    [[nodiscard]] Index dim(Index mode) const;
    [[nodiscard]] Index size() const { return data_.size(); }

    [[nodiscard]] double& at(const std::vector<Index>& idx);
    [[nodiscard]] double at(const std::vector<Index>& idx) const;

    [[nodiscard]] Vector& vec() { return data_; }
    [[nodiscard]] const Vector& vec() const { return data_; }
    [[nodiscard]] double* data() { return data_.data(); }
    [[nodiscard]] const double* data() const { return data_.data(); }

    [[nodiscard]] double norm() const { return data_.norm(); }
    void scale(double a) { data_ *= a; }

    [[nodiscard]] Index flat_index(const std::vector<Index>& idx) const;

private:
    std::vector<Index> shape_;
    Vector data_;
};

// Tensor-buffer allocation accounting. Every DenseTensor buffer alive at a
// point in time contributes its element count; the peak since the last reset
// is what the summation benchmarks compare across summand counts.
std::size_t tensor_alloc_current();
std::size_t tensor_alloc_peak();
void tensor_alloc_reset_peak();

// Mode-k unfolding: rows index mode k, columns enumerate the remaining
// modes with the lowest-numbered mode varying fastest.
[[nodiscard]] Matrix unfold(const DenseTensor& t, Index mode);

// Inverse of unfold for the given full shape.
[[nodiscard]] DenseTensor fold(const Matrix& m, Index mode, std::vector<Index> shape);

// Mode-k tensor-times-matrix: the result's mode-k unfolding is a * unfold(t, k).
[[nodiscard]] DenseTensor ttm(const DenseTensor& t, const Matrix& a, Index mode);

} // namespace tucksum

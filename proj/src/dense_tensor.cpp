#include "tucksum/dense_tensor.hpp"

#include <atomic>
#include <stdexcept>
#include <string>
#include <utility>

namespace tucksum {

namespace {

std::atomic<std::size_t> g_alloc_current{0};
std::atomic<std::size_t> g_alloc_peak{0};

void alloc_track(std::size_t n) {
    const std::size_t cur = g_alloc_current.fetch_add(n) + n;
    std::size_t peak = g_alloc_peak.load();
    while (cur > peak && !g_alloc_peak.compare_exchange_weak(peak, cur)) {
    }
}

void alloc_untrack(std::size_t n) { g_alloc_current.fetch_sub(n); }

Index checked_count(const std::vector<Index>& shape) {
    if (shape.empty()) {
        throw std::invalid_argument("DenseTensor: shape must have order >= 1");
    }
    Index count = 1;
    for (Index n : shape) {
        if (n < 1) {
            throw std::invalid_argument("DenseTensor: every dimension must be >= 1");
        }
        count *= n;
    }
    return count;
}

} // namespace

std::size_t tensor_alloc_current() { return g_alloc_current.load(); }
std::size_t tensor_alloc_peak() { return g_alloc_peak.load(); }
void tensor_alloc_reset_peak() { g_alloc_peak.store(g_alloc_current.load()); }

DenseTensor::DenseTensor(std::vector<Index> shape) : shape_(std::move(shape)) {
    const Index count = checked_count(shape_);
    data_ = Vector::Zero(count);
    alloc_track(static_cast<std::size_t>(count));
}

DenseTensor::DenseTensor(std::vector<Index> shape, Vector data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    const Index count = checked_count(shape_);
    if (count != data_.size()) {
        throw std::invalid_argument("DenseTensor: buffer size does not match shape");
    }
    alloc_track(static_cast<std::size_t>(count));
}

DenseTensor::DenseTensor(const DenseTensor& other) : shape_(other.shape_), data_(other.data_) {
    alloc_track(static_cast<std::size_t>(data_.size()));
}

DenseTensor::DenseTensor(DenseTensor&& other) noexcept
    : shape_(std::move(other.shape_)), data_(std::move(other.data_)) {
    other.shape_.clear();
    // other.data_ is empty after the move, so its destructor untracks zero.
}

DenseTensor& DenseTensor::operator=(const DenseTensor& other) {
    if (this != &other) {
        alloc_untrack(static_cast<std::size_t>(data_.size()));
        shape_ = other.shape_;
        data_ = other.data_;
        alloc_track(static_cast<std::size_t>(data_.size()));
    }
    return *this;
}

DenseTensor& DenseTensor::operator=(DenseTensor&& other) noexcept {
    if (this != &other) {
        // Eigen's move assignment swaps the heap buffers, so take the payload
        // by swap and then release the buffer parked in `other`; the moved-from
        // tensor is left empty, matching the move constructor.
        shape_.swap(other.shape_);
        data_.swap(other.data_);
        alloc_untrack(static_cast<std::size_t>(other.data_.size()));
        other.data_.resize(0);
        other.shape_.clear();
    }
    return *this;
}

DenseTensor::~DenseTensor() { alloc_untrack(static_cast<std::size_t>(data_.size())); }

Index DenseTensor::dim(Index mode) const {
    if (mode < 0 || mode >= order()) {
        throw std::invalid_argument("DenseTensor::dim: mode out of range");
    }
    return shape_[static_cast<std::size_t>(mode)];
}

Index DenseTensor::flat_index(const std::vector<Index>& idx) const {
    if (static_cast<Index>(idx.size()) != order()) {
        throw std::invalid_argument("DenseTensor: index order mismatch");
    }
    Index flat = 0;
    Index stride = 1;
    for (std::size_t k = 0; k < idx.size(); ++k) {
        if (idx[k] < 0 || idx[k] >= shape_[k]) {
            throw std::out_of_range("DenseTensor: index out of range in mode " + std::to_string(k));
        }
        flat += idx[k] * stride;
        stride *= shape_[k];
    }
    return flat;
}

double& DenseTensor::at(const std::vector<Index>& idx) { return data_[flat_index(idx)]; }
double DenseTensor::at(const std::vector<Index>& idx) const { return data_[flat_index(idx)]; }

namespace {

// Splits the shape around `mode` into the product of the dimensions before
// it (fast-running) and after it (slow-running).
void split_extents(const std::vector<Index>& shape, Index mode, Index& left, Index& right) {
    left = 1;
    right = 1;
    for (Index k = 0; k < static_cast<Index>(shape.size()); ++k) {
        if (k < mode) {
            left *= shape[static_cast<std::size_t>(k)];
        } else if (k > mode) {
            right *= shape[static_cast<std::size_t>(k)];
        }
    }
}

void check_mode(const DenseTensor& t, Index mode, const char* who) {
    if (mode < 0 || mode >= t.order()) {
        throw std::invalid_argument(std::string(who) + ": mode out of range");
    }
}

} // namespace

Matrix unfold(const DenseTensor& t, Index mode) {
    check_mode(t, mode, "unfold");
    const Index nk = t.dim(mode);
    Index left = 0, right = 0;
    split_extents(t.shape(), mode, left, right);

    Matrix out(nk, left * right);
    const double* src = t.data();
    // Column j = l + left*r holds t[l + i*left + r*left*nk] at row i; the
    // inner loop over l is contiguous in the source buffer.
    for (Index r = 0; r < right; ++r) {
        for (Index i = 0; i < nk; ++i) {
            const double* block = src + (i + r * nk) * left;
            for (Index l = 0; l < left; ++l) {
                out(i, l + left * r) = block[l];
            }
        }
    }
    return out;
}

DenseTensor fold(const Matrix& m, Index mode, std::vector<Index> shape) {
    if (mode < 0 || mode >= static_cast<Index>(shape.size())) {
        throw std::invalid_argument("fold: mode out of range");
    }
    Index count = 1;
    for (Index n : shape) count *= n;
    const Index nk = shape[static_cast<std::size_t>(mode)];
    if (m.rows() != nk || m.rows() * m.cols() != count) {
        throw std::invalid_argument("fold: matrix shape does not match target tensor shape");
    }
    Index left = 0, right = 0;
    split_extents(shape, mode, left, right);

    DenseTensor t(std::move(shape));
    double* dst = t.data();
    for (Index r = 0; r < right; ++r) {
        for (Index i = 0; i < nk; ++i) {
            double* block = dst + (i + r * nk) * left;
            for (Index l = 0; l < left; ++l) {
                block[l] = m(i, l + left * r);
            }
        }
    }
    return t;
}

DenseTensor ttm(const DenseTensor& t, const Matrix& a, Index mode) {
    check_mode(t, mode, "ttm");
    if (a.cols() != t.dim(mode)) {
        throw std::invalid_argument("ttm: matrix columns must match the contracted mode dimension");
    }
    std::vector<Index> out_shape = t.shape();
    out_shape[static_cast<std::size_t>(mode)] = a.rows();

    if (mode == 0) {
        // Mode-0 unfolding is a zero-copy reshape of the column-major buffer.
        Index left = 0, right = 0;
        split_extents(t.shape(), 0, left, right);
        Eigen::Map<const Matrix> x0(t.data(), t.dim(0), right);
        DenseTensor out(std::move(out_shape));
        Eigen::Map<Matrix>(out.data(), a.rows(), right).noalias() = a * x0;
        return out;
    }
    return fold(a * unfold(t, mode), mode, std::move(out_shape));
}

} // namespace tucksum

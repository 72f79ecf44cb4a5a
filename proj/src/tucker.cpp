#include "tucksum/tucker.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "tucksum/kernels.hpp"

namespace tucksum {

namespace {

void validate_structure(const std::vector<Index>& dims, const std::vector<Index>& ranks,
                        const std::vector<Matrix>& factors, const std::vector<CoreBlock>& blocks) {
    const std::size_t order = ranks.size();
    if (order == 0) {
        throw std::invalid_argument("TuckerTensor: order must be >= 1");
    }
    if (factors.size() != order || dims.size() != order) {
        throw std::invalid_argument("TuckerTensor: one factor matrix per mode required");
    }
    for (std::size_t k = 0; k < order; ++k) {
        if (factors[k].rows() != dims[k] || factors[k].cols() != ranks[k]) {
            throw std::invalid_argument("TuckerTensor: factor shape must be dims[k] x ranks[k]");
        }
        if (dims[k] < 1 || ranks[k] < 1) {
            throw std::invalid_argument("TuckerTensor: dims and ranks must be positive");
        }
    }
    if (blocks.empty()) {
        throw std::invalid_argument("TuckerTensor: core needs at least one block");
    }
    // Blocks tile the rank box along the super-diagonal: consecutive offsets
    // advance by the previous block's extent in every mode.
    std::vector<Index> cursor(order, 0);
    for (const auto& b : blocks) {
        if (b.offsets.size() != order || static_cast<std::size_t>(b.data.order()) != order) {
            throw std::invalid_argument("TuckerTensor: block order mismatch");
        }
        for (std::size_t k = 0; k < order; ++k) {
            if (b.offsets[k] != cursor[k]) {
                throw std::invalid_argument("TuckerTensor: blocks must tile the super-diagonal");
            }
            cursor[k] += b.data.dim(static_cast<Index>(k));
        }
    }
    for (std::size_t k = 0; k < order; ++k) {
        if (cursor[k] != ranks[k]) {
            throw std::invalid_argument("TuckerTensor: blocks must span the full rank box");
        }
    }
}

std::vector<Index> dims_of(const std::vector<Matrix>& factors) {
    std::vector<Index> dims(factors.size());
    for (std::size_t k = 0; k < factors.size(); ++k) dims[k] = factors[k].rows();
    return dims;
}

} // namespace

TuckerTensor::TuckerTensor(DenseTensor core, std::vector<Matrix> factors)
    : dims_(dims_of(factors)), ranks_(core.shape()), factors_(std::move(factors)) {
    CoreBlock b;
    b.offsets.assign(ranks_.size(), 0);
    b.data = std::move(core);
    blocks_.push_back(std::move(b));
    validate_structure(dims_, ranks_, factors_, blocks_);
}

TuckerTensor::TuckerTensor(std::vector<Index> ranks, std::vector<CoreBlock> blocks,
                           std::vector<Matrix> factors)
    : dims_(dims_of(factors)), ranks_(std::move(ranks)), factors_(std::move(factors)),
      blocks_(std::move(blocks)) {
    validate_structure(dims_, ranks_, factors_, blocks_);
}

bool TuckerTensor::has_dense_core() const {
    return blocks_.size() == 1 && blocks_[0].data.shape() == ranks_;
}

const DenseTensor& TuckerTensor::dense_core() const {
    if (!has_dense_core()) {
        throw std::runtime_error("TuckerTensor::dense_core: core is block-diagonal");
    }
    return blocks_[0].data;
}

double TuckerTensor::core_norm() const {
    double sq = 0.0;
    for (const auto& b : blocks_) sq += b.data.vec().squaredNorm();
    return std::sqrt(sq);
}

Index TuckerTensor::max_rank() const {
    return *std::max_element(ranks_.begin(), ranks_.end());
}

DenseTensor reconstruct(const TuckerTensor& x, Index max_elems) {
    Index count = 1;
    for (Index n : x.dims()) count *= n;
    if (count > max_elems) {
        throw std::runtime_error("reconstruct: dense size " + std::to_string(count) +
                                 " exceeds the cap of " + std::to_string(max_elems) + " elements");
    }
    DenseTensor acc(x.dims());
    for (const auto& b : x.blocks()) {
        DenseTensor tmp = b.data;
        for (Index k = 0; k < x.order(); ++k) {
            const auto ku = static_cast<std::size_t>(k);
            tmp = ttm(tmp, x.factors()[ku].middleCols(b.offsets[ku], b.data.dim(k)), k);
        }
        acc.vec() += tmp.vec();
    }
    return acc;
}

namespace {

struct OrthogonalizedForm {
    std::vector<Matrix> q; // orthonormal factor per mode
    DenseTensor core;      // triangular factors absorbed, fully dense
};

// Phase 1 of rounding, shared with the norm: QR every factor and absorb each
// R into the core. For block cores the absorbed core is accumulated block by
// block at its final (min(n_k, sum r_k))^N extents; this allocation is the
// densification bottleneck the peak-memory instrumentation watches.
OrthogonalizedForm orthogonalize(const TuckerTensor& x) {
    const Index order = x.order();
    OrthogonalizedForm out;
    out.q.resize(static_cast<std::size_t>(order));
    std::vector<Matrix> r(static_cast<std::size_t>(order));
    std::vector<Index> qshape(static_cast<std::size_t>(order));
    for (Index k = 0; k < order; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        auto qr = qr_econ(x.factors()[ku]);
        out.q[ku] = std::move(qr.q);
        r[ku] = std::move(qr.r);
        qshape[ku] = r[ku].rows();
    }
    out.core = DenseTensor(qshape);
    for (const auto& b : x.blocks()) {
        DenseTensor tmp = b.data;
        for (Index k = 0; k < order; ++k) {
            const auto ku = static_cast<std::size_t>(k);
            tmp = ttm(tmp, r[ku].middleCols(b.offsets[ku], b.data.dim(k)), k);
        }
        out.core.vec() += tmp.vec();
    }
    return out;
}

} // namespace

double tucker_norm(const TuckerTensor& x) { return orthogonalize(x).core.norm(); }

double tucker_inner(const TuckerTensor& x, const TuckerTensor& y) {
    if (x.dims() != y.dims()) {
        throw std::invalid_argument("tucker_inner: operands must share dims");
    }
    const Index order = x.order();
    double acc = 0.0;
    for (const auto& bx : x.blocks()) {
        for (const auto& by : y.blocks()) {
            DenseTensor tmp = by.data;
            for (Index k = 0; k < order; ++k) {
                const auto ku = static_cast<std::size_t>(k);
                // Gram slice (r_bx x r_by) of the two factor column groups.
                Matrix w = x.factors()[ku].middleCols(bx.offsets[ku], bx.data.dim(k)).transpose() *
                           y.factors()[ku].middleCols(by.offsets[ku], by.data.dim(k));
                tmp = ttm(tmp, w, k);
            }
            acc += bx.data.vec().dot(tmp.vec());
        }
    }
    return acc;
}

TuckerTensor formal_sum(const std::vector<const TuckerTensor*>& xs,
                        const std::vector<double>& weights) {
    if (xs.empty() || xs.size() != weights.size()) {
        throw std::invalid_argument("formal_sum: need matching, nonempty summands and weights");
    }
    for (const TuckerTensor* x : xs) {
        if (x == nullptr) throw std::invalid_argument("formal_sum: null summand");
    }
    const Index order = xs.front()->order();
    const auto& dims = xs.front()->dims();
    for (const TuckerTensor* x : xs) {
        if (x->dims() != dims) {
            throw std::invalid_argument("formal_sum: all summands must share dims");
        }
    }
    const auto ou = static_cast<std::size_t>(order);
    std::vector<Index> ranks(ou, 0);
    for (const TuckerTensor* x : xs) {
        for (std::size_t k = 0; k < ou; ++k) ranks[k] += x->ranks()[k];
    }
    std::vector<Matrix> factors(ou);
    for (std::size_t k = 0; k < ou; ++k) {
        factors[k].resize(dims[k], ranks[k]);
        Index col = 0;
        for (const TuckerTensor* x : xs) {
            factors[k].middleCols(col, x->ranks()[k]) = x->factors()[k];
            col += x->ranks()[k];
        }
    }
    std::vector<CoreBlock> blocks;
    std::vector<Index> shift(ou, 0);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        for (const auto& b : xs[i]->blocks()) {
            CoreBlock nb;
            nb.offsets.resize(ou);
            for (std::size_t k = 0; k < ou; ++k) nb.offsets[k] = shift[k] + b.offsets[k];
            nb.data = b.data;
            nb.data.scale(weights[i]);
            blocks.push_back(std::move(nb));
        }
        for (std::size_t k = 0; k < ou; ++k) shift[k] += xs[i]->ranks()[k];
    }
    return TuckerTensor(std::move(ranks), std::move(blocks), std::move(factors));
}

TuckerTensor formal_sum(const std::vector<TuckerTensor>& xs, const std::vector<double>& weights) {
    std::vector<const TuckerTensor*> ptrs;
    ptrs.reserve(xs.size());
    for (const auto& x : xs) ptrs.push_back(&x);
    return formal_sum(ptrs, weights);
}

TuckerTensor tucker_axby(double alpha, const TuckerTensor& x, double beta, const TuckerTensor& y) {
    return formal_sum(std::vector<const TuckerTensor*>{&x, &y}, {alpha, beta});
}

StHosvd st_hosvd(DenseTensor g, double tau) {
    if (tau < 0.0) {
        throw std::invalid_argument("st_hosvd: tolerance must be nonnegative");
    }
    const Index order = g.order();
    const double theta = tau * tau * g.vec().squaredNorm() / static_cast<double>(order);

    std::vector<Index> mode_order(static_cast<std::size_t>(order));
    std::iota(mode_order.begin(), mode_order.end(), Index(0));
    std::stable_sort(mode_order.begin(), mode_order.end(),
                     [&](Index a, Index b) { return g.dim(a) < g.dim(b); });

    StHosvd out;
    out.mode_factors.resize(static_cast<std::size_t>(order));
    for (Index k : mode_order) {
        const SvdEcon svd = svd_econ(unfold(g, k));
        const Vector& s = svd.s;
        const Index count = s.size();
        Index rank = 1;
        if (tau == 0.0) {
            const double floor = 1e-14 * s[0];
            rank = count;
            while (rank > 1 && s[rank - 1] <= floor) --rank;
        } else {
            // Minimal rank >= 1 whose discarded tail energy fits under theta.
            std::vector<double> suffix(static_cast<std::size_t>(count) + 1, 0.0);
            for (Index j = count - 1; j >= 0; --j) {
                suffix[static_cast<std::size_t>(j)] =
                    suffix[static_cast<std::size_t>(j) + 1] + s[j] * s[j];
            }
            rank = count;
            for (Index r = 1; r <= count; ++r) {
                if (suffix[static_cast<std::size_t>(r)] <= theta) {
                    rank = r;
                    break;
                }
            }
        }
        Matrix p = svd.u.leftCols(rank);
        g = ttm(g, p.transpose(), k);
        out.mode_factors[static_cast<std::size_t>(k)] = std::move(p);
    }
    out.core = std::move(g);
    return out;
}

TuckerTensor tucker_rounding(const TuckerTensor& x, double tau) {
    if (tau < 0.0) {
        throw std::invalid_argument("tucker_rounding: tolerance must be nonnegative");
    }
    OrthogonalizedForm ortho = orthogonalize(x);
    StHosvd st = st_hosvd(std::move(ortho.core), tau);
    std::vector<Matrix> factors(static_cast<std::size_t>(x.order()));
    for (std::size_t k = 0; k < factors.size(); ++k) {
        factors[k] = ortho.q[k] * st.mode_factors[k];
    }
    return TuckerTensor(std::move(st.core), std::move(factors));
}

double tucker_rel_error(const TuckerTensor& x, const TuckerTensor& ref) {
    const double denom = tucker_norm(ref);
    const double diff = tucker_norm(tucker_axby(1.0, x, -1.0, ref));
    if (denom == 0.0) return diff;
    return diff / denom;
}

namespace {

void write_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw std::runtime_error("load_tucker: truncated stream");
    return v;
}

void write_doubles(std::ostream& os, const double* p, Index n) {
    os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

void read_doubles(std::istream& is, double* p, Index n) {
    is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) throw std::runtime_error("load_tucker: truncated stream");
}

} // namespace

void save_tucker(std::ostream& os, const TuckerTensor& x) {
    const auto order = static_cast<std::uint64_t>(x.order());
    write_u64(os, order);
    for (Index n : x.dims()) write_u64(os, static_cast<std::uint64_t>(n));
    for (Index r : x.ranks()) write_u64(os, static_cast<std::uint64_t>(r));
    for (const auto& f : x.factors()) write_doubles(os, f.data(), f.size());
    write_u64(os, x.blocks().size());
    for (const auto& b : x.blocks()) {
        for (Index o : b.offsets) write_u64(os, static_cast<std::uint64_t>(o));
        for (Index n : b.data.shape()) write_u64(os, static_cast<std::uint64_t>(n));
        write_doubles(os, b.data.data(), b.data.size());
    }
    if (!os) throw std::runtime_error("save_tucker: write failed");
}

TuckerTensor load_tucker(std::istream& is) {
    const auto order = static_cast<std::size_t>(read_u64(is));
    if (order == 0 || order > 32) throw std::runtime_error("load_tucker: implausible order");
    std::vector<Index> dims(order), ranks(order);
    for (auto& n : dims) n = static_cast<Index>(read_u64(is));
    for (auto& r : ranks) r = static_cast<Index>(read_u64(is));
    std::vector<Matrix> factors(order);
    for (std::size_t k = 0; k < order; ++k) {
        factors[k].resize(dims[k], ranks[k]);
        read_doubles(is, factors[k].data(), factors[k].size());
    }
    const auto nblocks = static_cast<std::size_t>(read_u64(is));
    std::vector<CoreBlock> blocks(nblocks);
    for (auto& b : blocks) {
        b.offsets.resize(order);
        for (auto& o : b.offsets) o = static_cast<Index>(read_u64(is));
        std::vector<Index> bshape(order);
        Index count = 1;
        for (auto& n : bshape) {
            n = static_cast<Index>(read_u64(is));
            count *= n;
        }
        Vector data(count);
        read_doubles(is, data.data(), count);
        b.data = DenseTensor(std::move(bshape), std::move(data));
    }
    return TuckerTensor(std::move(ranks), std::move(blocks), std::move(factors));
}

void save_tucker(const std::string& path, const TuckerTensor& x) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_tucker: cannot open " + path);
    save_tucker(os, x);
}

TuckerTensor load_tucker(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_tucker: cannot open " + path);
    return load_tucker(is);
}

} // namespace tucksum

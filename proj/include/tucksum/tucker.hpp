#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "tucksum/dense_tensor.hpp"

namespace tucksum {

// One block of a (block super-diagonal) core: a dense sub-core placed at a
// per-mode offset inside the full core index box.
struct CoreBlock {
    std::vector<Index> offsets;
    DenseTensor data;
};

// Tucker-format tensor: core (dense, or block super-diagonal as produced by
// formal sums) and one factor matrix per mode. Factors are n_k x r_k and are
// not assumed orthonormal. A dense core is stored as a single block at zero
// offsets spanning the full rank box, so structural code paths are uniform.
class TuckerTensor {
public:
    TuckerTensor(DenseTensor core, std::vector<Matrix> factors);
    TuckerTensor(std::vector<Index> ranks, std::vector<CoreBlock> blocks,
                 std::vector<Matrix> factors);

    [[nodiscard]] Index order() const { return static_cast<Index>(ranks_.size()); }
    [[nodiscard]] const std::vector<Index>& dims() const { return dims_; }
    [[nodiscard]] const std::vector<Index>& ranks() const { return ranks_; }
    [[nodiscard]] const std::vector<Matrix>& factors() const { return factors_; }
    [[nodiscard]] std::vector<Matrix>& factors() { return factors_; }
    [[nodiscard]] const std::vector<CoreBlock>& blocks() const { return blocks_; }
    [[nodiscard]] std::vector<CoreBlock>& blocks() { return blocks_; }

    [[nodiscard]] bool has_dense_core() const;
    // The single full-span block; throws when the core is block-diagonal.
    [[nodiscard]] const DenseTensor& dense_core() const;

    [[nodiscard]] double core_norm() const;
    [[nodiscard]] Index max_rank() const;

private:
    std::vector<Index> dims_;
    std::vector<Index> ranks_;
    std::vector<Matrix> factors_;
    std::vector<CoreBlock> blocks_;
};

inline constexpr Index kReconstructCap = Index(1) << 27;

// Dense evaluation; refuses (throws std::runtime_error) when the full tensor
// would exceed max_elems entries.
[[nodiscard]] DenseTensor reconstruct(const TuckerTensor& x, Index max_elems = kReconstructCap);

// Frobenius norm without densifying the full tensor: QR-orthogonalize the
// factors, absorb the triangular factors into the core, take the core norm.
[[nodiscard]] double tucker_norm(const TuckerTensor& x);

// Frobenius inner product via per-mode Gram products U_k^T V_k contracted
// against both cores block-pair by block-pair; never densifies at full size.
[[nodiscard]] double tucker_inner(const TuckerTensor& x, const TuckerTensor& y);

// Formal weighted sum: factors concatenate per mode, cores stack as scaled
// blocks on the super-diagonal. Ranks add; no arithmetic on the factors.
[[nodiscard]] TuckerTensor formal_sum(const std::vector<TuckerTensor>& xs,
                                      const std::vector<double>& weights);
// Non-owning variant for callers that keep the summands alive elsewhere.
[[nodiscard]] TuckerTensor formal_sum(const std::vector<const TuckerTensor*>& xs,
                                      const std::vector<double>& weights);

// alpha*x + beta*y as a formal two-term sum.
[[nodiscard]] TuckerTensor tucker_axby(double alpha, const TuckerTensor& x,
                                       double beta, const TuckerTensor& y);

// Relative-error rounding. Phase 1 orthogonalizes every factor and absorbs
// the triangular factors into the core (the densification step for block
// cores). Phase 2 truncates mode by mode: the minimal rank r_n >= 1 whose
// discarded tail energy stays within theta = tau^2*||core||_F^2 / order.
// tau == 0 drops only singular values at the roundoff floor (1e-14 relative).
[[nodiscard]] TuckerTensor tucker_rounding(const TuckerTensor& x, double tau);

// ||x - ref||_F / ||ref||_F evaluated through the orthogonalized core of the
// formal difference, so small errors are not lost to cancellation.
[[nodiscard]] double tucker_rel_error(const TuckerTensor& x, const TuckerTensor& ref);

// Sequentially truncated HOSVD of a dense core: per-mode SVD truncation at
// tail energy theta = tau^2*||g||_F^2/order, processing modes in ascending
// order of current dimension (equal dims degenerate to natural order; skewed
// dims avoid a large leading SVD at identical total error bound).
struct StHosvd {
    DenseTensor core;
    std::vector<Matrix> mode_factors; // P_k with input_dim(k) rows
};
[[nodiscard]] StHosvd st_hosvd(DenseTensor g, double tau);

// Binary serialization of the full Tucker structure (factors plus blocks).
void save_tucker(std::ostream& os, const TuckerTensor& x);
[[nodiscard]] TuckerTensor load_tucker(std::istream& is);
void save_tucker(const std::string& path, const TuckerTensor& x);
[[nodiscard]] TuckerTensor load_tucker(const std::string& path);

} // namespace tucksum

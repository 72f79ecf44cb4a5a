#pragma once

#include <string>
#include <vector>

#include "tucksum/tucker.hpp"

namespace tucksum {

// How a weighted sum of Tucker tensors is compressed back to low rank:
//  - Lazy:  concatenate everything formally, then one final rounding pass.
//  - Eager: left fold, rounding after every pairwise add.
//  - Krp:   randomized range finder whose mode-n sketch is a Khatri-Rao
//           product of shared per-mode Gaussian matrices (uniform width s).
//  - Kron:  as Krp but with a Kronecker-product sketch and per-mode widths,
//           so the implicit mode-n sketch width is the product of the other
//           modes' widths.
enum class Strategy { Lazy, Eager, Krp, Kron };

[[nodiscard]] std::string strategy_name(Strategy s);
[[nodiscard]] Strategy strategy_from_name(const std::string& name);

// Per-mode sketching dimensions chosen from the spectra of the energy-weighted
// concatenated factors of a sum. Built by effective_subrank; reusable across
// many sums with the same rank structure so the spectral analysis is paid once.
struct SketchPlan {
    Strategy strategy = Strategy::Krp;
    std::vector<Index> effective_ranks; // per mode, from the Gram eigenvalue tail
    std::vector<Index> oversampling;    // per-mode safety margin p_n
    std::vector<Index> targets;         // effective rank + margin, capped at the
                                        // attainable rank of the mode unfolding
    std::vector<Index> mode_sketch_dims; // per-mode Gaussian widths s_n; uniform
                                         // (= max target) for the Krp strategy
    double eps = 0.0;
    RngSeed seed; // seed the plan was built with (draws use the request seed)

    // Human-readable per-mode summary (dims, ranks, targets, widths).
    [[nodiscard]] std::string report() const;
};

// A weighted summation problem: round_sum(req) approximates
// sum_i weights[i] * (*summands[i]) at relative tolerance eps.
struct SumRequest {
    std::vector<const TuckerTensor*> summands; // non-owning, all same dims
    std::vector<double> weights;               // one per summand
    double eps = 1e-8;
    Index oversampling = 5;
    Strategy strategy = Strategy::Lazy;
    RngSeed seed;
};

// Optional observability for round_sum and the sketching entry points.
struct SumStats {
    // Eager only: mode ranks of the rounded partial sum after each fold step.
    std::vector<std::vector<Index>> eager_rank_trace;
    SketchPlan plan; // filled for Krp/Kron
    bool has_plan = false;
};

// Closed-form per-mode widths for the Kronecker sketch: start from
// ceil((prod targets)^(1/(N-1)) / target_i), clamp to [1, dims_i], then bump
// the smallest non-saturated width until prod_{j != n} s_j >= target_n holds
// for every mode. Targets must already be capped at attainable mode ranks.
[[nodiscard]] std::vector<Index> kron_sketch_dims(const std::vector<Index>& targets,
                                                  const std::vector<Index>& dims);

// Spectral analysis of the summands: per mode, eigenvalues of the Gram matrix
// of [ |w_1|*||core_1||_F * U_n^(1), |w_2|*||core_2||_F * U_n^(2), ... ] pick
// the smallest rank whose discarded eigenvalue tail is at most eps^2/N of the
// total; targets add the oversampling margin. Widths follow the strategy:
// uniform max target for Krp, kron_sketch_dims for Kron.
[[nodiscard]] SketchPlan effective_subrank(const std::vector<const TuckerTensor*>& summands,
                                           const std::vector<double>& weights, double eps,
                                           const std::vector<Index>& oversampling,
                                           Strategy strategy = Strategy::Krp, RngSeed seed = {});
[[nodiscard]] SketchPlan effective_subrank(const std::vector<const TuckerTensor*>& summands,
                                           const std::vector<double>& weights, double eps,
                                           Index oversampling, Strategy strategy = Strategy::Krp,
                                           RngSeed seed = {});

// Randomized summation with a Khatri-Rao sketch. Stages: plan (unless one is
// passed in), per-mode range finding through the shared Gaussian draws, core
// projection summand by summand, and a final dense-core truncation at eps.
// Never materializes a core of the concatenated rank, only plan-sized ones.
[[nodiscard]] TuckerTensor krp_sum(const SumRequest& req, const SketchPlan* plan = nullptr,
                                   SumStats* stats = nullptr);

// As krp_sum with a Kronecker-product sketch (per-mode widths).
[[nodiscard]] TuckerTensor kron_sum(const SumRequest& req, const SketchPlan* plan = nullptr,
                                    SumStats* stats = nullptr);

// Strategy dispatcher; the optional plan applies to Krp/Kron only.
[[nodiscard]] TuckerTensor round_sum(const SumRequest& req, const SketchPlan* plan = nullptr,
                                     SumStats* stats = nullptr);

} // namespace tucksum

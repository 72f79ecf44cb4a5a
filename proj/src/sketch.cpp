#include "tucksum/sketch.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "tucksum/kernels.hpp"

namespace tucksum {

namespace {

void validate_request(const std::vector<const TuckerTensor*>& summands,
                      const std::vector<double>& weights) {
    if (summands.empty() || summands.size() != weights.size()) {
        throw std::invalid_argument("sum request needs matching, nonempty summands and weights");
    }
    for (const TuckerTensor* x : summands) {
        if (x == nullptr) throw std::invalid_argument("sum request holds a null summand");
    }
    const auto& dims = summands.front()->dims();
    for (const TuckerTensor* x : summands) {
        if (x->dims() != dims) {
            throw std::invalid_argument("sum request summands must share dims");
        }
    }
}

// Saturating product of v[j] over j != skip, so rank caps and feasibility
// checks never overflow for high orders.
constexpr Index kProductCap = Index(1) << 50;

Index complement_product(const std::vector<Index>& v, std::size_t skip) {
    Index prod = 1;
    for (std::size_t j = 0; j < v.size(); ++j) {
        if (j == skip) continue;
        const Index f = std::max<Index>(v[j], 1);
        if (prod > kProductCap / f) return kProductCap;
        prod *= f;
    }
    return prod;
}

TuckerTensor lazy_sum(const SumRequest& req) {
    return tucker_rounding(formal_sum(req.summands, req.weights), req.eps);
}

TuckerTensor eager_sum(const SumRequest& req, SumStats* stats) {
    validate_request(req.summands, req.weights);
    if (stats != nullptr) stats->eager_rank_trace.clear();
    // Left fold: a single summand comes back scaled but unrounded.
    TuckerTensor acc = formal_sum(std::vector<const TuckerTensor*>{req.summands.front()},
                                  {req.weights.front()});
    for (std::size_t i = 1; i < req.summands.size(); ++i) {
        acc = tucker_rounding(tucker_axby(1.0, acc, req.weights[i], *req.summands[i]), req.eps);
        if (stats != nullptr) stats->eager_rank_trace.push_back(acc.ranks());
    }
    return acc;
}

// Shared pipeline for the two randomized strategies; they differ only in how
// a block's sketched mode-n unfolding is contracted against the Gaussians.
TuckerTensor sketched_sum(const SumRequest& req, const SketchPlan* plan_in, SumStats* stats,
                          bool krp) {
    validate_request(req.summands, req.weights);
    if (req.eps < 0.0) throw std::invalid_argument("tolerance must be nonnegative");
    const Index order = req.summands.front()->order();
    if (order < 2) throw std::invalid_argument("sketched summation needs order >= 2");
    const auto& dims = req.summands.front()->dims();
    const auto ou = static_cast<std::size_t>(order);

    const SketchPlan plan =
        plan_in != nullptr ? *plan_in
                           : effective_subrank(req.summands, req.weights, req.eps,
                                               req.oversampling,
                                               krp ? Strategy::Krp : Strategy::Kron, req.seed);
    if (plan.mode_sketch_dims.size() != ou) {
        throw std::invalid_argument("plan order does not match summand order");
    }
    for (Index s : plan.mode_sketch_dims) {
        if (s < 1) throw std::invalid_argument("plan sketch widths must be positive");
    }
    const Index uniform_width =
        *std::max_element(plan.mode_sketch_dims.begin(), plan.mode_sketch_dims.end());

    // One Gaussian draw per mode, shared across all summands and all modes'
    // sketches; widths come from the plan, randomness from the request seed.
    std::vector<Matrix> omega(ou);
    for (std::size_t n = 0; n < ou; ++n) {
        const Index w = krp ? uniform_width : plan.mode_sketch_dims[n];
        omega[n] = gaussian_matrix(dims[n], w, req.seed.substream(static_cast<std::uint64_t>(n)));
    }

    std::vector<Matrix> y(ou);
    for (std::size_t n = 0; n < ou; ++n) {
        const Index cols = krp ? uniform_width : complement_product(plan.mode_sketch_dims, n);
        y[n] = Matrix::Zero(dims[n], cols);
    }

    for (std::size_t i = 0; i < req.summands.size(); ++i) {
        const TuckerTensor& x = *req.summands[i];
        const double w = req.weights[i];
        // Small per-mode products against the shared draws, reused by every
        // mode's sketch of this summand.
        std::vector<Matrix> m(ou);
        for (std::size_t j = 0; j < ou; ++j) {
            m[j] = krp ? Matrix(x.factors()[j].transpose() * omega[j])
                       : Matrix(omega[j].transpose() * x.factors()[j]);
        }
        for (Index n = 0; n < order; ++n) {
            const auto nu = static_cast<std::size_t>(n);
            for (const CoreBlock& b : x.blocks()) {
                const auto factor_slice = x.factors()[nu].middleCols(b.offsets[nu], b.data.dim(n));
                if (krp) {
                    // Column-wise Kronecker chain of the sliced products,
                    // highest mode outermost so the lowest runs fastest,
                    // matching the unfolding's column enumeration.
                    Matrix k;
                    bool first = true;
                    for (Index j = order - 1; j >= 0; --j) {
                        if (j == n) continue;
                        const auto ju = static_cast<std::size_t>(j);
                        Matrix slice = m[ju].middleRows(b.offsets[ju], b.data.dim(j));
                        k = first ? std::move(slice) : Matrix(khatri_rao(k, slice));
                        first = false;
                    }
                    const Matrix v = unfold(b.data, n) * k;
                    y[nu].noalias() += w * (factor_slice * v);
                } else {
                    DenseTensor v = b.data;
                    for (Index j = 0; j < order; ++j) {
                        if (j == n) continue;
                        const auto ju = static_cast<std::size_t>(j);
                        v = ttm(v, m[ju].middleCols(b.offsets[ju], b.data.dim(j)), j);
                    }
                    y[nu].noalias() += w * (factor_slice * unfold(v, n));
                }
            }
        }
    }

    std::vector<Matrix> uhat(ou);
    std::vector<Index> qdims(ou);
    for (std::size_t n = 0; n < ou; ++n) {
        uhat[n] = qr_econ(y[n]).q;
        qdims[n] = uhat[n].cols();
    }

    // Core assembly in the sketched bases, block by block; the only full-size
    // dense object is this plan-sized accumulator.
    DenseTensor h(qdims);
    for (std::size_t i = 0; i < req.summands.size(); ++i) {
        const TuckerTensor& x = *req.summands[i];
        std::vector<Matrix> proj(ou);
        for (std::size_t n = 0; n < ou; ++n) {
            proj[n] = uhat[n].transpose() * x.factors()[n];
        }
        for (const CoreBlock& b : x.blocks()) {
            DenseTensor v = b.data;
            for (Index n = 0; n < order; ++n) {
                const auto nu = static_cast<std::size_t>(n);
                v = ttm(v, proj[nu].middleCols(b.offsets[nu], b.data.dim(n)), n);
            }
            h.vec() += req.weights[i] * v.vec();
        }
    }

    StHosvd fin = st_hosvd(std::move(h), req.eps);
    std::vector<Matrix> out_factors(ou);
    for (std::size_t n = 0; n < ou; ++n) {
        out_factors[n] = uhat[n] * fin.mode_factors[n];
    }
    if (stats != nullptr) {
        stats->plan = plan;
        stats->has_plan = true;
    }
    return TuckerTensor(std::move(fin.core), std::move(out_factors));
}

} // namespace

std::string strategy_name(Strategy s) {
    switch (s) {
        case Strategy::Lazy: return "lazy";
        case Strategy::Eager: return "eager";
        case Strategy::Krp: return "krp";
        case Strategy::Kron: return "kron";
    }
    throw std::invalid_argument("unknown strategy");
}

Strategy strategy_from_name(const std::string& name) {
    if (name == "lazy") return Strategy::Lazy;
    if (name == "eager") return Strategy::Eager;
    if (name == "krp") return Strategy::Krp;
    if (name == "kron") return Strategy::Kron;
    throw std::invalid_argument("unknown strategy name: " + name);
}

std::string SketchPlan::report() const {
    const auto field = [](const std::vector<Index>& v, std::size_t i) {
        return i < v.size() ? std::to_string(v[i]) : std::string("-");
    };
    std::ostringstream os;
    os << "summation plan (" << strategy_name(strategy) << "): eps=" << eps << ", seed=("
       << seed.seed << "," << seed.stream << ")\n";
    for (std::size_t n = 0; n < mode_sketch_dims.size(); ++n) {
        os << "  mode " << (n + 1) << ": effective_rank=" << field(effective_ranks, n)
           << " oversample=" << field(oversampling, n) << " target=" << field(targets, n)
           << " sketch_dim=" << mode_sketch_dims[n];
        if (strategy == Strategy::Kron) {
            os << " complement_width=" << complement_product(mode_sketch_dims, n);
        }
        os << "\n";
    }
    return os.str();
}

std::vector<Index> kron_sketch_dims(const std::vector<Index>& targets,
                                    const std::vector<Index>& dims) {
    const std::size_t n = targets.size();
    if (n < 2 || n != dims.size()) {
        throw std::invalid_argument("kron_sketch_dims: need order >= 2 and matching dims");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (targets[i] < 1 || dims[i] < 1) {
            throw std::invalid_argument("kron_sketch_dims: targets and dims must be positive");
        }
        if (targets[i] > complement_product(dims, i)) {
            throw std::invalid_argument("kron_sketch_dims: target exceeds attainable mode rank");
        }
    }
    // Balance widths so the product of the widths opposite each mode tracks
    // that mode's target, inversely weighting high-target modes.
    long double logp = 0.0L;
    for (Index t : targets) logp += std::log(static_cast<long double>(t));
    const long double root = std::exp(logp / static_cast<long double>(n - 1));
    std::vector<Index> s(n);
    for (std::size_t i = 0; i < n; ++i) {
        long double q = root / static_cast<long double>(targets[i]);
        const long double snapped = std::round(q);
        if (snapped >= 1.0L && std::abs(q - snapped) < 1e-9L) q = snapped;
        const auto si = static_cast<Index>(std::ceil(static_cast<double>(q)));
        s[i] = std::clamp<Index>(si, 1, dims[i]);
    }
    // Deterministic repair: grow the cheapest non-saturated width until every
    // mode's complementary product covers its target.
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t m = 0; m < n; ++m) {
            while (complement_product(s, m) < targets[m]) {
                std::size_t pick = n;
                for (std::size_t j = 0; j < n; ++j) {
                    if (j == m || s[j] >= dims[j]) continue;
                    if (pick == n || s[j] < s[pick]) pick = j;
                }
                if (pick == n) {
                    throw std::logic_error("kron_sketch_dims: infeasible despite capped targets");
                }
                ++s[pick];
                changed = true;
            }
        }
    }
    return s;
}

SketchPlan effective_subrank(const std::vector<const TuckerTensor*>& summands,
                             const std::vector<double>& weights, double eps,
                             const std::vector<Index>& oversampling, Strategy strategy,
                             RngSeed seed) {
    validate_request(summands, weights);
    if (eps < 0.0) throw std::invalid_argument("tolerance must be nonnegative");
    const Index order = summands.front()->order();
    const auto& dims = summands.front()->dims();
    const auto ou = static_cast<std::size_t>(order);
    if (oversampling.size() != ou) {
        throw std::invalid_argument("oversampling vector must have one entry per mode");
    }
    for (Index p : oversampling) {
        if (p < 0) throw std::invalid_argument("oversampling must be nonnegative");
    }

    std::vector<double> energy(summands.size());
    for (std::size_t i = 0; i < summands.size(); ++i) {
        energy[i] = std::abs(weights[i]) * summands[i]->core_norm();
    }

    SketchPlan plan;
    plan.strategy = strategy;
    plan.eps = eps;
    plan.seed = seed;
    plan.oversampling = oversampling;
    plan.effective_ranks.resize(ou);
    plan.targets.resize(ou);

    for (std::size_t n = 0; n < ou; ++n) {
        Index total_cols = 0;
        for (const TuckerTensor* x : summands) total_cols += x->ranks()[n];
        Matrix v(dims[n], total_cols);
        Index col = 0;
        for (std::size_t i = 0; i < summands.size(); ++i) {
            const Index r = summands[i]->ranks()[n];
            v.middleCols(col, r) = energy[i] * summands[i]->factors()[n];
            col += r;
        }
        const SymEig eig = sym_eig(v.transpose() * v);
        Vector lam = eig.values.cwiseMax(0.0);
        // Eigenvalues at the Gram matrix's own roundoff floor carry no rank
        // information; zero them so duplicated subspaces report exact counts.
        const double lmax = lam.size() > 0 ? lam(0) : 0.0;
        const double floor = static_cast<double>(total_cols) *
                             std::numeric_limits<double>::epsilon() * lmax;
        for (Index j = 0; j < lam.size(); ++j) {
            if (lam(j) < floor) lam(j) = 0.0;
        }
        const Index count = lam.size();
        std::vector<double> suffix(static_cast<std::size_t>(count) + 1, 0.0);
        for (Index j = count - 1; j >= 0; --j) {
            suffix[static_cast<std::size_t>(j)] = suffix[static_cast<std::size_t>(j) + 1] + lam(j);
        }
        const double thresh = eps * eps / static_cast<double>(order) * suffix[0];
        Index keep = count;
        for (Index r = 1; r <= count; ++r) {
            if (suffix[static_cast<std::size_t>(r)] <= thresh) {
                keep = r;
                break;
            }
        }
        plan.effective_ranks[n] = keep;
        Index target = keep + oversampling[n];
        target = std::min({target, dims[n], complement_product(dims, n)});
        plan.targets[n] = std::max<Index>(target, 1);
    }

    if (strategy == Strategy::Kron) {
        plan.mode_sketch_dims = kron_sketch_dims(plan.targets, dims);
    } else if (strategy == Strategy::Krp) {
        const Index s = *std::max_element(plan.targets.begin(), plan.targets.end());
        plan.mode_sketch_dims.assign(ou, s);
    } else {
        plan.mode_sketch_dims = plan.targets;
    }
    return plan;
}

SketchPlan effective_subrank(const std::vector<const TuckerTensor*>& summands,
                             const std::vector<double>& weights, double eps, Index oversampling,
                             Strategy strategy, RngSeed seed) {
    validate_request(summands, weights);
    const auto ou = static_cast<std::size_t>(summands.front()->order());
    return effective_subrank(summands, weights, eps, std::vector<Index>(ou, oversampling),
                             strategy, seed);
}

TuckerTensor krp_sum(const SumRequest& req, const SketchPlan* plan, SumStats* stats) {
    return sketched_sum(req, plan, stats, true);
}

TuckerTensor kron_sum(const SumRequest& req, const SketchPlan* plan, SumStats* stats) {
    return sketched_sum(req, plan, stats, false);
}

TuckerTensor round_sum(const SumRequest& req, const SketchPlan* plan, SumStats* stats) {
    switch (req.strategy) {
        case Strategy::Lazy: return lazy_sum(req);
        case Strategy::Eager: return eager_sum(req, stats);
        case Strategy::Krp: return krp_sum(req, plan, stats);
        case Strategy::Kron: return kron_sum(req, plan, stats);
    }
    throw std::invalid_argument("unknown strategy");
}

} // namespace tucksum

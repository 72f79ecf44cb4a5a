#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "tucksum/config.hpp"
#include "tucksum/sketch.hpp"

namespace tucksum {

// Compressed row-storage sparse matrix; assembly leaves the inner indices
// sorted and prunes explicitly stored zeros.
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// One circular inclusion of the diffusion coefficient.
struct Disk {
    double cx = 0.0;
    double cy = 0.0;
    double r = 0.0;
};

// Parametric diffusion benchmark on the unit square: -div(sigma grad u) = f
// with u = 0 on the boundary; sigma is 1 on the background and 1 + xi_mu on
// the mu-th inclusion, one independent parameter per disk.
struct CookieConfig {
    Index parameter_count = 4; // P, at most one per inclusion, capped at 4
    Index cells_per_side = 32; // m; the grid has (m-1)^2 interior nodes
    std::vector<Disk> inclusions = {{0.25, 0.25, 0.15},
                                    {0.75, 0.25, 0.15},
                                    {0.25, 0.75, 0.15},
                                    {0.75, 0.75, 0.15}};
    Index samples_per_mode = 4; // grid points per parameter axis, >= 2
    double param_min = 1.0;
    double param_max = 10.0;
    double source = 1.0; // constant right-hand side f
};

// Stiffness matrices A_0 (background coefficient 1) and A_1..A_P (indicator
// coefficient of each disk), plus the load vector. Degrees of freedom are the
// interior nodes (i*h, j*h), i,j = 1..m-1, numbered (i-1) + (m-1)*(j-1).
struct CookieSystem {
    std::vector<SparseMatrix> ops;
    Vector rhs;
};

// Five-point finite differences with the edge coefficient taken as the mean
// of the two adjacent cell-center values, scaled by 1/h^2. Throws on invalid
// geometry (overlapping disks or disks leaving the unit square).
[[nodiscard]] CookieSystem assemble_cookie(const CookieConfig& cfg);

// count equispaced values covering [lo, hi] inclusive; count >= 2.
[[nodiscard]] Vector equispaced_samples(Index count, double lo, double hi);

// One per-mode entry of a Kronecker-sum term.
struct ModeOp {
    enum class Kind { Identity, Diagonal, Sparse };
    Kind kind = Kind::Identity;
    Vector diag;         // Kind::Diagonal
    SparseMatrix matrix; // Kind::Sparse

    [[nodiscard]] static ModeOp identity();
    [[nodiscard]] static ModeOp diagonal(Vector d);
    [[nodiscard]] static ModeOp sparse(SparseMatrix m);
};

// Linear operator sum_t (M_{t,N} kron ... kron M_{t,1}) acting mode by mode;
// mode-1 entries vary fastest in the vectorization, matching DenseTensor.
struct KroneckerSumOperator {
    std::vector<std::vector<ModeOp>> terms; // terms[t][mode], square per mode
    std::vector<Index> dims;
};

// The global parametric operator and right-hand side: term 0 applies A_0 on
// mode 1; term mu applies A_mu on mode 1 and diag(samples[mu-1]) on mode
// mu+1. The right-hand side is rank-1 with mode-1 factor rhs and all-ones
// parameter factors.
struct OperatorSystem {
    KroneckerSumOperator op;
    TuckerTensor rhs;
};
[[nodiscard]] OperatorSystem build_operator(const std::vector<SparseMatrix>& ops,
                                            const Vector& rhs,
                                            const std::vector<Vector>& samples);

// Applies each term by multiplying the per-mode factor matrices and sums the
// terms formally: output ranks are (term count) * ranks(x), no rounding.
[[nodiscard]] TuckerTensor apply_operator(const KroneckerSumOperator& op, const TuckerTensor& x);

// Explicit matrix of the operator for oracle-sized checks; refuses when the
// vectorized dimension exceeds max_dim.
[[nodiscard]] Matrix dense_operator(const KroneckerSumOperator& op, Index max_dim = 4096);

// x |-> x times_1 M^{-1} through a precomputed sparse LU of M; ranks and all
// other factors are untouched. Copyable so it can sit inside std::function.
class Mode1Solver {
public:
    explicit Mode1Solver(const SparseMatrix& m);

    [[nodiscard]] Matrix solve(const Matrix& rhs) const;
    [[nodiscard]] TuckerTensor operator()(const TuckerTensor& x) const;

private:
    Index n_ = 0;
    std::shared_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>> lu_;
};

// Sparse LU of A_0 + sum_mu A_mu, the operator with every parameter at the
// low end of its range; throws when the factorization fails.
[[nodiscard]] Mode1Solver reference_preconditioner(const std::vector<SparseMatrix>& ops);

struct GmresConfig {
    double tol = 1e-5;       // relative residual target
    Index max_iters = 20;    // Krylov dimension cap; no restarting
    double inner_tol = 1e-7; // truncation tolerance inside the iteration, <= tol
    Strategy strategy = Strategy::Lazy;
    Index oversampling = 5;
    RngSeed seed;
    bool compress_after_apply = true; // extra rounding right after the operator
};

struct GmresResult {
    TuckerTensor x;
    std::vector<double> residuals;      // absolute residual estimate per iteration
    std::vector<Index> basis_max_ranks; // max mode rank of each new basis tensor
    std::vector<double> iter_seconds;   // wall time per iteration
    Index iterations = 0;
    bool converged = false;
};

using TuckerMap = std::function<TuckerTensor(const TuckerTensor&)>;

// Right-preconditioned GMRES in Tucker format: Arnoldi on x |-> op(precond(x))
// with every linear combination compressed through round_sum at inner_tol,
// Givens-updated Hessenberg least squares, stop when the residual estimate
// drops below tol*||rhs||_F (or the new basis vector vanishes). The returned
// solution is precond(sum_k y_k V_k) rounded at tol.
[[nodiscard]] GmresResult tucker_gmres(const KroneckerSumOperator& op, const TuckerTensor& rhs,
                                       const TuckerMap& precond, const GmresConfig& cfg);

// iter,residual_estimate,max_rank,wall_time_s rows of the iteration history.
void write_gmres_trace(std::ostream& os, const GmresResult& r);

[[nodiscard]] CookieConfig cookie_config_from(const KeyValues& kv);
[[nodiscard]] GmresConfig gmres_config_from(const KeyValues& kv);

} // namespace tucksum

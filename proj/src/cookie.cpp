#include "tucksum/cookie.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <utility>

#include "tucksum/kernels.hpp"

namespace tucksum {

namespace {

void validate_cookie(const CookieConfig& cfg) {
    if (cfg.cells_per_side < 2) {
        throw std::invalid_argument("assemble_cookie: need at least 2 cells per side");
    }
    if (cfg.parameter_count < 0 || cfg.parameter_count > 4) {
        throw std::invalid_argument("assemble_cookie: parameter count must be between 0 and 4");
    }
    if (cfg.parameter_count > static_cast<Index>(cfg.inclusions.size())) {
        throw std::invalid_argument("assemble_cookie: more parameters than inclusions");
    }
    if (cfg.samples_per_mode < 2) {
        throw std::invalid_argument("assemble_cookie: need at least 2 samples per parameter");
    }
    if (!(cfg.param_min < cfg.param_max)) {
        throw std::invalid_argument("assemble_cookie: parameter range must be nonempty");
    }
    for (std::size_t a = 0; a < cfg.inclusions.size(); ++a) {
        const Disk& d = cfg.inclusions[a];
        if (d.r <= 0.0) {
            throw std::invalid_argument("assemble_cookie: disk radius must be positive");
        }
        if (d.cx - d.r < 0.0 || d.cx + d.r > 1.0 || d.cy - d.r < 0.0 || d.cy + d.r > 1.0) {
            throw std::invalid_argument("assemble_cookie: inclusion leaves the unit square");
        }
        for (std::size_t b = 0; b < a; ++b) {
            const Disk& e = cfg.inclusions[b];
            const double dx = d.cx - e.cx;
            const double dy = d.cy - e.cy;
            const double sep = d.r + e.r;
            if (dx * dx + dy * dy <= sep * sep) {
                throw std::invalid_argument("assemble_cookie: inclusions overlap");
            }
        }
    }
}

// Five-point stencil over the (m-1)^2 interior nodes with per-edge
// coefficients. Each edge midpoint lies between two grid cells, and its
// coefficient is the mean of the per-cell values supplied by `cell`.
template <typename CellFn>
SparseMatrix assemble_stiffness(Index m, const CellFn& cell) {
    const Index nn = m - 1;
    const double scale = static_cast<double>(m) * static_cast<double>(m); // 1/h^2
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(5 * nn * nn));
    const auto dof = [nn](Index i, Index j) { return (i - 1) + nn * (j - 1); };
    for (Index j = 1; j <= nn; ++j) {
        for (Index i = 1; i <= nn; ++i) {
            const double ce = 0.5 * (cell(i, j - 1) + cell(i, j));
            const double cw = 0.5 * (cell(i - 1, j - 1) + cell(i - 1, j));
            const double cn = 0.5 * (cell(i - 1, j) + cell(i, j));
            const double cs = 0.5 * (cell(i - 1, j - 1) + cell(i, j - 1));
            const double diag = ce + cw + cn + cs;
            if (diag != 0.0) {
                trips.emplace_back(dof(i, j), dof(i, j), scale * diag);
            }
            if (i + 1 <= nn && ce != 0.0) {
                trips.emplace_back(dof(i, j), dof(i + 1, j), -scale * ce);
            }
            if (i - 1 >= 1 && cw != 0.0) {
                trips.emplace_back(dof(i, j), dof(i - 1, j), -scale * cw);
            }
            if (j + 1 <= nn && cn != 0.0) {
                trips.emplace_back(dof(i, j), dof(i, j + 1), -scale * cn);
            }
            if (j - 1 >= 1 && cs != 0.0) {
                trips.emplace_back(dof(i, j), dof(i, j - 1), -scale * cs);
            }
        }
    }
    SparseMatrix a(nn * nn, nn * nn);
    a.setFromTriplets(trips.begin(), trips.end());
    a.prune(0.0);
    a.makeCompressed();
    return a;
}

void validate_operator(const KroneckerSumOperator& op) {
    if (op.terms.empty()) {
        throw std::invalid_argument("apply_operator: operator has no terms");
    }
    const Index order = static_cast<Index>(op.dims.size());
    for (const auto& term : op.terms) {
        if (static_cast<Index>(term.size()) != order) {
            throw std::invalid_argument("apply_operator: term order does not match dims");
        }
        for (Index k = 0; k < order; ++k) {
            const ModeOp& e = term[static_cast<std::size_t>(k)];
            const Index d = op.dims[static_cast<std::size_t>(k)];
            switch (e.kind) {
            case ModeOp::Kind::Identity:
                break;
            case ModeOp::Kind::Diagonal:
                if (e.diag.size() != d) {
                    throw std::invalid_argument("apply_operator: diagonal size mismatch");
                }
                break;
            case ModeOp::Kind::Sparse:
                if (e.matrix.rows() != d || e.matrix.cols() != d) {
                    throw std::invalid_argument("apply_operator: sparse block must be square "
                                                "with the mode dimension");
                }
                break;
            }
        }
    }
}

Matrix mode_dense(const ModeOp& e, Index d) {
    switch (e.kind) {
    case ModeOp::Kind::Diagonal:
        return Matrix(e.diag.asDiagonal());
    case ModeOp::Kind::Sparse:
        return Matrix(e.matrix);
    case ModeOp::Kind::Identity:
    default:
        return Matrix::Identity(d, d);
    }
}

TuckerTensor scaled_copy(const TuckerTensor& x, double alpha) {
    return formal_sum(std::vector<const TuckerTensor*>{&x}, {alpha});
}

std::string real17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

CookieSystem assemble_cookie(const CookieConfig& cfg) {
    validate_cookie(cfg);
    const Index m = cfg.cells_per_side;
    const double h = 1.0 / static_cast<double>(m);
    CookieSystem sys;
    sys.ops.push_back(assemble_stiffness(m, [](Index, Index) { return 1.0; }));
    for (Index mu = 0; mu < cfg.parameter_count; ++mu) {
        const Disk& d = cfg.inclusions[static_cast<std::size_t>(mu)];
        const auto chi = [&d, h](Index p, Index q) {
            const double x = (static_cast<double>(p) + 0.5) * h;
            const double y = (static_cast<double>(q) + 0.5) * h;
            const double dx = x - d.cx;
            const double dy = y - d.cy;
            return dx * dx + dy * dy <= d.r * d.r ? 1.0 : 0.0;
        };
        sys.ops.push_back(assemble_stiffness(m, chi));
    }
    sys.rhs = Vector::Constant((m - 1) * (m - 1), cfg.source);
    return sys;
}

Vector equispaced_samples(Index count, double lo, double hi) {
    if (count < 2) {
        throw std::invalid_argument("equispaced_samples: need at least 2 points");
    }
    return Vector::LinSpaced(count, lo, hi);
}

ModeOp ModeOp::identity() { return {}; }

ModeOp ModeOp::diagonal(Vector d) {
    ModeOp e;
    e.kind = Kind::Diagonal;
    e.diag = std::move(d);
    return e;
}

ModeOp ModeOp::sparse(SparseMatrix m) {
    ModeOp e;
    e.kind = Kind::Sparse;
    e.matrix = std::move(m);
    return e;
}

OperatorSystem build_operator(const std::vector<SparseMatrix>& ops, const Vector& rhs,
                              const std::vector<Vector>& samples) {
    if (ops.empty()) {
        throw std::invalid_argument("build_operator: need at least the background matrix");
    }
    const Index p = static_cast<Index>(ops.size()) - 1;
    if (static_cast<Index>(samples.size()) != p) {
        throw std::invalid_argument("build_operator: one sample vector per parameter expected");
    }
    const Index n = ops.front().rows();
    for (const SparseMatrix& a : ops) {
        if (a.rows() != n || a.cols() != n) {
            throw std::invalid_argument("build_operator: matrices must be square and equal-sized");
        }
    }
    if (rhs.size() != n) {
        throw std::invalid_argument("build_operator: load vector size mismatch");
    }
    for (const Vector& s : samples) {
        if (s.size() < 2) {
            throw std::invalid_argument("build_operator: need at least 2 samples per mode");
        }
        for (Index k = 1; k < s.size(); ++k) {
            if (s(k) < s(k - 1)) {
                throw std::invalid_argument("build_operator: samples must be sorted ascending");
            }
        }
    }

    const Index order = p + 1;
    std::vector<Index> dims(static_cast<std::size_t>(order));
    dims[0] = n;
    for (Index mu = 1; mu <= p; ++mu) {
        dims[static_cast<std::size_t>(mu)] = samples[static_cast<std::size_t>(mu - 1)].size();
    }

    KroneckerSumOperator op;
    op.dims = dims;
    std::vector<ModeOp> background(static_cast<std::size_t>(order));
    background[0] = ModeOp::sparse(ops[0]);
    op.terms.push_back(std::move(background));
    for (Index mu = 1; mu <= p; ++mu) {
        std::vector<ModeOp> term(static_cast<std::size_t>(order));
        term[0] = ModeOp::sparse(ops[static_cast<std::size_t>(mu)]);
        term[static_cast<std::size_t>(mu)] =
            ModeOp::diagonal(samples[static_cast<std::size_t>(mu - 1)]);
        op.terms.push_back(std::move(term));
    }

    std::vector<Matrix> factors;
    factors.reserve(static_cast<std::size_t>(order));
    factors.emplace_back(rhs);
    for (Index mu = 1; mu <= p; ++mu) {
        factors.emplace_back(Matrix::Ones(dims[static_cast<std::size_t>(mu)], 1));
    }
    DenseTensor core(std::vector<Index>(static_cast<std::size_t>(order), 1));
    core.vec()(0) = 1.0;
    return OperatorSystem{std::move(op), TuckerTensor(std::move(core), std::move(factors))};
}

TuckerTensor apply_operator(const KroneckerSumOperator& op, const TuckerTensor& x) {
    validate_operator(op);
    if (x.dims() != op.dims) {
        throw std::invalid_argument("apply_operator: tensor dimensions do not match the operator");
    }
    std::vector<TuckerTensor> terms;
    terms.reserve(op.terms.size());
    for (const auto& term : op.terms) {
        std::vector<Matrix> factors = x.factors();
        for (Index k = 0; k < x.order(); ++k) {
            const ModeOp& e = term[static_cast<std::size_t>(k)];
            switch (e.kind) {
            case ModeOp::Kind::Identity:
                break;
            case ModeOp::Kind::Diagonal:
                factors[static_cast<std::size_t>(k)] =
                    e.diag.asDiagonal() * factors[static_cast<std::size_t>(k)];
                break;
            case ModeOp::Kind::Sparse:
                factors[static_cast<std::size_t>(k)] =
                    e.matrix * factors[static_cast<std::size_t>(k)];
                break;
            }
        }
        terms.emplace_back(x.ranks(), x.blocks(), std::move(factors));
    }
    return formal_sum(terms, std::vector<double>(terms.size(), 1.0));
}

Matrix dense_operator(const KroneckerSumOperator& op, Index max_dim) {
    validate_operator(op);
    Index total = 1;
    for (Index d : op.dims) {
        total *= d;
        if (total > max_dim) {
            throw std::runtime_error("dense_operator: vectorized dimension exceeds the cap");
        }
    }
    const Index order = static_cast<Index>(op.dims.size());
    Matrix out = Matrix::Zero(total, total);
    for (const auto& term : op.terms) {
        // Fold from the slowest mode down so mode-1 entries vary fastest.
        Matrix g = mode_dense(term[static_cast<std::size_t>(order - 1)],
                              op.dims[static_cast<std::size_t>(order - 1)]);
        for (Index k = order - 2; k >= 0; --k) {
            g = kron(g, mode_dense(term[static_cast<std::size_t>(k)],
                                   op.dims[static_cast<std::size_t>(k)]));
        }
        out += g;
    }
    return out;
}

Mode1Solver::Mode1Solver(const SparseMatrix& m) : n_(m.rows()) {
    if (m.rows() != m.cols()) {
        throw std::invalid_argument("Mode1Solver: matrix must be square");
    }
    Eigen::SparseMatrix<double> colmajor = m;
    colmajor.makeCompressed();
    // A structurally empty column is always singular; the factorization's own
    // handling of that case is unreliable, so reject it up front.
    for (Index j = 0; j < colmajor.cols(); ++j) {
        if (colmajor.outerIndexPtr()[j] == colmajor.outerIndexPtr()[j + 1]) {
            throw std::runtime_error("Mode1Solver: matrix has an empty column");
        }
    }
    lu_ = std::make_shared<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
    lu_->compute(colmajor);
    if (lu_->info() != Eigen::Success) {
        throw std::runtime_error("Mode1Solver: sparse LU factorization failed");
    }
}

Matrix Mode1Solver::solve(const Matrix& rhs) const {
    if (rhs.rows() != n_) {
        throw std::invalid_argument("Mode1Solver: right-hand side size mismatch");
    }
    return lu_->solve(rhs);
}

TuckerTensor Mode1Solver::operator()(const TuckerTensor& x) const {
    if (x.dims().empty() || x.dims()[0] != n_) {
        throw std::invalid_argument("Mode1Solver: mode-1 dimension mismatch");
    }
    std::vector<Matrix> factors = x.factors();
    factors[0] = lu_->solve(factors[0]);
    return TuckerTensor(x.ranks(), x.blocks(), std::move(factors));
}

Mode1Solver reference_preconditioner(const std::vector<SparseMatrix>& ops) {
    if (ops.empty()) {
        throw std::invalid_argument("reference_preconditioner: no matrices");
    }
    SparseMatrix m = ops.front();
    for (std::size_t t = 1; t < ops.size(); ++t) {
        m = m + ops[t];
    }
    return Mode1Solver(m);
}

GmresResult tucker_gmres(const KroneckerSumOperator& op, const TuckerTensor& rhs,
                         const TuckerMap& precond, const GmresConfig& cfg) {
    if (!(cfg.tol > 0.0)) {
        throw std::invalid_argument("tucker_gmres: tolerance must be positive");
    }
    if (cfg.inner_tol < 0.0 || cfg.inner_tol > cfg.tol) {
        throw std::invalid_argument(
            "tucker_gmres: inner tolerance must lie in [0, tol]");
    }
    if (cfg.max_iters < 1) {
        throw std::invalid_argument("tucker_gmres: need at least one iteration");
    }
    if (!precond) {
        throw std::invalid_argument("tucker_gmres: missing preconditioner");
    }

    const double bnorm = tucker_norm(rhs);
    if (bnorm == 0.0) {
        return GmresResult{tucker_rounding(rhs, cfg.tol), {}, {}, {}, 0, true};
    }

    const Index kmax = cfg.max_iters;
    std::vector<TuckerTensor> basis;
    basis.reserve(static_cast<std::size_t>(kmax) + 1);
    basis.push_back(scaled_copy(rhs, 1.0 / bnorm));

    Matrix hess = Matrix::Zero(kmax + 1, kmax);
    Vector g = Vector::Zero(kmax + 1);
    g(0) = bnorm;
    Vector rot_c = Vector::Zero(kmax);
    Vector rot_s = Vector::Zero(kmax);
    const double breakdown_tol = 1e-14 * bnorm;

    std::vector<double> residuals;
    std::vector<Index> ranks;
    std::vector<double> seconds;
    std::uint64_t round_calls = 0;
    const auto make_request = [&](std::vector<const TuckerTensor*> xs, std::vector<double> ws) {
        SumRequest r;
        r.summands = std::move(xs);
        r.weights = std::move(ws);
        r.eps = cfg.inner_tol;
        r.oversampling = cfg.oversampling;
        r.strategy = cfg.strategy;
        r.seed = cfg.seed.substream(round_calls++);
        return r;
    };

    Index k = 0;
    bool converged = false;
    while (k < kmax) {
        const auto started = std::chrono::steady_clock::now();
        TuckerTensor w = apply_operator(op, precond(basis[static_cast<std::size_t>(k)]));
        if (cfg.compress_after_apply) {
            w = round_sum(make_request({&w}, {1.0}));
        }

        for (Index j = 0; j <= k; ++j) {
            hess(j, k) = tucker_inner(basis[static_cast<std::size_t>(j)], w);
        }
        std::vector<const TuckerTensor*> xs;
        std::vector<double> ws;
        xs.reserve(static_cast<std::size_t>(k) + 2);
        for (Index j = 0; j <= k; ++j) {
            xs.push_back(&basis[static_cast<std::size_t>(j)]);
            ws.push_back(-hess(j, k));
        }
        xs.push_back(&w);
        ws.push_back(1.0);
        const TuckerTensor orth = round_sum(make_request(std::move(xs), std::move(ws)));
        const double hnext = tucker_norm(orth);
        hess(k + 1, k) = hnext;

        for (Index j = 0; j < k; ++j) {
            const double t = rot_c(j) * hess(j, k) + rot_s(j) * hess(j + 1, k);
            hess(j + 1, k) = -rot_s(j) * hess(j, k) + rot_c(j) * hess(j + 1, k);
            hess(j, k) = t;
        }
        const double denom = std::hypot(hess(k, k), hess(k + 1, k));
        if (denom == 0.0) {
            rot_c(k) = 1.0;
            rot_s(k) = 0.0;
        } else {
            rot_c(k) = hess(k, k) / denom;
            rot_s(k) = hess(k + 1, k) / denom;
        }
        hess(k, k) = denom;
        hess(k + 1, k) = 0.0;
        g(k + 1) = -rot_s(k) * g(k);
        g(k) = rot_c(k) * g(k);
        const double estimate = std::abs(g(k + 1));

        residuals.push_back(estimate);
        ranks.push_back(orth.max_rank());
        seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
                              .count());
        ++k;

        if (estimate < cfg.tol * bnorm) {
            converged = true;
            break;
        }
        if (hnext <= breakdown_tol) {
            // The Krylov space became invariant; the least-squares iterate is
            // already the solution in that space.
            converged = true;
            break;
        }
        basis.push_back(scaled_copy(orth, 1.0 / hnext));
    }

    Vector y = Vector::Zero(k);
    for (Index j = k - 1; j >= 0; --j) {
        double acc = g(j);
        for (Index l = j + 1; l < k; ++l) {
            acc -= hess(j, l) * y(l);
        }
        y(j) = hess(j, j) != 0.0 ? acc / hess(j, j) : 0.0;
    }
    std::vector<const TuckerTensor*> xs;
    std::vector<double> ws;
    xs.reserve(static_cast<std::size_t>(k));
    for (Index j = 0; j < k; ++j) {
        xs.push_back(&basis[static_cast<std::size_t>(j)]);
        ws.push_back(y(j));
    }
    TuckerTensor x = tucker_rounding(precond(round_sum(make_request(std::move(xs), std::move(ws)))),
                                     cfg.tol);
    return GmresResult{std::move(x), std::move(residuals), std::move(ranks), std::move(seconds),
                       k, converged};
}

void write_gmres_trace(std::ostream& os, const GmresResult& r) {
    os << "iter,residual_estimate,max_rank,wall_time_s\n";
    for (std::size_t i = 0; i < r.residuals.size(); ++i) {
        os << (i + 1) << ',' << real17(r.residuals[i]) << ',' << r.basis_max_ranks[i] << ','
           << real17(r.iter_seconds[i]) << '\n';
    }
}

CookieConfig cookie_config_from(const KeyValues& kv) {
    CookieConfig cfg;
    cfg.parameter_count = kv.integer("parameter_count", cfg.parameter_count);
    cfg.cells_per_side = kv.integer("cells_per_side", cfg.cells_per_side);
    cfg.samples_per_mode = kv.integer("samples_per_mode", cfg.samples_per_mode);
    cfg.param_min = kv.real("param_min", cfg.param_min);
    cfg.param_max = kv.real("param_max", cfg.param_max);
    cfg.source = kv.real("source", cfg.source);
    if (kv.has("inclusions")) {
        const std::vector<double> flat = kv.reals("inclusions", {});
        if (flat.size() % 3 != 0 || flat.empty()) {
            throw std::invalid_argument(
                "config: 'inclusions' expects cx,cy,r triples");
        }
        cfg.inclusions.clear();
        for (std::size_t i = 0; i < flat.size(); i += 3) {
            cfg.inclusions.push_back(Disk{flat[i], flat[i + 1], flat[i + 2]});
        }
    }
    return cfg;
}

GmresConfig gmres_config_from(const KeyValues& kv) {
    GmresConfig cfg;
    cfg.tol = kv.real("tol", cfg.tol);
    cfg.max_iters = kv.integer("max_iters", cfg.max_iters);
    cfg.inner_tol = kv.real("inner_tol", cfg.inner_tol);
    cfg.strategy = strategy_from_name(kv.str("strategy", strategy_name(cfg.strategy)));
    cfg.oversampling = kv.integer("oversampling", cfg.oversampling);
    cfg.seed.seed = kv.uint("seed", cfg.seed.seed);
    cfg.seed.stream = kv.uint("stream", cfg.seed.stream);
    cfg.compress_after_apply = kv.flag("compress_after_apply", cfg.compress_after_apply);
    return cfg;
}

} // namespace tucksum

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "tucksum/cookie.hpp"
#include "tucksum/kernels.hpp"
#include "tucksum/tucker.hpp"

using namespace tucksum;

namespace {

TuckerTensor random_tucker(const std::vector<Index>& dims, const std::vector<Index>& ranks,
                           RngSeed seed) {
    std::vector<Matrix> factors;
    for (std::size_t k = 0; k < dims.size(); ++k) {
        factors.push_back(gaussian_matrix(dims[k], ranks[k], seed.substream(100 + k)));
    }
    DenseTensor core(ranks);
    core.vec() = gaussian_matrix(core.size(), 1, seed.substream(999)).col(0);
    return TuckerTensor(std::move(core), std::move(factors));
}

Matrix dense(const SparseMatrix& a) { return Matrix(a); }

// Fold a per-mode matrix list into the explicit operator matrix, slowest
// mode outermost so mode-1 indices run fastest; written against kron directly
// as an independent check of dense_operator's own folding.
Matrix fold_term(const std::vector<Matrix>& per_mode) {
    Matrix g = per_mode.back();
    for (std::size_t k = per_mode.size() - 1; k-- > 0;) {
        g = kron(g, per_mode[k]);
    }
    return g;
}

KroneckerSumOperator identity_operator(std::vector<Index> dims) {
    KroneckerSumOperator op;
    op.terms.emplace_back(dims.size());
    op.dims = std::move(dims);
    return op;
}

CookieConfig small_config(Index m, Index p) {
    CookieConfig cfg;
    cfg.cells_per_side = m;
    cfg.parameter_count = p;
    return cfg;
}

} // namespace

TEST_CASE("background stiffness matches the five-point laplacian stencil") {
    const Index m = 8;
    const Index nn = m - 1;
    const CookieSystem sys = assemble_cookie(small_config(m, 0));
    REQUIRE(sys.ops.size() == 1);
    const Matrix a0 = dense(sys.ops[0]);
    REQUIRE(a0.rows() == nn * nn);

    const double s = static_cast<double>(m * m);
    Matrix expected = Matrix::Zero(nn * nn, nn * nn);
    const auto dof = [nn](Index i, Index j) { return (i - 1) + nn * (j - 1); };
    for (Index j = 1; j <= nn; ++j) {
        for (Index i = 1; i <= nn; ++i) {
            expected(dof(i, j), dof(i, j)) = 4.0 * s;
            if (i > 1) expected(dof(i, j), dof(i - 1, j)) = -s;
            if (i < nn) expected(dof(i, j), dof(i + 1, j)) = -s;
            if (j > 1) expected(dof(i, j), dof(i, j - 1)) = -s;
            if (j < nn) expected(dof(i, j), dof(i, j + 1)) = -s;
        }
    }
    CHECK((a0 - expected).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a0 - a0.transpose()).cwiseAbs().maxCoeff() == 0.0);

    // Row sums vanish away from the boundary and count the clipped neighbors
    // next to it.
    const Vector row_sums = a0 * Vector::Ones(nn * nn);
    for (Index j = 1; j <= nn; ++j) {
        for (Index i = 1; i <= nn; ++i) {
            const double boundary_edges =
                static_cast<double>((i == 1) + (i == nn) + (j == 1) + (j == nn));
            CHECK(row_sums(dof(i, j)) == boundary_edges * s);
        }
    }

    CHECK(sys.rhs.size() == nn * nn);
    CHECK(sys.rhs.minCoeff() == 1.0);
    CHECK(sys.rhs.maxCoeff() == 1.0);
}

TEST_CASE("inclusion matrices are local, positive semidefinite, and keep the sum spd") {
    const Index m = 16;
    const Index nn = m - 1;
    const double h = 1.0 / static_cast<double>(m);
    const CookieConfig cfg = small_config(m, 4);
    const CookieSystem sys = assemble_cookie(cfg);
    REQUIRE(sys.ops.size() == 5);

    for (Index mu = 1; mu <= 4; ++mu) {
        const Matrix a = dense(sys.ops[static_cast<std::size_t>(mu)]);
        CHECK((a - a.transpose()).cwiseAbs().maxCoeff() == 0.0);
        CHECK(a.cwiseAbs().maxCoeff() > 0.0);
        const SymEig eig = sym_eig(a);
        CHECK(eig.values.minCoeff() >= -1e-9);

        // Rows with any entry belong to nodes within one cell of the disk.
        const Disk& d = cfg.inclusions[static_cast<std::size_t>(mu - 1)];
        for (Index j = 1; j <= nn; ++j) {
            for (Index i = 1; i <= nn; ++i) {
                const Index row = (i - 1) + nn * (j - 1);
                if (a.row(row).cwiseAbs().maxCoeff() == 0.0) continue;
                const double dx = static_cast<double>(i) * h - d.cx;
                const double dy = static_cast<double>(j) * h - d.cy;
                CHECK(std::sqrt(dx * dx + dy * dy) <= d.r + 1.5 * h * std::sqrt(2.0));
            }
        }
    }

    Matrix worst = dense(sys.ops[0]);
    for (Index mu = 1; mu <= 4; ++mu) {
        worst += 10.0 * dense(sys.ops[static_cast<std::size_t>(mu)]);
    }
    CHECK(sym_eig(worst).values.minCoeff() > 0.0);
}

TEST_CASE("dense solves of the parametric system stay entrywise positive") {
    const CookieSystem sys = assemble_cookie(small_config(16, 1));
    const Matrix a0 = dense(sys.ops[0]);
    const Matrix a1 = dense(sys.ops[1]);
    for (const double xi : {1.0, 10.0}) {
        const Vector u = (a0 + xi * a1).lu().solve(sys.rhs);
        CHECK(u.minCoeff() > 0.0);
    }
}

TEST_CASE("geometry validation rejects bad inclusion layouts") {
    CookieConfig overlapping = small_config(8, 2);
    overlapping.inclusions = {{0.4, 0.5, 0.2}, {0.6, 0.5, 0.2}};
    CHECK_THROWS_AS((void)assemble_cookie(overlapping), std::invalid_argument);

    CookieConfig outside = small_config(8, 1);
    outside.inclusions = {{0.05, 0.5, 0.1}};
    CHECK_THROWS_AS((void)assemble_cookie(outside), std::invalid_argument);

    CookieConfig negative_radius = small_config(8, 1);
    negative_radius.inclusions = {{0.5, 0.5, -0.1}};
    CHECK_THROWS_AS((void)assemble_cookie(negative_radius), std::invalid_argument);

    CookieConfig too_many = small_config(8, 3);
    too_many.inclusions = {{0.3, 0.3, 0.1}, {0.7, 0.7, 0.1}};
    CHECK_THROWS_AS((void)assemble_cookie(too_many), std::invalid_argument);

    CookieConfig beyond_cap = small_config(8, 5);
    beyond_cap.inclusions.assign(5, Disk{});
    CHECK_THROWS_AS((void)assemble_cookie(beyond_cap), std::invalid_argument);

    CHECK_THROWS_AS((void)assemble_cookie(small_config(1, 0)), std::invalid_argument);

    CookieConfig one_sample = small_config(8, 1);
    one_sample.samples_per_mode = 1;
    CHECK_THROWS_AS((void)assemble_cookie(one_sample), std::invalid_argument);

    CHECK_THROWS_AS((void)equispaced_samples(1, 1.0, 10.0), std::invalid_argument);
    const Vector samples = equispaced_samples(4, 1.0, 10.0);
    CHECK(samples(0) == 1.0);
    CHECK(samples(1) == doctest::Approx(4.0));
    CHECK(samples(2) == doctest::Approx(7.0));
    CHECK(samples(3) == 10.0);
}

TEST_CASE("operator assembly matches the dense kronecker oracle") {
    const Index m = 6;
    const Index nn = m - 1;
    const Index n = nn * nn;
    const CookieSystem sys = assemble_cookie(small_config(m, 2));
    const Vector samples = equispaced_samples(3, 1.0, 10.0);
    const OperatorSystem built = build_operator(sys.ops, sys.rhs, {samples, samples});
    REQUIRE(built.op.terms.size() == 3);
    REQUIRE(built.op.dims == std::vector<Index>{n, 3, 3});

    const Matrix eye3 = Matrix::Identity(3, 3);
    const Matrix dmat = Matrix(samples.asDiagonal());
    const Matrix oracle = fold_term({dense(sys.ops[0]), eye3, eye3}) +
                          fold_term({dense(sys.ops[1]), dmat, eye3}) +
                          fold_term({dense(sys.ops[2]), eye3, dmat});
    CHECK((dense_operator(built.op) - oracle).cwiseAbs().maxCoeff() <= 1e-12);

    // Rank-1 basis probes through the Tucker path agree with the matrix.
    const std::vector<Index> dims = built.op.dims;
    for (const Index probe : {Index(0), Index(7), Index(n * 9 - 1)}) {
        Vector e = Vector::Zero(n * 9);
        e(probe) = 1.0;
        std::vector<Matrix> factors;
        factors.emplace_back(Matrix::Zero(n, 1));
        factors.emplace_back(Matrix::Zero(3, 1));
        factors.emplace_back(Matrix::Zero(3, 1));
        factors[0](probe % n, 0) = 1.0;
        factors[1]((probe / n) % 3, 0) = 1.0;
        factors[2](probe / (n * 3), 0) = 1.0;
        DenseTensor unit({1, 1, 1});
        unit.vec()(0) = 1.0;
        const TuckerTensor basis(std::move(unit), std::move(factors));
        const Vector via_tucker = reconstruct(apply_operator(built.op, basis)).vec();
        CHECK((via_tucker - oracle * e).cwiseAbs().maxCoeff() <=
              1e-11 * oracle.cwiseAbs().maxCoeff());
    }

    // A random Tucker input: vectorized action matches, ranks triple.
    const TuckerTensor x = random_tucker(dims, {4, 2, 2}, RngSeed{11, 0});
    const TuckerTensor lx = apply_operator(built.op, x);
    CHECK(lx.ranks() == std::vector<Index>{12, 6, 6});
    const Vector vx = reconstruct(x).vec();
    const Vector vlx = reconstruct(lx).vec();
    CHECK((vlx - oracle * vx).norm() <= 1e-11 * (oracle * vx).norm());

    // Linearity on reconstructions.
    const TuckerTensor y = random_tucker(dims, {3, 2, 2}, RngSeed{12, 0});
    const TuckerTensor lxy = apply_operator(built.op, tucker_axby(1.0, x, 1.0, y));
    const Vector direct =
        reconstruct(apply_operator(built.op, x)).vec() + reconstruct(apply_operator(built.op, y)).vec();
    CHECK((reconstruct(lxy).vec() - direct).norm() <= 1e-12 * direct.norm());

    // All parameter samples equal to one collapse onto the reference matrix
    // acting along mode 1 alone.
    const Vector ones3 = Vector::Ones(3);
    const OperatorSystem collapsed = build_operator(sys.ops, sys.rhs, {ones3, ones3});
    const Matrix reference = dense(sys.ops[0]) + dense(sys.ops[1]) + dense(sys.ops[2]);
    const DenseTensor via_ttm = ttm(reconstruct(x), reference, 0);
    const Vector via_op = reconstruct(apply_operator(collapsed.op, x)).vec();
    CHECK((via_op - via_ttm.vec()).norm() <= 1e-12 * via_ttm.vec().norm());

    // The right-hand side tensor is the rank-1 outer product of the load with
    // all-ones parameter factors.
    CHECK(built.rhs.ranks() == std::vector<Index>{1, 1, 1});
    const DenseTensor b = reconstruct(built.rhs);
    Index rhs_mismatches = 0;
    for (Index k = 0; k < 3; ++k) {
        for (Index jj = 0; jj < 3; ++jj) {
            for (Index ii = 0; ii < n; ++ii) {
                rhs_mismatches += b.at({ii, jj, k}) != sys.rhs(ii);
            }
        }
    }
    CHECK(rhs_mismatches == 0);

    // An identity operator passes tensors through untouched.
    const TuckerTensor same = apply_operator(identity_operator(dims), x);
    CHECK(tucker_rel_error(same, x) <= 1e-15);

    const TuckerTensor wrong = random_tucker({n, 4, 3}, {2, 2, 2}, RngSeed{13, 0});
    CHECK_THROWS_AS((void)apply_operator(built.op, wrong), std::invalid_argument);
    CHECK_THROWS_AS((void)build_operator(sys.ops, sys.rhs, {samples}), std::invalid_argument);
    Vector unsorted(3);
    unsorted << 10.0, 1.0, 5.0;
    CHECK_THROWS_AS((void)build_operator(sys.ops, sys.rhs, {unsorted, samples}),
                    std::invalid_argument);
}

TEST_CASE("reference preconditioner inverts the reference matrix mode-wise") {
    const Index m = 8;
    const Index n = (m - 1) * (m - 1);
    const CookieSystem sys = assemble_cookie(small_config(m, 2));
    const Mode1Solver solver = reference_preconditioner(sys.ops);
    const Matrix reference = dense(sys.ops[0]) + dense(sys.ops[1]) + dense(sys.ops[2]);

    const TuckerTensor x = random_tucker({n, 3, 3}, {3, 2, 2}, RngSeed{21, 0});
    const TuckerTensor y = solver(x);
    CHECK(y.ranks() == x.ranks());
    CHECK((reference * y.factors()[0] - x.factors()[0]).norm() <=
          1e-10 * x.factors()[0].norm());
    CHECK((y.factors()[1] - x.factors()[1]).cwiseAbs().maxCoeff() == 0.0);

    // Rank-1 load: the mode-1 factor becomes the reference solution.
    std::vector<Matrix> factors{sys.rhs, Matrix::Ones(3, 1), Matrix::Ones(3, 1)};
    DenseTensor unit({1, 1, 1});
    unit.vec()(0) = 1.0;
    const TuckerTensor load(std::move(unit), std::move(factors));
    const TuckerTensor solved = solver(load);
    const Vector direct = reference.lu().solve(sys.rhs);
    CHECK((solved.factors()[0].col(0) - direct).norm() <= 1e-10 * direct.norm());

    // Identity stub leaves tensors alone.
    SparseMatrix eye(n, n);
    eye.setIdentity();
    const Mode1Solver trivial(eye);
    CHECK(tucker_rel_error(trivial(x), x) <= 1e-12);

    SparseMatrix singular(n, n);
    CHECK_THROWS_AS((void)Mode1Solver(singular), std::runtime_error);
    CHECK_THROWS_AS((void)reference_preconditioner({}), std::invalid_argument);
}

TEST_CASE("tucker gmres solves the identity system in one iteration") {
    const std::vector<Index> dims{6, 3, 3};
    const TuckerTensor b = random_tucker(dims, {2, 2, 2}, RngSeed{31, 0});
    GmresConfig cfg;
    cfg.tol = 1e-8;
    cfg.inner_tol = 1e-10;
    const GmresResult res = tucker_gmres(identity_operator(dims), b,
                                         [](const TuckerTensor& v) { return v; }, cfg);
    CHECK(res.converged);
    CHECK(res.iterations == 1);
    CHECK(res.residuals.size() == 1);
    CHECK(res.residuals[0] <= 1e-8 * tucker_norm(b));
    CHECK(tucker_rel_error(res.x, b) <= 1e-7);
}

TEST_CASE("tucker gmres matches the dense direct solve on the small cookie instance") {
    const Index m = 16;
    const Index n = (m - 1) * (m - 1);
    const CookieSystem sys = assemble_cookie(small_config(m, 1));
    const Vector samples = equispaced_samples(4, 1.0, 10.0);
    const OperatorSystem built = build_operator(sys.ops, sys.rhs, {samples});
    const Mode1Solver precond = reference_preconditioner(sys.ops);
    const double bnorm = tucker_norm(built.rhs);

    GmresConfig lazy;
    lazy.strategy = Strategy::Lazy;
    const GmresResult via_lazy = tucker_gmres(built.op, built.rhs, precond, lazy);
    CHECK(via_lazy.converged);
    CHECK(via_lazy.residuals.back() < lazy.tol * bnorm);
    for (std::size_t i = 1; i < via_lazy.residuals.size(); ++i) {
        CHECK(via_lazy.residuals[i] <= via_lazy.residuals[i - 1] + 1e-12 * bnorm);
    }

    // The Hessenberg estimate agrees with an independently computed residual.
    const TuckerTensor residual = tucker_axby(1.0, built.rhs, -1.0,
                                              apply_operator(built.op, via_lazy.x));
    const double true_residual = tucker_norm(residual);
    CHECK(std::abs(true_residual - via_lazy.residuals.back()) <= 10.0 * lazy.inner_tol * bnorm);

    // Vectorized dense direct solve as the accuracy oracle.
    const Matrix global = dense_operator(built.op);
    REQUIRE(global.rows() == n * 4);
    const Vector direct = global.lu().solve(reconstruct(built.rhs).vec());
    const Vector via_tucker = reconstruct(via_lazy.x).vec();
    CHECK((via_tucker - direct).norm() <= 1e-4 * direct.norm());

    // The sketched strategy lands on the same solution and keeps the Krylov
    // ranks within twice the lazy baseline.
    GmresConfig krp = lazy;
    krp.strategy = Strategy::Krp;
    krp.oversampling = 5;
    krp.seed = RngSeed{2024, 0};
    const GmresResult via_krp = tucker_gmres(built.op, built.rhs, precond, krp);
    CHECK(via_krp.converged);
    CHECK(tucker_rel_error(via_krp.x, via_lazy.x) <= 1e-4);
    CHECK((reconstruct(via_krp.x).vec() - direct).norm() <= 1e-4 * direct.norm());

    Index lazy_peak = 0;
    for (Index r : via_lazy.basis_max_ranks) lazy_peak = std::max(lazy_peak, r);
    Index krp_peak = 0;
    for (Index r : via_krp.basis_max_ranks) krp_peak = std::max(krp_peak, r);
    CHECK(krp_peak <= 2 * lazy_peak);

    std::ostringstream trace;
    write_gmres_trace(trace, via_lazy);
    std::istringstream lines(trace.str());
    std::string header;
    std::getline(lines, header);
    CHECK(header == "iter,residual_estimate,max_rank,wall_time_s");
    std::size_t rows = 0;
    std::string row;
    while (std::getline(lines, row)) {
        ++rows;
        CHECK(std::count(row.begin(), row.end(), ',') == 3);
    }
    CHECK(rows == via_lazy.residuals.size());
}

TEST_CASE("gmres configuration guards reject inconsistent settings") {
    const std::vector<Index> dims{4, 3};
    const TuckerTensor b = random_tucker(dims, {2, 2}, RngSeed{41, 0});
    const auto ident = [](const TuckerTensor& v) { return v; };

    GmresConfig bad_inner;
    bad_inner.tol = 1e-6;
    bad_inner.inner_tol = 1e-3;
    CHECK_THROWS_AS((void)tucker_gmres(identity_operator(dims), b, ident, bad_inner),
                    std::invalid_argument);

    GmresConfig bad_iters;
    bad_iters.max_iters = 0;
    CHECK_THROWS_AS((void)tucker_gmres(identity_operator(dims), b, ident, bad_iters),
                    std::invalid_argument);

    GmresConfig bad_tol;
    bad_tol.tol = 0.0;
    bad_tol.inner_tol = 0.0;
    CHECK_THROWS_AS((void)tucker_gmres(identity_operator(dims), b, ident, bad_tol),
                    std::invalid_argument);

    CHECK_THROWS_AS((void)tucker_gmres(identity_operator(dims), b, TuckerMap{}, GmresConfig{}),
                    std::invalid_argument);
}

TEST_CASE("config text populates cookie and gmres settings") {
    const KeyValues kv = KeyValues::from_text("# solver settings\n"
                                              "tol = 1e-6\n"
                                              "max_iters = 12\n"
                                              "inner_tol = 1e-8\n"
                                              "strategy = krp\n"
                                              "oversampling = 3\n"
                                              "seed = 77\n"
                                              "compress_after_apply = off\n");
    const GmresConfig g = gmres_config_from(kv);
    CHECK(g.tol == 1e-6);
    CHECK(g.max_iters == 12);
    CHECK(g.inner_tol == 1e-8);
    CHECK(g.strategy == Strategy::Krp);
    CHECK(g.oversampling == 3);
    CHECK(g.seed.seed == 77);
    CHECK(!g.compress_after_apply);

    const KeyValues ck = KeyValues::from_text("parameter_count = 2\n"
                                              "cells_per_side = 12\n"
                                              "samples_per_mode = 3\n"
                                              "source = 2.5\n"
                                              "inclusions = 0.3,0.3,0.1, 0.7,0.7,0.1\n");
    const CookieConfig c = cookie_config_from(ck);
    CHECK(c.parameter_count == 2);
    CHECK(c.cells_per_side == 12);
    CHECK(c.samples_per_mode == 3);
    CHECK(c.source == 2.5);
    REQUIRE(c.inclusions.size() == 2);
    CHECK(c.inclusions[1].cx == 0.7);
    CHECK(c.inclusions[1].r == 0.1);

    CHECK_THROWS_AS((void)KeyValues::from_text("just some words\n"), std::invalid_argument);
    CHECK_THROWS_AS((void)KeyValues::from_text("tol = abc\n").real("tol", 0.0),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)cookie_config_from(KeyValues::from_text("inclusions = 1,2\n")),
                    std::invalid_argument);
    const KeyValues defaults = KeyValues::from_text("");
    CHECK(gmres_config_from(defaults).tol == 1e-5);
    CHECK(gmres_config_from(defaults).max_iters == 20);
    CHECK(cookie_config_from(defaults).parameter_count == 4);
}

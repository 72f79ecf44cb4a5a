#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>
#include <vector>

#include "tucksum/dense_tensor.hpp"
#include "tucksum/kernels.hpp"
#include "tucksum/serialization.hpp"

using namespace tucksum;

namespace {

// Reference unfolding straight from the index map: entry (i_k, j) with
// j = sum_{m != k} i_m * prod_{l < m, l != k} n_l, evaluated per element.
// Independent of the stride-splitting used by the implementation.
Matrix unfold_oracle(const DenseTensor& t, Index mode) {
    const auto& shape = t.shape();
    const Index order = t.order();
    Index cols = 1;
    for (Index m = 0; m < order; ++m) {
        if (m != mode) cols *= shape[static_cast<std::size_t>(m)];
    }
    Matrix out = Matrix::Zero(t.dim(mode), cols);
    std::vector<Index> idx(static_cast<std::size_t>(order), 0);
    for (bool done = false; !done;) {
        Index j = 0;
        Index stride = 1;
        for (Index m = 0; m < order; ++m) {
            if (m == mode) continue;
            j += idx[static_cast<std::size_t>(m)] * stride;
            stride *= shape[static_cast<std::size_t>(m)];
        }
        out(idx[static_cast<std::size_t>(mode)], j) = t.at(idx);
        done = true;
        for (Index m = 0; m < order; ++m) {
            auto& im = idx[static_cast<std::size_t>(m)];
            if (++im < shape[static_cast<std::size_t>(m)]) {
                done = false;
                break;
            }
            im = 0;
        }
    }
    return out;
}

// Reference mode product by direct summation over the contracted index.
DenseTensor ttm_oracle(const DenseTensor& t, const Matrix& a, Index mode) {
    std::vector<Index> out_shape = t.shape();
    out_shape[static_cast<std::size_t>(mode)] = a.rows();
    DenseTensor out(out_shape);
    std::vector<Index> idx(static_cast<std::size_t>(t.order()), 0);
    for (bool done = false; !done;) {
        std::vector<Index> src = idx;
        double acc = 0.0;
        for (Index q = 0; q < t.dim(mode); ++q) {
            src[static_cast<std::size_t>(mode)] = q;
            acc += a(idx[static_cast<std::size_t>(mode)], q) * t.at(src);
        }
        out.at(idx) = acc;
        done = true;
        for (Index m = 0; m < out.order(); ++m) {
            auto& im = idx[static_cast<std::size_t>(m)];
            if (++im < out_shape[static_cast<std::size_t>(m)]) {
                done = false;
                break;
            }
            im = 0;
        }
    }
    return out;
}

DenseTensor counting_tensor(std::vector<Index> shape) {
    DenseTensor t(std::move(shape));
    for (Index p = 0; p < t.size(); ++p) {
        t.vec()[p] = static_cast<double>(p + 1);
    }
    return t;
}

DenseTensor random_tensor(std::vector<Index> shape, RngSeed seed) {
    Index count = 1;
    for (Index n : shape) count *= n;
    Matrix m = gaussian_matrix(count, 1, seed);
    return DenseTensor(std::move(shape), m.col(0));
}

} // namespace

TEST_CASE("mode-2 unfolding of the counting 2x2x2 tensor matches the frozen layout") {
    // t(i1,i2,i3) = i1 + 2(i2-1) + 4(i3-1), 1-based: flat buffer is 1..8.
    DenseTensor t = counting_tensor({2, 2, 2});
    Matrix expected(2, 4);
    expected << 1, 2, 5, 6,
                3, 4, 7, 8;
    CHECK((unfold(t, 1) - expected).norm() == 0.0);
    CHECK((unfold_oracle(t, 1) - expected).norm() == 0.0);
}

TEST_CASE("matrix unfoldings: mode 0 is the matrix, mode 1 its transpose") {
    DenseTensor t({2, 2});
    t.at({0, 0}) = 1;
    t.at({0, 1}) = 2;
    t.at({1, 0}) = 3;
    t.at({1, 1}) = 4;
    Matrix m0(2, 2), m1(2, 2);
    m0 << 1, 2, 3, 4;
    m1 << 1, 3, 2, 4;
    CHECK((unfold(t, 0) - m0).norm() == 0.0);
    CHECK((unfold(t, 1) - m1).norm() == 0.0);
}

TEST_CASE("unfold agrees with the index-map oracle and fold inverts it") {
    const std::vector<std::vector<Index>> shapes = {{3, 4, 5}, {2, 3, 4, 2}, {5, 2}, {4}, {2, 2, 2, 2, 3}};
    std::uint64_t salt = 0;
    for (const auto& shape : shapes) {
        DenseTensor t = random_tensor(shape, RngSeed{42, salt++});
        for (Index mode = 0; mode < t.order(); ++mode) {
            Matrix u = unfold(t, mode);
            CHECK((u - unfold_oracle(t, mode)).norm() == 0.0);
            DenseTensor back = fold(u, mode, shape);
            CHECK((back.vec() - t.vec()).norm() == 0.0);
        }
    }
}

TEST_CASE("ttm matches the contraction oracle on every mode") {
    DenseTensor t = random_tensor({3, 4, 2, 3}, RngSeed{7, 0});
    for (Index mode = 0; mode < t.order(); ++mode) {
        Matrix a = gaussian_matrix(5, t.dim(mode), RngSeed{7, 10 + static_cast<std::uint64_t>(mode)});
        DenseTensor got = ttm(t, a, mode);
        DenseTensor want = ttm_oracle(t, a, mode);
        CHECK(got.shape() == want.shape());
        CHECK((got.vec() - want.vec()).norm() <= 1e-13 * want.vec().norm());
    }
}

TEST_CASE("ttm validates operand shapes and mode range") {
    DenseTensor t = counting_tensor({2, 3});
    Matrix a = Matrix::Zero(2, 2);
    CHECK_THROWS_AS((void)ttm(t, a, 1), std::invalid_argument); // needs 3 columns
    CHECK_THROWS_AS((void)ttm(t, a, 2), std::invalid_argument);
    CHECK_THROWS_AS((void)unfold(t, -1), std::invalid_argument);
    CHECK_THROWS_AS((void)t.dim(5), std::invalid_argument);
}

TEST_CASE("kron follows the block layout, frozen example") {
    Matrix a(2, 2), b(2, 2);
    a << 1, 2, 3, 4;
    b << 0, 1, 1, 0;
    Matrix expected(4, 4);
    expected << 0, 1, 0, 2,
                1, 0, 2, 0,
                0, 3, 0, 4,
                3, 0, 4, 0;
    CHECK((kron(a, b) - expected).norm() == 0.0);
}

TEST_CASE("kron entry identity out((i*p+k),(j*q+l)) == a(i,j)*b(k,l)") {
    Matrix a = gaussian_matrix(3, 2, RngSeed{1, 1});
    Matrix b = gaussian_matrix(2, 4, RngSeed{1, 2});
    Matrix k = kron(a, b);
    REQUIRE(k.rows() == 6);
    REQUIRE(k.cols() == 8);
    for (Index i = 0; i < 3; ++i)
        for (Index j = 0; j < 2; ++j)
            for (Index p = 0; p < 2; ++p)
                for (Index q = 0; q < 4; ++q)
                    CHECK(k(i * 2 + p, j * 4 + q) == a(i, j) * b(p, q));
}

TEST_CASE("khatri_rao frozen example and column rule") {
    Matrix a(1, 1), b(2, 1);
    a << 2;
    b << 3, 4;
    Matrix kr = khatri_rao(a, b);
    REQUIRE(kr.rows() == 2);
    CHECK(kr(0, 0) == 6);
    CHECK(kr(1, 0) == 8);

    Matrix c = gaussian_matrix(3, 4, RngSeed{2, 1});
    Matrix d = gaussian_matrix(2, 4, RngSeed{2, 2});
    Matrix full = khatri_rao(c, d);
    for (Index col = 0; col < 4; ++col) {
        Matrix single = kron(c.col(col), d.col(col));
        CHECK((full.col(col) - single.col(0)).norm() == 0.0);
    }
    Matrix e = gaussian_matrix(2, 3, RngSeed{2, 3});
    CHECK_THROWS_AS((void)khatri_rao(c, e), std::invalid_argument);
}

TEST_CASE("mixed products: (A kron B)(C kron D) == (AC) kron (BD), and the Khatri-Rao variant") {
    Matrix a = gaussian_matrix(3, 4, RngSeed{3, 1});
    Matrix b = gaussian_matrix(2, 5, RngSeed{3, 2});
    Matrix c = gaussian_matrix(4, 3, RngSeed{3, 3});
    Matrix d = gaussian_matrix(5, 2, RngSeed{3, 4});
    Matrix lhs = kron(a, b) * kron(c, d);
    Matrix rhs = kron(Matrix(a * c), Matrix(b * d));
    CHECK((lhs - rhs).norm() <= 1e-13 * rhs.norm());

    Matrix c2 = gaussian_matrix(4, 6, RngSeed{3, 5});
    Matrix d2 = gaussian_matrix(5, 6, RngSeed{3, 6});
    Matrix lhs2 = kron(a, b) * khatri_rao(c2, d2);
    Matrix rhs2 = khatri_rao(Matrix(a * c2), Matrix(b * d2));
    CHECK((lhs2 - rhs2).norm() <= 1e-13 * rhs2.norm());
}

TEST_CASE("qr_econ: orthonormal Q, upper-triangular R with nonnegative diagonal, exact reassembly") {
    for (auto dims : std::vector<std::pair<Index, Index>>{{7, 4}, {4, 7}, {6, 6}}) {
        Matrix a = gaussian_matrix(dims.first, dims.second, RngSeed{4, static_cast<std::uint64_t>(dims.first * 10 + dims.second)});
        auto [q, r] = qr_econ(a);
        const Index k = std::min(dims.first, dims.second);
        REQUIRE(q.cols() == k);
        REQUIRE(r.rows() == k);
        CHECK((q.transpose() * q - Matrix::Identity(k, k)).norm() <= 1e-12);
        CHECK((q * r - a).norm() <= 1e-12 * a.norm());
        for (Index i = 0; i < k; ++i) {
            CHECK(r(i, i) >= 0.0);
            for (Index j = 0; j < i; ++j) CHECK(r(i, j) == 0.0);
        }
    }
}

TEST_CASE("svd_econ: descending spectrum and reassembly within 1e-11") {
    Matrix a = gaussian_matrix(8, 5, RngSeed{5, 0});
    auto [u, s, v] = svd_econ(a);
    REQUIRE(s.size() == 5);
    for (Index i = 0; i + 1 < s.size(); ++i) CHECK(s[i] >= s[i + 1]);
    CHECK((u * s.asDiagonal() * v.transpose() - a).norm() <= 1e-11 * a.norm());
    CHECK((u.transpose() * u - Matrix::Identity(5, 5)).norm() <= 1e-12);
    CHECK((v.transpose() * v - Matrix::Identity(5, 5)).norm() <= 1e-12);
}

TEST_CASE("sym_eig of A^T A matches squared singular values of A within 1e-10") {
    Matrix a = gaussian_matrix(9, 6, RngSeed{6, 0});
    auto eig = sym_eig(Matrix(a.transpose() * a));
    auto svd = svd_econ(a);
    REQUIRE(eig.values.size() == 6);
    const double scale = svd.s[0] * svd.s[0];
    for (Index i = 0; i < 6; ++i) {
        CHECK(eig.values[i] == doctest::Approx(svd.s[i] * svd.s[i]).epsilon(0).scale(scale).epsilon(1e-10));
    }
    CHECK((eig.vectors.transpose() * eig.vectors - Matrix::Identity(6, 6)).norm() <= 1e-12);
    CHECK_THROWS_AS((void)sym_eig(Matrix::Zero(2, 3)), std::invalid_argument);
}

TEST_CASE("gaussian_matrix: reproducible per (seed, stream), distinct across streams, sane moments") {
    Matrix a = gaussian_matrix(20, 20, RngSeed{11, 3});
    Matrix b = gaussian_matrix(20, 20, RngSeed{11, 3});
    CHECK((a - b).norm() == 0.0);
    Matrix c = gaussian_matrix(20, 20, RngSeed{11, 4});
    CHECK((a - c).norm() > 0.0);
    Matrix d = gaussian_matrix(20, 20, RngSeed{12, 3});
    CHECK((a - d).norm() > 0.0);

    Matrix big = gaussian_matrix(1000, 1000, RngSeed{11, 5});
    const double mean = big.mean();
    const double var = (big.array() - mean).square().sum() / (big.size() - 1);
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(var - 1.0) < 0.02);

    auto sub = RngSeed{11, 3}.substream(9);
    CHECK(sub.seed == 11);
    CHECK(sub.stream != 3);
}

TEST_CASE("binary tensor serialization round-trips bit for bit") {
    DenseTensor t = random_tensor({3, 5, 2}, RngSeed{13, 0});
    std::stringstream buf(std::ios::in | std::ios::out | std::ios::binary);
    save_tensor(buf, t);
    DenseTensor back = load_tensor(buf);
    CHECK(back.shape() == t.shape());
    CHECK((back.vec() - t.vec()).norm() == 0.0);

    std::stringstream truncated(std::ios::in | std::ios::out | std::ios::binary);
    truncated.write("\x03", 1);
    CHECK_THROWS_AS((void)load_tensor(truncated), std::runtime_error);
}

TEST_CASE("allocation accounting tracks live tensor buffers and their peak") {
    tensor_alloc_reset_peak();
    const std::size_t base = tensor_alloc_current();
    {
        DenseTensor a({10, 10});
        CHECK(tensor_alloc_current() == base + 100);
        {
            DenseTensor b({20, 5, 2});
            CHECK(tensor_alloc_current() == base + 300);
        }
        CHECK(tensor_alloc_current() == base + 100);
        DenseTensor moved = std::move(a);
        CHECK(tensor_alloc_current() == base + 100);
    }
    CHECK(tensor_alloc_current() == base);
    CHECK(tensor_alloc_peak() >= base + 300);
}

TEST_CASE("constructor shape validation") {
    CHECK_THROWS_AS(DenseTensor(std::vector<Index>{}), std::invalid_argument);
    CHECK_THROWS_AS(DenseTensor({2, 0}), std::invalid_argument);
    CHECK_THROWS_AS(DenseTensor({2, 2}, Vector::Zero(3)), std::invalid_argument);
}

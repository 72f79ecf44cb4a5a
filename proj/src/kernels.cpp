#include "tucksum/kernels.hpp"

#include <random>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

namespace tucksum {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace

RngSeed RngSeed::substream(std::uint64_t salt) const {
    return RngSeed{seed, splitmix64(stream ^ splitmix64(salt))};
}

Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Index j = 0; j < a.cols(); ++j) {
        for (Index i = 0; i < a.rows(); ++i) {
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        }
    }
    return out;
}

Matrix khatri_rao(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw std::invalid_argument("khatri_rao: operands must have equal column counts");
    }
    Matrix out(a.rows() * b.rows(), a.cols());
    for (Index c = 0; c < a.cols(); ++c) {
        for (Index i = 0; i < a.rows(); ++i) {
            out.col(c).segment(i * b.rows(), b.rows()) = a(i, c) * b.col(c);
        }
    }
    return out;
}

QrEcon qr_econ(const Matrix& a) {
    const Index k = std::min(a.rows(), a.cols());
    Eigen::HouseholderQR<Matrix> qr(a);
    QrEcon out;
    out.q = qr.householderQ() * Matrix::Identity(a.rows(), k);
    out.r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
    for (Index i = 0; i < k; ++i) {
        if (out.r(i, i) < 0.0) {
            out.r.row(i) = -out.r.row(i);
            out.q.col(i) = -out.q.col(i);
        }
    }
    return out;
}

SvdEcon svd_econ(const Matrix& a) {
    Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    return SvdEcon{svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

SymEig sym_eig(const Matrix& a) {
    if (a.rows() != a.cols()) {
        throw std::invalid_argument("sym_eig: matrix must be square");
    }
    const Matrix sym = 0.5 * (a + a.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
    if (eig.info() != Eigen::Success) {
        throw std::runtime_error("sym_eig: eigendecomposition failed to converge");
    }
    // Eigen sorts ascending; flip to descending.
    const Index n = a.rows();
    SymEig out;
    out.values = eig.eigenvalues().reverse();
    out.vectors = eig.eigenvectors().rowwise().reverse();
    (void)n;
    return out;
}

Matrix gaussian_matrix(Index rows, Index cols, RngSeed seed) {
    if (rows < 0 || cols < 0) {
        throw std::invalid_argument("gaussian_matrix: negative extent");
    }
    std::mt19937_64 engine(splitmix64(seed.seed) ^ splitmix64(splitmix64(seed.stream) + 0x6a09e667f3bcc909ULL));
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix out(rows, cols);
    for (Index j = 0; j < cols; ++j) {
        for (Index i = 0; i < rows; ++i) {
            out(i, j) = normal(engine);
        }
    }
    return out;
}

} // namespace tucksum

#pragma once

#include "tucksum/types.hpp"

namespace tucksum {

// Kronecker product: out((i*p + k), (j*q + l)) = a(i, j) * b(k, l) for b of
// size p x q, i.e. b's indices run fastest.
[[nodiscard]] Matrix kron(const Matrix& a, const Matrix& b);

// Khatri-Rao (column-wise Kronecker) product; a and b need equal column
// counts and the result has a.rows()*b.rows() rows.
[[nodiscard]] Matrix khatri_rao(const Matrix& a, const Matrix& b);

struct QrEcon {
    Matrix q; // m x min(m, n), orthonormal columns
    Matrix r; // min(m, n) x n, upper triangular, nonnegative diagonal
};

// Economy Householder QR with the sign convention fixed so that the
// diagonal of R is nonnegative (flipping paired columns of Q / rows of R).
[[nodiscard]] QrEcon qr_econ(const Matrix& a);

struct SvdEcon {
    Matrix u;
    Vector s; // descending
    Matrix v;
};

// Thin singular value decomposition, a = u * s.asDiagonal() * v^T.
[[nodiscard]] SvdEcon svd_econ(const Matrix& a);

struct SymEig {
    Vector values;  // descending, unclamped
    Matrix vectors; // orthonormal columns, paired with values
};

// Eigendecomposition of a symmetric matrix (symmetrized internally to shed
// roundoff asymmetry). Values are returned as computed; callers that need a
// positive-semidefinite reading clamp negatives themselves.
[[nodiscard]] SymEig sym_eig(const Matrix& a);

// rows x cols matrix of iid standard normal draws, deterministic per
// (seed, stream) pair, filled in column-major order.
[[nodiscard]] Matrix gaussian_matrix(Index rows, Index cols, RngSeed seed);

} // namespace tucksum

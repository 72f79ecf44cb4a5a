#pragma once

#include <string>
#include <vector>

#include "tucksum/config.hpp"
#include "tucksum/sketch.hpp"

namespace tucksum {

struct GlRule {
    Vector nodes;   // ascending, symmetric about 0
    Vector weights; // positive, sum to 2
};

// Gauss-Legendre rule with n in 1..8 points on [-1, 1]; exact for
// polynomials up to degree 2n-1.
[[nodiscard]] GlRule gl_nodes_weights(Index n);

// Reference-element tables for a nodal discontinuous Galerkin discretization
// of 1D advection with a Lagrange basis at the Gauss-Legendre points. The
// same quadrature renders the element mass matrix exactly diagonal, so
// coefficients coincide with nodal values.
struct DgCoefficients {
    Index degree = 0; // k
    Vector nodes;     // k+1 Gauss-Legendre points on [-1, 1]
    Vector weights;   // matching quadrature weights
    Matrix volume;    // (p, q) = w_q * L_p'(r_q), the quadrature-weighted
                      // derivative couplings of the volume term
    Vector face_left;  // L_p(-1), trace weights on the left face
    Vector face_right; // L_p(+1), trace weights on the right face
    Vector inv_mass;   // 1 / w_p, reference-element inverse mass diagonal
};

// k in 0..3; k = 0 degenerates to first-order finite-volume upwinding.
[[nodiscard]] DgCoefficients dg_coefficients(Index k);

enum class NdgInitial { Rank1, Rank6, Constant };

[[nodiscard]] std::string ndg_initial_name(NdgInitial ic);
[[nodiscard]] NdgInitial ndg_initial_from_name(const std::string& name);

// Parametric advection on x in [0, 2pi], periodic, with the advective speed
// equal to the first parameter coordinate; the solution at every spatial
// node is a third-order Tucker tensor over the shared parameter grid.
struct NdgConfig {
    Index elements = 16;       // N_x
    Index degree = 1;          // polynomial degree k, 0..3
    Index xi_points = 16;      // grid points per parameter axis
    double xi_halfwidth = 6.0; // parameter box [-Xi, Xi]^3
    double final_time = 0.25;
    double eps = 1e-6; // round_sum tolerance per update
    Index oversampling = 5;
    Strategy strategy = Strategy::Lazy;
    RngSeed seed;
    NdgInitial initial = NdgInitial::Rank1;
    // Accuracy runs shrink the step with the spatial order (dt proportional
    // to h^{k+1}); otherwise dt scales linearly with h for timing sweeps.
    bool accuracy_timestep = true;
    bool endpoint_xi_grid = false; // cell centers by default
};

[[nodiscard]] NdgConfig ndg_config_from(const KeyValues& kv);

struct NdgState {
    std::vector<TuckerTensor> coeffs; // node (i, p) at index i*(k+1) + p
    double time = 0.0;
    Index steps = 0; // forward-Euler steps taken, keys the per-step streams
    Matrix nodes;    // elements x (k+1) physical node coordinates
    Vector xi;       // shared grid of each parameter axis
};

// dt = theta * h^{k+1} with theta = 0.1/((2k+3)*Xi) for accuracy runs;
// dt = theta * h with theta = 0.1/((2k+1)*Xi) otherwise.
[[nodiscard]] double ndg_timestep(const NdgConfig& cfg);

[[nodiscard]] Vector xi_grid(const NdgConfig& cfg);
[[nodiscard]] double xi_spacing(const NdgConfig& cfg);

// Nodal Tucker tensors of the selected initial profile: separable Gaussian
// parameter factors scaled by the nodal value of the spatial profile;
// multi-component profiles concatenate their rank-1 parts formally.
[[nodiscard]] NdgState initial_condition(const NdgConfig& cfg);

// Per-node semidiscrete right-hand side: upwind stencil contributions with
// the advective factor split into nonnegative and nonpositive diagonal
// mode-1 multipliers, compressed through round_sum at cfg.eps. The sketched
// strategies share one plan across all nodes of the evaluation.
[[nodiscard]] std::vector<TuckerTensor> ndg_rhs(const NdgState& state, const NdgConfig& cfg);

// One forward-Euler step: each node becomes round_sum({state, stencil},
// {1, dt * stencil weights}) in a single compressed summation.
[[nodiscard]] NdgState step_forward_euler(const NdgState& state, const NdgConfig& cfg, double dt);
[[nodiscard]] NdgState step_forward_euler(const NdgState& state, const NdgConfig& cfg);

// Integrates to cfg.final_time with the step count rounded up so a uniform
// dt <= ndg_timestep(cfg) lands exactly on the final time.
[[nodiscard]] NdgState run_ndg(const NdgConfig& cfg);

// L1(x, xi) distance to the characteristics solution of the selected initial
// profile, quadrature-weighted in x and cell-weighted on the parameter grid;
// evaluated one parameter-slice at a time, never materializing a 4D array.
[[nodiscard]] double l1_error(const NdgState& state, const NdgConfig& cfg);

// Per-mode maximum Tucker rank over all nodal tensors.
[[nodiscard]] std::vector<Index> ndg_max_ranks(const NdgState& state);

} // namespace tucksum

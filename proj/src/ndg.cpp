#include "tucksum/ndg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>

namespace tucksum {

namespace {

constexpr double kPi = std::numbers::pi;

// Legendre P_n and its derivative at t via the three-term recurrence.
std::pair<double, double> legendre(Index n, double t) {
    double p0 = 1.0;
    double p1 = t;
    for (Index l = 2; l <= n; ++l) {
        const double p2 = ((2.0 * l - 1.0) * t * p1 - (l - 1.0) * p0) / static_cast<double>(l);
        p0 = p1;
        p1 = p2;
    }
    const double dp = static_cast<double>(n) * (t * p1 - p0) / (t * t - 1.0);
    return {p1, dp};
}

double lagrange_value(const Vector& nodes, Index p, double y) {
    double v = 1.0;
    for (Index m = 0; m < nodes.size(); ++m) {
        if (m == p) continue;
        v *= (y - nodes(m)) / (nodes(p) - nodes(m));
    }
    return v;
}

// d/dy L_p(y) evaluated at the interpolation node y = nodes(q).
double lagrange_deriv_at_node(const Vector& nodes, Index p, Index q) {
    if (p == q) {
        double s = 0.0;
        for (Index m = 0; m < nodes.size(); ++m) {
            if (m != p) s += 1.0 / (nodes(p) - nodes(m));
        }
        return s;
    }
    double v = 1.0 / (nodes(p) - nodes(q));
    for (Index m = 0; m < nodes.size(); ++m) {
        if (m == p || m == q) continue;
        v *= (nodes(q) - nodes(m)) / (nodes(p) - nodes(m));
    }
    return v;
}

void validate_ndg(const NdgConfig& cfg) {
    if (cfg.elements < 2) {
        throw std::invalid_argument("ndg: need at least two elements for a periodic stencil");
    }
    if (cfg.degree < 0 || cfg.degree > 3) {
        throw std::invalid_argument("ndg: polynomial degree must be in 0..3");
    }
    if (cfg.xi_points < 2) {
        throw std::invalid_argument("ndg: need at least two grid points per parameter axis");
    }
    if (!(cfg.xi_halfwidth > 0.0)) {
        throw std::invalid_argument("ndg: parameter halfwidth must be positive");
    }
    if (!(cfg.final_time >= 0.0) || !std::isfinite(cfg.final_time)) {
        throw std::invalid_argument("ndg: final time must be finite and nonnegative");
    }
    if (!(cfg.eps >= 0.0)) throw std::invalid_argument("ndg: tolerance must be nonnegative");
    if (cfg.oversampling < 0) {
        throw std::invalid_argument("ndg: oversampling must be nonnegative");
    }
}

void check_state(const NdgState& state, const NdgConfig& cfg) {
    validate_ndg(cfg);
    const Index nn = cfg.degree + 1;
    if (static_cast<Index>(state.coeffs.size()) != cfg.elements * nn) {
        throw std::invalid_argument("ndg: state has the wrong number of nodal tensors");
    }
    if (state.xi.size() != cfg.xi_points) {
        throw std::invalid_argument("ndg: state parameter grid does not match the configuration");
    }
    const std::vector<Index> want(3, cfg.xi_points);
    if (state.coeffs.front().dims() != want) {
        throw std::invalid_argument("ndg: nodal tensors must be cubes over the parameter grid");
    }
}

// One separable component of an initial profile:
// (1 + amp*sin(omega*x)) * g(xi_1 - bx) * g(xi_2 - by) * g(xi_3 - bz)
// with g the unit Gaussian bell exp(-v^2/2)/sqrt(2*pi).
struct Component {
    double amp;
    double omega;
    double bx;
    double by;
    double bz;
};

std::vector<Component> profile_components(NdgInitial ic) {
    switch (ic) {
        case NdgInitial::Rank1:
            return {{0.5, 1.0, 0.0, 0.0, 0.0}};
        case NdgInitial::Constant:
            return {{0.0, 1.0, 0.0, 0.0, 0.0}};
        case NdgInitial::Rank6:
            return {
                {1.0 / 2.0, 1.0, -0.05, 0.0, 0.0},   {1.0 / 4.0, 0.01, 0.05, 0.0, 0.0},
                {3.0 / 20.0, 2.0, 0.0, -0.075, 0.0}, {1.0 / 5.0, 0.2, 0.0, 0.075, 0.0},
                {9.0 / 10.0, 0.7, 0.0, 0.0, -0.025}, {1.0 / 100.0, 10.0, 0.0, 0.0, 0.025},
            };
    }
    throw std::invalid_argument("ndg: unknown initial profile selector");
}

Vector gaussian_axis(const Vector& grid, double shift) {
    const double scale = 1.0 / std::sqrt(2.0 * kPi);
    Vector g(grid.size());
    for (Index j = 0; j < grid.size(); ++j) {
        const double v = grid(j) - shift;
        g(j) = scale * std::exp(-0.5 * v * v);
    }
    return g;
}

// Reference-element coupling tables of the upwind scheme, scaled by the
// inverse mass and element size. For advective speed c the semidiscrete
// update of node (i, p) is
//   sum_q [ c+ * (plus_self(p,q) C^i_q + plus_left(p,q) C^{i-1}_q)
//         + c- * (minus_self(p,q) C^i_q + minus_right(p,q) C^{i+1}_q) ]
// with c+ = max(c, 0) and c- = min(c, 0).
struct StencilTables {
    Matrix plus_self;
    Matrix plus_left;
    Matrix minus_self;
    Matrix minus_right;
};

StencilTables stencil_tables(const DgCoefficients& dg, double h) {
    const Index nn = dg.degree + 1;
    StencilTables t;
    t.plus_self.resize(nn, nn);
    t.plus_left.resize(nn, nn);
    t.minus_self.resize(nn, nn);
    t.minus_right.resize(nn, nn);
    for (Index p = 0; p < nn; ++p) {
        const double scale = 2.0 * dg.inv_mass(p) / h;
        for (Index q = 0; q < nn; ++q) {
            t.plus_self(p, q) = scale * (dg.volume(p, q) - dg.face_right(p) * dg.face_right(q));
            t.plus_left(p, q) = scale * dg.face_left(p) * dg.face_right(q);
            t.minus_self(p, q) = scale * (dg.volume(p, q) + dg.face_left(p) * dg.face_left(q));
            t.minus_right(p, q) = -scale * dg.face_right(p) * dg.face_left(q);
        }
    }
    return t;
}

// Materials of one stencil application: every nodal tensor transformed by
// the nonnegative-speed diagonal (dplus) and the nonpositive one (dminus),
// plus the scalar coupling tables. The transforms touch only the first
// factor, so ranks are unchanged and each tensor is built once per step.
struct StepWork {
    StencilTables tables;
    std::vector<TuckerTensor> dplus;
    std::vector<TuckerTensor> dminus;
    Index elements = 0;
    Index nn = 0;
};

StepWork make_step_work(const NdgState& state, const NdgConfig& cfg) {
    StepWork w;
    w.elements = cfg.elements;
    w.nn = cfg.degree + 1;
    const double h = 2.0 * kPi / static_cast<double>(cfg.elements);
    w.tables = stencil_tables(dg_coefficients(cfg.degree), h);
    const Vector dpos = state.xi.cwiseMax(0.0);
    const Vector dneg = state.xi.cwiseMin(0.0);
    w.dplus.reserve(state.coeffs.size());
    w.dminus.reserve(state.coeffs.size());
    for (const TuckerTensor& c : state.coeffs) {
        TuckerTensor tp = c;
        tp.factors()[0] = dpos.asDiagonal() * c.factors()[0];
        w.dplus.push_back(std::move(tp));
        TuckerTensor tm = c;
        tm.factors()[0] = dneg.asDiagonal() * c.factors()[0];
        w.dminus.push_back(std::move(tm));
    }
    return w;
}

// Summands and weights of one node's compressed summation; `self` (when
// present) contributes the previous state with unit weight and `dt` scales
// every stencil weight, so dt = 1 without `self` yields the plain
// right-hand side.
void node_request(const StepWork& w, Index i, Index p, const TuckerTensor* self, double dt,
                  std::vector<const TuckerTensor*>& summands, std::vector<double>& weights) {
    summands.clear();
    weights.clear();
    if (self != nullptr) {
        summands.push_back(self);
        weights.push_back(1.0);
    }
    const Index left = (i + w.elements - 1) % w.elements;
    const Index right = (i + 1) % w.elements;
    const auto push = [&](const TuckerTensor& t, double weight) {
        if (weight == 0.0) return;
        summands.push_back(&t);
        weights.push_back(weight);
    };
    for (Index q = 0; q < w.nn; ++q) {
        push(w.dplus[i * w.nn + q], dt * w.tables.plus_self(p, q));
        push(w.dplus[left * w.nn + q], dt * w.tables.plus_left(p, q));
        push(w.dminus[i * w.nn + q], dt * w.tables.minus_self(p, q));
        push(w.dminus[right * w.nn + q], dt * w.tables.minus_right(p, q));
    }
}

bool sketched(Strategy s) { return s == Strategy::Krp || s == Strategy::Kron; }

} // namespace

GlRule gl_nodes_weights(Index n) {
    if (n < 1 || n > 8) {
        throw std::invalid_argument("gl_nodes_weights: point count must be in 1..8");
    }
    GlRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    for (Index i = 0; i < n; ++i) {
        // Standard cosine initial guess for the i-th root, refined by Newton.
        double t = std::cos(kPi * (static_cast<double>(i) + 0.75) /
                            (static_cast<double>(n) + 0.5));
        double dp = 1.0;
        for (int iter = 0; iter < 64; ++iter) {
            const auto [value, deriv] = legendre(n, t);
            dp = deriv;
            const double step = value / deriv;
            t -= step;
            if (std::abs(step) < 1e-15) break;
        }
        dp = legendre(n, t).second;
        rule.nodes(i) = t;
        rule.weights(i) = 2.0 / ((1.0 - t * t) * dp * dp);
    }
    std::sort(rule.nodes.data(), rule.nodes.data() + n);
    // Pin the symmetry exactly; Newton leaves a last-bit mismatch between
    // mirrored roots.
    for (Index i = 0; i < n / 2; ++i) {
        const double node = 0.5 * (rule.nodes(n - 1 - i) - rule.nodes(i));
        rule.nodes(i) = -node;
        rule.nodes(n - 1 - i) = node;
        const double weight = 0.5 * (rule.weights(i) + rule.weights(n - 1 - i));
        rule.weights(i) = weight;
        rule.weights(n - 1 - i) = weight;
    }
    if (n % 2 == 1) rule.nodes(n / 2) = 0.0;
    return rule;
}

DgCoefficients dg_coefficients(Index k) {
    if (k < 0 || k > 3) {
        throw std::invalid_argument("dg_coefficients: polynomial degree must be in 0..3");
    }
    const Index nn = k + 1;
    const GlRule rule = gl_nodes_weights(nn);
    DgCoefficients dg;
    dg.degree = k;
    dg.nodes = rule.nodes;
    dg.weights = rule.weights;
    dg.volume.resize(nn, nn);
    dg.face_left.resize(nn);
    dg.face_right.resize(nn);
    for (Index p = 0; p < nn; ++p) {
        for (Index q = 0; q < nn; ++q) {
            dg.volume(p, q) = rule.weights(q) * lagrange_deriv_at_node(rule.nodes, p, q);
        }
        dg.face_left(p) = lagrange_value(rule.nodes, p, -1.0);
        dg.face_right(p) = lagrange_value(rule.nodes, p, 1.0);
    }
    dg.inv_mass = rule.weights.cwiseInverse();
    return dg;
}

std::string ndg_initial_name(NdgInitial ic) {
    switch (ic) {
        case NdgInitial::Rank1: return "rank1";
        case NdgInitial::Rank6: return "rank6";
        case NdgInitial::Constant: return "constant";
    }
    throw std::invalid_argument("ndg: unknown initial profile selector");
}

NdgInitial ndg_initial_from_name(const std::string& name) {
    if (name == "rank1") return NdgInitial::Rank1;
    if (name == "rank6") return NdgInitial::Rank6;
    if (name == "constant") return NdgInitial::Constant;
    throw std::invalid_argument("ndg: unknown initial profile '" + name + "'");
}

NdgConfig ndg_config_from(const KeyValues& kv) {
    NdgConfig cfg;
    cfg.elements = kv.integer("elements", cfg.elements);
    cfg.degree = kv.integer("degree", cfg.degree);
    cfg.xi_points = kv.integer("xi_points", cfg.xi_points);
    cfg.xi_halfwidth = kv.real("xi_halfwidth", cfg.xi_halfwidth);
    cfg.final_time = kv.real("final_time", cfg.final_time);
    cfg.eps = kv.real("eps", cfg.eps);
    cfg.oversampling = kv.integer("oversampling", cfg.oversampling);
    cfg.strategy = strategy_from_name(kv.str("strategy", strategy_name(cfg.strategy)));
    cfg.seed.seed = kv.uint("seed", cfg.seed.seed);
    cfg.seed.stream = kv.uint("stream", cfg.seed.stream);
    cfg.initial = ndg_initial_from_name(kv.str("initial", ndg_initial_name(cfg.initial)));
    cfg.accuracy_timestep = kv.flag("accuracy_timestep", cfg.accuracy_timestep);
    cfg.endpoint_xi_grid = kv.flag("endpoint_xi_grid", cfg.endpoint_xi_grid);
    validate_ndg(cfg);
    return cfg;
}

double ndg_timestep(const NdgConfig& cfg) {
    validate_ndg(cfg);
    const double h = 2.0 * kPi / static_cast<double>(cfg.elements);
    const double k = static_cast<double>(cfg.degree);
    if (cfg.accuracy_timestep) {
        const double theta = 0.1 / ((2.0 * k + 3.0) * cfg.xi_halfwidth);
        return theta * std::pow(h, k + 1.0);
    }
    const double theta = 0.1 / ((2.0 * k + 1.0) * cfg.xi_halfwidth);
    return theta * h;
}

Vector xi_grid(const NdgConfig& cfg) {
    validate_ndg(cfg);
    if (cfg.endpoint_xi_grid) {
        return Vector::LinSpaced(cfg.xi_points, -cfg.xi_halfwidth, cfg.xi_halfwidth);
    }
    const double hv = 2.0 * cfg.xi_halfwidth / static_cast<double>(cfg.xi_points);
    Vector grid(cfg.xi_points);
    for (Index j = 0; j < cfg.xi_points; ++j) {
        grid(j) = -cfg.xi_halfwidth + (static_cast<double>(j) + 0.5) * hv;
    }
    return grid;
}

double xi_spacing(const NdgConfig& cfg) {
    validate_ndg(cfg);
    const double width = 2.0 * cfg.xi_halfwidth;
    if (cfg.endpoint_xi_grid) return width / static_cast<double>(cfg.xi_points - 1);
    return width / static_cast<double>(cfg.xi_points);
}

NdgState initial_condition(const NdgConfig& cfg) {
    validate_ndg(cfg);
    const Index nn = cfg.degree + 1;
    const GlRule rule = gl_nodes_weights(nn);
    const double h = 2.0 * kPi / static_cast<double>(cfg.elements);

    NdgState state;
    state.xi = xi_grid(cfg);
    state.nodes.resize(cfg.elements, nn);
    for (Index i = 0; i < cfg.elements; ++i) {
        for (Index p = 0; p < nn; ++p) {
            state.nodes(i, p) = (static_cast<double>(i) + 0.5 * (1.0 + rule.nodes(p))) * h;
        }
    }

    const std::vector<Component> comps = profile_components(cfg.initial);
    std::vector<std::array<Matrix, 3>> axes;
    axes.reserve(comps.size());
    for (const Component& c : comps) {
        axes.push_back({Matrix(gaussian_axis(state.xi, c.bx)),
                        Matrix(gaussian_axis(state.xi, c.by)),
                        Matrix(gaussian_axis(state.xi, c.bz))});
    }

    state.coeffs.reserve(static_cast<std::size_t>(cfg.elements * nn));
    const std::vector<double> unit(comps.size(), 1.0);
    for (Index i = 0; i < cfg.elements; ++i) {
        for (Index p = 0; p < nn; ++p) {
            const double x = state.nodes(i, p);
            std::vector<TuckerTensor> parts;
            parts.reserve(comps.size());
            for (std::size_t c = 0; c < comps.size(); ++c) {
                DenseTensor core({1, 1, 1});
                core.vec()(0) = 1.0 + comps[c].amp * std::sin(comps[c].omega * x);
                parts.emplace_back(std::move(core),
                                   std::vector<Matrix>{axes[c][0], axes[c][1], axes[c][2]});
            }
            if (parts.size() == 1) {
                state.coeffs.push_back(std::move(parts.front()));
            } else {
                state.coeffs.push_back(formal_sum(parts, unit));
            }
        }
    }
    return state;
}

std::vector<TuckerTensor> ndg_rhs(const NdgState& state, const NdgConfig& cfg) {
    check_state(state, cfg);
    const StepWork work = make_step_work(state, cfg);
    const RngSeed step_seed = cfg.seed.substream(static_cast<std::uint64_t>(state.steps));

    std::vector<TuckerTensor> out;
    out.reserve(state.coeffs.size());
    std::optional<SketchPlan> plan;
    SumRequest req;
    req.eps = cfg.eps;
    req.oversampling = cfg.oversampling;
    req.strategy = cfg.strategy;
    for (Index i = 0; i < cfg.elements; ++i) {
        for (Index p = 0; p < work.nn; ++p) {
            node_request(work, i, p, nullptr, 1.0, req.summands, req.weights);
            req.seed = step_seed.substream(static_cast<std::uint64_t>(i * work.nn + p));
            if (sketched(cfg.strategy) && !plan) {
                // Nodal ranks are homogeneous, so one spectral analysis
                // serves every node of this evaluation.
                plan = effective_subrank(req.summands, req.weights, cfg.eps, cfg.oversampling,
                                         cfg.strategy, step_seed);
            }
            out.push_back(round_sum(req, plan ? &*plan : nullptr));
        }
    }
    return out;
}

NdgState step_forward_euler(const NdgState& state, const NdgConfig& cfg, double dt) {
    check_state(state, cfg);
    if (!(dt > 0.0) || !std::isfinite(dt)) {
        throw std::invalid_argument("ndg: time step must be finite and positive");
    }
    const StepWork work = make_step_work(state, cfg);
    const RngSeed step_seed = cfg.seed.substream(static_cast<std::uint64_t>(state.steps));

    NdgState next;
    next.time = state.time + dt;
    next.steps = state.steps + 1;
    next.nodes = state.nodes;
    next.xi = state.xi;
    next.coeffs.reserve(state.coeffs.size());
    std::optional<SketchPlan> plan;
    SumRequest req;
    req.eps = cfg.eps;
    req.oversampling = cfg.oversampling;
    req.strategy = cfg.strategy;
    for (Index i = 0; i < cfg.elements; ++i) {
        for (Index p = 0; p < work.nn; ++p) {
            const Index idx = i * work.nn + p;
            node_request(work, i, p, &state.coeffs[static_cast<std::size_t>(idx)], dt,
                         req.summands, req.weights);
            req.seed = step_seed.substream(static_cast<std::uint64_t>(idx));
            if (sketched(cfg.strategy) && !plan) {
                plan = effective_subrank(req.summands, req.weights, cfg.eps, cfg.oversampling,
                                         cfg.strategy, step_seed);
            }
            next.coeffs.push_back(round_sum(req, plan ? &*plan : nullptr));
        }
    }
    return next;
}

NdgState step_forward_euler(const NdgState& state, const NdgConfig& cfg) {
    return step_forward_euler(state, cfg, ndg_timestep(cfg));
}

NdgState run_ndg(const NdgConfig& cfg) {
    NdgState state = initial_condition(cfg);
    if (cfg.final_time <= 0.0) return state;
    const double dt0 = ndg_timestep(cfg);
    const auto steps =
        std::max<Index>(1, static_cast<Index>(std::ceil(cfg.final_time / dt0 - 1e-9)));
    const double dt = cfg.final_time / static_cast<double>(steps);
    for (Index s = 0; s < steps; ++s) {
        state = step_forward_euler(state, cfg, dt);
    }
    return state;
}

double l1_error(const NdgState& state, const NdgConfig& cfg) {
    check_state(state, cfg);
    const Index nn = cfg.degree + 1;
    const Index nxi = cfg.xi_points;
    const GlRule rule = gl_nodes_weights(nn);
    const double h = 2.0 * kPi / static_cast<double>(cfg.elements);
    const double hv = xi_spacing(cfg);
    const double cell = hv * hv * hv;

    const std::vector<Component> comps = profile_components(cfg.initial);
    const auto ncomp = static_cast<Index>(comps.size());
    Matrix gx(nxi, ncomp);
    Matrix gy(nxi, ncomp);
    Matrix gz(nxi, ncomp);
    for (Index c = 0; c < ncomp; ++c) {
        gx.col(c) = gaussian_axis(state.xi, comps[static_cast<std::size_t>(c)].bx);
        gy.col(c) = gaussian_axis(state.xi, comps[static_cast<std::size_t>(c)].by);
        gz.col(c) = gaussian_axis(state.xi, comps[static_cast<std::size_t>(c)].bz);
    }

    double err = 0.0;
    Matrix sx(nxi, ncomp);
    for (Index i = 0; i < cfg.elements; ++i) {
        for (Index p = 0; p < nn; ++p) {
            const DenseTensor dense = reconstruct(state.coeffs[static_cast<std::size_t>(i * nn + p)]);
            const double* d = dense.data();
            const double x = state.nodes(i, p);
            // The exact profile advects each parameter slice by time * speed,
            // so the first-axis factor depends on the node coordinate.
            for (Index c = 0; c < ncomp; ++c) {
                const Component& cm = comps[static_cast<std::size_t>(c)];
                for (Index j = 0; j < nxi; ++j) {
                    const double shifted = x - state.time * state.xi(j);
                    sx(j, c) = (1.0 + cm.amp * std::sin(cm.omega * shifted)) * gx(j, c);
                }
            }
            double acc = 0.0;
            for (Index j3 = 0; j3 < nxi; ++j3) {
                for (Index j2 = 0; j2 < nxi; ++j2) {
                    const double* slice = d + nxi * (j2 + nxi * j3);
                    for (Index j1 = 0; j1 < nxi; ++j1) {
                        double exact = 0.0;
                        for (Index c = 0; c < ncomp; ++c) {
                            exact += sx(j1, c) * gy(j2, c) * gz(j3, c);
                        }
                        acc += std::abs(slice[j1] - exact);
                    }
                }
            }
            err += 0.5 * h * rule.weights(p) * cell * acc;
        }
    }
    return err;
}

std::vector<Index> ndg_max_ranks(const NdgState& state) {
    std::vector<Index> out(3, 0);
    for (const TuckerTensor& c : state.coeffs) {
        for (Index m = 0; m < 3; ++m) {
            out[static_cast<std::size_t>(m)] =
                std::max(out[static_cast<std::size_t>(m)], c.ranks()[static_cast<std::size_t>(m)]);
        }
    }
    return out;
}

} // namespace tucksum

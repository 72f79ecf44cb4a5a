#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "tucksum/config.hpp"
#include "tucksum/sketch.hpp"

namespace tucksum {

// One benchmark measurement: a named metric at one sweep point. `sweep` is a
// semicolon-joined "name=value" tag (comma-free so CSV rows never need
// quoting); series data gets an extra coordinate in the tag, e.g.
// "d=60;step=12". The wall time column carries the duration of the timed
// region the metric came from, zeroed when timing is disabled.
struct ResultRow {
    std::string experiment;
    std::string strategy;
    std::string sweep;
    Index trial = 0;
    std::string metric;
    double value = 0.0;
    double wall_time_s = 0.0;
};

// Everything one benchmark invocation needs: which experiment, its sweep
// lists, the summation knobs, and scaled-down problem sizes. default_spec()
// fills per-experiment defaults; config sections and command-line flags
// override from there. Fields irrelevant to the chosen experiment are
// ignored by its runner.
struct ExperimentSpec {
    std::string experiment = "synthetic-lowrank";
    std::vector<Strategy> strategies;
    Index trials = 1;
    RngSeed seed = {1, 0};
    std::string out_path; // empty writes to stdout
    std::string format = "csv";
    bool timing = true;        // false zeroes wall times, making files reproducible
    bool single_thread = true; // pin linear algebra to one thread while timing
    double eps = 1e-6;
    Index oversampling = 2;

    // synthetic-lowrank: sums of d shared-subspace rank-1 tensors
    std::vector<Index> term_counts = {20, 40, 60, 80, 100};
    Index mode_dim = 60;
    Index mode_count = 4;
    Index latent_rank = 10;

    // cancellation: a small signal plus paired noise tensors that cancel
    Index cancel_dim = 100;
    Index cancel_pairs = 30;

    // cookie: parametric diffusion solves over a parameter-sample sweep
    std::vector<Index> sample_counts = {4, 8, 16};
    Index cells_per_side = 32;
    Index parameter_count = 4;
    double gmres_tol = 1e-5;
    double gmres_inner_tol = 1e-7;
    Index gmres_max_iters = 20;

    // ndg transport sweeps, shared by the convergence and speedup modes
    std::vector<Index> element_counts = {8, 16, 32};
    std::vector<Index> degrees = {0, 1, 2};
    std::vector<Index> xi_counts = {8};
    double xi_halfwidth = 6.0;
    double final_time = 0.25;
};

// Per-experiment defaults; throws std::invalid_argument on an unknown name.
// Experiment names: synthetic-lowrank, cancellation, cookie, ndg-convergence,
// ndg-speedup.
[[nodiscard]] ExperimentSpec default_spec(const std::string& experiment);

// default_spec overridden first by the "[bench]" config section, then by the
// experiment's own section. Throws on malformed values or an invalid spec.
[[nodiscard]] ExperimentSpec experiment_spec_from(const KeyValues& kv,
                                                  const std::string& experiment);

// Sanity checks shared by every runner (trials >= 1, nonempty sweeps and
// strategies, known format); throws std::invalid_argument.
void validate_spec(const ExperimentSpec& spec);

// Sums of d rank-1 tensors drawn from one fixed orthonormal basis per mode,
// so every sum has exact latent rank `latent_rank`. Records output ranks,
// error vs the Lazy result, and solve times across the d sweep.
[[nodiscard]] std::vector<ResultRow> run_synthetic_lowrank(const ExperimentSpec& spec);

// A rank-5 target hidden inside 2*cancel_pairs summands whose large noise
// components cancel pairwise. Records error vs the known target and, for the
// eager strategy, the per-step intermediate rank trace.
[[nodiscard]] std::vector<ResultRow> run_cancellation(const ExperimentSpec& spec);

// Parametric diffusion solves via preconditioned GMRES in Tucker format,
// sweeping the per-parameter sample count. Records iterations, residual
// history, ranks, and error vs the Lazy solution.
[[nodiscard]] std::vector<ResultRow> run_cookie(const ExperimentSpec& spec);

// Parametric advection runs: "ndg-convergence" sweeps the mesh and reports
// L1 errors plus observed orders; "ndg-speedup" runs the rank-6 profile on
// timing-friendly steps and reports per-strategy speedups vs Lazy.
[[nodiscard]] std::vector<ResultRow> run_ndg_bench(const ExperimentSpec& spec);

// Dispatch on spec.experiment.
[[nodiscard]] std::vector<ResultRow> run_experiment(const ExperimentSpec& spec);

// Comment lines appended to CSV reports describing how this spec's sizes and
// tolerances sit relative to the full-scale reference configuration.
[[nodiscard]] std::vector<std::string> report_footers(const ExperimentSpec& spec);

// Writes rows as CSV (fixed column order, %.17g floats, trailing "# ..."
// footer lines) or as a JSON array of identical-key row objects. Empty rows
// produce a header-only CSV / empty JSON array.
void emit_report(const std::vector<ResultRow>& rows, std::ostream& os, const std::string& format,
                 const std::vector<std::string>& footers = {});

// As above into a file; throws std::runtime_error when the path is unwritable.
void emit_report(const std::vector<ResultRow>& rows, const std::string& path,
                 const std::string& format, const std::vector<std::string>& footers = {});

// One pass/fail verdict of the verification suite, with the measured numbers
// the verdict rests on and the time the check took.
struct CriterionResult {
    int id = 0;
    std::string label;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

// Runs the verification checks (ids 1..8), all of them when `which` is
// empty. Each check streams its one-line verdict to `log` as it finishes;
// a check that throws is reported as failed rather than aborting the suite.
[[nodiscard]] std::vector<CriterionResult> run_acceptance(std::vector<int> which = {},
                                                          std::ostream* log = nullptr);

} // namespace tucksum

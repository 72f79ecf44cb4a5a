#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "tucksum/bench.hpp"
#include "tucksum/config.hpp"

using namespace tucksum;

namespace {

std::vector<const ResultRow*> select(const std::vector<ResultRow>& rows,
                                     const std::string& strategy, const std::string& metric) {
    std::vector<const ResultRow*> out;
    for (const ResultRow& r : rows) {
        if (r.strategy == strategy && r.metric == metric) {
            out.push_back(&r);
        }
    }
    return out;
}

double single_value(const std::vector<ResultRow>& rows, const std::string& strategy,
                    const std::string& sweep, const std::string& metric) {
    for (const ResultRow& r : rows) {
        if (r.strategy == strategy && r.sweep == sweep && r.metric == metric) {
            return r.value;
        }
    }
    throw std::runtime_error("row not found: " + strategy + "/" + sweep + "/" + metric);
}

std::string to_csv(const std::vector<ResultRow>& rows,
                   const std::vector<std::string>& footers = {}) {
    std::ostringstream os;
    emit_report(rows, os, "csv", footers);
    return os.str();
}

} // namespace

TEST_CASE("config sections prefix keys and scoped slices recover them") {
    const KeyValues kv = KeyValues::from_text("top = 1\n"
                                              "[bench] # global knobs\n"
                                              "trials = 4\n"
                                              "seed = 9\n"
                                              "[cookie]\n"
                                              "trials = 2\n"
                                              "n_list = 4, 8\n");
    CHECK(kv.integer("top", 0) == 1);
    CHECK(kv.integer("bench.trials", 0) == 4);
    CHECK(kv.integer("cookie.trials", 0) == 2);
    CHECK_FALSE(kv.has("trials"));

    const KeyValues bench = kv.scoped("bench");
    CHECK(bench.integer("trials", 0) == 4);
    CHECK(bench.uint("seed", 0) == 9);
    CHECK_FALSE(bench.has("top"));
    CHECK_FALSE(bench.has("n_list"));

    const KeyValues cookie = kv.scoped("cookie");
    CHECK(cookie.integers("n_list", {}) == std::vector<Index>{4, 8});
    CHECK(kv.scoped("missing").entries().empty());

    CHECK_THROWS_AS((void)KeyValues::from_text("[]\nx = 1\n"), std::invalid_argument);
    CHECK_THROWS_AS((void)KeyValues::from_text("[a]\nnot a pair\n"), std::invalid_argument);
}

TEST_CASE("experiment specs combine defaults, sections, and validation") {
    const ExperimentSpec base = default_spec("cancellation");
    CHECK(base.strategies.size() == 4);
    CHECK(base.trials == 1);
    CHECK(base.cancel_pairs == 30);
    CHECK_THROWS_AS((void)default_spec("nope"), std::invalid_argument);

    const KeyValues kv = KeyValues::from_text("[bench]\n"
                                              "trials = 2\n"
                                              "seed = 42\n"
                                              "timing = false\n"
                                              "[synthetic-lowrank]\n"
                                              "d_list = 12, 20\n"
                                              "mode_dim = 20\n"
                                              "latent_rank = 5\n"
                                              "strategies = lazy, krp\n"
                                              "trials = 3\n");
    const ExperimentSpec spec = experiment_spec_from(kv, "synthetic-lowrank");
    CHECK(spec.trials == 3); // experiment section wins over [bench]
    CHECK(spec.seed.seed == 42);
    CHECK_FALSE(spec.timing);
    CHECK(spec.term_counts == std::vector<Index>{12, 20});
    CHECK(spec.mode_dim == 20);
    CHECK(spec.latent_rank == 5);
    REQUIRE(spec.strategies.size() == 2);
    CHECK(spec.strategies[0] == Strategy::Lazy);
    CHECK(spec.strategies[1] == Strategy::Krp);

    CHECK_THROWS_AS((void)experiment_spec_from(
                        KeyValues::from_text("[bench]\nstrategies = warp\n"), "cookie"),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)experiment_spec_from(KeyValues::from_text("[bench]\ntrials = 0\n"),
                                               "cookie"),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)experiment_spec_from(KeyValues::from_text("[bench]\nformat = xml\n"),
                                               "cookie"),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)experiment_spec_from(
                        KeyValues::from_text("[synthetic-lowrank]\nd_list =\n"),
                        "synthetic-lowrank"),
                    std::invalid_argument);
}

TEST_CASE("reports serialize rows faithfully in both formats") {
    const std::vector<ResultRow> rows{{"demo", "lazy", "d=2", 0, "value", 0.5, 0.25},
                                      {"demo", "krp", "d=2;step=1", 1, "rank_mode1", 3.0, 0.0}};

    CHECK(to_csv(rows) == "experiment,strategy,sweep,trial,metric,value,wall_time_s\n"
                          "demo,lazy,d=2,0,value,0.5,0.25\n"
                          "demo,krp,d=2;step=1,1,rank_mode1,3,0\n");
    CHECK(to_csv(rows, {"note one", "note two"}) ==
          "experiment,strategy,sweep,trial,metric,value,wall_time_s\n"
          "demo,lazy,d=2,0,value,0.5,0.25\n"
          "demo,krp,d=2;step=1,1,rank_mode1,3,0\n"
          "# note one\n"
          "# note two\n");
    // Header-only when there is nothing to report; footers are suppressed.
    CHECK(to_csv({}, {"note"}) == "experiment,strategy,sweep,trial,metric,value,wall_time_s\n");

    // An awkward double must survive the JSON round trip bit-for-bit.
    std::vector<ResultRow> tricky = rows;
    tricky[0].value = 0.1 + 0.2;
    std::ostringstream js;
    emit_report(tricky, js, "json", {"footers are csv-only"});
    const nlohmann::json parsed = nlohmann::json::parse(js.str());
    REQUIRE(parsed.is_array());
    REQUIRE(parsed.size() == 2);
    CHECK(parsed[0]["experiment"] == "demo");
    CHECK(parsed[0]["value"].get<double>() == tricky[0].value);
    CHECK(parsed[1]["metric"] == "rank_mode1");
    CHECK(parsed[1]["trial"].get<Index>() == 1);
    for (const auto& obj : parsed) {
        CHECK(obj.size() == 7);
    }

    std::ostringstream sink;
    CHECK_THROWS_AS(emit_report(rows, sink, "xml"), std::invalid_argument);
    CHECK_THROWS_AS(emit_report(rows, "/nonexistent-dir/report.csv", "csv"), std::runtime_error);
}

TEST_CASE("synthetic runner recovers the shared subspace at exact rank") {
    ExperimentSpec spec = default_spec("synthetic-lowrank");
    spec.term_counts = {12, 20};
    spec.mode_dim = 20;
    spec.mode_count = 3;
    spec.latent_rank = 5;
    spec.trials = 1;
    spec.timing = false;
    const std::vector<ResultRow> rows = run_synthetic_lowrank(spec);

    for (const std::string strat : {"krp", "kron"}) {
        for (Index k = 1; k <= spec.mode_count; ++k) {
            const auto ranks = select(rows, strat, "rank_mode" + std::to_string(k));
            REQUIRE(ranks.size() == spec.term_counts.size());
            for (const ResultRow* r : ranks) {
                CHECK(r->value == static_cast<double>(spec.latent_rank));
            }
        }
        for (const ResultRow* r : select(rows, strat, "rel_error_vs_lazy")) {
            CHECK(r->value <= 1e-9);
        }
    }
    // timing=false pins every wall column to zero, so reruns are identical.
    for (const ResultRow& r : rows) {
        CHECK(r.wall_time_s == 0.0);
    }
    CHECK(to_csv(rows) == to_csv(run_synthetic_lowrank(spec)));
}

TEST_CASE("cancellation runner separates eager rounding from sketched sums") {
    ExperimentSpec spec = default_spec("cancellation");
    spec.cancel_dim = 40;
    spec.cancel_pairs = 10;
    spec.timing = false;
    const std::vector<ResultRow> rows = run_cancellation(spec);
    const std::string sweep = "d=20";

    CHECK(single_value(rows, "eager", sweep, "rel_error_vs_target") >= 0.1);
    CHECK(single_value(rows, "lazy", sweep, "rel_error_vs_target") <= 1e-9);
    CHECK(single_value(rows, "krp", sweep, "rel_error_vs_target") <= 1e-9);
    CHECK(single_value(rows, "kron", sweep, "rel_error_vs_target") <= 1e-9);

    const auto trace = select(rows, "eager", "eager_max_rank");
    CHECK(trace.size() == 19); // one fold per additional summand
    double krp_rank = 0.0;
    for (Index k = 1; k <= 3; ++k) {
        krp_rank = std::max(krp_rank, single_value(rows, "krp", sweep,
                                                   "rank_mode" + std::to_string(k)));
    }
    const double mid = single_value(rows, "eager", sweep + ";step=10", "eager_max_rank");
    CHECK(mid > 2.0 * krp_rank);
}

TEST_CASE("cookie runner reports a converging preconditioned solve") {
    ExperimentSpec spec = default_spec("cookie");
    spec.sample_counts = {3};
    spec.cells_per_side = 12;
    spec.parameter_count = 1;
    spec.trials = 1;
    spec.strategies = {Strategy::Lazy};
    spec.timing = false;
    const std::vector<ResultRow> rows = run_cookie(spec);

    CHECK(single_value(rows, "lazy", "N=3", "converged") == 1.0);
    const double iters = single_value(rows, "lazy", "N=3", "iterations");
    CHECK(iters <= 20.0);
    CHECK(single_value(rows, "lazy", "N=3", "final_residual_rel") <= 1e-5);
    CHECK(single_value(rows, "lazy", "N=3", "solution_max_rank") >= 1.0);
    CHECK(select(rows, "lazy", "residual_rel").size() == static_cast<std::size_t>(iters));
}

TEST_CASE("transport runner reports errors, orders, and speedups") {
    ExperimentSpec conv = default_spec("ndg-convergence");
    conv.degrees = {1};
    conv.element_counts = {8, 16};
    conv.xi_counts = {4};
    conv.final_time = 0.1;
    conv.trials = 1;
    conv.strategies = {Strategy::Lazy};
    conv.timing = false;
    const std::vector<ResultRow> crows = run_ndg_bench(conv);

    CHECK(select(crows, "lazy", "l1_error").size() == 2);
    CHECK(single_value(crows, "lazy", "Nx=8;k=1;Nxi=4", "steps") > 0.0);
    for (Index m = 1; m <= 3; ++m) {
        CHECK(single_value(crows, "lazy", "Nx=16;k=1;Nxi=4", "max_rank_mode" + std::to_string(m)) >=
              1.0);
    }
    const double order = single_value(crows, "lazy", "Nx=16;k=1;Nxi=4", "order_vs_prev");
    CHECK(std::isfinite(order));
    CHECK(order > 0.5);

    ExperimentSpec fast = default_spec("ndg-speedup");
    fast.element_counts = {8};
    fast.xi_counts = {4, 8};
    fast.final_time = 0.01;
    fast.trials = 1;
    fast.strategies = {Strategy::Lazy, Strategy::Krp};
    const std::vector<ResultRow> srows = run_ndg_bench(fast);

    CHECK(select(srows, "krp", "speedup_vs_lazy").size() == 2);
    for (const ResultRow* r : select(srows, "krp", "speedup_vs_lazy")) {
        CHECK(r->value > 0.0);
    }
    CHECK(select(srows, "lazy", "wall_time_median_s").size() == 2);
    CHECK(select(srows, "lazy", "l1_error").empty()); // timing mode skips the error metric
}

TEST_CASE("acceptance entry point streams one verdict per check") {
    std::ostringstream log;
    const std::vector<CriterionResult> res = run_acceptance({2}, &log);
    REQUIRE(res.size() == 1);
    CHECK(res[0].id == 2);
    CHECK(res[0].pass);
    CHECK(log.str().find("[PASS] 2:") != std::string::npos);
    CHECK_THROWS_AS((void)run_acceptance({99}, nullptr), std::invalid_argument);
}

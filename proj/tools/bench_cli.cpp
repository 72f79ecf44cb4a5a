#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "tucksum/bench.hpp"
#include "tucksum/config.hpp"

namespace {

// Options shared by every experiment subcommand. Each one maps to a
// `key=value` line appended under the experiment's config section, so the
// precedence is: built-in defaults < [bench] section < [<experiment>]
// section < command line.
struct CommonOpts {
    std::string config_path;
    std::uint64_t seed = 0;
    std::string out_path;
    std::string format;
    std::string strategy;
    tucksum::Index trials = 0;
    bool no_timing = false;
    std::vector<std::string> sets;
};

void attach_common(CLI::App* sub, CommonOpts* o) {
    sub->add_option("-c,--config", o->config_path, "key=value config file with [section] headers")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", o->seed, "base RNG seed");
    sub->add_option("-o,--out", o->out_path, "report path (default: stdout)");
    sub->add_option("-f,--format", o->format, "report format: csv or json");
    sub->add_option("--strategy", o->strategy,
                    "restrict to one summation strategy (lazy, eager, krp, kron)");
    sub->add_option("--trials", o->trials, "repetitions per sweep point");
    sub->add_flag("--no-timing", o->no_timing, "zero wall times and skip warm-ups");
    sub->add_option("--set", o->sets, "extra key=value override (repeatable)");
}

int run_experiment_command(const std::string& experiment, const CLI::App* sub,
                           const CommonOpts& o) {
    std::string text;
    if (!o.config_path.empty()) {
        std::ifstream is(o.config_path);
        if (!is) {
            throw std::runtime_error("cannot open config file: " + o.config_path);
        }
        std::ostringstream buf;
        buf << is.rdbuf();
        text = buf.str();
    }
    text += "\n[" + experiment + "]\n";
    for (const std::string& kv : o.sets) {
        if (kv.find('=') == std::string::npos) {
            throw std::runtime_error("--set expects key=value, got: " + kv);
        }
        text += kv + "\n";
    }
    if (sub->count("--seed") > 0) {
        text += "seed=" + std::to_string(o.seed) + "\n";
    }
    if (sub->count("--out") > 0) {
        text += "out=" + o.out_path + "\n";
    }
    if (sub->count("--format") > 0) {
        text += "format=" + o.format + "\n";
    }
    if (sub->count("--strategy") > 0) {
        text += "strategies=" + o.strategy + "\n";
    }
    if (sub->count("--trials") > 0) {
        text += "trials=" + std::to_string(o.trials) + "\n";
    }
    if (o.no_timing) {
        text += "timing=false\n";
    }

    const tucksum::KeyValues kv = tucksum::KeyValues::from_text(text);
    const tucksum::ExperimentSpec spec = tucksum::experiment_spec_from(kv, experiment);
    if (spec.single_thread) {
        Eigen::setNbThreads(1);
    }
    const std::vector<tucksum::ResultRow> rows = tucksum::run_experiment(spec);
    const std::vector<std::string> footers = tucksum::report_footers(spec);
    if (spec.out_path.empty()) {
        tucksum::emit_report(rows, std::cout, spec.format, footers);
    } else {
        tucksum::emit_report(rows, spec.out_path, spec.format, footers);
        std::cerr << "wrote " << rows.size() << " rows to " << spec.out_path << '\n';
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Tucker-format summation benchmarks and verification suite"};
    app.require_subcommand(1);

    const std::vector<std::pair<std::string, std::string>> experiments{
        {"synthetic-lowrank", "sums of shared-subspace rank-1 tensors across a summand sweep"},
        {"cancellation", "a small target hidden in pairwise-cancelling noise"},
        {"cookie", "parametric diffusion solves via Tucker-format GMRES"},
        {"ndg-convergence", "parametric transport mesh-refinement study"},
        {"ndg-speedup", "parametric transport timing comparison across strategies"},
    };
    std::vector<CommonOpts> opts(experiments.size());
    std::vector<CLI::App*> subs;
    for (std::size_t i = 0; i < experiments.size(); ++i) {
        CLI::App* sub = app.add_subcommand(experiments[i].first, experiments[i].second);
        attach_common(sub, &opts[i]);
        subs.push_back(sub);
    }

    CLI::App* verify = app.add_subcommand("verify", "run the acceptance checks");
    std::vector<int> only;
    verify->add_option("--only", only, "criterion ids to run (default: all)")
        ->check(CLI::Range(1, 8));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (verify->parsed()) {
            const auto results = tucksum::run_acceptance(only, &std::cout);
            bool all = true;
            for (const auto& r : results) {
                all = all && r.pass;
            }
            std::cout << "ACCEPTANCE: " << (all ? "PASS" : "FAIL") << '\n';
            return all ? 0 : 1;
        }
        for (std::size_t i = 0; i < subs.size(); ++i) {
            if (subs[i]->parsed()) {
                return run_experiment_command(experiments[i].first, subs[i], opts[i]);
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 2; // no subcommand matched; require_subcommand should prevent this
}

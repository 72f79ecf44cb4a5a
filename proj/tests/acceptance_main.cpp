#include <cstdlib>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tucksum/bench.hpp"

// Runs the verification suite and prints one verdict line per check.
// Optional arguments select a subset by id, e.g. `acceptance 2 8`.
int main(int argc, char** argv) {
    std::vector<int> which;
    for (int i = 1; i < argc; ++i) {
        try {
            which.push_back(std::stoi(argv[i]));
        } catch (const std::exception&) {
            std::cerr << "usage: " << argv[0] << " [criterion ids...]\n";
            return 2;
        }
    }
    std::vector<tucksum::CriterionResult> results;
    try {
        results = tucksum::run_acceptance(which, &std::cout);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    bool all = true;
    for (const auto& r : results) {
        all = all && r.pass;
    }
    std::cout << "ACCEPTANCE: " << (all ? "PASS" : "FAIL") << '\n';
    return all ? EXIT_SUCCESS : EXIT_FAILURE;
}

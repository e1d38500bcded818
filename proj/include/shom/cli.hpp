#pragma once

// Command-line front end: solve, benchmark, verify, reference and generate.

#include "shom/data_io.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace shom {

/// Runs one invocation of the `shom` executable; returns the exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Epochs of the first trace row with f - f_star <= target.
std::optional<double> epochs_to_gap(const RunTrace& trace, double f_star, double target);

/// Standalone matplotlib script that plots f - f* against epochs for every
/// trace_*.csv next to it, using reference.json for f*.
std::string plot_script();

}  // namespace shom

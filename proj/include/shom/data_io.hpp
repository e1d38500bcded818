#pragma once

// LIBSVM ingestion, trace/report CSV and JSON configuration files.

#include "shom/verify.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace shom {

/// Malformed input, positioned by 1-based line number (0 when the problem
/// is not tied to one line).
class ParseError : public Error {
public:
    ParseError(long line, const std::string& what);
    long line() const { return line_; }

private:
    long line_;
};

struct LibsvmRecord {
    double label = 0.0;
    /// (0-based feature, value), strictly increasing in the feature index.
    std::vector<std::pair<Index, double>> features;
};

/// Parses one line. Returns nullopt for blank and comment-only lines.
std::optional<LibsvmRecord> parse_libsvm_line(std::string_view line, long line_no,
                                              std::optional<Index> expected_dim = std::nullopt);

struct LibsvmOptions {
    std::optional<Index> expected_dim;
    std::optional<Index> limit;
    LossKind loss = LossKind::logistic;
};

struct LibsvmData {
    Dataset data;
    Vector labels;
    /// True when 0/1 labels were mapped to -1/+1.
    bool labels_normalized = false;
};

/// Logistic data is label-folded (a_i <- -y_i a_i); squared-loss data keeps
/// the rows and uses the labels as offsets.
LibsvmData parse_libsvm(std::istream& in, const LibsvmOptions& options = {});
LibsvmData load_libsvm(const std::filesystem::path& path, const LibsvmOptions& options = {});

// --- traces and reports -----------------------------------------------------

inline constexpr std::string_view kTraceHeader =
    "run_id,k,f,grad_norm,surrogate_value,phi,W,epochs,seconds,distinct_anchors,inner_converged,dist";

/// Doubles are written with 17 significant digits; NaN and -1 sentinels
/// become empty fields.
void write_trace(const RunTrace& trace, std::ostream& out, bool header = true);
void write_trace(const RunTrace& trace, const std::filesystem::path& path);
std::vector<TraceRow> read_trace(std::istream& in);

void write_report(const VerificationReport& report, std::ostream& out);
void write_report(const VerificationReport& report, const std::filesystem::path& path);

// --- configuration ----------------------------------------------------------

class ConfigError : public Error {
public:
    using Error::Error;
};

struct Grid {
    std::vector<int> p;
    std::vector<Index> tau;
    std::vector<std::uint64_t> seeds;
    std::vector<Method> methods;

    bool empty() const { return p.empty() || tau.empty() || seeds.empty() || methods.empty(); }
};

struct RunConfig {
    std::string dataset;
    LossKind loss = LossKind::logistic;
    std::optional<Index> limit;
    std::optional<Index> dim;
    std::string reference_path;
    SolverConfig solver;
    Grid grid;
};

/// Keys: dataset (required), loss, limit, dim, reference, method, p, q, tau,
/// lambda, mp, seed, outer_iters, epochs, target_gap, inner_tol,
/// inner_max_iters, inner_method, trace_every, run_id, record_time,
/// sgd_gamma0, sgd_k0, grid {p, tau, seeds, methods}. Unknown keys and
/// out-of-range values raise ConfigError naming the key.
RunConfig parse_config(std::string_view json_text);
RunConfig load_config(const std::filesystem::path& path);

/// Range checks that do not need the dataset size.
void validate_ranges(const SolverConfig& cfg);

void write_reference(const Reference& ref, std::ostream& out);
void write_reference(const Reference& ref, const std::filesystem::path& path);
Reference read_reference(std::istream& in);
Reference read_reference(const std::filesystem::path& path);

}  // namespace shom

#include "shom/data_io.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace shom {

using json = nlohmann::json;

ParseError::ParseError(long line, const std::string& what)
    : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line)
{
}

namespace {

bool is_space(char c)
{
    return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f';
}

std::optional<double> to_double(std::string_view s)
{
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

std::string printable(std::string_view s)
{
    std::string out;
    for (char c : s.substr(0, 40)) out += (c >= 32 && c < 127) ? c : '?';
    return out;
}

}  // namespace

std::optional<LibsvmRecord> parse_libsvm_line(std::string_view line, long line_no,
                                              std::optional<Index> expected_dim)
{
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);

    std::vector<std::string_view> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && is_space(line[i])) ++i;
        const std::size_t start = i;
        while (i < line.size() && !is_space(line[i])) ++i;
        if (i > start) tokens.push_back(line.substr(start, i - start));
    }
    if (tokens.empty()) return std::nullopt;

    LibsvmRecord rec;
    const auto label = to_double(tokens[0]);
    if (!label) throw ParseError(line_no, "malformed label '" + printable(tokens[0]) + "'");
    rec.label = *label;

    Index previous = 0;
    for (std::size_t t = 1; t < tokens.size(); ++t) {
        const std::string_view tok = tokens[t];
        const auto colon = tok.find(':');
        if (colon == std::string_view::npos || colon == 0)
            throw ParseError(line_no, "malformed token '" + printable(tok) + "'");
        const std::string_view idx_text = tok.substr(0, colon);
        long long idx = 0;
        const auto [ptr, ec] = std::from_chars(idx_text.data(), idx_text.data() + idx_text.size(), idx);
        if (ec != std::errc() || ptr != idx_text.data() + idx_text.size() || idx < 1)
            throw ParseError(line_no, "malformed feature index '" + printable(idx_text) + "'");
        const auto value = to_double(tok.substr(colon + 1));
        if (!value) throw ParseError(line_no, "malformed feature value in '" + printable(tok) + "'");
        if (idx <= previous) throw ParseError(line_no, "feature indices must be strictly increasing");
        if (expected_dim && idx > *expected_dim)
            throw ParseError(line_no, "feature index " + std::to_string(idx) + " exceeds dimension " +
                                          std::to_string(*expected_dim));
        previous = static_cast<Index>(idx);
        rec.features.emplace_back(static_cast<Index>(idx - 1), *value);
    }
    return rec;
}

LibsvmData parse_libsvm(std::istream& in, const LibsvmOptions& options)
{
    if (options.limit && *options.limit < 1) throw ParseError(0, "limit must be >= 1");
    std::vector<LibsvmRecord> records;
    std::vector<long> line_of;
    std::string line;
    long line_no = 0;
    while ((!options.limit || static_cast<Index>(records.size()) < *options.limit) && std::getline(in, line)) {
        ++line_no;
        if (auto rec = parse_libsvm_line(line, line_no, options.expected_dim)) {
            records.push_back(std::move(*rec));
            line_of.push_back(line_no);
        }
    }
    if (in.bad()) throw Error("read error after line " + std::to_string(line_no));
    if (records.empty()) throw ParseError(0, "no data rows");

    Index dim = options.expected_dim.value_or(0);
    if (!options.expected_dim)
        for (const auto& r : records)
            if (!r.features.empty()) dim = std::max(dim, r.features.back().first + 1);
    if (dim < 1) throw ParseError(0, "cannot infer the feature dimension (no features)");

    const Index n_rows = static_cast<Index>(records.size());
    LibsvmData out;
    out.labels.resize(n_rows);
    for (Index i = 0; i < n_rows; ++i) out.labels[i] = records[static_cast<std::size_t>(i)].label;

    if (options.loss == LossKind::logistic) {
        const bool zero_one = (out.labels.array() == 0.0 || out.labels.array() == 1.0).all() &&
                              (out.labels.array() == 0.0).any();
        if (zero_one) {
            out.labels = (out.labels.array() == 0.0).select(-1.0, out.labels);
            out.labels_normalized = true;
        }
        for (Index i = 0; i < n_rows; ++i)
            if (out.labels[i] != 1.0 && out.labels[i] != -1.0)
                throw ParseError(line_of[static_cast<std::size_t>(i)],
                                 "logistic labels must be -1/+1 or 0/1");
    }

    std::vector<Eigen::Triplet<double, Index>> triplets;
    for (Index i = 0; i < n_rows; ++i) {
        const double sign = options.loss == LossKind::logistic ? -out.labels[i] : 1.0;
        for (const auto& [j, v] : records[static_cast<std::size_t>(i)].features)
            triplets.emplace_back(i, j, sign * v);
    }
    SparseRows rows(n_rows, dim);
    rows.setFromTriplets(triplets.begin(), triplets.end());
    if (options.loss == LossKind::logistic)
        out.data = Dataset(std::move(rows), Vector(), LossKind::logistic, true);
    else
        out.data = Dataset(std::move(rows), out.labels, LossKind::squared, false);
    return out;
}

LibsvmData load_libsvm(const std::filesystem::path& path, const LibsvmOptions& options)
{
    std::ifstream in(path);
    if (!in) throw Error("cannot open dataset '" + path.string() + "'");
    try {
        return parse_libsvm(in, options);
    } catch (const ParseError& e) {
        throw ParseError(e.line(), path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// traces

namespace {

std::string fmt(double v)
{
    if (std::isnan(v)) return {};
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::vector<std::string> split_csv(const std::string& line)
{
    std::vector<std::string> out(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                out.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                out.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.emplace_back();
        } else if (c != '\r') {
            out.back() += c;
        }
    }
    return out;
}

template <typename Write>
void write_file(const std::filesystem::path& path, const char* what, Write&& write)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(std::string("cannot open ") + what + " '" + path.string() + "' for writing");
    write(out);
    out.flush();
    if (!out) throw Error(std::string("failed writing ") + what + " '" + path.string() + "'");
}

}  // namespace

void write_trace(const RunTrace& trace, std::ostream& out, bool header)
{
    if (header) out << kTraceHeader << '\n';
    for (const TraceRow& r : trace.rows) {
        out << csv_field(r.run_id) << ',' << r.k << ',' << fmt(r.f) << ',' << fmt(r.grad_norm) << ','
            << fmt(r.surrogate_value) << ',' << fmt(r.phi) << ',' << fmt(r.W) << ',' << fmt(r.epochs) << ','
            << fmt(r.seconds) << ',';
        if (r.distinct_anchors > 0) out << r.distinct_anchors;
        out << ',';
        if (r.inner_converged >= 0) out << r.inner_converged;
        out << ',' << fmt(r.dist) << '\n';
    }
    out.flush();
}

void write_trace(const RunTrace& trace, const std::filesystem::path& path)
{
    write_file(path, "trace", [&](std::ostream& out) { write_trace(trace, out); });
}

std::vector<TraceRow> read_trace(std::istream& in)
{
    std::string line;
    if (!std::getline(in, line)) return {};
    const auto header = split_csv(line);
    std::vector<TraceRow> rows;
    long line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_csv(line);
        if (fields.size() != header.size()) throw ParseError(line_no, "wrong number of trace columns");
        TraceRow r;
        for (std::size_t c = 0; c < header.size(); ++c) {
            const std::string& name = header[c];
            const std::string& v = fields[c];
            auto num = [&]() -> double {
                if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
                const auto d = to_double(v);
                if (!d) throw ParseError(line_no, "bad number in column " + name);
                return *d;
            };
            if (name == "run_id") r.run_id = v;
            else if (name == "k") r.k = static_cast<long>(num());
            else if (name == "f") r.f = num();
            else if (name == "grad_norm") r.grad_norm = num();
            else if (name == "surrogate_value") r.surrogate_value = num();
            else if (name == "phi") r.phi = num();
            else if (name == "W") r.W = num();
            else if (name == "epochs") r.epochs = num();
            else if (name == "seconds") r.seconds = num();
            else if (name == "distinct_anchors") r.distinct_anchors = v.empty() ? 0 : static_cast<long>(num());
            else if (name == "inner_converged") r.inner_converged = v.empty() ? -1 : static_cast<int>(num());
            else if (name == "dist") r.dist = num();
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

void write_report(const VerificationReport& report, std::ostream& out)
{
    out << "check,pass,value,threshold,detail\n";
    for (const ReportEntry& e : report.entries)
        out << csv_field(e.check) << ',' << (e.pass ? 1 : 0) << ',' << fmt(e.value) << ',' << fmt(e.threshold)
            << ',' << csv_field(e.detail) << '\n';
    out.flush();
}

void write_report(const VerificationReport& report, const std::filesystem::path& path)
{
    write_file(path, "report", [&](std::ostream& out) { write_report(report, out); });
}

// ---------------------------------------------------------------------------
// configuration

namespace {

template <typename T>
T get_number(const json& j, const std::string& key)
{
    if (!j.is_number()) throw ConfigError(key + ": expected a number");
    if constexpr (std::is_integral_v<T>) {
        if (!j.is_number_integer() && !j.is_number_unsigned()) throw ConfigError(key + ": expected an integer");
    }
    return j.get<T>();
}

std::string get_string(const json& j, const std::string& key)
{
    if (!j.is_string()) throw ConfigError(key + ": expected a string");
    return j.get<std::string>();
}

template <typename T>
std::vector<T> get_list(const json& j, const std::string& key)
{
    if (!j.is_array()) throw ConfigError(key + ": expected a list");
    std::vector<T> out;
    for (const auto& v : j) out.push_back(get_number<T>(v, key));
    return out;
}

}  // namespace

void validate_ranges(const SolverConfig& cfg)
{
    if (cfg.tau < 1) throw ConfigError("tau out of range");
    if (cfg.p < 1 || cfg.p > 3) throw ConfigError("p out of range");
    if (cfg.q < 2) throw ConfigError("q out of range");
    if (cfg.mp && !(*cfg.mp >= 0.0)) throw ConfigError("mp out of range");
    if (!(cfg.lambda >= 0.0) || !std::isfinite(cfg.lambda)) throw ConfigError("lambda out of range");
    if (cfg.outer_iters < 0) throw ConfigError("outer_iters out of range");
    if (!(cfg.epochs > 0.0)) throw ConfigError("epochs out of range");
    if (!(cfg.target_gap >= 0.0)) throw ConfigError("target_gap out of range");
    if (!(cfg.inner.grad_tol > 0.0)) throw ConfigError("inner_tol out of range");
    if (cfg.inner.max_iters < 1) throw ConfigError("inner_max_iters out of range");
    if (cfg.trace_every < 1) throw ConfigError("trace_every out of range");
    if (!(cfg.sgd_gamma0 > 0.0)) throw ConfigError("sgd_gamma0 out of range");
    if (!(cfg.sgd_k0 > 0.0)) throw ConfigError("sgd_k0 out of range");
}

RunConfig parse_config(std::string_view text)
{
    json root;
    try {
        root = json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config must be a JSON object");
    if (!root.contains("dataset")) throw ConfigError("dataset: missing required key");

    RunConfig rc;
    SolverConfig& s = rc.solver;
    for (const auto& [key, v] : root.items()) {
        try {
            if (key == "dataset") rc.dataset = get_string(v, key);
            else if (key == "loss") rc.loss = loss_from_string(get_string(v, key));
            else if (key == "limit") rc.limit = get_number<Index>(v, key);
            else if (key == "dim") rc.dim = get_number<Index>(v, key);
            else if (key == "reference") rc.reference_path = get_string(v, key);
            else if (key == "method") s.method = method_from_string(get_string(v, key));
            else if (key == "p") s.p = get_number<int>(v, key);
            else if (key == "q") s.q = get_number<int>(v, key);
            else if (key == "tau") s.tau = get_number<Index>(v, key);
            else if (key == "lambda") s.lambda = get_number<double>(v, key);
            else if (key == "mp") s.mp = get_number<double>(v, key);
            else if (key == "seed") s.seed = get_number<std::uint64_t>(v, key);
            else if (key == "outer_iters") s.outer_iters = get_number<int>(v, key);
            else if (key == "epochs") s.epochs = get_number<double>(v, key);
            else if (key == "target_gap") s.target_gap = get_number<double>(v, key);
            else if (key == "inner_tol") s.inner.grad_tol = get_number<double>(v, key);
            else if (key == "inner_max_iters") s.inner.max_iters = get_number<int>(v, key);
            else if (key == "inner_method") s.inner.method = inner_method_from_string(get_string(v, key));
            else if (key == "trace_every") s.trace_every = get_number<int>(v, key);
            else if (key == "run_id") s.run_id = get_string(v, key);
            else if (key == "record_time") {
                if (!v.is_boolean()) throw ConfigError(key + ": expected true or false");
                s.record_time = v.get<bool>();
            }
            else if (key == "sgd_gamma0") s.sgd_gamma0 = get_number<double>(v, key);
            else if (key == "sgd_k0") s.sgd_k0 = get_number<double>(v, key);
            else if (key == "grid") {
                if (!v.is_object()) throw ConfigError("grid: expected an object");
                for (const auto& [gk, gv] : v.items()) {
                    const std::string name = "grid." + gk;
                    if (gk == "p") rc.grid.p = get_list<int>(gv, name);
                    else if (gk == "tau") rc.grid.tau = get_list<Index>(gv, name);
                    else if (gk == "seeds") rc.grid.seeds = get_list<std::uint64_t>(gv, name);
                    else if (gk == "methods") {
                        if (!gv.is_array()) throw ConfigError(name + ": expected a list");
                        for (const auto& m : gv) rc.grid.methods.push_back(method_from_string(get_string(m, name)));
                    } else {
                        throw ConfigError("unknown key '" + name + "'");
                    }
                }
            }
            else throw ConfigError("unknown key '" + key + "'");
        } catch (const ConfigError&) {
            throw;
        } catch (const json::exception& e) {
            throw ConfigError(key + ": " + e.what());
        } catch (const DomainError& e) {
            throw ConfigError(key + ": " + e.what());
        }
    }
    if (rc.limit && *rc.limit < 1) throw ConfigError("limit out of range");
    if (rc.dim && *rc.dim < 1) throw ConfigError("dim out of range");
    validate_ranges(s);
    return rc;
}

RunConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

void write_reference(const Reference& ref, std::ostream& out)
{
    json j;
    j["f_star"] = ref.f_star;
    j["grad_norm"] = ref.grad_norm;
    j["x_star"] = std::vector<double>(ref.x_star.data(), ref.x_star.data() + ref.x_star.size());
    out << j.dump(1) << '\n';
    out.flush();
}

void write_reference(const Reference& ref, const std::filesystem::path& path)
{
    write_file(path, "reference", [&](std::ostream& out) { write_reference(ref, out); });
}

Reference read_reference(std::istream& in)
{
    json j;
    try {
        j = json::parse(in);
        Reference ref;
        ref.f_star = j.at("f_star").get<double>();
        ref.grad_norm = j.value("grad_norm", 0.0);
        const auto x = j.at("x_star").get<std::vector<double>>();
        ref.x_star = Eigen::Map<const Vector>(x.data(), static_cast<Index>(x.size()));
        return ref;
    } catch (const json::exception& e) {
        throw ParseError(0, std::string("bad reference file: ") + e.what());
    }
}

Reference read_reference(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error("cannot open reference '" + path.string() + "'");
    return read_reference(in);
}

}  // namespace shom

#pragma once

// File formats: edge lists and adjacency CSVs for graphs, CSV datasets,
// SCM JSON and the versioned metric report JSON.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "contsid/contsid.hpp"
#include "contsid/data.hpp"
#include "contsid/errors.hpp"
#include "contsid/graph.hpp"
#include "contsid/synth.hpp"

namespace contsid::io {

inline constexpr std::string_view kReportSchema = "contsid-report/v1";

inline std::string read_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) { throw IoError("cannot open " + path.string()); }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

inline void write_file(const std::filesystem::path &path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) { throw IoError("cannot write " + path.string()); }
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) { throw IoError("failed writing " + path.string()); }
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) { return {}; }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split_lines(std::string_view text) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto end = text.find('\n', start);
        if (end == std::string_view::npos) {
            lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, end - start));
        start = end + 1;
    }
    return lines;
}

struct Token {
    std::string_view text;
    std::size_t column;  // 1-based
};

inline std::vector<Token> tokenize(std::string_view line, char delimiter) {
    std::vector<Token> tokens;
    std::size_t pos = 0;
    while (pos <= line.size()) {
        std::size_t end = delimiter == ' ' ? line.find_first_of(" \t", pos) : line.find(delimiter, pos);
        if (end == std::string_view::npos) { end = line.size(); }
        const auto raw = line.substr(pos, end - pos);
        const auto trimmed = trim(raw);
        if (!(delimiter == ' ' && trimmed.empty())) {
            const auto offset = trimmed.empty() ? 0 : raw.find(trimmed.front());
            tokens.push_back({trimmed, pos + offset + 1});
        }
        if (end == line.size()) { break; }
        pos = end + 1;
    }
    return tokens;
}

template<typename T>
T parse_number(const Token &token, std::size_t line, std::string_view what) {
    T value{};
    const char *first = token.text.data();
    const char *last = first + token.text.size();
    if (!token.text.empty() && *first == '+') { ++first; }
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (token.text.empty() || ec != std::errc{} || ptr != last) {
        throw ParseError("expected " + std::string(what) + ", got '" + std::string(token.text) + "'", line,
                         token.column);
    }
    return value;
}

inline bool is_comment_or_blank(std::string_view line) {
    const auto t = trim(line);
    return t.empty() || t.front() == '#';
}

inline std::string format_double(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return {buf, ptr};
}

}  // namespace detail

/// Edge list: first content line is D, then one "i j" pair per line
/// (0-indexed, i -> j). Lines starting with '#' are comments.
inline Dag parse_edge_list(std::string_view text) {
    std::size_t num_nodes = 0;
    bool have_header = false;
    std::vector<Edge> edges;
    const auto lines = detail::split_lines(text);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
        if (detail::is_comment_or_blank(lines[ln])) { continue; }
        const auto tokens = detail::tokenize(lines[ln], ' ');
        if (!have_header) {
            if (tokens.size() != 1) { throw ParseError("first line must hold the node count", ln + 1, 1); }
            num_nodes = detail::parse_number<std::size_t>(tokens[0], ln + 1, "a node count");
            if (num_nodes == 0) { throw ParseError("node count must be positive", ln + 1, tokens[0].column); }
            have_header = true;
            continue;
        }
        if (tokens.size() != 2) {
            throw ParseError("expected 'from to'", ln + 1, tokens.empty() ? 1 : tokens.front().column);
        }
        const auto from = detail::parse_number<std::size_t>(tokens[0], ln + 1, "a node index");
        const auto to = detail::parse_number<std::size_t>(tokens[1], ln + 1, "a node index");
        for (const auto &[value, token] : {std::pair{from, tokens[0]}, std::pair{to, tokens[1]}}) {
            if (value >= num_nodes) { throw ParseError("node index out of range", ln + 1, token.column); }
        }
        edges.emplace_back(from, to);
    }
    if (!have_header) { throw ParseError("empty edge list"); }
    return Dag(num_nodes, edges);
}

/// D x D 0/1 matrix, entry (r, c) = 1 meaning r -> c.
inline Dag parse_adjacency_csv(std::string_view text) {
    std::vector<std::vector<int>> rows;
    const auto lines = detail::split_lines(text);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
        if (detail::is_comment_or_blank(lines[ln])) { continue; }
        std::vector<int> row;
        for (const auto &token : detail::tokenize(lines[ln], ',')) {
            const int v = detail::parse_number<int>(token, ln + 1, "0 or 1");
            if (v != 0 && v != 1) { throw ParseError("adjacency entries must be 0 or 1", ln + 1, token.column); }
            row.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) { throw ParseError("empty adjacency matrix"); }
    std::vector<Edge> edges;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows.size()) {
            throw ParseError("adjacency matrix must be square (" + std::to_string(rows.size()) + " columns)", r + 1);
        }
        for (std::size_t c = 0; c < rows.size(); ++c) {
            if (rows[r][c] == 1) { edges.emplace_back(r, c); }
        }
    }
    return Dag(rows.size(), edges);
}

/// Reads `.edges` or `.csv` by extension.
inline Dag read_graph(const std::filesystem::path &path) {
    const auto ext = path.extension().string();
    const std::string text = read_file(path);
    try {
        if (ext == ".edges") { return parse_edge_list(text); }
        if (ext == ".csv") { return parse_adjacency_csv(text); }
    } catch (const ParseError &e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    throw ParseError(path.string() + ": unknown graph extension '" + ext + "' (expected .edges or .csv)");
}

inline std::string format_edge_list(const Dag &g) {
    std::string out = std::to_string(g.num_nodes()) + "\n";
    for (const auto &[from, to] : g.edges()) { out += std::to_string(from) + " " + std::to_string(to) + "\n"; }
    return out;
}

inline std::string format_adjacency_csv(const Dag &g) {
    std::string out;
    for (Node r = 0; r < g.num_nodes(); ++r) {
        for (Node c = 0; c < g.num_nodes(); ++c) {
            if (c > 0) { out += ','; }
            out += g.has_edge(r, c) ? '1' : '0';
        }
        out += '\n';
    }
    return out;
}

/// CSV dataset: optional header row, then N rows of D reals.
inline Dataset parse_dataset_csv(std::string_view text) {
    std::vector<std::vector<double>> rows;
    std::size_t width = 0;
    bool first_content = true;
    const auto lines = detail::split_lines(text);
    for (std::size_t ln = 0; ln < lines.size(); ++ln) {
        if (detail::trim(lines[ln]).empty()) { continue; }
        const auto tokens = detail::tokenize(lines[ln], ',');
        if (first_content) {
            first_content = false;
            width = tokens.size();
            double probe = 0.0;
            const auto &t = tokens.front().text;
            const auto [ptr, ec] = std::from_chars(t.data() + (!t.empty() && t.front() == '+'), t.data() + t.size(), probe);
            if (ec != std::errc{} || ptr != t.data() + t.size()) { continue; }  // header row
        }
        if (tokens.size() != width) {
            throw ParseError("expected " + std::to_string(width) + " fields, got " + std::to_string(tokens.size()),
                             ln + 1);
        }
        std::vector<double> row;
        row.reserve(width);
        for (const auto &token : tokens) {
            const double v = detail::parse_number<double>(token, ln + 1, "a real number");
            if (!std::isfinite(v)) { throw ParseError("non-finite value", ln + 1, token.column); }
            row.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty() || width == 0) { throw ParseError("dataset has no data rows"); }
    Eigen::MatrixXd values(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < width; ++c) {
            values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
    }
    return Dataset(std::move(values));
}

inline Dataset read_dataset(const std::filesystem::path &path) {
    try {
        return parse_dataset_csv(read_file(path));
    } catch (const ParseError &e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

/// Header x0..x{D-1}, shortest round-trip decimal representation.
inline std::string format_dataset_csv(const Dataset &data) {
    std::string out;
    for (std::size_t c = 0; c < data.num_columns(); ++c) {
        if (c > 0) { out += ','; }
        out += "x" + std::to_string(c);
    }
    out += '\n';
    const auto &v = data.values();
    for (Eigen::Index r = 0; r < v.rows(); ++r) {
        for (Eigen::Index c = 0; c < v.cols(); ++c) {
            if (c > 0) { out += ','; }
            out += detail::format_double(v(r, c));
        }
        out += '\n';
    }
    return out;
}

/// Noise from a short spec: "gauss:<std>", "gauss:<mean>,<std>", "exp:<scale>",
/// "shifted-exp:<scale>".
inline NoiseSpec parse_noise_spec(std::string_view spec) {
    const auto colon = spec.find(':');
    if (colon == std::string_view::npos) { throw ParseError("noise spec must look like family:params"); }
    const auto family = spec.substr(0, colon);
    const auto params = detail::tokenize(spec.substr(colon + 1), ',');
    std::vector<double> values;
    for (const auto &p : params) { values.push_back(detail::parse_number<double>(p, 0, "a noise parameter")); }
    NoiseSpec out;
    if ((family == "gauss" || family == "gaussian") && values.size() == 1) {
        out = NoiseSpec::gaussian(0.0, values[0]);
    } else if ((family == "gauss" || family == "gaussian") && values.size() == 2) {
        out = NoiseSpec::gaussian(values[0], values[1]);
    } else if ((family == "exp" || family == "exponential") && values.size() == 1) {
        out = NoiseSpec::exponential(values[0]);
    } else if ((family == "shifted-exp" || family == "shifted_exponential") && values.size() == 1) {
        out = NoiseSpec::shifted_exponential(values[0]);
    } else {
        throw ParseError("unknown noise spec '" + std::string(spec) + "'");
    }
    try {
        out.validate();
    } catch (const DomainError &e) {
        throw ParseError(std::string("invalid noise spec: ") + e.what());
    }
    return out;
}

inline nlohmann::json noise_to_json(Node node, const NoiseSpec &spec) {
    nlohmann::json params;
    if (spec.family == NoiseSpec::Family::gaussian) {
        params = {{"mean", spec.mean}, {"std", spec.scale}};
    } else {
        params = {{"scale", spec.scale}};
    }
    return {{"node", node}, {"family", to_string(spec.family)}, {"params", params}};
}

inline nlohmann::json scm_to_json(const LinearScm &scm) {
    nlohmann::json edges = nlohmann::json::array();
    for (const auto &[e, w] : scm.coefficients()) { edges.push_back({{"from", e.first}, {"to", e.second}, {"weight", w}}); }
    nlohmann::json noise = nlohmann::json::array();
    for (Node d = 0; d < scm.num_nodes(); ++d) { noise.push_back(noise_to_json(d, scm.noise()[d])); }
    return {{"nodes", scm.num_nodes()}, {"edges", edges}, {"noise", noise}};
}

inline LinearScm scm_from_json(const nlohmann::json &j) {
    try {
        const auto nodes = j.at("nodes").get<std::size_t>();
        std::vector<Edge> edges;
        std::map<Edge, double> coefficients;
        for (const auto &e : j.at("edges")) {
            const Edge edge{e.at("from").get<std::size_t>(), e.at("to").get<std::size_t>()};
            edges.push_back(edge);
            coefficients[edge] = e.at("weight").get<double>();
        }
        std::vector<NoiseSpec> noise(nodes);
        std::vector<bool> seen(nodes, false);
        for (const auto &n : j.at("noise")) {
            const auto node = n.at("node").get<std::size_t>();
            if (node >= nodes) { throw ParseError("noise entry for unknown node " + std::to_string(node)); }
            const auto family = n.at("family").get<std::string>();
            const auto &params = n.at("params");
            if (family == "gaussian") {
                noise[node] = NoiseSpec::gaussian(params.at("mean").get<double>(), params.at("std").get<double>());
            } else if (family == "exponential") {
                noise[node] = NoiseSpec::exponential(params.at("scale").get<double>());
            } else if (family == "shifted_exponential") {
                noise[node] = NoiseSpec::shifted_exponential(params.at("scale").get<double>());
            } else {
                throw ParseError("unknown noise family '" + family + "'");
            }
            seen[node] = true;
        }
        if (std::ranges::find(seen, false) != seen.end()) { throw ParseError("every node needs a noise entry"); }
        return {Dag(nodes, edges), std::move(coefficients), std::move(noise)};
    } catch (const nlohmann::json::exception &e) {
        throw ParseError(std::string("malformed SCM JSON: ") + e.what());
    }
}

/// {"<node>": [values...], ...}
inline std::map<Node, std::vector<double>> parse_intervention_values(std::string_view text) {
    std::map<Node, std::vector<double>> out;
    try {
        const auto j = nlohmann::json::parse(text);
        for (const auto &[key, values] : j.items()) {
            const detail::Token token{key, 0};
            const auto node = detail::parse_number<std::size_t>(token, 0, "a node index");
            out[node] = values.get<std::vector<double>>();
        }
    } catch (const nlohmann::json::exception &e) {
        throw ParseError(std::string("malformed intervention values: ") + e.what());
    }
    return out;
}

inline nlohmann::json config_to_json(const MetricConfig &cfg) {
    nlohmann::json interventions = "observed";
    if (!cfg.intervention_values.empty()) {
        interventions = nlohmann::json::object();
        for (const auto &[node, values] : cfg.intervention_values) { interventions[std::to_string(node)] = values; }
    }
    return {{"kernel", "gaussian_rbf"},
            {"bandwidth_rule", cfg.kernel.bandwidth_rule == BandwidthRule::median_heuristic ? "median" : "fixed"},
            {"bandwidths", cfg.kernel.bandwidths},
            {"lambda", cfg.kernel.regularization},
            {"normalize", cfg.normalize},
            {"interventions", interventions},
            {"holdout_rows", cfg.marginal_samples ? cfg.marginal_samples->num_samples() : 0}};
}

inline nlohmann::json report_to_json(const MetricReport &report, const nlohmann::json &manifest = nullptr) {
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto &p : report.pairs) {
        pairs.push_back({{"i", p.i}, {"j", p.j}, {"case", to_string(p.pair_case)}, {"distance", p.distance}});
    }
    nlohmann::json out = {{"schema", kReportSchema},
                          {"num_nodes", report.num_nodes},
                          {"cont_sid", report.cont_sid},
                          {"shd", report.shd},
                          {"sid", report.sid},
                          {"pairs", pairs},
                          {"config", config_to_json(report.config)},
                          {"data_sha256", report.data_sha256}};
    if (!manifest.is_null()) { out["manifest"] = manifest; }
    return out;
}

}  // namespace contsid::io

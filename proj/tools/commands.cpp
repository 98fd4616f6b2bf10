#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <numeric>
#include <ostream>
#include <vector>

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <openssl/evp.h>

#include "contsid/io.hpp"
#include "contsid/oracle.hpp"
#include "contsid/synth.hpp"

namespace contsid::cli {

namespace {

template<typename Fn>
int guarded(std::ostream &err, Fn &&fn) {
    try {
        return fn();
    } catch (const IoError &e) {
        fmt::print(err, "error: {}\n", e.what());
        return kIoFailure;
    } catch (const FactorizationError &e) {
        fmt::print(err, "numeric failure: {}\n", e.what());
        return kNumericFailure;
    } catch (const Error &e) {
        fmt::print(err, "invalid input: {}\n", e.what());
        return kValidationFailure;
    } catch (const std::filesystem::filesystem_error &e) {
        fmt::print(err, "error: {}\n", e.what());
        return kIoFailure;
    } catch (const std::exception &e) {
        fmt::print(err, "error: {}\n", e.what());
        return kNumericFailure;
    }
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) { return std::nan(""); }
    std::ranges::sort(values);
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

nlohmann::json base_manifest(const std::string &command) {
    return {{"command", command}, {"tool_version", kToolVersion}};
}

/// Splits rows into (fit, marginal) by a seeded shuffle.
std::pair<Dataset, Dataset> holdout_split(const Dataset &data, double fraction, std::uint64_t seed) {
    const std::size_t n = data.num_samples();
    const auto held = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n)));
    if (held < 1 || n - held < 2) { throw DomainError("hold-out fraction leaves too few rows on one side"); }
    std::vector<std::size_t> order(n);
    for (std::size_t r = 0; r < n; ++r) { order[r] = r; }
    Rng rng(seed, RandomStream::kSplitStream);
    for (std::size_t k = n - 1; k > 0; --k) { std::swap(order[k], order[rng.below(k + 1)]); }
    std::vector<std::size_t> marginal(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(held));
    std::vector<std::size_t> fit(order.begin() + static_cast<std::ptrdiff_t>(held), order.end());
    std::ranges::sort(marginal);
    std::ranges::sort(fit);
    return {data.select_rows(fit), data.select_rows(marginal)};
}

void print_report(std::ostream &out, const MetricReport &report) {
    fmt::print(out, "SHD      {}\nSID      {}\ncontSID  {:.6f}\n\n", report.shd, report.sid, report.cont_sid);
    fmt::print(out, "{:>4} {:>4}  {:<34} {:>10}\n", "i", "j", "case", "distance");
    for (const auto &p : report.pairs) {
        fmt::print(out, "{:>4} {:>4}  {:<34} {:>10.6f}\n", p.i, p.j, to_string(p.pair_case), p.distance);
    }
}

}  // namespace

std::string sha256_file(const std::filesystem::path &path) {
    const std::string bytes = io::read_file(path);
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
        throw IoError("SHA-256 failed for " + path.string());
    }
    std::string hex;
    for (unsigned int k = 0; k < length; ++k) { hex += fmt::format("{:02x}", digest[k]); }
    return hex;
}

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

KernelConfig kernel_config_from_flags(const Dataset &data, double lambda, const std::string &bandwidth) {
    if (bandwidth == "median") { return make_kernel_config(data, lambda, BandwidthRule::median_heuristic); }
    if (bandwidth.starts_with("fixed:")) {
        const io::detail::Token token{std::string_view(bandwidth).substr(6), 0};
        const double gamma = io::detail::parse_number<double>(token, 0, "a bandwidth");
        if (!(gamma > 0.0) || !std::isfinite(gamma)) { throw DomainError("fixed bandwidth must be positive"); }
        return make_kernel_config(data, lambda, BandwidthRule::fixed, gamma);
    }
    throw ParseError("--bandwidth must be 'median' or 'fixed:<gamma>'");
}

nlohmann::json compute_report(const ComputeOptions &options) {
    const Dag g_true = io::read_graph(options.true_graph);
    const Dag g_learnt = io::read_graph(options.learnt_graph);
    const Dataset all_rows = io::read_dataset(options.data);
    if (g_true.num_nodes() != g_learnt.num_nodes()) {
        throw SizeMismatchError(fmt::format("{} has {} nodes but {} has {}", options.true_graph.string(),
                                            g_true.num_nodes(), options.learnt_graph.string(), g_learnt.num_nodes()));
    }
    if (all_rows.num_columns() != g_true.num_nodes()) {
        throw SizeMismatchError(fmt::format("{} has {} columns but {} has {} nodes", options.data.string(),
                                            all_rows.num_columns(), options.true_graph.string(), g_true.num_nodes()));
    }

    MetricConfig cfg;
    cfg.kernel = kernel_config_from_flags(all_rows, options.lambda, options.bandwidth);
    cfg.normalize = options.normalize;
    cfg.threads = options.threads;
    if (options.interventions.starts_with("file:")) {
        cfg.intervention_values = io::parse_intervention_values(io::read_file(options.interventions.substr(5)));
    } else if (options.interventions != "observed") {
        throw ParseError("--interventions must be 'observed' or 'file:<path>'");
    }

    Dataset fit_rows = all_rows;
    if (options.holdout > 0.0) {
        auto [fit, marginal] = holdout_split(all_rows, options.holdout, options.seed);
        fit_rows = std::move(fit);
        cfg.marginal_samples = std::move(marginal);
    }

    MetricReport report = cont_sid(g_true, g_learnt, fit_rows, cfg);
    report.data_sha256 = sha256_file(options.data);

    nlohmann::json manifest = base_manifest("compute");
    manifest["inputs"] = {{"true_graph", options.true_graph.string()},
                          {"learnt_graph", options.learnt_graph.string()},
                          {"data", options.data.string()}};
    manifest["seeds"] = {{"holdout", options.seed}};
    manifest["kernel"] = io::config_to_json(cfg);
    manifest["data_sha256"] = report.data_sha256;
    manifest["timestamp"] = utc_timestamp();
    return io::report_to_json(report, manifest);
}

int cmd_compute(const ComputeOptions &options, std::ostream &out, std::ostream &err) {
    return guarded(err, [&] {
        const nlohmann::json report = compute_report(options);
        if (options.json_out) { io::write_file(*options.json_out, report.dump(2) + "\n"); }
        if (!options.quiet) {
            MetricReport view;
            view.shd = report.at("shd").get<std::size_t>();
            view.sid = report.at("sid").get<std::size_t>();
            view.cont_sid = report.at("cont_sid").get<double>();
            for (const auto &p : report.at("pairs")) {
                view.pairs.push_back({p.at("i").get<Node>(), p.at("j").get<Node>(),
                                      *pair_case_from_string(p.at("case").get<std::string>()),
                                      p.at("distance").get<double>()});
            }
            print_report(out, view);
        }
        return static_cast<int>(kOk);
    });
}

int cmd_simulate(const SimulateOptions &options, std::ostream &out, std::ostream &err) {
    return guarded(err, [&] {
        if (options.p < 2) { throw DomainError("--p must be at least 2"); }
        if (options.n < 2) { throw DomainError("--n must be at least 2"); }
        const NoiseSpec noise = io::parse_noise_spec(options.noise);
        const Dag dag = erdos_renyi_dag(options.p, options.edge_prob, options.seed);
        const LinearScm scm = random_linear_scm(dag, options.coeff_low, options.coeff_high, noise, options.seed);
        const Dataset data = sample_observational(scm, options.n, options.seed);

        std::error_code ec;
        std::filesystem::create_directories(options.out_dir, ec);
        if (ec) { throw IoError("cannot create " + options.out_dir.string() + ": " + ec.message()); }
        const auto dir = options.out_dir;
        io::write_file(dir / "true.edges", io::format_edge_list(dag));
        io::write_file(dir / "scm.json", io::scm_to_json(scm).dump(2) + "\n");
        io::write_file(dir / "data.csv", io::format_dataset_csv(data));

        // No wall-clock field: the outputs are a pure function of the flags.
        nlohmann::json manifest = base_manifest("simulate");
        manifest["parameters"] = {{"p", options.p},          {"edge_prob", options.edge_prob},
                                  {"n", options.n},          {"noise", options.noise},
                                  {"coeff_low", options.coeff_low}, {"coeff_high", options.coeff_high}};
        manifest["seeds"] = {{"graph", options.seed}, {"coefficients", options.seed}, {"noise", options.seed}};
        manifest["outputs"] = {"true.edges", "scm.json", "data.csv"};
        manifest["data_sha256"] = sha256_file(dir / "data.csv");
        io::write_file(dir / "manifest.json", manifest.dump(2) + "\n");

        fmt::print(out, "wrote {} ({} nodes, {} edges, {} samples)\n", dir.string(), dag.num_nodes(),
                   dag.num_edges(), options.n);
        return static_cast<int>(kOk);
    });
}

namespace {

struct Check {
    std::string name;
    bool passed;
    std::string detail;
};

int finish_bench(const BenchOptions &options, std::ostream &out, const std::vector<Check> &checks,
                 nlohmann::json summary) {
    bool all = true;
    nlohmann::json list = nlohmann::json::array();
    for (const auto &c : checks) {
        fmt::print(out, "[{}] {}: {}\n", c.passed ? "PASS" : "FAIL", c.name, c.detail);
        list.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
        all = all && c.passed;
    }
    if (options.json_out) {
        nlohmann::json manifest = base_manifest("bench " + options.suite);
        manifest["timestamp"] = utc_timestamp();
        summary["checks"] = list;
        summary["manifest"] = manifest;
        io::write_file(*options.json_out, summary.dump(2) + "\n");
    }
    return all ? kOk : kNumericFailure;
}

int bench_table1(const BenchOptions &options, std::ostream &out) {
    const IntroExample ex = intro_example();
    std::vector<double> d12;
    std::vector<double> d13;
    std::size_t wins = 0;
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t s = 0; s < options.seeds; ++s) {
        const Dataset data = sample_observational(ex.scm, options.n, s);
        MetricConfig cfg;
        cfg.kernel = make_kernel_config(data, options.lambda);
        cfg.threads = options.threads;
        d12.push_back(cont_sid(ex.g1, ex.g2, data, cfg).cont_sid);
        d13.push_back(cont_sid(ex.g1, ex.g3, data, cfg).cont_sid);
        if (d12.back() < d13.back()) { ++wins; }
    }
    const double elapsed = seconds_since(start);
    const double rate = options.seeds == 0 ? 0.0 : static_cast<double>(wins) / static_cast<double>(options.seeds);
    fmt::print(out, "{:<18} {:>8} {:>8} {:>8}\n", "metric", "q05", "median", "q95");
    fmt::print(out, "{:<18} {:>8.4f} {:>8.4f} {:>8.4f}\n", "contSID(G1,G2)", quantile(d12, 0.05), quantile(d12, 0.5),
               quantile(d12, 0.95));
    fmt::print(out, "{:<18} {:>8.4f} {:>8.4f} {:>8.4f}\n", "contSID(G1,G3)", quantile(d13, 0.05), quantile(d13, 0.5),
               quantile(d13, 0.95));
    fmt::print(out, "SHD = 1 / 1, SID = {} / {}\n", sid(ex.g1, ex.g2), sid(ex.g1, ex.g3));
    fmt::print(out, "seeds {}, n {}, {:.2f} s\n", options.seeds, options.n, elapsed);
    std::vector<Check> checks{{"ordering win-rate", rate >= 0.95, fmt::format("{}/{} = {:.3f} (need >= 0.95)", wins,
                                                                               options.seeds, rate)}};
    nlohmann::json summary = {{"suite", "table1"},
                              {"seeds", options.seeds},
                              {"n", options.n},
                              {"win_rate", rate},
                              {"median_g1_g2", quantile(d12, 0.5)},
                              {"median_g1_g3", quantile(d13, 0.5)}};
    return finish_bench(options, out, checks, summary);
}

int bench_oracle(const BenchOptions &options, std::ostream &out) {
    std::vector<Check> checks;

    // Closed-form MMD against the V-statistic on large samples.
    {
        const GaussianLaw p{0.0, 1.0};
        const GaussianLaw q{3.0, 1.0};
        const LinearScm a(build_dag(1, {}), {}, {NoiseSpec::gaussian(0.0, 1.0)});
        const LinearScm b(build_dag(1, {}), {}, {NoiseSpec::gaussian(3.0, 1.0)});
        const Dataset xa = sample_observational(a, options.mmd_samples, 11);
        const Dataset xb = sample_observational(b, options.mmd_samples, 12);
        const double closed = gaussian_rbf_mmd(p, q, 1.0);
        const double empirical = empirical_mmd(xa.column_span(0), xb.column_span(0), 1.0);
        const double rel = std::abs(empirical - closed) / closed;
        checks.push_back({"closed-form vs empirical MMD", rel < 0.02,
                          fmt::format("{:.5f} vs {:.5f}, rel {:.4f} at {} samples", closed, empirical, rel,
                                      options.mmd_samples)});
        checks.push_back({"closed-form MMD identity", gaussian_rbf_mmd(p, p, 1.0) < 1e-12, "MMD(p, p) = 0"});
    }

    // Analytic interventional law against interventional samples.
    {
        const IntroExample ex = intro_example();
        const GaussianLaw law = interventional_gaussian(ex.scm, 0, 1.0, 2);
        const std::size_t n = 10000;
        const Dataset s = sample_interventional(ex.scm, 0, 1.0, n, 21);
        const auto col = s.column(2);
        const double mean = col.mean();
        const double var = (col.array() - mean).square().sum() / static_cast<double>(n - 1);
        const double mean_sigma = std::sqrt(law.variance / static_cast<double>(n));
        const double var_sigma = law.variance * std::sqrt(2.0 / static_cast<double>(n - 1));
        const bool ok = std::abs(mean - law.mean) < 4 * mean_sigma && std::abs(var - law.variance) < 4 * var_sigma;
        checks.push_back({"interventional Gaussian moments", ok,
                          fmt::format("do(V1=1): mean {:.3f} (exact {:.1f}), var {:.3f} (exact {:.1f})", mean,
                                      law.mean, var, law.variance)});
    }

    // Case-2 pair distance against the closed-form normalized average MMD.
    {
        const IntroExample ex = intro_example();
        const std::size_t seeds = std::min<std::size_t>(options.seeds, 20);
        std::vector<double> rel;
        for (std::size_t s = 0; s < seeds; ++s) {
            const Dataset data = sample_observational(ex.scm, 200, 1000 + s);
            MetricConfig cfg;
            cfg.kernel = make_kernel_config(data, options.lambda);
            const double est = one_sided_distance(0, 2, ex.g1, data, cfg);
            const double gamma = cfg.kernel.bandwidths[2];
            const ScmMoments m = scm_moments(ex.scm);
            const GaussianLaw marginal{m.mean[2], m.covariance(2, 2)};
            double avg = 0.0;
            for (double x : data.column_span(0)) {
                avg += gaussian_rbf_mmd(interventional_gaussian(ex.scm, 0, x, 2), marginal, gamma);
            }
            avg /= static_cast<double>(data.num_samples());
            const double exact = avg / gaussian_embedding_norm(marginal, gamma);
            rel.push_back(std::abs(est - exact) / exact);
        }
        const double median = quantile(rel, 0.5);
        checks.push_back({"case-2 distance vs closed form", median < 0.25,
                          fmt::format("median relative error {:.4f} over {} seeds (N = 200)", median, seeds)});
    }
    return finish_bench(options, out, checks, {{"suite", "oracle"}});
}

int bench_scaling(const BenchOptions &options, std::ostream &out) {
    std::vector<std::size_t> sizes;
    for (std::size_t n : {options.n / 2, options.n, options.n * 2, options.n * 4, options.n * 8}) {
        if (n >= 4) { sizes.push_back(n); }
    }
    const Dag dag = erdos_renyi_dag(options.p, 0.25, 1);
    const LinearScm scm = random_linear_scm(dag, -10.0, 10.0, NoiseSpec::exponential(1.0), 1);
    const Dag empty = build_dag(options.p, {});
    fmt::print(out, "p = {}, {} edges\n{:>6} {:>12} {:>12}\n", options.p, dag.num_edges(), "N", "fit [s]", "total [s]");
    std::vector<double> log_n;
    std::vector<double> log_t;
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t n : sizes) {
        const Dataset data = sample_observational(scm, n, 2);
        MetricConfig cfg;
        cfg.kernel = make_kernel_config(data, options.lambda);
        cfg.threads = options.threads;

        auto start = std::chrono::steady_clock::now();
        DistanceContext ctx(data, cfg);
        for (Node i = 0; i < options.p; ++i) { ctx.ime(i, dag.parents(i)); }
        const double fit = seconds_since(start);

        start = std::chrono::steady_clock::now();
        (void)cont_sid(dag, empty, data, cfg);
        const double total = seconds_since(start);
        fmt::print(out, "{:>6} {:>12.5f} {:>12.5f}\n", n, fit, total);
        rows.push_back({{"n", n}, {"fit_seconds", fit}, {"total_seconds", total}});
        log_n.push_back(std::log(static_cast<double>(n)));
        log_t.push_back(std::log(std::max(fit, 1e-9)));
    }
    double exponent = std::nan("");
    if (log_n.size() >= 2) {
        const double mx = std::accumulate(log_n.begin(), log_n.end(), 0.0) / static_cast<double>(log_n.size());
        const double my = std::accumulate(log_t.begin(), log_t.end(), 0.0) / static_cast<double>(log_t.size());
        double sxy = 0.0;
        double sxx = 0.0;
        for (std::size_t k = 0; k < log_n.size(); ++k) {
            sxy += (log_n[k] - mx) * (log_t[k] - my);
            sxx += (log_n[k] - mx) * (log_n[k] - mx);
        }
        exponent = sxy / sxx;
    }
    fmt::print(out, "fitted N-exponent of the weight-fitting stage: {:.2f}\n", exponent);
    return finish_bench(options, out, {}, {{"suite", "scaling"}, {"rows", rows}, {"fit_exponent", exponent}});
}

}  // namespace

int cmd_bench(const BenchOptions &options, std::ostream &out, std::ostream &err) {
    return guarded(err, [&] {
        if (options.suite == "table1") { return bench_table1(options, out); }
        if (options.suite == "oracle") { return bench_oracle(options, out); }
        if (options.suite == "scaling") { return bench_scaling(options, out); }
        throw ParseError("unknown bench suite '" + options.suite + "' (table1, oracle, scaling)");
    });
}

}  // namespace contsid::cli

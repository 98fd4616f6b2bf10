#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char **argv) {
    using namespace contsid::cli;

    CLI::App app{"contsid: continuous structural intervention distance between causal graphs"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);

    ComputeOptions compute;
    bool no_normalize = false;
    std::string json_path;
    auto *c = app.add_subcommand("compute", "compare a learnt graph with the true graph on observational data");
    c->add_option("true_graph", compute.true_graph, "true graph (.edges or .csv)")->required();
    c->add_option("learnt_graph", compute.learnt_graph, "learnt graph (.edges or .csv)")->required();
    c->add_option("data", compute.data, "observational samples (CSV)")->required();
    c->add_option("--lambda", compute.lambda, "ridge regularization")->capture_default_str();
    c->add_option("--bandwidth", compute.bandwidth, "median | fixed:<gamma>")->capture_default_str();
    c->add_option("--interventions", compute.interventions, "observed | file:<path> (JSON {node: [values]})")
        ->capture_default_str();
    c->add_flag("--no-normalize", no_normalize, "leave the both-paths distance unnormalized");
    c->add_option("--json", json_path, "write the JSON report here");
    c->add_option("--seed", compute.seed, "seed for the hold-out split")->capture_default_str();
    c->add_option("--holdout", compute.holdout, "fraction of rows used only for the adjustment-set average")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    c->add_option("--threads", compute.threads, "worker threads (0 = all cores)")->capture_default_str();
    c->add_flag("--quiet", compute.quiet, "suppress the table");

    SimulateOptions simulate;
    auto *s = app.add_subcommand("simulate", "generate a random DAG, linear SCM and dataset");
    s->add_option("--p", simulate.p, "number of nodes")->capture_default_str();
    s->add_option("--edge-prob", simulate.edge_prob, "edge probability")->capture_default_str();
    s->add_option("--n", simulate.n, "number of samples")->capture_default_str();
    s->add_option("--noise", simulate.noise, "gauss:<std> | gauss:<mean>,<std> | exp:<scale> | shifted-exp:<scale>")
        ->capture_default_str();
    s->add_option("--seed", simulate.seed, "random seed")->capture_default_str();
    s->add_option("--coeff-low", simulate.coeff_low, "lower edge-weight bound")->capture_default_str();
    s->add_option("--coeff-high", simulate.coeff_high, "upper edge-weight bound")->capture_default_str();
    s->add_option("--out", simulate.out_dir, "output directory")->capture_default_str();

    BenchOptions bench;
    std::string bench_json;
    auto *b = app.add_subcommand("bench", "built-in benchmark suites");
    b->add_option("suite", bench.suite, "table1 | oracle | scaling")
        ->check(CLI::IsMember({"table1", "oracle", "scaling"}))
        ->capture_default_str();
    b->add_option("--seeds", bench.seeds, "number of seeds")->capture_default_str();
    b->add_option("--n", bench.n, "samples per dataset")->capture_default_str();
    b->add_option("--p", bench.p, "nodes (scaling suite)")->capture_default_str();
    b->add_option("--lambda", bench.lambda, "ridge regularization")->capture_default_str();
    b->add_option("--mmd-samples", bench.mmd_samples, "samples for the empirical MMD check")->capture_default_str();
    b->add_option("--threads", bench.threads, "worker threads (0 = all cores)")->capture_default_str();
    b->add_option("--json", bench_json, "write a JSON summary here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kValidationFailure;
    }

    if (*c) {
        compute.normalize = !no_normalize;
        if (!json_path.empty()) { compute.json_out = json_path; }
        return cmd_compute(compute, std::cout, std::cerr);
    }
    if (*s) { return cmd_simulate(simulate, std::cout, std::cerr); }
    if (!bench_json.empty()) { bench.json_out = bench_json; }
    return cmd_bench(bench, std::cout, std::cerr);
}

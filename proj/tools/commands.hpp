#pragma once

// Command implementations behind the contsid CLI. Each cmd_* function maps
// library errors onto the documented exit codes and never throws.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "contsid/contsid.hpp"

namespace contsid::cli {

inline constexpr const char *kToolVersion = "0.1.0";

enum ExitCode : int {
    kOk = 0,
    kValidationFailure = 2,
    kNumericFailure = 3,
    kIoFailure = 4,
};

struct ComputeOptions {
    std::filesystem::path true_graph;
    std::filesystem::path learnt_graph;
    std::filesystem::path data;
    double lambda = kDefaultLambda;
    std::string bandwidth = "median";       ///< "median" or "fixed:<gamma>"
    std::string interventions = "observed"; ///< "observed" or "file:<path>"
    bool normalize = true;
    std::optional<std::filesystem::path> json_out;
    std::uint64_t seed = 0;
    double holdout = 0.0;  ///< fraction of rows reserved for the adjustment-set marginal
    unsigned threads = 0;
    bool quiet = false;
};

struct SimulateOptions {
    std::size_t p = 5;
    double edge_prob = 0.25;
    std::size_t n = 100;
    std::string noise = "exp:1";
    std::uint64_t seed = 0;
    double coeff_low = -10.0;
    double coeff_high = 10.0;
    std::filesystem::path out_dir = ".";
};

struct BenchOptions {
    std::string suite = "table1";  ///< table1 | oracle | scaling
    std::size_t seeds = 100;
    std::size_t n = 100;
    std::size_t p = 10;
    double lambda = kDefaultLambda;
    std::size_t mmd_samples = 20000;
    unsigned threads = 0;
    std::optional<std::filesystem::path> json_out;
};

/// SHA-256 of a file's bytes as lowercase hex.
std::string sha256_file(const std::filesystem::path &path);

/// UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp();

/// Parses "--bandwidth" values.
KernelConfig kernel_config_from_flags(const Dataset &data, double lambda, const std::string &bandwidth);

/// Runs the metric and returns the JSON report (schema contsid-report/v1,
/// manifest embedded). Throws library errors.
nlohmann::json compute_report(const ComputeOptions &options);

int cmd_compute(const ComputeOptions &options, std::ostream &out, std::ostream &err);
int cmd_simulate(const SimulateOptions &options, std::ostream &out, std::ostream &err);
int cmd_bench(const BenchOptions &options, std::ostream &out, std::ostream &err);

}  // namespace contsid::cli

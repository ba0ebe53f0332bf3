#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "csdelay/cs_model.hpp"
#include "csdelay/diagnostics.hpp"
#include "csdelay/feedback_lab.hpp"

namespace csdelay::cli {

/// Config rejected by the schema; `path` is a JSON pointer to the offending field.
class SchemaError : public std::runtime_error {
public:
    SchemaError(std::string path, const std::string& message);
    [[nodiscard]] const std::string& path() const { return path_; }

private:
    std::string path_;
};

struct KernelSpec {
    std::string kind = "cucker_smale";  // cucker_smale | constant
    double beta = 0.3;
    double value = 1.0;
};

struct ModelSpec {
    double lambda = 1.0;
    double tau = 0.1;
    KernelSpec kernel;
};

struct DatumSpec {
    std::string kind = "random";  // random | explicit
    double box = 1.0;
    double spread = 1.0;
    std::vector<double> x;
    std::vector<double> v;
    bool constant = true;
    std::vector<double> acceleration;  // required when constant is false
};

struct EnsembleSpec {
    std::size_t n = 10;
    std::size_t d = 2;
    DatumSpec datum;
};

struct IntegrationSpec {
    int m = 20;
    double t_end = 10.0;
};

struct OutputSpec {
    std::string csv = "series.csv";
    std::string json = "summary.json";
    int stride = 1;
};

struct SweepSpec {
    std::string axis = "tau";  // tau | lambda | N
    std::vector<double> values;
};

struct FeedbackSpec {
    double lambda = 1.0;
    double tau = 0.2;
    double u0 = 1.0;
    double t_end = 10.0;
    int samples_per_delay = 64;
};

struct RunConfig {
    ModelSpec model;
    EnsembleSpec ensemble;
    IntegrationSpec integration;
    OutputSpec outputs;
    FlockingThresholds flocking;
    SweepSpec sweep;
    FeedbackSpec feedback;
    std::uint64_t seed = 2020;
};

/// Validates against the schema; unknown keys and bad values raise SchemaError.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::string& path);

/// Fully resolved config, defaults filled in.
nlohmann::json to_json(const RunConfig& config);

ModelParams model_params(const RunConfig& config);
Kernel make_kernel(const KernelSpec& spec);
InitialDatum make_datum(const RunConfig& config);
FeedbackProblem feedback_problem(const RunConfig& config);

}  // namespace csdelay::cli

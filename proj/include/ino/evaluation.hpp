#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ino/dataset.hpp"
#include "ino/operators.hpp"

namespace ino {

enum class Split : std::uint8_t { train, val, test };

const std::vector<std::size_t>& split_indices(const Dataset& ds, Split split);

/// Mean per-sample relative error of the model over a dataset split.
double evaluate(const ModelParams& params, const Dataset& ds, Split split);

/// Max normalized node-wise deviation of a scalar-output model under random
/// rigid frame changes (|g| <= translate_C, theta ~ U[0, rotate_C]).
double check_invariance(const ModelParams& params, const PointCloud& cloud, const Tensor& f,
                        std::size_t trials, std::uint64_t seed, double translate_C = 2.0,
                        double rotate_C = 6.283185307179586);

enum class EquivarianceVariant : std::uint8_t { displacement, position };

/// Same protocol for vector-output models: displacement variant checks
/// out_T = R out, position variant checks out_T = R out + g.
double check_equivariance(const ModelParams& params, const PointCloud& cloud, const Tensor& f,
                          std::size_t trials, std::uint64_t seed, EquivarianceVariant variant,
                          double translate_C = 2.0, double rotate_C = 6.283185307179586);

/// The same deviation measure for one explicit transform.
double transform_deviation(const ModelParams& params, const PointCloud& cloud, const Tensor& f,
                           const FrameTransform& t);

struct SweepSpec {
    TransformMode mode = TransformMode::rotate;
    std::vector<double> ranges;  // C values, ascending
    std::size_t trials = 1;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SweepPoint {
    double range = 0.0;
    std::vector<double> trial_errors;
    double mean_error = 0.0;
};

struct SweepResult {
    TransformMode mode = TransformMode::rotate;
    std::vector<SweepPoint> points;
};

/// Mean test error versus transform range: every test sample gets a fresh
/// random transform per trial; C = 0 reproduces plain evaluation.
SweepResult transform_sweep(const ModelParams& params, const Dataset& ds, const SweepSpec& spec);

struct ResolutionTransfer {
    double error_original = 0.0;
    double error_other = 0.0;
};

/// Test error of one checkpoint on two discretizations of the same problem.
ResolutionTransfer resolution_transfer(const ModelParams& params, const Dataset& original,
                                       const Dataset& other);

/// Tape gradients of every parameter group against central finite differences
/// on a 4-node cloud, using the loss |forward(f) - u0| with random f and u0.
GradCheckReport model_grad_check(const OperatorConfig& config, std::uint64_t seed, double tolerance,
                                 double fd_step = 1e-6);

struct EvalReport {
    std::string checkpoint_id;
    std::string dataset_id;
    std::uint64_t seed = 0;
    std::optional<double> mean_test_error;
    std::map<std::string, double> checks;  // named theorem-check deviations
    std::optional<SweepResult> sweep;
    std::optional<ResolutionTransfer> resolution;
};

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);
bool reports_equal(const EvalReport& a, const EvalReport& b);

/// report.json (lossless numbers) and report.csv (one row per (C, trial)).
void emit_report(const EvalReport& report, const std::filesystem::path& dir);

}  // namespace ino

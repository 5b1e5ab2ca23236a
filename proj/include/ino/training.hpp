#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ino/dataset.hpp"
#include "ino/operators.hpp"

namespace ino {

struct AugmentSpec {
    std::size_t count = 0;        // transformed copies appended per training sample
    double translate_range = 0.0; // shift components ~ U[-C, C]
    double rotate_range = 0.0;    // rotation angle ~ U[0, C]
};

struct TrainConfig {
    double lr = 1e-3;
    double decay = 0.9;
    std::size_t decay_interval = 50;  // epochs between learning-rate decays
    double reg = 0.0;                 // L2 penalty coefficient added to the loss
    std::size_t max_epochs = 2000;
    std::size_t patience = 60;        // epochs without validation improvement
    std::size_t batch_size = 0;       // 0 = full batch
    std::uint64_t seed = 0;
    AugmentSpec augment;

    void validate() const;
};

struct TrainReport {
    std::vector<double> train_loss;  // one entry per trained epoch
    std::vector<double> val_error;   // NaN on epochs without validation
    std::size_t best_epoch = 0;
    double best_val_error = std::numeric_limits<double>::infinity();
    double wall_seconds = 0.0;
    bool diverged = false;

    std::size_t epochs() const { return train_loss.size(); }
    std::string to_json() const;
};

/// Root-mean-square relative error |pred - truth| / |truth|.
double relative_l2(const Tensor& pred, const Tensor& truth);

/// lr * decay^floor(epoch / interval); epoch 49 keeps the base rate, epoch 50
/// applies the first decay.
double scheduled_lr(const TrainConfig& config, std::size_t epoch);

/// Mean per-sample relative error over the given samples plus reg * sum p^2.
double batch_loss(const ModelParams& params, const Dataset& ds, const std::vector<std::size_t>& indices,
                  double reg);

/// Appends `count` randomly transformed copies of every training sample;
/// validation and test splits are untouched.
Dataset augment(const Dataset& ds, const AugmentSpec& spec, std::uint64_t seed);

/// Adam over shuffled epochs with step decay, validation on train-loss
/// improvement, patience-based early stopping, and best-checkpoint retention.
/// On return params holds the best-validation parameters.
TrainReport fit(const TrainConfig& config, ModelParams& params, const Dataset& ds);

/// Reuses trained shared parameters at a deeper layer count; tau is rescaled
/// so the total fictitious horizon L * tau is preserved.
ModelParams shallow_to_deep(const ModelParams& trained, std::size_t new_layers);

struct GridSearchEntry {
    double lr = 0.0;
    double decay = 0.0;
    double reg = 0.0;
    double val_error = 0.0;
};

struct GridSearchResult {
    GridSearchEntry best;
    std::vector<GridSearchEntry> tried;
};

/// Trains one model per (lr, decay, reg) combination and keeps the best
/// validation error. Deliberately exhaustive; size the grids accordingly.
GridSearchResult grid_search(const OperatorConfig& config, const Dataset& ds, const TrainConfig& base,
                             std::span<const double> lrs, std::span<const double> decays,
                             std::span<const double> regs);

/// RMS magnitudes of the lifting inputs, kernel arguments, and targets over
/// the training split, for conditioning the initialization.
InitScales data_init_scales(const OperatorConfig& config, const Dataset& ds);

/// init_params seeded with data_init_scales.
ModelParams init_params_for_data(const OperatorConfig& config, std::uint64_t seed, const Dataset& ds);

}  // namespace ino

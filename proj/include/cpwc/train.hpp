#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "cpwc/dataset.hpp"
#include "cpwc/model.hpp"

namespace cpwc {

enum class Precision { Single, Double };

struct Hyper {
    double lr = 0.1;
    double lr_decay = 0.2;  // multiplied in every lr_interval epochs
    int lr_interval = 8;
    double momentum = 0.9;
    double weight_decay = 5e-4;
    int batch_size = 32;
    int epochs = 16;
    std::uint64_t seed = 1;
    Precision precision = Precision::Single;
    bool augment = false;  // random shift (+/-4) and horizontal flip, seeded
};

/// Step schedule: lr(e) = lr * lr_decay^floor(e / lr_interval), epochs 0-based.
double lr_at_epoch(const Hyper& hyper, int epoch);

struct EpochStats {
    int epoch = 0;
    double lr = 0.0;
    double train_loss = 0.0;
    double train_accuracy = 0.0;
};

struct TrainReport {
    std::vector<EpochStats> epochs;
    double final_val_accuracy = 0.0;
    double wall_seconds = 0.0;
    long long param_count = 0;
    ToyModelConfig model_config;
    Hyper hyper;
};

/// SGD with momentum: v <- momentum*v + (g + weight_decay*w); w <- w - lr*v.
/// With momentum 0 and weight decay 0 this is exactly w <- w - lr*g.
template <typename T>
void sgd_step(std::vector<ParamRef<T>>& params, std::vector<std::vector<T>>& velocity, double lr,
              double momentum, double weight_decay);

/// Train to completion over the configured epochs, shuffling with the hyper
/// seed, and evaluate on the validation set. Non-finite loss aborts with a
/// diagnostic. hyper.precision must match T.
TrainReport train(ToyModel<float>& model, const Dataset& train_set, const Dataset& val_set,
                  const Hyper& hyper);
TrainReport train(ToyModel<double>& model, const Dataset& train_set, const Dataset& val_set,
                  const Hyper& hyper);

double evaluate_accuracy(ToyModel<float>& model, const Dataset& data, int batch_size);
double evaluate_accuracy(ToyModel<double>& model, const Dataset& data, int batch_size);

struct VariantCell {
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    double final_accuracy = 0.0;
};

struct VariantSummary {
    CpwcVariant variant = CpwcVariant::Full;
    long long params = 0;
    long long macs = 0;
    double mean_accuracy = 0.0;
    double min_accuracy = 0.0;
    double max_accuracy = 0.0;
    std::vector<VariantCell> cells;
};

struct ComparisonTable {
    std::vector<VariantSummary> rows;  // in the caller's variant order
};

/// One training run per (variant, seed); failed cells are recorded, not
/// fatal. The model config's variant and seed fields are overridden per cell.
ComparisonTable compare_variants(const Dataset& train_set, const Dataset& val_set,
                                 const std::vector<CpwcVariant>& variants,
                                 const ToyModelConfig& base_config, const Hyper& hyper,
                                 const std::vector<std::uint64_t>& seeds);

std::string format_comparison_table(const ComparisonTable& table);
nlohmann::json comparison_table_to_json(const ComparisonTable& table);
nlohmann::json train_report_to_json(const TrainReport& report, bool include_timing);

/// The shipped defaults for the synthetic-context experiment; the CLI and
/// the acceptance suite use exactly these.
SynthConfig default_synth_config();
int default_synth_train_size();
int default_synth_val_size();
int default_synth_classes();
std::uint64_t default_synth_data_seed();
ToyModelConfig default_toy_config(CpwcVariant variant);
Hyper default_synth_hyper();

}  // namespace cpwc

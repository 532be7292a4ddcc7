#include "cpwc/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

namespace cpwc {

namespace {

using nlohmann::json;

template <typename T>
Tensor<T> gather_batch(const Dataset& data, const std::vector<int>& order, int first, int count) {
    Tensor<T> batch(count, data.images.c(), data.images.h(), data.images.w());
    const std::size_t image = data.images.size() / data.images.n();
    for (int b = 0; b < count; ++b) {
        const int src = order[first + b];
        const float* from = data.images.data().data() + static_cast<std::size_t>(src) * image;
        T* to = batch.data().data() + static_cast<std::size_t>(b) * image;
        for (std::size_t i = 0; i < image; ++i) {
            to[i] = static_cast<T>(from[i]);
        }
    }
    return batch;
}

// Random shift within +/-pad (zero fill) plus coin-flip horizontal mirror,
// the usual crop/flip recipe expressed as one pass over the batch.
template <typename T>
void augment_batch(Tensor<T>& batch, std::mt19937_64& rng, int pad) {
    std::uniform_int_distribution<int> shift(-pad, pad);
    std::uniform_int_distribution<int> coin(0, 1);
    Tensor<T> image(1, batch.c(), batch.h(), batch.w());
    for (int n = 0; n < batch.n(); ++n) {
        const int sy = shift(rng);
        const int sx = shift(rng);
        const bool mirror = coin(rng) == 1;
        for (int c = 0; c < batch.c(); ++c) {
            for (int y = 0; y < batch.h(); ++y) {
                for (int x = 0; x < batch.w(); ++x) {
                    const int src_y = y + sy;
                    const int src_x = (mirror ? batch.w() - 1 - x : x) + sx;
                    image.at(0, c, y, x) =
                        (src_y >= 0 && src_y < batch.h() && src_x >= 0 && src_x < batch.w())
                            ? batch.at(n, c, src_y, src_x)
                            : T(0);
                }
            }
        }
        for (int c = 0; c < batch.c(); ++c) {
            for (int y = 0; y < batch.h(); ++y) {
                for (int x = 0; x < batch.w(); ++x) {
                    batch.at(n, c, y, x) = image.at(0, c, y, x);
                }
            }
        }
    }
}

template <typename T>
double evaluate_accuracy_impl(ToyModel<T>& model, const Dataset& data, int batch_size) {
    validate_dataset(data);
    std::vector<int> order(data.images.n());
    std::iota(order.begin(), order.end(), 0);
    int correct = 0;
    for (int first = 0; first < data.images.n(); first += batch_size) {
        const int count = std::min(batch_size, data.images.n() - first);
        Tensor<T> batch = gather_batch<T>(data, order, first, count);
        Tensor<T> logits = model.forward(batch, /*training=*/false);
        for (int b = 0; b < count; ++b) {
            int argmax = 0;
            for (int k = 1; k < logits.c(); ++k) {
                if (logits.at(b, k, 0, 0) > logits.at(b, argmax, 0, 0)) {
                    argmax = k;
                }
            }
            if (argmax == data.labels[order[first + b]]) {
                ++correct;
            }
        }
    }
    return static_cast<double>(correct) / data.images.n();
}

template <typename T>
TrainReport train_impl(ToyModel<T>& model, const Dataset& train_set, const Dataset& val_set,
                       const Hyper& hyper) {
    if (hyper.lr <= 0 || hyper.lr_decay <= 0 || hyper.lr_interval < 1 || hyper.batch_size < 1 ||
        hyper.epochs < 0 || hyper.momentum < 0 || hyper.weight_decay < 0) {
        throw std::invalid_argument("train: hyperparameters must be positive (epochs >= 0)");
    }
    validate_dataset(train_set);
    validate_dataset(val_set);

    const auto t0 = std::chrono::steady_clock::now();

    auto params = model.params();
    std::vector<std::vector<T>> velocity(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        velocity[i].assign(params[i].value->size(), T(0));
    }

    TrainReport report;
    report.model_config = model.config();
    report.hyper = hyper;
    report.param_count = model.param_count();

    std::mt19937_64 shuffle_rng(hyper.seed);
    // Separate stream so turning augmentation on leaves the shuffle order
    // untouched.
    std::mt19937_64 augment_rng(hyper.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<int> order(train_set.images.n());
    std::iota(order.begin(), order.end(), 0);
    std::vector<int> batch_labels;

    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        const double lr = lr_at_epoch(hyper, epoch);
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double epoch_loss = 0.0;
        long long seen = 0;
        long long correct = 0;
        for (int first = 0; first < train_set.images.n(); first += hyper.batch_size) {
            const int count = std::min(hyper.batch_size, train_set.images.n() - first);
            Tensor<T> batch = gather_batch<T>(train_set, order, first, count);
            if (hyper.augment) {
                augment_batch(batch, augment_rng, 4);
            }
            batch_labels.resize(count);
            for (int b = 0; b < count; ++b) {
                batch_labels[b] = train_set.labels[order[first + b]];
            }

            model.zero_grad();
            Tensor<T> logits = model.forward(batch, /*training=*/true);
            LossResult<T> loss = softmax_cross_entropy(logits, batch_labels);
            if (!std::isfinite(loss.loss)) {
                throw std::runtime_error("train: diverged with non-finite loss at epoch " +
                                         std::to_string(epoch) + ", sample offset " +
                                         std::to_string(first));
            }
            model.backward(loss.grad_logits);
            sgd_step(params, velocity, lr, hyper.momentum, hyper.weight_decay);

            epoch_loss += loss.loss * count;
            correct += loss.correct;
            seen += count;
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.lr = lr;
        stats.train_loss = epoch_loss / static_cast<double>(seen);
        stats.train_accuracy = static_cast<double>(correct) / static_cast<double>(seen);
        report.epochs.push_back(stats);
    }

    report.final_val_accuracy = evaluate_accuracy_impl(model, val_set, hyper.batch_size);
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

}  // namespace

double lr_at_epoch(const Hyper& hyper, int epoch) {
    return hyper.lr * std::pow(hyper.lr_decay, epoch / hyper.lr_interval);
}

template <typename T>
void sgd_step(std::vector<ParamRef<T>>& params, std::vector<std::vector<T>>& velocity, double lr,
              double momentum, double weight_decay) {
    for (std::size_t p = 0; p < params.size(); ++p) {
        std::vector<T>& w = *params[p].value;
        const std::vector<T>& g = *params[p].grad;
        std::vector<T>& v = velocity[p];
        for (std::size_t i = 0; i < w.size(); ++i) {
            const T step = g[i] + static_cast<T>(weight_decay) * w[i];
            v[i] = static_cast<T>(momentum) * v[i] + step;
            w[i] -= static_cast<T>(lr) * v[i];
        }
    }
}

template void sgd_step<float>(std::vector<ParamRef<float>>&, std::vector<std::vector<float>>&,
                              double, double, double);
template void sgd_step<double>(std::vector<ParamRef<double>>&, std::vector<std::vector<double>>&,
                               double, double, double);

TrainReport train(ToyModel<float>& model, const Dataset& train_set, const Dataset& val_set,
                  const Hyper& hyper) {
    if (hyper.precision != Precision::Single) {
        throw std::invalid_argument("train: hyper.precision says double but the model is single");
    }
    return train_impl(model, train_set, val_set, hyper);
}

TrainReport train(ToyModel<double>& model, const Dataset& train_set, const Dataset& val_set,
                  const Hyper& hyper) {
    if (hyper.precision != Precision::Double) {
        throw std::invalid_argument("train: hyper.precision says single but the model is double");
    }
    return train_impl(model, train_set, val_set, hyper);
}

double evaluate_accuracy(ToyModel<float>& model, const Dataset& data, int batch_size) {
    return evaluate_accuracy_impl(model, data, batch_size);
}

double evaluate_accuracy(ToyModel<double>& model, const Dataset& data, int batch_size) {
    return evaluate_accuracy_impl(model, data, batch_size);
}

ComparisonTable compare_variants(const Dataset& train_set, const Dataset& val_set,
                                 const std::vector<CpwcVariant>& variants,
                                 const ToyModelConfig& base_config, const Hyper& hyper,
                                 const std::vector<std::uint64_t>& seeds) {
    if (seeds.empty()) {
        throw std::invalid_argument("compare_variants: need at least one seed");
    }
    ComparisonTable table;
    for (CpwcVariant variant : variants) {
        VariantSummary row;
        row.variant = variant;
        ToyModelConfig cfg = base_config;
        cfg.variant = variant;
        row.params = ToyModel<float>(cfg).param_count();
        row.macs = ToyModel<float>(cfg).macs(train_set.images.h(), train_set.images.w());

        double sum = 0.0;
        int ok = 0;
        for (std::uint64_t seed : seeds) {
            VariantCell cell;
            cell.seed = seed;
            try {
                cfg.seed = seed;
                Hyper h = hyper;
                h.seed = seed;
                if (h.precision == Precision::Double) {
                    ToyModel<double> model(cfg);
                    cell.final_accuracy = train(model, train_set, val_set, h).final_val_accuracy;
                } else {
                    ToyModel<float> model(cfg);
                    cell.final_accuracy = train(model, train_set, val_set, h).final_val_accuracy;
                }
                cell.ok = true;
            } catch (const std::exception& e) {
                cell.ok = false;
                cell.error = e.what();
            }
            if (cell.ok) {
                sum += cell.final_accuracy;
                if (ok == 0 || cell.final_accuracy < row.min_accuracy) {
                    row.min_accuracy = cell.final_accuracy;
                }
                if (ok == 0 || cell.final_accuracy > row.max_accuracy) {
                    row.max_accuracy = cell.final_accuracy;
                }
                ++ok;
            }
            row.cells.push_back(std::move(cell));
        }
        row.mean_accuracy = ok > 0 ? sum / ok : 0.0;
        table.rows.push_back(std::move(row));
    }
    return table;
}

std::string format_comparison_table(const ComparisonTable& table) {
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof(line), "%-18s  %10s  %12s  %9s  %9s  %9s\n", "variant", "params",
                  "macs/img", "acc.mean", "acc.min", "acc.max");
    out << line;
    for (const VariantSummary& row : table.rows) {
        const long long failed =
            std::count_if(row.cells.begin(), row.cells.end(),
                          [](const VariantCell& c) { return !c.ok; });
        std::snprintf(line, sizeof(line), "%-18s  %10lld  %12lld  %9.4f  %9.4f  %9.4f%s\n",
                      std::string(to_string(row.variant)).c_str(), row.params, row.macs,
                      row.mean_accuracy, row.min_accuracy, row.max_accuracy,
                      failed ? ("  [" + std::to_string(failed) + " failed]").c_str() : "");
        out << line;
    }
    return out.str();
}

nlohmann::json comparison_table_to_json(const ComparisonTable& table) {
    json rows = json::array();
    for (const VariantSummary& row : table.rows) {
        json cells = json::array();
        for (const VariantCell& cell : row.cells) {
            json c = {{"seed", cell.seed}, {"ok", cell.ok}};
            if (cell.ok) {
                c["final_accuracy"] = cell.final_accuracy;
            } else {
                c["error"] = cell.error;
            }
            cells.push_back(std::move(c));
        }
        rows.push_back({{"variant", std::string(to_string(row.variant))},
                        {"params", row.params},
                        {"macs_per_image", row.macs},
                        {"accuracy", {{"mean", row.mean_accuracy},
                                      {"min", row.min_accuracy},
                                      {"max", row.max_accuracy}}},
                        {"cells", std::move(cells)}});
    }
    return json{{"rows", std::move(rows)}};
}

nlohmann::json train_report_to_json(const TrainReport& report, bool include_timing) {
    json epochs = json::array();
    for (const EpochStats& e : report.epochs) {
        epochs.push_back({{"epoch", e.epoch},
                          {"lr", e.lr},
                          {"train_loss", e.train_loss},
                          {"train_accuracy", e.train_accuracy}});
    }
    json doc = {
        {"epochs", std::move(epochs)},
        {"final_val_accuracy", report.final_val_accuracy},
        {"param_count", report.param_count},
        {"model",
         {{"variant", std::string(to_string(report.model_config.variant))},
          {"in_channels", report.model_config.in_channels},
          {"channels", report.model_config.channels},
          {"blocks", report.model_config.blocks},
          {"classes", report.model_config.classes},
          {"seed", report.model_config.seed}}},
        {"hyper",
         {{"lr", report.hyper.lr},
          {"lr_decay", report.hyper.lr_decay},
          {"lr_interval", report.hyper.lr_interval},
          {"momentum", report.hyper.momentum},
          {"weight_decay", report.hyper.weight_decay},
          {"batch_size", report.hyper.batch_size},
          {"epochs", report.hyper.epochs},
          {"seed", report.hyper.seed},
          {"precision",
           report.hyper.precision == Precision::Double ? "double" : "single"},
          {"augment", report.hyper.augment}}},
    };
    if (include_timing) {
        doc["timing"] = {{"wall_seconds", report.wall_seconds}};
    }
    return doc;
}

SynthConfig default_synth_config() { return SynthConfig{}; }
int default_synth_train_size() { return 1024; }
int default_synth_val_size() { return 512; }
int default_synth_classes() { return 4; }
std::uint64_t default_synth_data_seed() { return 99; }

ToyModelConfig default_toy_config(CpwcVariant variant) {
    ToyModelConfig cfg;
    cfg.variant = variant;
    cfg.in_channels = 1;
    cfg.channels = 24;
    cfg.blocks = 2;
    cfg.classes = default_synth_classes();
    cfg.seed = 1;
    return cfg;
}

Hyper default_synth_hyper() {
    Hyper hyper;
    hyper.lr = 0.1;
    hyper.lr_decay = 0.2;
    hyper.lr_interval = 12;
    hyper.momentum = 0.9;
    hyper.weight_decay = 5e-4;
    hyper.batch_size = 32;
    hyper.epochs = 24;
    hyper.seed = 1;
    hyper.precision = Precision::Single;
    return hyper;
}

}  // namespace cpwc

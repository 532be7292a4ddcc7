#include "cpwc/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cpwc/analyzer.hpp"
#include "cpwc/train.hpp"

namespace cpwc::cli {

namespace {

using nlohmann::json;

json envelope(const std::string& command) {
    return json{{"schema_version", kSchemaVersion}, {"command", command}};
}

/// Relative output paths land in $CPWC_RESULTS_DIR when it is set.
std::string resolve_output_path(const std::string& path) {
    const char* dir = std::getenv("CPWC_RESULTS_DIR");
    if (dir == nullptr || *dir == '\0' || std::filesystem::path(path).is_absolute()) {
        return path;
    }
    std::filesystem::create_directories(dir);
    return (std::filesystem::path(dir) / path).string();
}

void emit_json(std::ostream& out, json doc) { out << doc.dump(2) << "\n"; }

std::vector<std::string> split_csv(const std::string& text) {
    std::vector<std::string> parts;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, ',')) {
        if (!item.empty()) {
            parts.push_back(item);
        }
    }
    return parts;
}

struct PlanOpts {
    int in = 0;
    int out = 0;
    bool json_out = false;
    std::uint64_t seed = 0;
};

struct SpecSource {
    std::string builtin;
    std::string file;
};

struct CountOpts {
    SpecSource source;
    std::string cpwc;
    bool per_node = false;
    bool json_out = false;
    std::uint64_t seed = 0;
};

struct SurgeryOpts {
    SpecSource source;
    std::string cpwc;
    std::string emit;
    bool json_out = false;
    std::uint64_t seed = 0;
};

struct CheckGradOpts {
    int trials = 50;
    double tolerance = 1e-6;
    double epsilon = 1e-5;
    bool json_out = false;
    std::uint64_t seed = 1;
};

struct DataOpts {
    std::string data = "synth";  // synth | cifar10 | cifar100
    std::string dir;
    std::uint64_t data_seed = default_synth_data_seed();
    int train_n = default_synth_train_size();
    int val_n = default_synth_val_size();
    int classes = default_synth_classes();
};

struct TrainOpts {
    TrainOpts() {
        const Hyper h = default_synth_hyper();
        lr = h.lr;
        lr_decay = h.lr_decay;
        lr_interval = h.lr_interval;
        momentum = h.momentum;
        weight_decay = h.weight_decay;
        batch = h.batch_size;
        epochs = h.epochs;
        const ToyModelConfig m = default_toy_config(CpwcVariant::Full);
        channels = m.channels;
        blocks = m.blocks;
    }
    DataOpts data;
    std::string variant = "full";
    int channels = 0;
    int blocks = 0;
    double lr = 0;
    double lr_decay = 0;
    int lr_interval = 0;
    double momentum = 0;
    double weight_decay = 0;
    int batch = 0;
    int epochs = 0;
    std::uint64_t seed = 1;
    std::string precision = "single";
    bool augment = false;
    bool json_out = false;
    bool timing = false;
    std::string out_file;
};

struct CompareOpts {
    TrainOpts base;
    std::string variants = "pwc-only,no-stage2,full";
    std::string seeds = "1,2,3";
};

struct Ctx {
    PlanOpts plan;
    CountOpts count;
    SurgeryOpts surgery;
    CheckGradOpts check_grad;
    TrainOpts train;
    CompareOpts compare;

    CLI::App* plan_cmd = nullptr;
    CLI::App* count_cmd = nullptr;
    CLI::App* surgery_cmd = nullptr;
    CLI::App* check_grad_cmd = nullptr;
    CLI::App* train_cmd = nullptr;
    CLI::App* compare_cmd = nullptr;
};

void add_spec_source(CLI::App* cmd, SpecSource& source) {
    auto* builtin = cmd->add_option("--builtin", source.builtin,
                                    "builtin network spec (resnet164 or resnet50)");
    cmd->add_option("--spec", source.file, "network spec document to read")->excludes(builtin);
}

void add_data_flags(CLI::App* cmd, DataOpts& data) {
    cmd->add_option("--data", data.data, "dataset: synth, cifar10 or cifar100")
        ->check(CLI::IsMember({"synth", "cifar10", "cifar100"}));
    cmd->add_option("--dir", data.dir, "directory with the CIFAR binary files");
    cmd->add_option("--data-seed", data.data_seed, "seed for the synthetic data generator");
    cmd->add_option("--train-n", data.train_n, "training set size");
    cmd->add_option("--val-n", data.val_n, "validation set size");
    cmd->add_option("--classes", data.classes, "class count for the synthetic dataset");
}

void add_train_flags(CLI::App* cmd, TrainOpts& opts) {
    add_data_flags(cmd, opts.data);
    cmd->add_option("--channels", opts.channels, "width after the input convolution");
    cmd->add_option("--blocks", opts.blocks, "number of cpwc blocks (2-4)");
    cmd->add_option("--lr", opts.lr, "initial learning rate");
    cmd->add_option("--lr-decay", opts.lr_decay, "learning-rate decay factor");
    cmd->add_option("--lr-interval", opts.lr_interval, "epochs between decays");
    cmd->add_option("--momentum", opts.momentum, "SGD momentum");
    cmd->add_option("--weight-decay", opts.weight_decay, "L2 factor added to gradients");
    cmd->add_option("--batch", opts.batch, "minibatch size");
    cmd->add_option("--epochs", opts.epochs, "training epochs");
    cmd->add_option("--seed", opts.seed, "run seed (init and shuffling)");
    cmd->add_option("--precision", opts.precision, "single or double")
        ->check(CLI::IsMember({"single", "double"}));
    cmd->add_flag("--augment", opts.augment, "random shift/flip augmentation (seeded)");
    cmd->add_flag("--json", opts.json_out, "machine-readable output");
    cmd->add_flag("--timing", opts.timing, "include wall time in the output");
    cmd->add_option("--out", opts.out_file, "write the full report (with timing) to this file");
}

std::unique_ptr<CLI::App> make_app(Ctx& ctx) {
    auto app = std::make_unique<CLI::App>(
        "contextual pointwise convolution toolkit: group planning, cost "
        "analysis, model surgery, gradient checks and desk-scale training");
    app->name("cpwc");
    app->require_subcommand(1);

    ctx.plan_cmd = app->add_subcommand("plan", "show the stage-1 channel group plan");
    ctx.plan_cmd->add_option("--in", ctx.plan.in, "input channel count C")->required();
    ctx.plan_cmd->add_option("--out", ctx.plan.out, "output channel count Z")->required();
    ctx.plan_cmd->add_flag("--json", ctx.plan.json_out, "machine-readable output");
    ctx.plan_cmd->add_option("--seed", ctx.plan.seed, "accepted for interface uniformity");

    ctx.count_cmd = app->add_subcommand("count", "parameter and MAC accounting for a network");
    add_spec_source(ctx.count_cmd, ctx.count.source);
    ctx.count_cmd->add_option("--cpwc", ctx.count.cpwc,
                              "apply surgery with this variant and report the delta");
    ctx.count_cmd->add_flag("--per-node", ctx.count.per_node, "print the per-node table");
    ctx.count_cmd->add_flag("--json", ctx.count.json_out, "machine-readable output");
    ctx.count_cmd->add_option("--seed", ctx.count.seed, "accepted for interface uniformity");

    ctx.surgery_cmd =
        app->add_subcommand("surgery", "replace every pointwise conv node and emit the spec");
    add_spec_source(ctx.surgery_cmd, ctx.surgery.source);
    ctx.surgery_cmd->add_option("--cpwc", ctx.surgery.cpwc, "variant to install")->required();
    ctx.surgery_cmd->add_option("--emit", ctx.surgery.emit,
                                "write the modified spec here (default: stdout)");
    ctx.surgery_cmd->add_flag("--json", ctx.surgery.json_out,
                              "machine-readable output (the spec document itself)");
    ctx.surgery_cmd->add_option("--seed", ctx.surgery.seed, "accepted for interface uniformity");

    ctx.check_grad_cmd =
        app->add_subcommand("check-grad", "finite-difference sweeps over random block configs");
    ctx.check_grad_cmd->add_option("--trials", ctx.check_grad.trials, "number of random configs");
    ctx.check_grad_cmd->add_option("--tol", ctx.check_grad.tolerance, "max relative error");
    ctx.check_grad_cmd->add_option("--epsilon", ctx.check_grad.epsilon, "perturbation size");
    ctx.check_grad_cmd->add_flag("--json", ctx.check_grad.json_out, "machine-readable output");
    ctx.check_grad_cmd->add_option("--seed", ctx.check_grad.seed, "sweep seed");

    ctx.train_cmd = app->add_subcommand("train", "train the toy model once");
    ctx.train_cmd->add_option("--variant", ctx.train.variant,
                              "cpwc variant: full, no-stage2, no-pwc, no-pwc-no-stage2, pwc-only");
    add_train_flags(ctx.train_cmd, ctx.train);

    ctx.compare_cmd = app->add_subcommand("compare", "ablation sweep over variants and seeds");
    ctx.compare_cmd->add_option("--variants", ctx.compare.variants, "comma-separated variants");
    ctx.compare_cmd->add_option("--seeds", ctx.compare.seeds, "comma-separated run seeds");
    add_train_flags(ctx.compare_cmd, ctx.compare.base);

    return app;
}

int run_plan(const PlanOpts& opts, std::ostream& out) {
    const GroupPlan plan = plan_groups(opts.in, opts.out);
    const bool uniform = std::all_of(plan.groups.begin(), plan.groups.end(),
                                     [&](const std::vector<int>& g) {
                                         return g.size() == plan.groups.front().size();
                                     });
    if (opts.json_out) {
        json doc = envelope("plan");
        doc["case"] = plan.case_label();
        doc["in_channels"] = plan.in_channels;
        doc["out_channels"] = plan.out_channels;
        json sizes = json::array();
        json groups = json::array();
        for (const auto& g : plan.groups) {
            sizes.push_back(g.size());
            groups.push_back(g);
        }
        doc["group_sizes"] = std::move(sizes);
        doc["groups"] = std::move(groups);
        emit_json(out, std::move(doc));
        return kExitOk;
    }

    char line[128];
    switch (plan.case_label()) {
        case 1:
            std::snprintf(line, sizeof(line), "case 1, %d singleton groups\n", plan.out_channels);
            break;
        case 2:
            if (uniform) {
                std::snprintf(line, sizeof(line), "case 2, %d groups x %zu channels\n",
                              plan.out_channels, plan.groups.front().size());
            } else {
                std::snprintf(line, sizeof(line), "case 2, %d groups, sizes %zu..%zu\n",
                              plan.out_channels, plan.groups.front().size(),
                              plan.groups.back().size());
            }
            break;
        default:
            std::snprintf(line, sizeof(line), "case 3, %d singleton groups, channels shared\n",
                          plan.out_channels);
            break;
    }
    out << line;

    out << "r_i:";
    if (uniform) {
        out << " " << plan.groups.front().size() << " (x" << plan.out_channels << ")";
    } else {
        for (const auto& g : plan.groups) {
            out << " " << g.size();
        }
    }
    out << "\n";
    return kExitOk;
}

NetworkSpec load_spec(const SpecSource& source) {
    if (!source.builtin.empty()) {
        return builtin_spec(source.builtin);
    }
    if (source.file.empty()) {
        throw std::invalid_argument("one of --builtin or --spec is required");
    }
    std::ifstream in(source.file);
    if (!in) {
        throw SpecError({"cannot open spec file " + source.file});
    }
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_spec(buf.str());
}

CpwcVariant parse_variant_flag(const std::string& name) {
    auto variant = variant_from_string(name);
    if (!variant) {
        throw std::invalid_argument("unknown cpwc variant '" + name +
                                    "' (expected full, no-stage2, no-pwc, no-pwc-no-stage2 or "
                                    "pwc-only)");
    }
    return *variant;
}

int run_count(const CountOpts& opts, std::ostream& out) {
    const NetworkSpec spec = load_spec(opts.source);
    if (!opts.cpwc.empty()) {
        const SurgeryComparison cmp = compare_surgery(spec, parse_variant_flag(opts.cpwc));
        if (opts.json_out) {
            json doc = envelope("count");
            doc.update(comparison_to_json(cmp));
            emit_json(out, std::move(doc));
        } else {
            out << format_comparison(cmp);
            if (opts.per_node) {
                out << "\n" << format_report(cmp.modified);
            }
        }
        return kExitOk;
    }
    const CountReport report = count_network(spec);
    if (opts.json_out) {
        json doc = envelope("count");
        doc.update(report_to_json(report));
        emit_json(out, std::move(doc));
    } else {
        out << (opts.per_node ? format_report(report) : format_totals(report));
    }
    return kExitOk;
}

int run_surgery(const SurgeryOpts& opts, std::ostream& out) {
    NetworkSpec spec = surgery(load_spec(opts.source), parse_variant_flag(opts.cpwc));
    const std::string text = serialize_spec(spec);
    if (!opts.emit.empty()) {
        const std::string path = resolve_output_path(opts.emit);
        std::ofstream file(path);
        if (!file) {
            throw SpecError({"cannot write spec file " + path});
        }
        file << text;
        out << "wrote " << path << "\n";
    } else {
        out << text;
    }
    return kExitOk;
}

int run_check_grad(const CheckGradOpts& opts, std::ostream& out) {
    if (opts.trials < 1) {
        throw std::invalid_argument("check-grad: --trials must be positive");
    }
    std::mt19937_64 rng(opts.seed);
    std::uniform_int_distribution<int> channel_dist(1, 12);
    std::uniform_int_distribution<int> spatial_dist(3, 6);
    std::uniform_int_distribution<int> batch_dist(1, 2);
    std::uniform_real_distribution<double> value_dist(-1.0, 1.0);

    json trials = json::array();
    int failed = 0;
    double worst = 0.0;
    for (int t = 0; t < opts.trials; ++t) {
        const CpwcVariant variant = all_variants()[t % all_variants().size()];
        const int C = channel_dist(rng);
        const int Z = channel_dist(rng);
        const int stride = 1 + (t / static_cast<int>(all_variants().size())) % 2;
        const int h = spatial_dist(rng);
        const int w = spatial_dist(rng);
        const int n = batch_dist(rng);

        auto params = init_params<double>(plan_groups(C, Z), variant, stride, rng());
        Tensor<double> x(n, C, h, w);
        for (auto& v : x.data()) {
            v = value_dist(rng);
        }
        const FdCheckReport report =
            finite_difference_check(params, x, opts.epsilon, opts.tolerance);
        worst = std::max(worst, report.max_err());
        if (!report.passed) {
            ++failed;
        }

        if (opts.json_out) {
            trials.push_back({{"trial", t},
                              {"in_channels", C},
                              {"out_channels", Z},
                              {"stride", stride},
                              {"batch", n},
                              {"height", h},
                              {"width", w},
                              {"variant", std::string(to_string(variant))},
                              {"max_rel_err", report.max_err()},
                              {"passed", report.passed}});
        } else {
            char line[160];
            std::snprintf(line, sizeof(line),
                          "trial %3d: C=%2d Z=%2d stride=%d n=%d %dx%d %-16s max_err=%.3e %s\n", t,
                          C, Z, stride, n, h, w, std::string(to_string(variant)).c_str(),
                          report.max_err(), report.passed ? "pass" : "FAIL");
            out << line;
        }
    }

    if (opts.json_out) {
        json doc = envelope("check-grad");
        doc["trials"] = std::move(trials);
        doc["tolerance"] = opts.tolerance;
        doc["epsilon"] = opts.epsilon;
        doc["failed"] = failed;
        doc["max_rel_err"] = worst;
        doc["all_passed"] = failed == 0;
        emit_json(out, std::move(doc));
    } else {
        char line[128];
        std::snprintf(line, sizeof(line), "%d/%d passed (tol %g, worst %.3e)\n",
                      opts.trials - failed, opts.trials, opts.tolerance, worst);
        out << line;
    }
    return failed == 0 ? kExitOk : kExitComputation;
}

std::pair<Dataset, Dataset> load_data(const DataOpts& opts) {
    auto take = [](const Dataset& data, int n) {
        if (n <= 0 || n >= data.images.n()) {
            return data;
        }
        Dataset subset;
        subset.images = Tensor<float>(n, data.images.c(), data.images.h(), data.images.w());
        const std::size_t image = data.images.size() / data.images.n();
        std::copy(data.images.data().begin(),
                  data.images.data().begin() + static_cast<std::ptrdiff_t>(image * n),
                  subset.images.data().begin());
        subset.labels.assign(data.labels.begin(), data.labels.begin() + n);
        subset.num_classes = data.num_classes;
        subset.split = data.split;
        return subset;
    };

    if (opts.data == "synth") {
        Dataset train_set =
            synth_context_dataset(opts.data_seed, opts.train_n, opts.classes, SynthConfig{});
        Dataset val_set =
            synth_context_dataset(opts.data_seed + 1, opts.val_n, opts.classes, SynthConfig{});
        val_set.split = "val";
        return {std::move(train_set), std::move(val_set)};
    }
    if (opts.dir.empty()) {
        throw std::invalid_argument("--dir is required for CIFAR datasets");
    }
    const CifarFlavor flavor =
        opts.data == "cifar100" ? CifarFlavor::Cifar100 : CifarFlavor::Cifar10;
    auto [train_set, val_set] = load_cifar(opts.dir, flavor);
    return {take(train_set, opts.train_n), take(val_set, opts.val_n)};
}

ToyModelConfig model_config_from(const TrainOpts& opts, const Dataset& train_set,
                                 CpwcVariant variant, std::uint64_t seed) {
    ToyModelConfig cfg;
    cfg.variant = variant;
    cfg.in_channels = train_set.images.c();
    cfg.channels = opts.channels;
    cfg.blocks = opts.blocks;
    cfg.classes = train_set.num_classes;
    cfg.seed = seed;
    return cfg;
}

Hyper hyper_from(const TrainOpts& opts) {
    Hyper hyper;
    hyper.lr = opts.lr;
    hyper.lr_decay = opts.lr_decay;
    hyper.lr_interval = opts.lr_interval;
    hyper.momentum = opts.momentum;
    hyper.weight_decay = opts.weight_decay;
    hyper.batch_size = opts.batch;
    hyper.epochs = opts.epochs;
    hyper.seed = opts.seed;
    hyper.precision = opts.precision == "double" ? Precision::Double : Precision::Single;
    hyper.augment = opts.augment;
    return hyper;
}

int run_train(const TrainOpts& opts, std::ostream& out, std::ostream& err) {
    const auto [train_set, val_set] = load_data(opts.data);
    const CpwcVariant variant = parse_variant_flag(opts.variant);
    const ToyModelConfig cfg = model_config_from(opts, train_set, variant, opts.seed);
    const Hyper hyper = hyper_from(opts);

    TrainReport report;
    try {
        if (hyper.precision == Precision::Double) {
            ToyModel<double> model(cfg);
            report = train(model, train_set, val_set, hyper);
        } else {
            ToyModel<float> model(cfg);
            report = train(model, train_set, val_set, hyper);
        }
    } catch (const std::runtime_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitComputation;
    }

    if (!opts.out_file.empty()) {
        const std::string path = resolve_output_path(opts.out_file);
        std::ofstream file(path);
        if (!file) {
            throw SpecError({"cannot write report file " + path});
        }
        json doc = envelope("train");
        doc.update(train_report_to_json(report, /*include_timing=*/true));
        file << doc.dump(2) << "\n";
    }

    if (opts.json_out) {
        json doc = envelope("train");
        doc.update(train_report_to_json(report, opts.timing));
        emit_json(out, std::move(doc));
    } else {
        for (const EpochStats& e : report.epochs) {
            char line[160];
            std::snprintf(line, sizeof(line), "epoch %3d: lr %.5f loss %.4f acc %.4f\n", e.epoch,
                          e.lr, e.train_loss, e.train_accuracy);
            out << line;
        }
        char line[160];
        std::snprintf(line, sizeof(line), "final val accuracy %.4f (params %lld)\n",
                      report.final_val_accuracy, report.param_count);
        out << line;
        if (opts.timing) {
            std::snprintf(line, sizeof(line), "wall %.1fs\n", report.wall_seconds);
            out << line;
        }
    }
    return kExitOk;
}

int run_compare(const CompareOpts& opts, std::ostream& out) {
    const auto [train_set, val_set] = load_data(opts.base.data);

    std::vector<CpwcVariant> variants;
    for (const std::string& name : split_csv(opts.variants)) {
        variants.push_back(parse_variant_flag(name));
    }
    if (variants.empty()) {
        throw std::invalid_argument("compare: --variants must name at least one variant");
    }
    std::vector<std::uint64_t> seeds;
    for (const std::string& s : split_csv(opts.seeds)) {
        try {
            seeds.push_back(std::stoull(s));
        } catch (const std::exception&) {
            throw std::invalid_argument("compare: bad seed '" + s + "'");
        }
    }
    if (seeds.empty()) {
        throw std::invalid_argument("compare: --seeds must name at least one seed");
    }

    const ToyModelConfig base_cfg =
        model_config_from(opts.base, train_set, CpwcVariant::Full, seeds.front());
    const ComparisonTable table =
        compare_variants(train_set, val_set, variants, base_cfg, hyper_from(opts.base), seeds);

    if (!opts.base.out_file.empty()) {
        const std::string path = resolve_output_path(opts.base.out_file);
        std::ofstream file(path);
        if (!file) {
            throw SpecError({"cannot write report file " + path});
        }
        json doc = envelope("compare");
        doc.update(comparison_table_to_json(table));
        file << doc.dump(2) << "\n";
    }

    if (opts.base.json_out) {
        json doc = envelope("compare");
        doc.update(comparison_table_to_json(table));
        emit_json(out, std::move(doc));
    } else {
        out << format_comparison_table(table);
    }

    for (const VariantSummary& row : table.rows) {
        for (const VariantCell& cell : row.cells) {
            if (!cell.ok) {
                return kExitComputation;
            }
        }
    }
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Ctx ctx;
    auto app = make_app(ctx);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app->parse(std::move(reversed));
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app->help();
            return kExitOk;
        }
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (app->got_subcommand(ctx.plan_cmd)) {
            return run_plan(ctx.plan, out);
        }
        if (app->got_subcommand(ctx.count_cmd)) {
            return run_count(ctx.count, out);
        }
        if (app->got_subcommand(ctx.surgery_cmd)) {
            return run_surgery(ctx.surgery, out);
        }
        if (app->got_subcommand(ctx.check_grad_cmd)) {
            return run_check_grad(ctx.check_grad, out);
        }
        if (app->got_subcommand(ctx.train_cmd)) {
            return run_train(ctx.train, out, err);
        }
        if (app->got_subcommand(ctx.compare_cmd)) {
            return run_compare(ctx.compare, out);
        }
        err << "error: no command given\n";
        return kExitUsage;
    } catch (const SpecError& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitInput;
    }
}

std::vector<std::pair<std::string, std::vector<std::string>>> command_flags() {
    Ctx ctx;
    auto app = make_app(ctx);
    std::vector<std::pair<std::string, std::vector<std::string>>> result;
    for (const CLI::App* sub : app->get_subcommands([](const CLI::App*) { return true; })) {
        std::vector<std::string> names;
        for (const CLI::Option* option : sub->get_options()) {
            names.push_back(option->get_name());
        }
        result.emplace_back(sub->get_name(), std::move(names));
    }
    return result;
}

std::string help_text(const std::string& subcommand) {
    Ctx ctx;
    auto app = make_app(ctx);
    if (subcommand.empty()) {
        return app->help();
    }
    return app->get_subcommand(subcommand)->help();
}

}  // namespace cpwc::cli

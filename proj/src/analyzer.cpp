#include "cpwc/analyzer.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>

namespace cpwc {

namespace {

using nlohmann::json;

std::string join(const std::vector<std::string>& parts, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) {
            out += sep;
        }
        out += parts[i];
    }
    return out;
}

/// Collects violations while walking the document, so one parse reports
/// every problem instead of the first.
struct Violations {
    std::vector<std::string> msgs;
    void add(const std::string& where, const std::string& what) {
        msgs.push_back(where.empty() ? what : where + ": " + what);
    }
    void raise_if_any() const {
        if (!msgs.empty()) {
            throw SpecError(msgs);
        }
    }
};

int require_int(const json& params, const std::string& key, const std::string& where,
                Violations& v, int fallback = 0) {
    if (!params.contains(key)) {
        v.add(where, "missing required field '" + key + "'");
        return fallback;
    }
    if (!params[key].is_number_integer() || params[key].get<long long>() < 1) {
        v.add(where, "field '" + key + "' must be a positive integer");
        return fallback;
    }
    return params[key].get<int>();
}

int optional_int(const json& params, const std::string& key, int fallback,
                 const std::string& where, Violations& v) {
    if (!params.contains(key)) {
        return fallback;
    }
    if (!params[key].is_number_integer() || params[key].get<long long>() < 1) {
        v.add(where, "field '" + key + "' must be a positive integer");
        return fallback;
    }
    return params[key].get<int>();
}

void check_keys(const json& params, const std::set<std::string>& allowed,
                const std::string& where, Violations& v) {
    for (auto it = params.begin(); it != params.end(); ++it) {
        if (!allowed.count(it.key())) {
            v.add(where, "unknown field '" + it.key() + "'");
        }
    }
}

/// Same-padding output size: pad = floor(k/2).
int conv_out(int in, int k, int stride) { return (in + 2 * (k / 2) - k) / stride + 1; }

struct Expander {
    NetworkSpec& spec;
    Violations& v;
    int ch;  // channels flowing into the next node
    int h;
    int w;

    void push(LayerNode node) {
        node.out_h = h;
        node.out_w = w;
        spec.nodes.push_back(std::move(node));
    }

    void conv(const std::string& label, int in, int out, int k, int stride,
              std::optional<CpwcVariant> stage_cpwc, const std::string& where) {
        if (in != ch) {
            v.add(where, "in_channels " + std::to_string(in) + " does not match incoming " +
                             std::to_string(ch));
        }
        LayerNode node;
        node.kind = NodeKind::Conv;
        node.label = label;
        node.in_ch = in;
        node.out_ch = out;
        node.kh = node.kw = k;
        node.stride = stride;
        if (k == 1) {
            node.cpwc = stage_cpwc ? stage_cpwc : spec.cpwc;
        } else if (stage_cpwc) {
            v.add(where, "cpwc variant is only valid on 1x1 convolutions");
        }
        h = conv_out(h, k, stride);
        w = conv_out(w, k, stride);
        if (h < 1 || w < 1) {
            v.add(where, "spatial dims collapse to zero");
            h = std::max(h, 1);
            w = std::max(w, 1);
        }
        ch = out;
        push(std::move(node));
    }

    void norm(const std::string& label) {
        LayerNode node;
        node.kind = NodeKind::Norm;
        node.label = label;
        node.in_ch = node.out_ch = ch;
        push(std::move(node));
    }

    void add(const std::string& label) {
        LayerNode node;
        node.kind = NodeKind::Add;
        node.label = label;
        node.in_ch = node.out_ch = ch;
        push(std::move(node));
    }
};

std::optional<CpwcVariant> parse_stage_cpwc(const json& params, const std::string& where,
                                            Violations& v) {
    if (!params.contains("cpwc")) {
        return std::nullopt;
    }
    if (!params["cpwc"].is_string()) {
        v.add(where, "field 'cpwc' must be a variant name string");
        return std::nullopt;
    }
    auto variant = variant_from_string(params["cpwc"].get<std::string>());
    if (!variant) {
        v.add(where, "unknown cpwc variant '" + params["cpwc"].get<std::string>() + "'");
    }
    return variant;
}

void expand_stages(NetworkSpec& spec, Violations& v) {
    spec.nodes.clear();

    LayerNode input;
    input.kind = NodeKind::Input;
    input.label = "input";
    input.in_ch = input.out_ch = spec.in_channels;

    Expander ex{spec, v, spec.in_channels, spec.in_h, spec.in_w};
    ex.push(std::move(input));

    if (spec.stages.empty()) {
        v.add("", "no input node");
        return;
    }

    for (std::size_t si = 0; si < spec.stages.size(); ++si) {
        const StageSpec& stage = spec.stages[si];
        const std::string where = "stage " + std::to_string(si) + " (" + stage.block + ")";
        if (stage.repeat < 1) {
            v.add(where, "repeat must be >= 1");
            continue;
        }
        const json& params = stage.params;

        if (stage.block == "conv") {
            check_keys(params, {"in", "out", "kernel", "stride", "norm", "cpwc"}, where, v);
            const int declared_in = optional_int(params, "in", ex.ch, where, v);
            const int out = require_int(params, "out", where, v, ex.ch);
            const int k = require_int(params, "kernel", where, v, 1);
            const int stride = optional_int(params, "stride", 1, where, v);
            const bool with_norm =
                params.contains("norm") && params["norm"].is_boolean() && params["norm"].get<bool>();
            auto stage_cpwc = parse_stage_cpwc(params, where, v);
            for (int r = 0; r < stage.repeat; ++r) {
                const std::string tag =
                    "s" + std::to_string(si) +
                    (stage.repeat > 1 ? ".b" + std::to_string(r) : std::string());
                // repeated plain convs chain out->out after the first
                ex.conv(tag + ".conv", r == 0 ? declared_in : ex.ch, out, k, stride, stage_cpwc,
                        where);
                if (with_norm) {
                    ex.norm(tag + ".bn");
                }
            }
        } else if (stage.block == "bottleneck_v1" || stage.block == "bottleneck_v2") {
            check_keys(params, {"in", "mid", "out", "stride"}, where, v);
            const bool preact = stage.block == "bottleneck_v2";
            const int declared_in = optional_int(params, "in", ex.ch, where, v);
            const int mid = require_int(params, "mid", where, v, ex.ch);
            const int out = require_int(params, "out", where, v, ex.ch);
            const int stage_stride = optional_int(params, "stride", 1, where, v);
            for (int r = 0; r < stage.repeat; ++r) {
                const std::string tag = "s" + std::to_string(si) + ".b" + std::to_string(r);
                const int in = r == 0 ? declared_in : out;
                const int stride = r == 0 ? stage_stride : 1;
                const bool project = in != out || stride != 1;
                const int in_h = ex.h;
                const int in_w = ex.w;
                const int saved_ch = ex.ch;
                if (preact) {
                    ex.norm(tag + ".bn1");
                    ex.conv(tag + ".pwc1", in, mid, 1, 1, std::nullopt, where);
                    ex.norm(tag + ".bn2");
                    ex.conv(tag + ".conv2", mid, mid, 3, stride, std::nullopt, where);
                    ex.norm(tag + ".bn3");
                    ex.conv(tag + ".pwc2", mid, out, 1, 1, std::nullopt, where);
                } else {
                    ex.conv(tag + ".pwc1", in, mid, 1, 1, std::nullopt, where);
                    ex.norm(tag + ".bn1");
                    ex.conv(tag + ".conv2", mid, mid, 3, stride, std::nullopt, where);
                    ex.norm(tag + ".bn2");
                    ex.conv(tag + ".pwc2", mid, out, 1, 1, std::nullopt, where);
                    ex.norm(tag + ".bn3");
                }
                if (project) {
                    // Shortcut projection: restore the block's input geometry,
                    // emit the 1x1 projection, then restore the main path.
                    const int main_h = ex.h;
                    const int main_w = ex.w;
                    ex.ch = saved_ch;
                    ex.h = in_h;
                    ex.w = in_w;
                    ex.conv(tag + ".proj", in, out, 1, stride, std::nullopt, where);
                    if (!preact) {
                        ex.norm(tag + ".proj_bn");
                    }
                    if (ex.h != main_h || ex.w != main_w) {
                        v.add(where, "projection and main path disagree on spatial dims");
                    }
                    ex.h = main_h;
                    ex.w = main_w;
                }
                ex.add(tag + ".add");
            }
        } else if (stage.block == "norm") {
            check_keys(params, {}, where, v);
            for (int r = 0; r < stage.repeat; ++r) {
                ex.norm("s" + std::to_string(si) + ".bn");
            }
        } else if (stage.block == "pool") {
            check_keys(params, {"kind", "kernel", "stride"}, where, v);
            std::string kind = "max";
            if (params.contains("kind") && params["kind"].is_string()) {
                kind = params["kind"].get<std::string>();
            } else {
                v.add(where, "missing required field 'kind'");
            }
            LayerNode node;
            node.kind = NodeKind::Pool;
            node.label = "s" + std::to_string(si) + ".pool";
            node.in_ch = node.out_ch = ex.ch;
            if (kind == "global_avg") {
                node.global_pool = true;
                ex.h = 1;
                ex.w = 1;
            } else if (kind == "max") {
                const int k = require_int(params, "kernel", where, v, 2);
                const int stride = optional_int(params, "stride", k, where, v);
                node.kh = node.kw = k;
                node.stride = stride;
                ex.h = conv_out(ex.h, k, stride);
                ex.w = conv_out(ex.w, k, stride);
            } else {
                v.add(where, "unknown pool kind '" + kind + "'");
            }
            ex.push(std::move(node));
        } else if (stage.block == "fc") {
            check_keys(params, {"in", "out"}, where, v);
            const int in = optional_int(params, "in", ex.ch, where, v);
            const int out = require_int(params, "out", where, v, ex.ch);
            if (ex.h != 1 || ex.w != 1) {
                v.add(where, "fc requires 1x1 spatial input (add a global_avg pool first)");
            }
            if (in != ex.ch) {
                v.add(where, "in_channels " + std::to_string(in) + " does not match incoming " +
                                 std::to_string(ex.ch));
            }
            LayerNode node;
            node.kind = NodeKind::Fc;
            node.label = "s" + std::to_string(si) + ".fc";
            node.in_ch = in;
            node.out_ch = out;
            ex.ch = out;
            ex.push(std::move(node));
        } else {
            v.add(where, "unknown node kind '" + stage.block + "'");
        }
    }
}

std::string node_detail(const LayerNode& node) {
    char buf[128];
    switch (node.kind) {
        case NodeKind::Input:
            std::snprintf(buf, sizeof(buf), "input %dch", node.out_ch);
            break;
        case NodeKind::Conv:
            if (node.cpwc) {
                std::snprintf(buf, sizeof(buf), "cpwc[%s] %d->%d /%d",
                              std::string(to_string(*node.cpwc)).c_str(), node.in_ch, node.out_ch,
                              node.stride);
            } else {
                std::snprintf(buf, sizeof(buf), "%dx%d conv %d->%d /%d", node.kh, node.kw,
                              node.in_ch, node.out_ch, node.stride);
            }
            break;
        case NodeKind::Fc:
            std::snprintf(buf, sizeof(buf), "fc %d->%d", node.in_ch, node.out_ch);
            break;
        case NodeKind::Norm:
            std::snprintf(buf, sizeof(buf), "bn %dch", node.out_ch);
            break;
        case NodeKind::Pool:
            if (node.global_pool) {
                std::snprintf(buf, sizeof(buf), "global avgpool");
            } else {
                std::snprintf(buf, sizeof(buf), "maxpool %dx%d /%d", node.kh, node.kw, node.stride);
            }
            break;
        case NodeKind::Add:
            std::snprintf(buf, sizeof(buf), "add");
            break;
    }
    return buf;
}

}  // namespace

std::string_view to_string(NodeKind k) {
    switch (k) {
        case NodeKind::Input: return "input";
        case NodeKind::Conv: return "conv";
        case NodeKind::Fc: return "fc";
        case NodeKind::Norm: return "norm";
        case NodeKind::Pool: return "pool";
        case NodeKind::Add: return "add";
    }
    return "unknown";
}

SpecError::SpecError(std::vector<std::string> violations)
    : std::runtime_error("network spec has " + std::to_string(violations.size()) +
                         " violation(s): " + join(violations, "; ")),
      violations_(std::move(violations)) {}

NetworkSpec parse_spec_json(const nlohmann::json& doc) {
    Violations v;
    NetworkSpec spec;

    if (!doc.is_object()) {
        v.add("", "document must be a JSON object");
        v.raise_if_any();
    }
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        static const std::set<std::string> allowed = {"name", "input", "stages", "cpwc"};
        if (!allowed.count(it.key())) {
            v.add("", "unknown top-level field '" + it.key() + "'");
        }
    }

    if (doc.contains("name") && doc["name"].is_string()) {
        spec.name = doc["name"].get<std::string>();
    } else {
        v.add("", "missing required string field 'name'");
    }

    if (doc.contains("input") && doc["input"].is_object()) {
        const json& input = doc["input"];
        check_keys(input, {"channels", "height", "width"}, "input", v);
        spec.in_channels = require_int(input, "channels", "input", v, 1);
        spec.in_h = require_int(input, "height", "input", v, 1);
        spec.in_w = require_int(input, "width", "input", v, 1);
    } else {
        v.add("", "missing required object field 'input'");
    }

    if (doc.contains("cpwc")) {
        if (!doc["cpwc"].is_string()) {
            v.add("", "top-level 'cpwc' must be a variant name string");
        } else {
            spec.cpwc = variant_from_string(doc["cpwc"].get<std::string>());
            if (!spec.cpwc) {
                v.add("", "unknown cpwc variant '" + doc["cpwc"].get<std::string>() + "'");
            }
        }
    }

    if (doc.contains("stages") && doc["stages"].is_array()) {
        for (std::size_t i = 0; i < doc["stages"].size(); ++i) {
            const json& s = doc["stages"][i];
            const std::string where = "stage " + std::to_string(i);
            StageSpec stage;
            if (!s.is_object()) {
                v.add(where, "stage must be an object");
                continue;
            }
            check_keys(s, {"block", "params", "repeat"}, where, v);
            if (s.contains("block") && s["block"].is_string()) {
                stage.block = s["block"].get<std::string>();
            } else {
                v.add(where, "missing required string field 'block'");
            }
            stage.params = s.contains("params") ? s["params"] : json::object();
            if (!stage.params.is_object()) {
                v.add(where, "'params' must be an object");
                stage.params = json::object();
            }
            stage.repeat = 1;
            if (s.contains("repeat")) {
                if (!s["repeat"].is_number_integer() || s["repeat"].get<long long>() < 1) {
                    v.add(where, "'repeat' must be a positive integer");
                } else {
                    stage.repeat = s["repeat"].get<int>();
                }
            }
            spec.stages.push_back(std::move(stage));
        }
    } else {
        v.add("", "missing required array field 'stages'");
    }

    v.raise_if_any();
    expand_stages(spec, v);
    v.raise_if_any();
    return spec;
}

NetworkSpec parse_spec(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SpecError({std::string("invalid document: ") + e.what()});
    }
    return parse_spec_json(doc);
}

nlohmann::json spec_to_json(const NetworkSpec& spec) {
    json doc;
    doc["name"] = spec.name;
    doc["input"] = {{"channels", spec.in_channels}, {"height", spec.in_h}, {"width", spec.in_w}};
    if (spec.cpwc) {
        doc["cpwc"] = std::string(to_string(*spec.cpwc));
    }
    doc["stages"] = json::array();
    for (const StageSpec& stage : spec.stages) {
        json s;
        s["block"] = stage.block;
        s["params"] = stage.params;
        if (stage.repeat != 1) {
            s["repeat"] = stage.repeat;
        }
        doc["stages"].push_back(std::move(s));
    }
    return doc;
}

std::string serialize_spec(const NetworkSpec& spec) { return spec_to_json(spec).dump(2) + "\n"; }

const std::vector<std::string>& builtin_names() {
    static const std::vector<std::string> names = {"resnet164", "resnet50"};
    return names;
}

NetworkSpec builtin_spec(const std::string& name) {
    json doc;
    if (name == "resnet164") {
        doc = {
            {"name", "resnet164"},
            {"input", {{"channels", 3}, {"height", 32}, {"width", 32}}},
            {"stages",
             json::array(
                 {{{"block", "conv"},
                   {"params",
                    {{"in", 3}, {"out", 16}, {"kernel", 3}, {"stride", 1}, {"norm", false}}}},
                  {{"block", "bottleneck_v2"},
                   {"params", {{"in", 16}, {"mid", 16}, {"out", 64}, {"stride", 1}}},
                   {"repeat", 18}},
                  {{"block", "bottleneck_v2"},
                   {"params", {{"in", 64}, {"mid", 32}, {"out", 128}, {"stride", 2}}},
                   {"repeat", 18}},
                  {{"block", "bottleneck_v2"},
                   {"params", {{"in", 128}, {"mid", 64}, {"out", 256}, {"stride", 2}}},
                   {"repeat", 18}},
                  {{"block", "norm"}, {"params", json::object()}},
                  {{"block", "pool"}, {"params", {{"kind", "global_avg"}}}},
                  {{"block", "fc"}, {"params", {{"in", 256}, {"out", 100}}}}})},
        };
    } else if (name == "resnet50") {
        doc = {
            {"name", "resnet50"},
            {"input", {{"channels", 3}, {"height", 224}, {"width", 224}}},
            {"stages",
             json::array(
                 {{{"block", "conv"},
                   {"params",
                    {{"in", 3}, {"out", 64}, {"kernel", 7}, {"stride", 2}, {"norm", true}}}},
                  {{"block", "pool"}, {"params", {{"kind", "max"}, {"kernel", 3}, {"stride", 2}}}},
                  {{"block", "bottleneck_v1"},
                   {"params", {{"in", 64}, {"mid", 64}, {"out", 256}, {"stride", 1}}},
                   {"repeat", 3}},
                  {{"block", "bottleneck_v1"},
                   {"params", {{"in", 256}, {"mid", 128}, {"out", 512}, {"stride", 2}}},
                   {"repeat", 4}},
                  {{"block", "bottleneck_v1"},
                   {"params", {{"in", 512}, {"mid", 256}, {"out", 1024}, {"stride", 2}}},
                   {"repeat", 6}},
                  {{"block", "bottleneck_v1"},
                   {"params", {{"in", 1024}, {"mid", 512}, {"out", 2048}, {"stride", 2}}},
                   {"repeat", 3}},
                  {{"block", "pool"}, {"params", {{"kind", "global_avg"}}}},
                  {{"block", "fc"}, {"params", {{"in", 2048}, {"out", 1000}}}}})},
        };
    } else {
        throw SpecError({"unknown builtin network '" + name + "' (expected resnet164 or resnet50)"});
    }
    return parse_spec_json(doc);
}

NetworkSpec surgery(NetworkSpec spec, CpwcVariant variant) {
    spec.cpwc = variant;
    for (LayerNode& node : spec.nodes) {
        if (node.is_pwc()) {
            node.cpwc = variant;
        }
    }
    return spec;
}

CountReport count_network(const NetworkSpec& spec) {
    CountReport report;
    report.network = spec.name;
    report.rows.reserve(spec.nodes.size());
    for (const LayerNode& node : spec.nodes) {
        NodeCount row;
        row.label = node.label;
        row.kind = node.kind;
        row.detail = node_detail(node);
        row.out_h = node.out_h;
        row.out_w = node.out_w;
        switch (node.kind) {
            case NodeKind::Conv:
                if (node.cpwc) {
                    row.params = count_cpwc(node.in_ch, node.out_ch, *node.cpwc);
                    row.macs =
                        macs_cpwc(node.in_ch, node.out_ch, *node.cpwc, node.out_h, node.out_w);
                } else {
                    row.params = static_cast<long long>(node.kh) * node.kw * node.in_ch *
                                 node.out_ch;
                    row.macs = static_cast<long long>(node.out_h) * node.out_w * row.params;
                }
                break;
            case NodeKind::Fc:
                row.params = static_cast<long long>(node.in_ch) * node.out_ch + node.out_ch;
                row.macs = static_cast<long long>(node.in_ch) * node.out_ch;
                break;
            case NodeKind::Norm:
                row.params = 2LL * node.out_ch;
                row.macs = 0;
                break;
            default:
                break;
        }
        report.total_params += row.params;
        report.total_macs += row.macs;
        report.rows.push_back(std::move(row));
    }
    return report;
}

SurgeryComparison compare_surgery(const NetworkSpec& spec, CpwcVariant variant) {
    SurgeryComparison cmp;
    cmp.baseline = count_network(spec);
    cmp.modified = count_network(surgery(spec, variant));
    cmp.param_delta = cmp.modified.total_params - cmp.baseline.total_params;
    cmp.mac_delta = cmp.modified.total_macs - cmp.baseline.total_macs;
    return cmp;
}

std::string human_count(long long value) {
    char buf[32];
    if (value >= 1000000000LL) {
        std::snprintf(buf, sizeof(buf), "%.2fG", static_cast<double>(value) / 1e9);
    } else if (value >= 1000000LL) {
        std::snprintf(buf, sizeof(buf), "%.2fM", static_cast<double>(value) / 1e6);
    } else if (value >= 1000LL) {
        std::snprintf(buf, sizeof(buf), "%.2fK", static_cast<double>(value) / 1e3);
    } else {
        std::snprintf(buf, sizeof(buf), "%lld", value);
    }
    return buf;
}

std::string format_report(const CountReport& report) {
    std::ostringstream out;
    std::size_t label_w = 4;
    std::size_t detail_w = 6;
    for (const NodeCount& row : report.rows) {
        label_w = std::max(label_w, row.label.size());
        detail_w = std::max(detail_w, row.detail.size());
    }
    char line[512];
    std::snprintf(line, sizeof(line), "%-*s  %-*s  %9s  %14s  %14s\n",
                  static_cast<int>(label_w), "node", static_cast<int>(detail_w), "detail", "out",
                  "params", "macs");
    out << line;
    for (const NodeCount& row : report.rows) {
        char dims[32];
        std::snprintf(dims, sizeof(dims), "%dx%d", row.out_h, row.out_w);
        std::snprintf(line, sizeof(line), "%-*s  %-*s  %9s  %14lld  %14lld\n",
                      static_cast<int>(label_w), row.label.c_str(), static_cast<int>(detail_w),
                      row.detail.c_str(), dims, row.params, row.macs);
        out << line;
    }
    out << format_totals(report);
    return out.str();
}

std::string format_totals(const CountReport& report) {
    char line[256];
    std::snprintf(line, sizeof(line), "%s: total params %lld (%s), total macs %lld (%s)\n",
                  report.network.c_str(), report.total_params,
                  human_count(report.total_params).c_str(), report.total_macs,
                  human_count(report.total_macs).c_str());
    return line;
}

std::string format_comparison(const SurgeryComparison& cmp) {
    std::ostringstream out;
    char line[256];
    std::snprintf(line, sizeof(line), "%-28s  %10s  %10s\n", "model", "params", "macs");
    out << line;
    std::snprintf(line, sizeof(line), "%-28s  %10s  %10s\n",
                  (cmp.baseline.network + " (baseline)").c_str(),
                  human_count(cmp.baseline.total_params).c_str(),
                  human_count(cmp.baseline.total_macs).c_str());
    out << line;
    std::snprintf(line, sizeof(line), "%-28s  %10s  %10s\n",
                  (cmp.modified.network + " (modified)").c_str(),
                  human_count(cmp.modified.total_params).c_str(),
                  human_count(cmp.modified.total_macs).c_str());
    out << line;
    std::snprintf(line, sizeof(line), "%-28s  %+10lld  %+10lld\n", "delta", cmp.param_delta,
                  cmp.mac_delta);
    out << line;
    return out.str();
}

nlohmann::json report_to_json(const CountReport& report) {
    json doc;
    doc["network"] = report.network;
    doc["totals"] = {{"params", report.total_params}, {"macs", report.total_macs}};
    doc["nodes"] = json::array();
    for (const NodeCount& row : report.rows) {
        doc["nodes"].push_back({{"label", row.label},
                                {"kind", std::string(to_string(row.kind))},
                                {"detail", row.detail},
                                {"out_h", row.out_h},
                                {"out_w", row.out_w},
                                {"params", row.params},
                                {"macs", row.macs}});
    }
    return doc;
}

nlohmann::json comparison_to_json(const SurgeryComparison& cmp) {
    json doc;
    doc["baseline"] = report_to_json(cmp.baseline);
    doc["modified"] = report_to_json(cmp.modified);
    doc["delta"] = {{"params", cmp.param_delta}, {"macs", cmp.mac_delta}};
    return doc;
}

}  // namespace cpwc

#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cpwc/cpwc.hpp"

namespace cpwc {

enum class NodeKind { Input, Conv, Fc, Norm, Pool, Add };

std::string_view to_string(NodeKind k);

/// One expanded layer instance. Spatial dims are derived during expansion
/// under the same-padding convention (pad = floor(k/2)).
struct LayerNode {
    NodeKind kind = NodeKind::Input;
    std::string label;
    int in_ch = 0;
    int out_ch = 0;
    int kh = 1;
    int kw = 1;
    int stride = 1;
    bool global_pool = false;
    std::optional<CpwcVariant> cpwc;  // present on 1x1 conv nodes after surgery
    int out_h = 0;
    int out_w = 0;

    bool is_pwc() const { return kind == NodeKind::Conv && kh == 1 && kw == 1; }
};

/// One stage of the declarative document: a block kind, its raw parameters
/// and a repeat count. Stages expand deterministically into LayerNodes.
struct StageSpec {
    std::string block;
    nlohmann::json params;
    int repeat = 1;

    bool operator==(const StageSpec& o) const {
        return block == o.block && params == o.params && repeat == o.repeat;
    }
};

struct NetworkSpec {
    std::string name;
    int in_channels = 0;
    int in_h = 0;
    int in_w = 0;
    std::optional<CpwcVariant> cpwc;  // set by surgery; applies to every 1x1 conv node
    std::vector<StageSpec> stages;
    std::vector<LayerNode> nodes;  // derived, explicit block expansion

    bool operator==(const NetworkSpec& o) const {
        return name == o.name && in_channels == o.in_channels && in_h == o.in_h &&
               in_w == o.in_w && cpwc == o.cpwc && stages == o.stages;
    }
};

/// Carries every schema violation found, one message per problem, each with
/// the stage index and reason.
class SpecError : public std::runtime_error {
public:
    explicit SpecError(std::vector<std::string> violations);
    const std::vector<std::string>& violations() const { return violations_; }

private:
    std::vector<std::string> violations_;
};

NetworkSpec parse_spec(const std::string& text);
NetworkSpec parse_spec_json(const nlohmann::json& doc);
std::string serialize_spec(const NetworkSpec& spec);
nlohmann::json spec_to_json(const NetworkSpec& spec);

/// "resnet164" (3-stage CIFAR bottleneck net, 18 blocks per stage) or
/// "resnet50" (4-stage ImageNet bottleneck net, 3/4/6/3 blocks).
NetworkSpec builtin_spec(const std::string& name);
const std::vector<std::string>& builtin_names();

/// Replace every pointwise (1x1) convolution node with a contextual block of
/// the given variant. Channel and spatial propagation are unchanged.
NetworkSpec surgery(NetworkSpec spec, CpwcVariant variant);

struct NodeCount {
    std::string label;
    NodeKind kind = NodeKind::Input;
    std::string detail;
    int out_h = 0;
    int out_w = 0;
    long long params = 0;
    long long macs = 0;
};

struct CountReport {
    std::string network;
    std::vector<NodeCount> rows;  // parallel to NetworkSpec::nodes
    long long total_params = 0;
    long long total_macs = 0;
};

/// Parameter and multiply-accumulate tallies per node and in total.
/// Conventions: conv weights only (no bias), 2 affine parameters per
/// normalized channel, fc weights plus bias; MACs cover conv and fc nodes
/// at the spec's input resolution, batch 1.
CountReport count_network(const NetworkSpec& spec);

struct SurgeryComparison {
    CountReport baseline;
    CountReport modified;
    long long param_delta = 0;
    long long mac_delta = 0;
};

SurgeryComparison compare_surgery(const NetworkSpec& spec, CpwcVariant variant);

std::string format_report(const CountReport& report);
std::string format_totals(const CountReport& report);
std::string format_comparison(const SurgeryComparison& cmp);
nlohmann::json report_to_json(const CountReport& report);
nlohmann::json comparison_to_json(const SurgeryComparison& cmp);

/// "1.74M" / "0.25G" style rounding used in the text reports.
std::string human_count(long long value);

}  // namespace cpwc

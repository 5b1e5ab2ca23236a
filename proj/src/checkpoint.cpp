#include "ino/checkpoint.hpp"

#include <cmath>
#include <fstream>

#include "ino/array_io.hpp"
#include "ino/serialize.hpp"

namespace ino {

using nlohmann::json;

json layout_to_json(const ChannelLayout& layout) {
    auto groups_to_json = [](const std::vector<ChannelKind>& groups) {
        json arr = json::array();
        for (ChannelKind k : groups) arr.push_back(k == ChannelKind::vector2 ? "vector2" : "scalar");
        return arr;
    };
    return json{{"f", groups_to_json(layout.f_groups)}, {"u", groups_to_json(layout.u_groups)}};
}

ChannelLayout layout_from_json(const json& j) {
    auto groups_from_json = [](const json& arr) {
        std::vector<ChannelKind> groups;
        for (const auto& g : arr) {
            const std::string s = g.get<std::string>();
            if (s == "vector2") {
                groups.push_back(ChannelKind::vector2);
            } else if (s == "scalar") {
                groups.push_back(ChannelKind::scalar);
            } else {
                throw std::runtime_error("layout: unknown channel kind '" + s + "'");
            }
        }
        return groups;
    };
    ChannelLayout layout;
    layout.f_groups = groups_from_json(j.at("f"));
    layout.u_groups = groups_from_json(j.at("u"));
    return layout;
}

namespace {

constexpr int kFormatVersion = 1;

json config_to_json(const OperatorConfig& c, std::uint64_t seed) {
    json j;
    j["format_version"] = kFormatVersion;
    j["architecture"] = std::string(architecture_name(c.arch));
    j["layers"] = c.layers;
    j["tau"] = c.effective_tau();
    j["hidden_dim"] = c.hidden_dim;
    j["kernel_hidden"] = c.kernel_hidden;
    j["phi_hidden"] = c.effective_phi_hidden();
    j["layout"] = layout_to_json(c.layout);
    if (std::isfinite(c.radius)) j["radius"] = c.radius;
    j["seed"] = seed;
    return j;
}

}  // namespace

void save_checkpoint(const ModelParams& params, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    json manifest = config_to_json(params.config, params.init_seed);
    json plist = json::array();
    for (std::size_t i = 0; i < params.names.size(); ++i) {
        plist.push_back(json{{"name", params.names[i]}, {"shape", params.tensors[i].shape()}});
        write_array(dir / ("param_" + params.names[i] + ".bin"), params.tensors[i]);
    }
    manifest["params"] = std::move(plist);
    std::ofstream os(dir / "manifest");
    if (!os) throw std::runtime_error("save_checkpoint: cannot write manifest in " + dir.string());
    os << manifest.dump(2) << "\n";
}

ModelParams load_checkpoint(const std::filesystem::path& dir) {
    std::ifstream is(dir / "manifest");
    if (!is) throw std::runtime_error("load_checkpoint: missing manifest in " + dir.string());
    json manifest = json::parse(is);

    const int version = manifest.at("format_version").get<int>();
    if (version != kFormatVersion) {
        throw std::runtime_error("load_checkpoint: unsupported format version " + std::to_string(version));
    }

    OperatorConfig config;
    config.arch = architecture_from_name(manifest.at("architecture").get<std::string>());
    config.layers = manifest.at("layers").get<std::size_t>();
    config.tau = manifest.at("tau").get<double>();
    config.hidden_dim = manifest.at("hidden_dim").get<std::size_t>();
    config.kernel_hidden = manifest.at("kernel_hidden").get<std::vector<std::size_t>>();
    config.phi_hidden = manifest.at("phi_hidden").get<std::vector<std::size_t>>();
    config.layout = layout_from_json(manifest.at("layout"));
    if (manifest.contains("radius")) config.radius = manifest.at("radius").get<double>();
    config.validate();

    ModelParams reference = init_params(config, 0);  // names and shapes to validate against
    ModelParams out;
    out.config = config;
    out.init_seed = manifest.at("seed").get<std::uint64_t>();

    const json& plist = manifest.at("params");
    if (plist.size() != reference.names.size()) {
        throw std::runtime_error("load_checkpoint: manifest lists " + std::to_string(plist.size()) +
                                 " parameters, architecture needs " + std::to_string(reference.names.size()));
    }
    for (std::size_t i = 0; i < plist.size(); ++i) {
        const std::string name = plist[i].at("name").get<std::string>();
        if (name != reference.names[i]) {
            throw std::runtime_error("load_checkpoint: parameter '" + name + "' out of order; expected '" +
                                     reference.names[i] + "'");
        }
        Tensor t = read_array(dir / ("param_" + name + ".bin"));
        const auto declared = plist[i].at("shape").get<std::vector<std::size_t>>();
        if (t.shape() != declared || t.shape() != reference.tensors[i].shape()) {
            throw std::runtime_error("load_checkpoint: shape mismatch for parameter '" + name + "'");
        }
        out.names.push_back(name);
        out.tensors.push_back(std::move(t));
    }
    return out;
}

}  // namespace ino

#include "hic/io/config.hpp"

#include "hic/io/container.hpp"
#include "hic/numeric/rng.hpp"

namespace hic {
namespace {

using nlohmann::json;

template <typename T>
T value_of(const std::string& key, const json& v) {
    const bool ok = [&] {
        if constexpr (std::is_same_v<T, bool>)
            return v.is_boolean();
        else if constexpr (std::is_integral_v<T>)
            return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
        else if constexpr (std::is_floating_point_v<T>)
            return v.is_number();
        else
            return v.is_string();
    }();
    if (!ok) throw ConfigError(key, "has the wrong type");
    return v.get<T>();
}

std::vector<TaskId> domains_of(const std::string& key, const json& v) {
    try {
        if (v.is_string()) return parse_task_list(v.get<std::string>());
        if (v.is_array()) {
            std::vector<TaskId> out;
            for (const json& e : v) out.push_back(parse_task(value_of<std::string>(key, e)));
            return out;
        }
    } catch (const DomainError& e) {
        throw ConfigError(key, e.what());
    }
    throw ConfigError(key, "must be a comma list or an array of task names");
}

}  // namespace

void apply_config(const json& flat, RunConfig& c) {
    if (!flat.is_object()) throw ConfigError("<root>", "config must be a JSON object");
    for (const auto& [key, v] : flat.items()) {
        if (key == "seed") c.seed = value_of<std::uint64_t>(key, v);
        else if (key == "clips") c.synth.clips = value_of<std::size_t>(key, v);
        else if (key == "frames") c.synth.frames = value_of<std::size_t>(key, v);
        else if (key == "joints") c.synth.joints = value_of<std::size_t>(key, v);
        else if (key == "clusters") c.synth.clusters = value_of<std::size_t>(key, v);
        else if (key == "noise") c.synth.noise = value_of<double>(key, v);
        else if (key == "unit_to_mm") c.synth.unit_to_mm = value_of<double>(key, v);
        else if (key == "hidden") c.model.hidden = value_of<std::size_t>(key, v);
        else if (key == "layers") c.model.layers = value_of<std::size_t>(key, v);
        else if (key == "spatial_first") c.model.spatial_first = value_of<bool>(key, v);
        else if (key == "compress_bias_init") c.model.compress_bias_init = value_of<double>(key, v);
        else if (key == "learning_rate") c.train.learning_rate = value_of<double>(key, v);
        else if (key == "lr_decay") c.train.lr_decay = value_of<double>(key, v);
        else if (key == "steps") c.train.steps = value_of<std::size_t>(key, v);
        else if (key == "steps_per_epoch") c.train.steps_per_epoch = value_of<std::size_t>(key, v);
        else if (key == "batch_size") c.train.batch_size = value_of<std::size_t>(key, v);
        else if (key == "weight_decay") c.train.weight_decay = value_of<double>(key, v);
        else if (key == "beta1") c.train.beta1 = value_of<double>(key, v);
        else if (key == "beta2") c.train.beta2 = value_of<double>(key, v);
        else if (key == "epsilon") c.train.epsilon = value_of<double>(key, v);
        else if (key == "loss_position") c.train.loss.position = value_of<double>(key, v);
        else if (key == "loss_velocity") c.train.loss.velocity = value_of<double>(key, v);
        else if (key == "loss_shape") c.train.loss.shape = value_of<double>(key, v);
        else if (key == "domains") c.train.domains = domains_of(key, v);
        else if (key == "mask_ratio") c.train.mask_ratio = value_of<double>(key, v);
        else if (key == "train_soft_anchors") c.train.train_soft_anchors = value_of<bool>(key, v);
        else if (key == "domain_filter_retrieval") c.train.domain_filter_retrieval = value_of<bool>(key, v);
        else if (key == "k") c.k = value_of<std::size_t>(key, v);
        else if (key == "method") {
            try {
                c.method = parse_sampling_method(value_of<std::string>(key, v));
            } catch (const DomainError& e) {
                throw ConfigError(key, e.what());
            }
        } else
            throw ConfigError(key, "unknown key");
    }
    c.synth.validate();
    c.train.validate();
    if (c.model.hidden == 0) throw ConfigError("hidden", "must be positive");
    if (c.k == 0) throw ConfigError("k", "must be positive");
}

RunConfig load_config(const std::filesystem::path& path) {
    json flat;
    try {
        flat = json::parse(read_file(path));
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string(), std::string("not valid JSON: ") + e.what());
    }
    RunConfig c;
    apply_config(flat, c);
    return c;
}

json config_to_json(const RunConfig& c) {
    json domains = json::array();
    for (TaskId d : c.train.domains) domains.push_back(std::string(task_name(d)));
    return {{"seed", c.seed},
            {"clips", c.synth.clips},
            {"frames", c.synth.frames},
            {"joints", c.synth.joints},
            {"clusters", c.synth.clusters},
            {"noise", c.synth.noise},
            {"unit_to_mm", c.synth.unit_to_mm},
            {"hidden", c.model.hidden},
            {"layers", c.model.layers},
            {"spatial_first", c.model.spatial_first},
            {"compress_bias_init", c.model.compress_bias_init},
            {"learning_rate", c.train.learning_rate},
            {"lr_decay", c.train.lr_decay},
            {"steps", c.train.steps},
            {"steps_per_epoch", c.train.steps_per_epoch},
            {"batch_size", c.train.batch_size},
            {"weight_decay", c.train.weight_decay},
            {"beta1", c.train.beta1},
            {"beta2", c.train.beta2},
            {"epsilon", c.train.epsilon},
            {"loss_position", c.train.loss.position},
            {"loss_velocity", c.train.loss.velocity},
            {"loss_shape", c.train.loss.shape},
            {"domains", domains},
            {"mask_ratio", c.train.mask_ratio},
            {"train_soft_anchors", c.train.train_soft_anchors},
            {"domain_filter_retrieval", c.train.domain_filter_retrieval},
            {"k", c.k},
            {"method", sampling_method_name(c.method)}};
}

std::uint64_t stage_seed(const RunConfig& config, SeedTag tag) {
    return mix_seed(config.seed, static_cast<std::uint64_t>(tag));
}

}  // namespace hic

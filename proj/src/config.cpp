#include "glassvae/config.hpp"

#include <fstream>
#include <set>

#include "glassvae/errors.hpp"

namespace glassvae::config {

using nlohmann::json;

namespace {

// Reads known keys of one JSON object into fields; rejects anything else.
class Reader {
public:
    Reader(const json& j, std::string section) : j_(j), section_(std::move(section)) {
        if (!j_.is_object()) throw ArgumentError("config section '" + section_ + "' must be an object");
    }
    template <class T>
    Reader& get(const char* key, T& field) {
        seen_.insert(key);
        if (auto it = j_.find(key); it != j_.end() && !it->is_null()) {
            try {
                field = it->get<T>();
            } catch (const json::exception& e) {
                throw ArgumentError("config " + section_ + "." + key + ": " + e.what());
            }
        }
        return *this;
    }
    template <class T>
    Reader& get(const char* key, std::optional<T>& field) {
        seen_.insert(key);
        if (auto it = j_.find(key); it != j_.end()) {
            if (it->is_null()) field.reset();
            else {
                T v{};
                get(key, v);
                field = v;
            }
        }
        return *this;
    }
    void finish() const {
        for (const auto& [k, v] : j_.items())
            if (!seen_.count(k)) throw ArgumentError("unknown config key " + section_ + "." + k);
    }

private:
    const json& j_;
    std::string section_;
    std::set<std::string> seen_;
};

template <class T>
json opt(const std::optional<T>& v) {
    return v ? json(*v) : json(nullptr);
}

}  // namespace

json to_json(const model::ModelConfig& c) {
    return {{"hidden_dim", c.hidden_dim},
            {"latent_dim", c.latent_dim},
            {"n_mp_layers", c.n_mp_layers},
            {"n_edge_blocks", c.n_edge_blocks},
            {"species_count", c.species_count},
            {"edge_attr_dim", c.edge_attr_dim},
            {"energy_head_dims", c.energy_head_dims},
            {"n_atoms", c.n_atoms},
            {"slot_dim", c.slot_dim},
            {"pooling", c.pooling == model::Pooling::mean ? "mean" : "sum"},
            {"energy_offset", c.energy_offset},
            {"energy_scale", c.energy_scale},
            {"edge_shift", c.edge_shift},
            {"edge_scale", c.edge_scale},
            {"standardize_edges", c.standardize_edges},
            {"seed", c.seed}};
}

model::ModelConfig model_from_json(const json& j) {
    model::ModelConfig c;
    std::string pooling = "mean";
    Reader(j, "model")
        .get("hidden_dim", c.hidden_dim)
        .get("latent_dim", c.latent_dim)
        .get("n_mp_layers", c.n_mp_layers)
        .get("n_edge_blocks", c.n_edge_blocks)
        .get("species_count", c.species_count)
        .get("edge_attr_dim", c.edge_attr_dim)
        .get("energy_head_dims", c.energy_head_dims)
        .get("n_atoms", c.n_atoms)
        .get("slot_dim", c.slot_dim)
        .get("pooling", pooling)
        .get("energy_offset", c.energy_offset)
        .get("energy_scale", c.energy_scale)
        .get("edge_shift", c.edge_shift)
        .get("edge_scale", c.edge_scale)
        .get("standardize_edges", c.standardize_edges)
        .get("seed", c.seed)
        .finish();
    if (pooling == "mean") c.pooling = model::Pooling::mean;
    else if (pooling == "sum") c.pooling = model::Pooling::sum;
    else throw ArgumentError("model.pooling must be 'mean' or 'sum'");
    return c;
}

json to_json(const train::TrainConfig& c) {
    return {{"epochs", c.epochs},         {"batch_size", c.batch_size}, {"learning_rate", c.learning_rate},
            {"adam_beta1", c.adam_beta1}, {"adam_beta2", c.adam_beta2}, {"adam_eps", c.adam_eps},
            {"clip_norm", c.clip_norm},   {"seed", c.seed},             {"checkpoint_every", c.checkpoint_every},
            {"early_stop_patience", c.early_stop_patience}};
}

train::TrainConfig train_from_json(const json& j) {
    train::TrainConfig c;
    Reader(j, "train")
        .get("epochs", c.epochs)
        .get("batch_size", c.batch_size)
        .get("learning_rate", c.learning_rate)
        .get("adam_beta1", c.adam_beta1)
        .get("adam_beta2", c.adam_beta2)
        .get("adam_eps", c.adam_eps)
        .get("clip_norm", c.clip_norm)
        .get("seed", c.seed)
        .get("checkpoint_every", c.checkpoint_every)
        .get("early_stop_patience", c.early_stop_patience)
        .finish();
    return c;
}

json to_json(const loss::LossWeights& c) {
    return {{"alpha_node", c.alpha_node},
            {"alpha_edge", c.alpha_edge},
            {"alpha_energy", c.alpha_energy},
            {"beta_kl", c.beta_kl},
            {"alpha_rdf", c.alpha_rdf},
            {"lambda_cos", c.lambda_cos},
            {"node_loss", c.node_kind == loss::NodeLossKind::bce ? "bce" : "categorical"}};
}

loss::LossWeights loss_from_json(const json& j) {
    loss::LossWeights c;
    std::string kind = "bce";
    Reader(j, "loss")
        .get("alpha_node", c.alpha_node)
        .get("alpha_edge", c.alpha_edge)
        .get("alpha_energy", c.alpha_energy)
        .get("beta_kl", c.beta_kl)
        .get("alpha_rdf", c.alpha_rdf)
        .get("lambda_cos", c.lambda_cos)
        .get("node_loss", kind)
        .finish();
    if (kind == "bce") c.node_kind = loss::NodeLossKind::bce;
    else if (kind == "categorical") c.node_kind = loss::NodeLossKind::categorical;
    else throw ArgumentError("loss.node_loss must be 'bce' or 'categorical'");
    return c;
}

json to_json(const graph::RdfConfig& c) {
    return {{"r_max", opt(c.r_max)},
            {"bins", c.bins},
            {"mode", c.mode == graph::RdfMode::soft ? "soft" : "hard"},
            {"kernel_width", opt(c.kernel_width)}};
}

graph::RdfConfig rdf_from_json(const json& j) {
    graph::RdfConfig c;
    std::string mode = "soft";
    Reader(j, "rdf").get("r_max", c.r_max).get("bins", c.bins).get("mode", mode).get("kernel_width", c.kernel_width).finish();
    if (mode == "soft") c.mode = graph::RdfMode::soft;
    else if (mode == "hard") c.mode = graph::RdfMode::hard;
    else throw ArgumentError("rdf.mode must be 'soft' or 'hard'");
    return c;
}

json to_json(const gen::GenConfig& c) {
    return {{"gamma", c.gamma},   {"n_samples", c.n_samples}, {"e_min", opt(c.e_min)},
            {"e_max", opt(c.e_max)}, {"lambda_z", c.lambda_z}, {"steps", c.steps},
            {"refine_lr", c.refine_lr}, {"seed", c.seed},       {"prior", c.prior},
            {"stop_when_inside", c.stop_when_inside}};
}

gen::GenConfig gen_from_json(const json& j) {
    gen::GenConfig c;
    Reader(j, "generate")
        .get("gamma", c.gamma)
        .get("n_samples", c.n_samples)
        .get("e_min", c.e_min)
        .get("e_max", c.e_max)
        .get("lambda_z", c.lambda_z)
        .get("steps", c.steps)
        .get("refine_lr", c.refine_lr)
        .get("seed", c.seed)
        .get("prior", c.prior)
        .get("stop_when_inside", c.stop_when_inside)
        .finish();
    return c;
}

json to_json(const trajio::EnergyNormalizer& n) {
    return {{"e_min", n.e_min()}, {"e_max", n.e_max()}, {"lo", n.lo()}, {"hi", n.hi()}};
}

trajio::EnergyNormalizer normalizer_from_json(const json& j) {
    double e_min = 0, e_max = 0, lo = 0, hi = 100;
    Reader(j, "energy_norm").get("e_min", e_min).get("e_max", e_max).get("lo", lo).get("hi", hi).finish();
    return trajio::EnergyNormalizer(e_min, e_max, lo, hi);
}

json to_json(const trajio::SpeciesMap& s) {
    json j = json::object();
    for (const auto& [type, label] : s.types()) j[std::to_string(type)] = label;
    return j;
}

trajio::SpeciesMap species_from_json(const json& j) {
    std::map<int, std::string> types;
    for (const auto& [k, v] : j.items()) types[std::stoi(k)] = v.get<std::string>();
    return trajio::SpeciesMap(std::move(types));
}

RunConfig from_json(const json& j) {
    if (!j.is_object()) throw ArgumentError("config must be a JSON object");
    RunConfig c;
    for (const auto& [k, v] : j.items()) {
        if (k == "data") {
            Reader(v, "data")
                .get("cutoff", c.data.cutoff)
                .get("split_ratio", c.data.split_ratio)
                .get("max_per_temperature", c.data.max_per_temperature)
                .finish();
        } else if (k == "model") c.model = model_from_json(v);
        else if (k == "train") c.train = train_from_json(v);
        else if (k == "loss") c.loss = loss_from_json(v);
        else if (k == "rdf") c.rdf = rdf_from_json(v);
        else if (k == "generate") c.generate = gen_from_json(v);
        else if (k == "seed") c.seed = v.get<std::uint64_t>();
        else throw ArgumentError("unknown config section '" + k + "'");
    }
    return c;
}

json to_json(const RunConfig& c) {
    return {{"data", {{"cutoff", c.data.cutoff}, {"split_ratio", c.data.split_ratio},
                      {"max_per_temperature", c.data.max_per_temperature}}},
            {"model", to_json(c.model)},
            {"train", to_json(c.train)},
            {"loss", to_json(c.loss)},
            {"rdf", to_json(c.rdf)},
            {"generate", to_json(c.generate)},
            {"seed", c.seed}};
}

RunConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError("invalid config " + path.string() + ": " + e.what(), 0);
    }
    if (j.is_object() && j.contains("config") && j.contains("tool_version")) return from_json(j.at("config"));
    return from_json(j);
}

}  // namespace glassvae::config

#include "glassvae/model.hpp"

#include <array>
#include <cmath>
#include <limits>

#include "glassvae/errors.hpp"

namespace glassvae::model {

using ad::Tensor;
using ad::Var;

void ModelConfig::validate() const {
    if (hidden_dim == 0 || latent_dim == 0 || n_mp_layers == 0 || n_edge_blocks == 0 || species_count == 0 ||
        n_atoms == 0 || slot_dim == 0)
        throw ArgumentError("model dimensions must be >= 1");
    if (edge_attr_dim != 4) throw ArgumentError("edge_attr_dim must be 4 (delta plus distance)");
    for (auto d : energy_head_dims)
        if (d == 0) throw ArgumentError("energy head widths must be >= 1");
    if (latent_dim < 8 || latent_dim > 64)
        throw ArgumentError("latent_dim " + std::to_string(latent_dim) + " outside [8, 64]");
    if (edge_shift.size() != 4 || edge_scale.size() != 4) throw ArgumentError("edge standardization needs 4 entries");
    for (std::size_t k = 0; k < 4; ++k)
        if (!std::isfinite(edge_shift[k]) || !(edge_scale[k] > 0.0) || !std::isfinite(edge_scale[k]))
            throw ArgumentError("edge standardization must be finite with positive scales");
    if (!std::isfinite(energy_offset) || !std::isfinite(energy_scale) || energy_scale == 0.0)
        throw ArgumentError("energy_scale must be finite and nonzero");
}

std::vector<std::string> ModelConfig::warnings() const {
    std::vector<std::string> out;
    if (latent_dim < 16 || latent_dim > 32)
        out.push_back("latent_dim " + std::to_string(latent_dim) + " outside the recommended [16, 32]");
    return out;
}

namespace {

// Parameter layout: (name, rows, cols, kind). kind 0 = weight, 1 = bias, 2 = embedding.
struct Spec {
    std::string name;
    std::size_t rows, cols;
    int kind;
};

std::vector<Spec> layout(const ModelConfig& c) {
    const std::size_t H = c.hidden_dim, Z = c.latent_dim, S = c.species_count, A = c.edge_attr_dim;
    std::vector<Spec> out;
    auto linear = [&](const std::string& n, std::size_t in, std::size_t o) {
        out.push_back({n + ".W", in, o, 0});
        out.push_back({n + ".b", 1, o, 1});
    };
    linear("enc.embed", S, H);
    for (std::size_t l = 0; l < c.n_mp_layers; ++l) {
        const std::string p = "enc.mp" + std::to_string(l);
        linear(p + ".msg1", H + A, H);
        linear(p + ".msg2", H, H);
        linear(p + ".upd1", 2 * H, H);
        linear(p + ".upd2", H, H);
    }
    linear("enc.graph", H, H);
    linear("enc.mu", H, Z);
    linear("enc.logvar", H, Z);
    linear("edge.embed", A, H);
    for (std::size_t l = 0; l < c.n_edge_blocks; ++l) {
        const std::string p = "edge.block" + std::to_string(l);
        linear(p + ".fc1", H, H);
        linear(p + ".fc2", H, H);
    }
    out.push_back({"dec.slot", c.n_atoms, c.slot_dim, 2});
    const std::size_t U = Z + c.slot_dim;
    linear("dec.node", U, S);
    out.push_back({"dec.node_slot", c.n_atoms, S, 1});
    linear("dec.pos1", U, H);
    linear("dec.pos2", H, 3);
    linear("dec.edge1", Z + 4, H);
    linear("dec.edge2", H, 4);
    std::size_t in = Z + H;
    for (std::size_t l = 0; l < c.energy_head_dims.size(); ++l) {
        linear("energy.fc" + std::to_string(l), in, c.energy_head_dims[l]);
        in = c.energy_head_dims[l];
    }
    linear("energy.out", in, 1);
    return out;
}

}  // namespace

ModelParams ModelParams::zeros(const ModelConfig& config) {
    config.validate();
    ModelParams p;
    p.config_ = config;
    for (const auto& s : layout(config)) p.tensors_.push_back({s.name, Tensor::zeros(s.rows, s.cols)});
    return p;
}

ModelParams ModelParams::init(const ModelConfig& config) {
    ModelParams p = zeros(config);
    std::mt19937_64 rng(config.seed);
    const auto specs = layout(config);
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto& s = specs[i];
        if (s.kind == 1) continue;
        const double limit = s.kind == 0 ? std::sqrt(6.0 / static_cast<double>(s.rows + s.cols)) : 1.0;
        std::uniform_real_distribution<double> u(-limit, limit);
        for (double& v : p.tensors_[i].value.values()) v = u(rng);
    }
    return p;
}

std::size_t ModelParams::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < tensors_.size(); ++i)
        if (tensors_[i].name == name) return i;
    throw LookupError("no parameter named " + std::string(name));
}

Tensor& ModelParams::get(std::string_view name) { return tensors_[index_of(name)].value; }
const Tensor& ModelParams::get(std::string_view name) const { return tensors_[index_of(name)].value; }

std::size_t ModelParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.value.size();
    return n;
}

// ---------------------------------------------------------------------------

void fit_edge_standardization(ModelConfig& config, std::span<const graph::ConfigGraph> graphs) {
    std::array<double, 4> sum{}, sq{};
    std::size_t n = 0;
    for (const auto& g : graphs)
        for (const auto& e : g.edge_attrs) {
            const std::array<double, 4> a{e.delta[0], e.delta[1], e.delta[2], e.dist};
            for (std::size_t k = 0; k < 4; ++k) sum[k] += a[k];
            ++n;
        }
    if (n < 2) throw ArgumentError("edge standardization needs at least two edges");
    for (std::size_t k = 0; k < 4; ++k) sum[k] /= static_cast<double>(n);
    for (const auto& g : graphs)
        for (const auto& e : g.edge_attrs) {
            const std::array<double, 4> a{e.delta[0], e.delta[1], e.delta[2], e.dist};
            for (std::size_t k = 0; k < 4; ++k) sq[k] += (a[k] - sum[k]) * (a[k] - sum[k]);
        }
    for (std::size_t k = 0; k < 4; ++k) {
        const double sd = std::sqrt(sq[k] / static_cast<double>(n - 1));
        config.edge_shift[k] = sum[k];
        config.edge_scale[k] = sd > 1e-12 ? sd : 1.0;
    }
}

GraphBatch make_batch(std::span<const graph::ConfigGraph* const> graphs) {
    if (graphs.empty()) throw ArgumentError("empty batch");
    GraphBatch b;
    b.n_graphs = graphs.size();
    b.n_species = graphs.front()->n_species;
    std::size_t pairs = 0;
    for (const auto* g : graphs) {
        if (g->n_species != b.n_species) throw ShapeError("species count differs within batch");
        b.n_nodes += g->n_nodes;
        b.n_edges += g->n_edges();
        pairs += g->n_nodes * (g->n_nodes - 1) / 2;
    }
    b.node_features = Tensor::zeros(b.n_nodes, b.n_species);
    b.ref_positions = Tensor::zeros(b.n_nodes, 3);
    b.edge_attrs = Tensor::zeros(b.n_edges, 4);
    b.edge_box = Tensor::zeros(b.n_edges, 3);
    b.pair_box = Tensor::zeros(pairs, 3);
    b.node_graph.reserve(b.n_nodes);
    b.node_slot.reserve(b.n_nodes);
    b.edge_src.reserve(b.n_edges);
    b.edge_dst.reserve(b.n_edges);
    b.edge_graph.reserve(b.n_edges);
    b.pair_i.reserve(pairs);
    b.pair_j.reserve(pairs);
    b.pair_graph.reserve(pairs);

    std::size_t node_off = 0, edge_off = 0, pair_off = 0;
    for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
        const auto& g = *graphs[gi];
        const auto gid = static_cast<std::uint32_t>(gi);
        b.boxes.push_back(g.box);
        b.energy.push_back(g.energy_norm.value_or(std::numeric_limits<double>::quiet_NaN()));
        b.nodes_per_graph.push_back(g.n_nodes);
        for (std::size_t i = 0; i < g.n_nodes; ++i) {
            for (std::size_t s = 0; s < b.n_species; ++s)
                b.node_features.at(node_off + i, s) = g.node_features[i * b.n_species + s];
            for (int a = 0; a < 3; ++a) b.ref_positions.at(node_off + i, a) = g.reference_positions[i][a];
            b.node_graph.push_back(gid);
            b.node_slot.push_back(static_cast<std::uint32_t>(i));
        }
        for (std::size_t e = 0; e < g.n_edges(); ++e) {
            const auto [i, j] = g.edge_index[e];
            b.edge_src.push_back(static_cast<std::uint32_t>(node_off + i));
            b.edge_dst.push_back(static_cast<std::uint32_t>(node_off + j));
            b.edge_graph.push_back(gid);
            for (int a = 0; a < 3; ++a) {
                b.edge_attrs.at(edge_off + e, a) = g.edge_attrs[e].delta[a];
                b.edge_box.at(edge_off + e, a) = g.box[a];
            }
            b.edge_attrs.at(edge_off + e, 3) = g.edge_attrs[e].dist;
        }
        for (std::size_t i = 0; i < g.n_nodes; ++i)
            for (std::size_t j = i + 1; j < g.n_nodes; ++j) {
                b.pair_i.push_back(static_cast<std::uint32_t>(node_off + i));
                b.pair_j.push_back(static_cast<std::uint32_t>(node_off + j));
                b.pair_graph.push_back(gid);
                for (int a = 0; a < 3; ++a) b.pair_box.at(pair_off, a) = g.box[a];
                ++pair_off;
            }
        node_off += g.n_nodes;
        edge_off += g.n_edges();
    }
    return b;
}

GraphBatch make_batch(const graph::ConfigGraph& graph) {
    const graph::ConfigGraph* one[] = {&graph};
    return make_batch(std::span<const graph::ConfigGraph* const>(one, 1));
}

// ---------------------------------------------------------------------------

ParamBinding::ParamBinding(ad::Tape& tape, const ModelParams& params, bool requires_grad)
    : tape_(&tape), params_(&params) {
    vars_.reserve(params.tensors().size());
    for (const auto& t : params.tensors()) vars_.push_back(tape.leaf(t.value, requires_grad));
}

Var ParamBinding::operator()(std::string_view name) const { return vars_[params_->index_of(name)]; }

namespace {

Var linear(const ParamBinding& p, const std::string& name, Var x) {
    return ad::add(ad::matmul(x, p(name + ".W")), p(name + ".b"));
}

Var mlp2(const ParamBinding& p, const std::string& a, const std::string& b, Var x) {
    return linear(p, b, ad::silu(linear(p, a, x)));
}

// x [n x 4] mapped to (x - shift) / scale as x·D + c.
Var standardize(Var x, const ModelConfig& cfg) {
    Tensor d = Tensor::zeros(4, 4), c = Tensor::zeros(1, 4);
    for (std::size_t k = 0; k < 4; ++k) {
        d.at(k, k) = 1.0 / cfg.edge_scale[k];
        c[k] = -cfg.edge_shift[k] / cfg.edge_scale[k];
    }
    auto& tape = *x.tape;
    return ad::add(ad::matmul(x, tape.constant(std::move(d))), tape.constant(std::move(c)));
}

Var pool(Var x, const std::vector<std::uint32_t>& ids, std::size_t n, Pooling mode) {
    return mode == Pooling::mean ? ad::segment_mean(x, ids, n) : ad::segment_sum(x, ids, n);
}

}  // namespace

EncoderVars encode_vars(const ParamBinding& p, const GraphBatch& batch) {
    const auto& cfg = p.params().config();
    if (batch.n_species != cfg.species_count)
        throw ShapeError("batch has " + std::to_string(batch.n_species) + " species, model expects " +
                         std::to_string(cfg.species_count));
    {
        std::vector<std::size_t> edges(batch.n_graphs, 0);
        for (auto g : batch.edge_graph) ++edges[g];
        for (std::size_t g = 0; g < batch.n_graphs; ++g)
            if (edges[g] == 0) throw DegenerateGraphError("graph has no edges within the cutoff");
    }
    auto& tape = p.tape();
    const Var x = tape.constant(batch.node_features);
    const Var a = standardize(tape.constant(batch.edge_attrs), cfg);

    Var h = ad::silu(linear(p, "enc.embed", x));
    for (std::size_t l = 0; l < cfg.n_mp_layers; ++l) {
        const std::string pre = "enc.mp" + std::to_string(l);
        const Var hj = ad::index_gather(h, batch.edge_dst);
        const Var msg = mlp2(p, pre + ".msg1", pre + ".msg2", ad::concat({hj, a}));
        const Var agg = ad::segment_mean(msg, batch.edge_src, batch.n_nodes);
        h = ad::add(h, mlp2(p, pre + ".upd1", pre + ".upd2", ad::concat({h, agg})));
    }
    const Var g = pool(h, batch.node_graph, batch.n_graphs, cfg.pooling);
    const Var t = ad::silu(linear(p, "enc.graph", g));

    Var e = ad::silu(linear(p, "edge.embed", a));
    for (std::size_t l = 0; l < cfg.n_edge_blocks; ++l) {
        const std::string pre = "edge.block" + std::to_string(l);
        e = ad::add(e, mlp2(p, pre + ".fc1", pre + ".fc2", e));
    }
    const Var s = pool(e, batch.edge_graph, batch.n_graphs, cfg.pooling);
    return {linear(p, "enc.mu", t), linear(p, "enc.logvar", t), s};
}

Var reparameterize(Var mu, Var log_var, const Tensor& eps) {
    if (eps.rows() != mu.rows() || eps.cols() != mu.cols())
        throw ShapeError("eps shape " + ad::shape_str(eps.shape()) + " does not match mu");
    const Var sigma = ad::exp(ad::scalar_mul(log_var, 0.5));
    return ad::add(mu, ad::mul(sigma, mu.tape->constant(eps)));
}

DecoderVars decode_vars(const ParamBinding& p, Var z, const GraphBatch& batch) {
    const auto& cfg = p.params().config();
    if (z.cols() != cfg.latent_dim || z.rows() != batch.n_graphs)
        throw ShapeError("latent of shape [" + std::to_string(z.rows()) + " x " + std::to_string(z.cols()) +
                         "] does not fit batch of " + std::to_string(batch.n_graphs) + " graphs, d_z " +
                         std::to_string(cfg.latent_dim));
    if (batch.n_species != cfg.species_count) throw ShapeError("template species count does not match model");
    for (auto n : batch.nodes_per_graph)
        if (n > cfg.n_atoms)
            throw ShapeError("template has " + std::to_string(n) + " atoms, model supports " +
                             std::to_string(cfg.n_atoms));
    auto& tape = p.tape();
    const Var z_node = ad::index_gather(z, batch.node_graph);
    const Var slot = ad::index_gather(p("dec.slot"), batch.node_slot);
    const Var u = ad::concat({z_node, slot});

    const Var logits = ad::add(linear(p, "dec.node", u), ad::index_gather(p("dec.node_slot"), batch.node_slot));
    const Var probs = ad::softmax(logits);
    const Var disp = mlp2(p, "dec.pos1", "dec.pos2", u);
    const Var pos = ad::add(tape.constant(batch.ref_positions), disp);

    const Var diff = ad::sub(ad::index_gather(pos, batch.edge_src), ad::index_gather(pos, batch.edge_dst));
    const Var pre = ad::min_image(diff, batch.edge_box);
    const Var pre_d = ad::l2_norm(pre);
    const Var geom = standardize(ad::concat({pre, pre_d}), cfg);
    const Var corr = mlp2(p, "dec.edge1", "dec.edge2", ad::concat({ad::index_gather(z, batch.edge_graph), geom}));
    const Var delta = ad::add(pre, ad::slice_cols(corr, 0, 3));
    const Var dist = ad::add(pre_d, ad::slice_cols(corr, 3, 4));
    return {probs, pos, delta, dist};
}

Var energy_vars(const ParamBinding& p, Var code, Var s) {
    const auto& cfg = p.params().config();
    Var x = ad::concat({code, s});
    for (std::size_t l = 0; l < cfg.energy_head_dims.size(); ++l)
        x = ad::silu(linear(p, "energy.fc" + std::to_string(l), x));
    return ad::add_scalar(ad::scalar_mul(linear(p, "energy.out", x), cfg.energy_scale), cfg.energy_offset);
}

ForwardVars forward(const ParamBinding& p, const GraphBatch& batch, const Tensor& eps) {
    ForwardVars f;
    f.enc = encode_vars(p, batch);
    f.z = reparameterize(f.enc.mu, f.enc.log_var, eps);
    f.dec = decode_vars(p, f.z, batch);
    f.energy = energy_vars(p, f.enc.mu, f.enc.s);
    return f;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> row_vec(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

LatentCode encode_with(const graph::ConfigGraph& graph, const ModelParams& params, std::vector<double> eps) {
    ad::Tape tape;
    const ParamBinding p(tape, params, false);
    const auto batch = make_batch(graph);
    const auto enc = encode_vars(p, batch);
    const std::size_t dz = params.config().latent_dim;
    const Var z = reparameterize(enc.mu, enc.log_var, Tensor::matrix(1, dz, eps));
    LatentCode c;
    c.mu = row_vec(enc.mu.value());
    c.log_var = row_vec(enc.log_var.value());
    c.z = row_vec(z.value());
    c.eps = std::move(eps);
    c.s = row_vec(enc.s.value());
    return c;
}

}  // namespace

LatentCode encode(const graph::ConfigGraph& graph, const ModelParams& params, std::mt19937_64& rng) {
    std::normal_distribution<double> n01(0.0, 1.0);
    std::vector<double> eps(params.config().latent_dim);
    for (double& e : eps) e = n01(rng);
    return encode_with(graph, params, std::move(eps));
}

LatentCode encode_mean(const graph::ConfigGraph& graph, const ModelParams& params) {
    return encode_with(graph, params, std::vector<double>(params.config().latent_dim, 0.0));
}

ReconstructionOutput decode(const LatentCode& code, const graph::ConfigGraph& templ, const ModelParams& params) {
    const auto& cfg = params.config();
    if (code.z.size() != cfg.latent_dim)
        throw ShapeError("latent length " + std::to_string(code.z.size()) + " != d_z " + std::to_string(cfg.latent_dim));
    ad::Tape tape;
    const ParamBinding p(tape, params, false);
    const auto batch = make_batch(templ);
    const auto dec = decode_vars(p, tape.constant(Tensor::row(code.z)), batch);

    ReconstructionOutput out;
    out.n_nodes = batch.n_nodes;
    out.n_species = batch.n_species;
    out.node_probs = row_vec(dec.node_probs.value());
    const auto& pos = dec.positions.value();
    for (std::size_t i = 0; i < batch.n_nodes; ++i) out.positions_hat.push_back({pos.at(i, 0), pos.at(i, 1), pos.at(i, 2)});
    const auto& dl = dec.edge_delta.value();
    for (std::size_t e = 0; e < batch.n_edges; ++e) {
        out.edge_delta_hat.push_back({dl.at(e, 0), dl.at(e, 1), dl.at(e, 2)});
        out.edge_dist_hat.push_back(dec.edge_dist.value()[e]);
    }
    if (code.mu.size() == cfg.latent_dim && code.s.size() == cfg.hidden_dim) out.energy_hat = predict_energy(code, params);
    else out.energy_hat = std::numeric_limits<double>::quiet_NaN();
    return out;
}

double predict_energy(const LatentCode& code, const ModelParams& params) {
    const auto& cfg = params.config();
    if (code.mu.size() != cfg.latent_dim || code.s.size() != cfg.hidden_dim)
        throw ShapeError("latent code does not match model dimensions");
    ad::Tape tape;
    const ParamBinding p(tape, params, false);
    return energy_vars(p, tape.constant(Tensor::row(code.mu)), tape.constant(Tensor::row(code.s))).value().item();
}

}  // namespace glassvae::model

#include "glassvae/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "glassvae/errors.hpp"

namespace glassvae::loss {

using ad::Tensor;
using ad::Var;

void LossWeights::validate() const {
    for (double w : {alpha_node, alpha_edge, alpha_energy, beta_kl, alpha_rdf, lambda_cos})
        if (!(w >= 0.0) || !std::isfinite(w)) throw ArgumentError("loss weights must be finite and >= 0");
}

double node_loss(std::span<const double> probs, std::span<const double> onehot, std::size_t n_species) {
    if (probs.size() != onehot.size() || n_species == 0 || probs.size() % n_species != 0)
        throw ShapeError("node_loss: probabilities (" + std::to_string(probs.size()) + ") and targets (" +
                         std::to_string(onehot.size()) + ") differ in shape");
    if (probs.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double p = std::clamp(probs[i], kProbEps, 1.0 - kProbEps);
        const double y = onehot[i];
        acc -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    }
    return acc / static_cast<double>(probs.size());
}

double edge_loss(std::span<const Vec3> delta_hat, std::span<const double> dist_hat, std::span<const Vec3> delta,
                 std::span<const double> dist, double lambda_cos, std::size_t* degenerate) {
    const std::size_t n = delta.size();
    if (delta_hat.size() != n || dist_hat.size() != n || dist.size() != n)
        throw ShapeError("edge_loss: edge counts differ");
    std::size_t bad = 0;
    double acc = 0.0;
    for (std::size_t e = 0; e < n; ++e) {
        const double dd = dist_hat[e] - dist[e];
        const double na = norm(delta_hat[e]), nb = norm(delta[e]);
        double cos = 0.0;
        if (na < 1e-12 || nb < 1e-12) ++bad;
        else cos = dot(delta_hat[e], delta[e]) / (na * nb);
        acc += dd * dd + lambda_cos * (1.0 - cos);
    }
    if (degenerate) *degenerate = bad;
    return n ? acc / static_cast<double>(n) : 0.0;
}

double energy_loss(std::span<const double> e_hat, std::span<const double> e_true) {
    if (e_hat.size() != e_true.size()) throw ShapeError("energy_loss: batch sizes differ");
    if (e_hat.empty()) return 0.0;
    double acc = 0.0;
    for (std::size_t i = 0; i < e_hat.size(); ++i) acc += (e_hat[i] - e_true[i]) * (e_hat[i] - e_true[i]);
    return acc / static_cast<double>(e_hat.size());
}

double kl_loss(std::span<const double> mu, std::span<const double> log_var) {
    if (mu.size() != log_var.size()) throw ShapeError("kl_loss: mu and log_var lengths differ");
    double acc = 0.0;
    for (std::size_t k = 0; k < mu.size(); ++k) acc += 1.0 + log_var[k] - mu[k] * mu[k] - std::exp(log_var[k]);
    return -0.5 * acc;
}

double rdf_loss(std::span<const Vec3> positions_hat, std::span<const Vec3> positions_true, const Vec3& box,
                const graph::RdfConfig& config) {
    if (positions_hat.size() != positions_true.size()) throw ShapeError("rdf_loss: atom counts differ");
    if (config.mode != graph::RdfMode::soft) throw ArgumentError("rdf_loss requires soft histograms");
    const auto a = graph::compute_rdf(positions_hat, box, config);
    const auto b = graph::compute_rdf(positions_true, box, config);
    double acc = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) acc += (a.values[i] - b.values[i]) * (a.values[i] - b.values[i]);
    return acc;
}

LossBreakdown total_loss(const LossBreakdown& parts, const LossWeights& weights) {
    const std::pair<const char*, double> named[] = {
        {"node", parts.node}, {"edge", parts.edge}, {"energy", parts.energy}, {"kl", parts.kl}, {"rdf", parts.rdf}};
    for (const auto& [name, v] : named)
        if (!std::isfinite(v)) throw DivergenceError(name, "value " + std::to_string(v));
    LossBreakdown out = parts;
    out.total = weights.alpha_node * parts.node + weights.alpha_edge * parts.edge +
                weights.alpha_energy * parts.energy + weights.beta_kl * parts.kl + weights.alpha_rdf * parts.rdf;
    return out;
}

// ---------------------------------------------------------------------------

namespace {

Var one_minus(Var x) { return ad::add_scalar(ad::scalar_mul(x, -1.0), 1.0); }

void same_shape(Var a, Var b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeError(std::string(what) + ": shapes " + ad::shape_str(a.value().shape()) + " and " +
                         ad::shape_str(b.value().shape()) + " differ");
}

}  // namespace

Var node_loss(Var probs, Var onehot, NodeLossKind kind) {
    same_shape(probs, onehot, "node_loss");
    const Var p = ad::clamp(probs, kProbEps, 1.0 - kProbEps);
    if (kind == NodeLossKind::categorical)
        return ad::scalar_mul(ad::sum(ad::mul(onehot, ad::log(p))), -1.0 / static_cast<double>(probs.rows()));
    const Var pos = ad::mul(onehot, ad::log(p));
    const Var neg = ad::mul(one_minus(onehot), ad::log(one_minus(p)));
    return ad::scalar_mul(ad::mean(ad::add(pos, neg)), -1.0);
}

Var edge_loss(Var delta_hat, Var dist_hat, Var delta, Var dist, double lambda_cos) {
    same_shape(delta_hat, delta, "edge_loss");
    same_shape(dist_hat, dist, "edge_loss");
    const Var mse = ad::mean(ad::square(ad::sub(dist_hat, dist)));
    const Var cos = ad::mean(ad::cosine_similarity(delta_hat, delta));
    return ad::add(mse, ad::scalar_mul(one_minus(cos), lambda_cos));
}

Var energy_loss(Var e_hat, Var e_true) {
    same_shape(e_hat, e_true, "energy_loss");
    return ad::mean(ad::square(ad::sub(e_hat, e_true)));
}

Var kl_loss(Var mu, Var log_var) {
    same_shape(mu, log_var, "kl_loss");
    const Var inner = ad::sub(ad::add_scalar(log_var, 1.0), ad::add(ad::square(mu), ad::exp(log_var)));
    return ad::scalar_mul(ad::sum(inner), -0.5 / static_cast<double>(mu.rows()));
}

namespace {

Var pair_distances(Var positions, const model::GraphBatch& batch) {
    const Var diff = ad::sub(ad::index_gather(positions, batch.pair_i), ad::index_gather(positions, batch.pair_j));
    return ad::l2_norm(ad::min_image(diff, batch.pair_box));
}

}  // namespace

Var rdf_loss(Var positions_hat, const model::GraphBatch& batch, double r_max, std::size_t bins, double sigma) {
    auto& tape = *positions_hat.tape;
    const Var hat = ad::soft_histogram(pair_distances(positions_hat, batch), batch.pair_graph, batch.n_graphs, r_max,
                                       bins, sigma);
    const Var truth = ad::soft_histogram(pair_distances(tape.constant(batch.ref_positions), batch), batch.pair_graph,
                                         batch.n_graphs, r_max, bins, sigma);
    return ad::scalar_mul(ad::sum(ad::square(ad::sub(hat, tape.constant(truth.value())))),
                          1.0 / static_cast<double>(batch.n_graphs));
}

std::pair<double, double> batch_rdf_params(const model::GraphBatch& batch, const graph::RdfConfig& config) {
    if (batch.boxes.empty()) throw ArgumentError("empty batch");
    Vec3 smallest = batch.boxes.front();
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : batch.boxes) {
        const double m = std::min({b[0], b[1], b[2]});
        if (m < best) {
            best = m;
            smallest = b;
        }
    }
    return graph::resolve_rdf(config, smallest);
}

LossVars objective(const model::ForwardVars& f, const model::GraphBatch& batch, const LossWeights& weights,
                   const graph::RdfConfig& rdf) {
    weights.validate();
    auto& tape = *f.z.tape;
    LossVars v;
    v.node = node_loss(f.dec.node_probs, tape.constant(batch.node_features), weights.node_kind);

    const Tensor& attrs = batch.edge_attrs;
    Tensor delta = Tensor::zeros(batch.n_edges, 3), dist = Tensor::zeros(batch.n_edges, 1);
    for (std::size_t e = 0; e < batch.n_edges; ++e) {
        for (std::size_t a = 0; a < 3; ++a) delta.at(e, a) = attrs.at(e, a);
        dist[e] = attrs.at(e, 3);
    }
    v.edge = edge_loss(f.dec.edge_delta, f.dec.edge_dist, tape.constant(std::move(delta)), tape.constant(std::move(dist)),
                       weights.lambda_cos);

    std::vector<std::uint32_t> known;
    std::vector<double> targets;
    for (std::size_t g = 0; g < batch.n_graphs; ++g)
        if (std::isfinite(batch.energy[g])) {
            known.push_back(static_cast<std::uint32_t>(g));
            targets.push_back(batch.energy[g]);
        }
    if (known.empty()) {
        v.energy = tape.constant(Tensor::scalar(0.0));
    } else {
        const std::size_t m = known.size();
        v.energy = energy_loss(ad::index_gather(f.energy, std::move(known)), tape.constant(Tensor::matrix(m, 1, targets)));
    }

    v.kl = kl_loss(f.enc.mu, f.enc.log_var);

    if (rdf.mode != graph::RdfMode::soft) throw ArgumentError("rdf loss requires soft histograms");
    const auto [r_max, sigma] = batch_rdf_params(batch, rdf);
    v.rdf = rdf_loss(f.dec.positions, batch, r_max, rdf.bins, sigma);

    v.total = ad::add(
        ad::add(ad::add(ad::scalar_mul(v.node, weights.alpha_node), ad::scalar_mul(v.edge, weights.alpha_edge)),
                ad::add(ad::scalar_mul(v.energy, weights.alpha_energy), ad::scalar_mul(v.kl, weights.beta_kl))),
        ad::scalar_mul(v.rdf, weights.alpha_rdf));
    return v;
}

LossBreakdown breakdown(const LossVars& v) {
    const std::pair<const char*, Var> named[] = {
        {"node", v.node}, {"edge", v.edge}, {"energy", v.energy}, {"kl", v.kl}, {"rdf", v.rdf}, {"total", v.total}};
    for (const auto& [name, var] : named) {
        const double x = var.value().item();
        if (!std::isfinite(x)) throw DivergenceError(name, "value " + std::to_string(x));
    }
    return {v.node.value().item(), v.edge.value().item(), v.energy.value().item(),
            v.kl.value().item(),   v.rdf.value().item(),  v.total.value().item()};
}

nlohmann::json to_json(const LossBreakdown& b) {
    return {{"node", b.node}, {"edge", b.edge}, {"energy", b.energy}, {"kl", b.kl}, {"rdf", b.rdf}, {"total", b.total}};
}

}  // namespace glassvae::loss

#include "glassvae/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>

#include "glassvae/checkpoint.hpp"
#include "glassvae/errors.hpp"

namespace glassvae::train {

using ad::Tensor;

void TrainConfig::validate() const {
    if (epochs == 0) throw ArgumentError("epochs must be >= 1");
    if (batch_size == 0) throw ArgumentError("batch_size must be >= 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ArgumentError("learning_rate must be >= 0");
    if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0))
        throw ArgumentError("Adam betas must lie in (0, 1)");
    if (!(adam_eps > 0.0)) throw ArgumentError("adam_eps must be > 0");
    if (!(clip_norm > 0.0)) throw ArgumentError("clip_norm must be > 0");
}

AdamState AdamState::zeros_like(const model::ModelParams& params) {
    AdamState s;
    for (const auto& t : params.tensors()) {
        s.m.emplace_back(t.value.shape());
        s.v.emplace_back(t.value.shape());
    }
    return s;
}

void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state, double lr, double beta1,
               double beta2, double eps) {
    if (grads.size() != params.size()) throw ShapeError("adam_step: parameter and gradient counts differ");
    if (state.m.empty()) {
        for (const auto& p : params) {
            state.m.emplace_back(p.shape());
            state.v.emplace_back(p.shape());
        }
    }
    if (state.m.size() != params.size()) throw ShapeError("adam_step: optimizer state does not match parameters");
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(beta1, t);
    const double c2 = 1.0 - std::pow(beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto p = params[i].values();
        const auto g = grads[i].values();
        auto m = state.m[i].values();
        auto v = state.v[i].values();
        if (g.size() != p.size() || m.size() != p.size()) throw ShapeError("adam_step: tensor sizes differ");
        for (std::size_t k = 0; k < p.size(); ++k) {
            m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
            v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
            const double mh = m[k] / c1;
            const double vh = v[k] / c2;
            p[k] -= lr * mh / (std::sqrt(vh) + eps);
        }
    }
}

std::vector<graph::ConfigGraph> build_graphs(const trajio::Dataset& dataset, std::optional<trajio::Split> which,
                                             double cutoff) {
    if (dataset.species.empty()) throw ArgumentError("dataset carries no species map");
    std::vector<std::size_t> idx;
    if (which) idx = dataset.indices(*which);
    else {
        idx.resize(dataset.configs.size());
        std::iota(idx.begin(), idx.end(), 0);
    }
    std::vector<graph::ConfigGraph> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(graph::build_graph(dataset.configs[i], cutoff, dataset.energy_norm, dataset.species));
    return out;
}

void append_log_row(std::ostream& out, const EpochLog& r) {
    const auto prec = out.precision(17);
    out << r.epoch << ',' << r.loss.node << ',' << r.loss.edge << ',' << r.loss.energy << ',' << r.loss.kl << ','
        << r.loss.rdf << ',' << r.loss.total << '\n';
    out.precision(prec);
}

namespace {

std::mt19937_64 epoch_rng(std::uint64_t seed, std::size_t epoch) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(epoch), 0x5eedu};
    return std::mt19937_64(seq);
}

ckpt::Checkpoint make_checkpoint(const TrainState& st, const TrainConfig& cfg, const TrainOptions& opt) {
    return {st.params, st.adam, st.epoch, cfg, opt.weights, opt.rdf, opt.cutoff, opt.normalizer, opt.species};
}

ad::Var* term_slot(loss::LossVars& v, const std::string& name) {
    if (name == "node") return &v.node;
    if (name == "edge") return &v.edge;
    if (name == "energy") return &v.energy;
    if (name == "kl") return &v.kl;
    if (name == "rdf") return &v.rdf;
    if (name == "total") return &v.total;
    throw ArgumentError("unknown loss term '" + name + "'");
}

}  // namespace

TrainResult train(std::span<const graph::ConfigGraph> graphs, const model::ModelConfig& model_config,
                  const TrainConfig& config, const TrainOptions& opt) {
    config.validate();
    opt.weights.validate();
    if (graphs.empty()) throw ArgumentError("training set is empty");

    TrainResult res;
    if (opt.resume) {
        res.state = *opt.resume;
        if (res.state.adam.m.empty()) res.state.adam = AdamState::zeros_like(res.state.params);
    } else {
        auto mc = model_config;
        if (mc.standardize_edges) model::fit_edge_standardization(mc, graphs);
        mc.validate();
        res.state.params = model::ModelParams::init(mc);
        res.state.adam = AdamState::zeros_like(res.state.params);
    }
    auto& st = res.state;
    if (st.epoch >= config.epochs)
        throw ArgumentError("already trained for " + std::to_string(st.epoch) + " epochs; raise epochs to continue");
    if (opt.inject_nan_term) {
        loss::LossVars probe;
        term_slot(probe, *opt.inject_nan_term);
    }

    std::ofstream log;
    if (opt.out_dir) {
        std::filesystem::create_directories(*opt.out_dir);
        const auto path = *opt.out_dir / "train_log.csv";
        const bool append = opt.resume && std::filesystem::exists(path);
        log.open(path, append ? std::ios::app : std::ios::trunc);
        if (!log) throw IoError("cannot write " + path.string());
        if (!append) log << kLogHeader << '\n';
    }

    const std::size_t n = graphs.size();
    const std::size_t bs = std::min(config.batch_size, n);
    const std::size_t dz = st.params.config().latent_dim;
    double best = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;

    for (std::size_t epoch = st.epoch + 1; epoch <= config.epochs; ++epoch) {
        auto rng = epoch_rng(config.seed, epoch);
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        std::normal_distribution<double> n01(0.0, 1.0);

        EpochLog row;
        row.epoch = epoch;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += bs) {
            const std::size_t end = std::min(n, start + bs);
            std::vector<const graph::ConfigGraph*> members;
            for (std::size_t k = start; k < end; ++k) members.push_back(&graphs[order[k]]);
            const auto batch = model::make_batch(members);
            Tensor eps = Tensor::zeros(batch.n_graphs, dz);
            for (double& e : eps.values()) e = n01(rng);

            ad::Tape tape;
            const model::ParamBinding bind(tape, st.params, true);
            const auto fwd = model::forward(bind, batch, eps);
            auto vars = loss::objective(fwd, batch, opt.weights, opt.rdf);
            if (opt.inject_nan_term && st.adam.step >= opt.inject_nan_step) {
                ad::Var* slot = term_slot(vars, *opt.inject_nan_term);
                *slot = ad::add_scalar(*slot, std::numeric_limits<double>::quiet_NaN());
            }
            loss::LossBreakdown br;
            try {
                br = loss::breakdown(vars);
            } catch (const DivergenceError& e) {
                std::string where = "step " + std::to_string(st.adam.step + 1) + ", epoch " + std::to_string(epoch);
                if (opt.out_dir) {
                    const auto path = *opt.out_dir / "last_good.ckpt";
                    TrainState good = st;
                    good.epoch = epoch - 1;
                    ckpt::save(path, make_checkpoint(good, config, opt));
                    where += "; last good checkpoint: " + path.string();
                } else if (res.checkpoint) {
                    where += "; last good checkpoint: " + res.checkpoint->string();
                }
                throw DivergenceError(e.term(), where);
            }
            tape.backward(vars.total);

            std::vector<Tensor> grads;
            grads.reserve(bind.vars().size());
            for (const auto& v : bind.vars()) grads.push_back(v.grad());
            const double pre = ad::clip_global_norm(grads, config.clip_norm);
            const double post = ad::global_norm(grads);
            row.max_grad_norm = std::max(row.max_grad_norm, pre);
            row.max_clipped_norm = std::max(row.max_clipped_norm, post);

            std::vector<Tensor> values;
            values.reserve(grads.size());
            for (auto& t : st.params.tensors()) values.push_back(std::move(t.value));
            adam_step(values, grads, st.adam, config.learning_rate, config.adam_beta1, config.adam_beta2,
                      config.adam_eps);
            for (std::size_t i = 0; i < values.size(); ++i) st.params.tensors()[i].value = std::move(values[i]);

            row.loss.node += br.node;
            row.loss.edge += br.edge;
            row.loss.energy += br.energy;
            row.loss.kl += br.kl;
            row.loss.rdf += br.rdf;
            row.loss.total += br.total;
            ++batches;
        }
        const double inv = 1.0 / static_cast<double>(batches);
        for (double* v : {&row.loss.node, &row.loss.edge, &row.loss.energy, &row.loss.kl, &row.loss.rdf, &row.loss.total})
            *v *= inv;
        row.step = st.adam.step;
        st.epoch = epoch;
        res.log.push_back(row);

        if (log) {
            append_log_row(log, row);
            log.flush();
        }
        if (opt.progress) {
            *opt.progress << "epoch " << epoch << '/' << config.epochs << " step " << row.step
                          << " total " << row.loss.total << " node " << row.loss.node << " edge " << row.loss.edge
                          << " energy " << row.loss.energy << " kl " << row.loss.kl << " rdf " << row.loss.rdf << '\n';
        }
        if (opt.on_epoch) opt.on_epoch(row);
        if (opt.out_dir && config.checkpoint_every && epoch % config.checkpoint_every == 0 && epoch != config.epochs) {
            res.checkpoint = *opt.out_dir / "checkpoint.ckpt";
            ckpt::save(*res.checkpoint, make_checkpoint(st, config, opt));
        }
        if (config.early_stop_patience) {
            if (row.loss.total < best * (1.0 - 1e-4)) {
                best = row.loss.total;
                since_best = 0;
            } else if (++since_best >= config.early_stop_patience) {
                res.early_stopped = true;
                break;
            }
        }
    }
    if (opt.out_dir) {
        res.checkpoint = *opt.out_dir / "model.ckpt";
        ckpt::save(*res.checkpoint, make_checkpoint(st, config, opt));
    }
    return res;
}

Predictions predict(std::span<const graph::ConfigGraph> graphs, const model::ModelParams& params,
                    const trajio::EnergyNormalizer& normalizer, std::size_t batch_size) {
    Predictions p;
    const std::size_t dz = params.config().latent_dim;
    for (std::size_t start = 0; start < graphs.size(); start += batch_size) {
        const std::size_t end = std::min(graphs.size(), start + batch_size);
        std::vector<const graph::ConfigGraph*> members;
        for (std::size_t k = start; k < end; ++k) members.push_back(&graphs[k]);
        const auto batch = model::make_batch(members);
        p.n_species = batch.n_species;
        ad::Tape tape;
        const model::ParamBinding bind(tape, params, false);
        const auto f = model::forward(bind, batch, Tensor::zeros(batch.n_graphs, dz));
        for (std::size_t g = 0; g < batch.n_graphs; ++g) {
            if (!std::isfinite(batch.energy[g])) continue;
            const double atoms = static_cast<double>(batch.nodes_per_graph[g]);
            p.energy_true.push_back(normalizer.denormalize(batch.energy[g]) / atoms);
            p.energy_pred.push_back(normalizer.denormalize(f.energy.value()[g]) / atoms);
        }
        for (std::size_t e = 0; e < batch.n_edges; ++e) {
            p.dist_true.push_back(batch.edge_attrs.at(e, 3));
            p.dist_pred.push_back(f.dec.edge_dist.value()[e]);
        }
        const auto& probs = f.dec.node_probs.value().values();
        p.node_probs.insert(p.node_probs.end(), probs.begin(), probs.end());
        const auto& hot = batch.node_features.values();
        p.node_onehot.insert(p.node_onehot.end(), hot.begin(), hot.end());
    }
    return p;
}

metrics::MetricsReport evaluate(std::span<const graph::ConfigGraph> graphs, const model::ModelParams& params,
                                const trajio::EnergyNormalizer& normalizer) {
    if (graphs.empty()) throw ArgumentError("evaluation split is empty");
    const auto p = predict(graphs, params, normalizer);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    auto safe_r2 = [&](const std::vector<double>& pred, const std::vector<double>& truth) {
        try {
            return metrics::r2(pred, truth);
        } catch (const ArgumentError&) {
            return nan;
        }
    };
    metrics::MetricsReport r;
    r.n_samples = graphs.size();
    r.n_edges = p.dist_true.size();
    r.energy_rmse = p.energy_true.empty() ? nan : metrics::rmse(p.energy_pred, p.energy_true);
    r.energy_r2 = p.energy_true.empty() ? nan : safe_r2(p.energy_pred, p.energy_true);
    r.dist_rmse = p.dist_true.empty() ? nan : metrics::rmse(p.dist_pred, p.dist_true);
    r.dist_r2 = p.dist_true.empty() ? nan : safe_r2(p.dist_pred, p.dist_true);
    r.node_bce = loss::node_loss(p.node_probs, p.node_onehot, p.n_species);
    std::size_t hits = 0;
    const std::size_t nodes = p.node_probs.size() / p.n_species;
    for (std::size_t i = 0; i < nodes; ++i) {
        const auto row = std::span(p.node_probs).subspan(i * p.n_species, p.n_species);
        const auto hot = std::span(p.node_onehot).subspan(i * p.n_species, p.n_species);
        const auto a = std::max_element(row.begin(), row.end()) - row.begin();
        const auto b = std::max_element(hot.begin(), hot.end()) - hot.begin();
        hits += a == b;
    }
    r.species_accuracy = static_cast<double>(hits) / static_cast<double>(nodes);
    return r;
}

}  // namespace glassvae::train

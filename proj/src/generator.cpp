#include "glassvae/generator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "glassvae/errors.hpp"

namespace glassvae::gen {

using ad::Tensor;

void GenConfig::validate() const {
    if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ArgumentError("gamma must be >= 0");
    if (steps == 0) throw ArgumentError("steps must be >= 1");
    if (!(lambda_z >= 0.0)) throw ArgumentError("lambda_z must be >= 0");
    if (!(refine_lr > 0.0)) throw ArgumentError("refine_lr must be > 0");
    if (e_min && e_max && !(*e_min <= *e_max)) throw ArgumentError("e_min must not exceed e_max");
}

double latent_energy(const model::ModelParams& params, std::span<const double> z, std::span<const double> s,
                     std::vector<double>* grad) {
    const auto& cfg = params.config();
    if (z.size() != cfg.latent_dim || s.size() != cfg.hidden_dim) throw ShapeError("latent code does not match model");
    ad::Tape tape;
    const model::ParamBinding bind(tape, params, false);
    const auto zv = tape.leaf(Tensor::row(z), grad != nullptr);
    const auto e = model::energy_vars(bind, zv, tape.constant(Tensor::row(s)));
    if (grad) {
        tape.backward(e);
        grad->assign(zv.grad().values().begin(), zv.grad().values().end());
    }
    return e.value().item();
}

namespace {

double per_atom(const trajio::EnergyNormalizer& n, double norm_value, std::size_t atoms) {
    return n.denormalize(norm_value) / static_cast<double>(atoms);
}

}  // namespace

std::vector<Sample> sample_random(const model::ModelParams& params, const graph::ConfigGraph& anchor,
                                  const GenConfig& config, const trajio::EnergyNormalizer& normalizer,
                                  std::mt19937_64& rng) {
    config.validate();
    const auto base = model::encode_mean(anchor, params);
    const std::size_t dz = base.mu.size();
    std::normal_distribution<double> n01(0.0, 1.0);
    std::vector<Sample> out;
    out.reserve(config.n_samples);
    for (std::size_t k = 0; k < config.n_samples; ++k) {
        model::LatentCode code = base;
        code.eps.assign(dz, 0.0);
        for (std::size_t i = 0; i < dz; ++i) {
            const double e = n01(rng);
            if (config.prior) {
                code.mu[i] = 0.0;
                code.log_var[i] = 0.0;
                code.eps[i] = e;
                code.z[i] = e;
            } else {
                code.eps[i] = config.gamma * e;
                code.z[i] = base.mu[i] + std::exp(0.5 * base.log_var[i]) * code.eps[i];
            }
        }
        Sample s;
        s.structure = model::decode(code, anchor, params);
        s.energy_norm = latent_energy(params, code.z, code.s);
        s.structure.energy_hat = s.energy_norm;
        s.energy_ev_per_atom = per_atom(normalizer, s.energy_norm, anchor.n_nodes);
        s.code = std::move(code);
        out.push_back(std::move(s));
    }
    return out;
}

Refinement generate_conditional(const model::ModelParams& params, const graph::ConfigGraph& anchor,
                                const GenConfig& config, const trajio::EnergyNormalizer& normalizer) {
    config.validate();
    if (!config.e_min || !config.e_max) throw ArgumentError("conditional generation needs e_min and e_max");
    if (normalizer.degenerate()) throw ArgumentError("energy normalizer has a zero range");
    const double atoms = static_cast<double>(anchor.n_nodes);
    const double lo = normalizer.normalize(*config.e_min * atoms);
    const double hi = normalizer.normalize(*config.e_max * atoms);
    const double lambda = config.lambda_z;

    const auto anchor_code = model::encode_mean(anchor, params);
    const auto& s = anchor_code.s;
    std::vector<double> z = anchor_code.mu;
    const std::size_t dz = z.size();

    struct Eval {
        double energy, hinge, objective;
        std::vector<double> grad;
    };
    auto evaluate = [&](const std::vector<double>& x, bool with_grad) {
        Eval e;
        std::vector<double> ge;
        e.energy = latent_energy(params, x, s, with_grad ? &ge : nullptr);
        const double below = std::max(lo - e.energy, 0.0);
        const double above = std::max(e.energy - hi, 0.0);
        e.hinge = below * below + above * above;
        double zz = 0.0;
        for (double v : x) zz += v * v;
        e.objective = e.hinge + lambda * zz;
        if (with_grad) {
            e.grad.resize(dz);
            const double dh = -2.0 * below + 2.0 * above;
            for (std::size_t i = 0; i < dz; ++i) e.grad[i] = dh * ge[i] + 2.0 * lambda * x[i];
        }
        return e;
    };
    auto norm2 = [](const std::vector<double>& v) {
        double a = 0.0;
        for (double x : v) a += x * x;
        return a;
    };

    Refinement r;
    auto record = [&](const Eval& e, std::size_t step) {
        if (!std::isfinite(e.objective) || !std::isfinite(e.energy))
            throw RefinementError(step, "objective " + std::to_string(e.objective));
        r.objective.push_back(e.objective);
        r.hinge.push_back(e.hinge);
        r.energy_trace.push_back(e.energy);
        r.z_norm.push_back(std::sqrt(norm2(z)));
    };

    Eval cur = evaluate(z, true);
    record(cur, 0);
    double alpha = config.refine_lr;
    constexpr double kArmijo = 1e-4;
    std::size_t t = 0;
    for (; t < config.steps; ++t) {
        if (config.stop_when_inside && cur.hinge == 0.0) break;
        const double gg = norm2(cur.grad);
        if (gg == 0.0) break;
        // Backtracking from twice the last accepted step.
        double step = t == 0 ? config.refine_lr : 2.0 * alpha;
        bool accepted = false;
        std::vector<double> trial(dz);
        Eval next;
        for (int halvings = 0; halvings < 80; ++halvings, step *= 0.5) {
            for (std::size_t i = 0; i < dz; ++i) trial[i] = z[i] - step * cur.grad[i];
            next = evaluate(trial, true);
            if (std::isfinite(next.objective) && next.objective <= cur.objective - kArmijo * step * gg) {
                accepted = true;
                break;
            }
        }
        if (!accepted) break;  // no decrease representable in double precision
        alpha = step;
        z = trial;
        cur = std::move(next);
        record(cur, t + 1);
    }
    r.steps_taken = t;
    r.z = z;

    model::LatentCode code = anchor_code;
    code.mu = z;
    code.z = z;
    code.eps.assign(dz, 0.0);
    r.structure = model::decode(code, anchor, params);
    r.energy_norm = cur.energy;
    r.structure.energy_hat = cur.energy;
    r.energy_ev_per_atom = per_atom(normalizer, cur.energy, anchor.n_nodes);
    r.in_target = cur.energy >= lo && cur.energy <= hi;
    return r;
}

std::vector<LatentRow> export_latents(const model::ModelParams& params, std::span<const graph::ConfigGraph> graphs,
                                      const trajio::EnergyNormalizer& normalizer) {
    std::vector<LatentRow> rows;
    rows.reserve(graphs.size());
    for (const auto& g : graphs) {
        LatentRow row;
        row.frame_id = g.frame_id;
        row.mu = model::encode_mean(g, params).mu;
        row.energy = g.energy_norm ? per_atom(normalizer, *g.energy_norm, g.n_nodes)
                                   : std::numeric_limits<double>::quiet_NaN();
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_latents_csv(std::ostream& out, std::span<const LatentRow> rows) {
    const auto prec = out.precision(17);
    const std::size_t d = rows.empty() ? 0 : rows.front().mu.size();
    out << "frame_id";
    for (std::size_t k = 0; k < d; ++k) out << ",mu_" << k;
    out << ",energy_ev_per_atom\n";
    for (const auto& r : rows) {
        out << r.frame_id;
        for (double v : r.mu) out << ',' << v;
        out << ',';
        if (std::isfinite(r.energy)) out << r.energy;
        out << '\n';
    }
    out.precision(prec);
}

trajio::AtomicConfiguration to_configuration(const model::ReconstructionOutput& out, const graph::ConfigGraph& anchor,
                                             const trajio::SpeciesMap& species, std::int64_t frame_id) {
    if (species.size() != out.n_species) throw ShapeError("species map does not match the model's species count");
    trajio::AtomicConfiguration c;
    c.box = anchor.box;
    c.frame_id = frame_id;
    c.temperature_tag = anchor.temperature_tag;
    for (std::size_t i = 0; i < out.n_nodes; ++i) {
        const auto row = std::span(out.node_probs).subspan(i * out.n_species, out.n_species);
        const auto k = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
        c.species.push_back(species.labels()[k]);
        Vec3 r{};
        for (int a = 0; a < 3; ++a) r[a] = wrap_coordinate(out.positions_hat[i][a], anchor.box[a]);
        c.positions.push_back(r);
    }
    return c;
}

}  // namespace glassvae::gen

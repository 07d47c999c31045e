#include "glassvae/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "glassvae/checkpoint.hpp"
#include "glassvae/config.hpp"
#include "glassvae/errors.hpp"
#include "glassvae/generator.hpp"
#include "glassvae/invariance.hpp"
#include "glassvae/metrics.hpp"
#include "glassvae/synthetic.hpp"
#include "glassvae/trainer.hpp"
#include "glassvae/trajio.hpp"

namespace glassvae::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum class Verbosity { quiet, info, debug };

Verbosity verbosity_from_env() {
    const char* v = std::getenv("GLASSVAE_LOG");
    if (!v) return Verbosity::info;
    const std::string s(v);
    if (s == "quiet" || s == "0" || s == "error") return Verbosity::quiet;
    if (s == "debug" || s == "2") return Verbosity::debug;
    return Verbosity::info;
}

struct Context {
    std::ostream& out;
    std::ostream& err;
    Verbosity level;
    std::vector<std::string> argv;

    bool info() const { return level != Verbosity::quiet; }
    bool debug() const { return level == Verbosity::debug; }
};

// Flags shared by every subcommand that reads the run configuration.
struct Common {
    std::string config_path;
    std::uint64_t seed = 0;
    CLI::Option* seed_opt = nullptr;
    std::string out_dir;
};

void add_common(CLI::App* sub, Common& c, bool out_required = true) {
    sub->add_option("--config", c.config_path, "JSON run config (or a previous run's manifest.json)")
        ->check(CLI::ExistingFile);
    c.seed_opt = sub->add_option("--seed", c.seed, "Seed for every random stream of the run");
    auto* o = sub->add_option("--out", c.out_dir, "Output directory");
    if (out_required) o->required();
}

config::RunConfig resolve_config(const Common& c) {
    config::RunConfig rc = c.config_path.empty() ? config::RunConfig{} : config::load(c.config_path);
    if (c.seed_opt && c.seed_opt->count()) {
        rc.seed = c.seed;
        rc.model.seed = c.seed;
        rc.train.seed = c.seed;
        rc.generate.seed = c.seed;
    }
    return rc;
}

void write_text_atomic(const fs::path& path, const std::string& text) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot write " + tmp.string());
        f << text;
        if (!f) throw IoError("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot write " + path.string());
    f << std::setprecision(17);
    return f;
}

void write_manifest(const Context& ctx, const std::string& command, const Common& c, const config::RunConfig& rc,
                    const json& inputs) {
    fs::create_directories(c.out_dir);
    json m = {{"tool_version", kToolVersion},
              {"command", command},
              {"argv", ctx.argv},
              {"config_path", c.config_path.empty() ? json(nullptr) : json(c.config_path)},
              {"config", config::to_json(rc)},
              {"seed", rc.seed},
              {"out", c.out_dir},
              {"inputs", inputs}};
    write_text_atomic(fs::path(c.out_dir) / "manifest.json", m.dump(2) + "\n");
}

std::string fmt(double v, int precision = 6) {
    std::ostringstream s;
    s << std::setprecision(precision) << v;
    return s.str();
}

// "path" or "path@T"; T is the temperature tag in kelvin.
std::pair<std::string, double> split_dump_arg(const std::string& arg) {
    const auto at = arg.rfind('@');
    if (at == std::string::npos || at + 1 == arg.size()) return {arg, 0.0};
    const std::string tail = arg.substr(at + 1);
    double t = 0.0;
    const auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), t);
    if (ec != std::errc() || ptr != tail.data() + tail.size()) return {arg, 0.0};
    return {arg.substr(0, at), t};
}

std::ifstream open_in(const fs::path& path, const char* what) {
    std::ifstream f(path);
    if (!f) throw IoError(std::string("cannot open ") + what + " " + path.string());
    return f;
}

const trajio::SpeciesMap& species_of(const ckpt::Checkpoint& ck, const trajio::Dataset& ds) {
    if (!ck.species.empty()) return ck.species;
    if (ds.species.empty()) throw ArgumentError("neither checkpoint nor dataset carries a species map");
    return ds.species;
}

// Dataset copy whose graphs are built with the checkpoint's normalizer and species.
trajio::Dataset aligned_dataset(trajio::Dataset ds, const ckpt::Checkpoint& ck) {
    ds.species = species_of(ck, ds);
    ds.energy_norm = ck.normalizer;
    return ds;
}

std::optional<trajio::Split> parse_split(const std::string& s) {
    if (s == "train") return trajio::Split::train;
    if (s == "test") return trajio::Split::test;
    if (s == "all") return std::nullopt;
    throw ArgumentError("--split must be train, test or all");
}

// --- prepare ----------------------------------------------------------------

struct PrepareArgs {
    Common common;
    std::vector<std::string> dumps;
    std::vector<std::string> energies;
    std::string species;
    double ratio = 0.8;
    CLI::Option* ratio_opt = nullptr;
    std::size_t max_per_temperature = 0;
    CLI::Option* cap_opt = nullptr;
};

int cmd_prepare(const Context& ctx, const PrepareArgs& a) {
    auto rc = resolve_config(a.common);
    if (a.ratio_opt->count()) rc.data.split_ratio = a.ratio;
    if (a.cap_opt->count()) rc.data.max_per_temperature = a.max_per_temperature;
    if (a.energies.size() != 1 && a.energies.size() != a.dumps.size())
        throw ArgumentError("--energies takes one file for all dumps or one per dump");

    json inputs = {{"dumps", a.dumps}, {"energies", a.energies}, {"species", a.species}};
    write_manifest(ctx, "prepare", a.common, rc, inputs);

    const auto species = trajio::SpeciesMap::load(a.species);
    std::vector<trajio::AtomicConfiguration> all;
    trajio::EnergyTable shared;
    if (a.energies.size() == 1) {
        auto f = open_in(a.energies[0], "energy table");
        shared = trajio::parse_energy_csv(f);
    }
    for (std::size_t k = 0; k < a.dumps.size(); ++k) {
        const auto [path, temperature] = split_dump_arg(a.dumps[k]);
        auto f = open_in(path, "dump");
        auto frames = trajio::parse_dump(f, species, temperature);
        trajio::EnergyTable own;
        if (a.energies.size() > 1) {
            auto ef = open_in(a.energies[k], "energy table");
            own = trajio::parse_energy_csv(ef);
        }
        frames = trajio::join_energies(std::move(frames), a.energies.size() > 1 ? own : shared);
        if (ctx.debug()) ctx.out << "read " << frames.size() << " frames from " << path << '\n';
        std::move(frames.begin(), frames.end(), std::back_inserter(all));
    }
    if (rc.data.max_per_temperature > 0)
        all = trajio::cap_per_temperature(std::move(all), rc.data.max_per_temperature, rc.seed);

    auto ds = trajio::split_dataset(std::move(all), rc.data.split_ratio, rc.seed);
    ds.species = species;
    const fs::path out = fs::path(a.common.out_dir) / "dataset.jsonl";
    trajio::save_dataset(out, ds);

    if (ctx.info()) {
        std::map<double, std::pair<std::size_t, std::size_t>> per_t;
        for (std::size_t i = 0; i < ds.configs.size(); ++i) {
            auto& [tr, te] = per_t[ds.configs[i].temperature_tag];
            (ds.split[i] == trajio::Split::train ? tr : te) += 1;
        }
        for (const auto& [t, n] : per_t)
            ctx.out << "T=" << fmt(t) << " K: " << n.first + n.second << " frames (train " << n.first << ", test "
                    << n.second << ")\n";
        ctx.out << "train " << ds.train_indices().size() << " / test " << ds.test_indices().size() << '\n';
        ctx.out << "energy range (train) [" << fmt(ds.energy_norm.e_min(), 10) << ", "
                << fmt(ds.energy_norm.e_max(), 10) << "] eV\n";
        ctx.out << "wrote " << out.string() << '\n';
    }
    return kExitOk;
}

// --- train ------------------------------------------------------------------

struct TrainArgs {
    Common common;
    std::string data;
    std::string resume;
    std::size_t epochs = 0, batch_size = 0, latent_dim = 0;
    double cutoff = 0, lr = 0;
    CLI::Option *epochs_opt = nullptr, *batch_opt = nullptr, *latent_opt = nullptr, *cutoff_opt = nullptr,
                *lr_opt = nullptr;
    std::string inject_nan;
    std::uint64_t inject_nan_step = 0;
};

int cmd_train(const Context& ctx, const TrainArgs& a) {
    auto rc = resolve_config(a.common);
    if (a.epochs_opt->count()) rc.train.epochs = a.epochs;
    if (a.batch_opt->count()) rc.train.batch_size = a.batch_size;
    if (a.latent_opt->count()) rc.model.latent_dim = a.latent_dim;
    if (a.cutoff_opt->count()) rc.data.cutoff = a.cutoff;
    if (a.lr_opt->count()) rc.train.learning_rate = a.lr;

    auto ds = trajio::load_dataset(a.data);
    if (ds.species.empty()) throw ArgumentError("dataset has no species map; re-run prepare");

    std::optional<ckpt::Checkpoint> resume;
    if (!a.resume.empty()) {
        resume = ckpt::load(a.resume);
        rc.model = resume->params.config();
        if (a.cutoff_opt->count() && a.cutoff != resume->cutoff)
            throw ArgumentError("--cutoff differs from the checkpoint's cutoff");
        rc.data.cutoff = resume->cutoff;
    }
    const auto graphs = train::build_graphs(ds, trajio::Split::train, rc.data.cutoff);
    if (!resume) {
        std::size_t atoms = 0;
        for (const auto& c : ds.configs) atoms = std::max(atoms, c.size());
        rc.model.n_atoms = atoms;
        rc.model.species_count = ds.species.size();
    }
    rc.model.validate();
    if (ctx.info())
        for (const auto& w : rc.model.warnings()) ctx.err << "warning: " << w << '\n';

    json inputs = {{"data", a.data}, {"resume", a.resume.empty() ? json(nullptr) : json(a.resume)}};
    if (!a.inject_nan.empty()) inputs["inject_nan"] = {{"term", a.inject_nan}, {"step", a.inject_nan_step}};
    write_manifest(ctx, "train", a.common, rc, inputs);

    train::TrainOptions opt;
    opt.weights = rc.loss;
    opt.rdf = rc.rdf;
    opt.cutoff = rc.data.cutoff;
    opt.normalizer = ds.energy_norm;
    opt.species = ds.species;
    opt.out_dir = fs::path(a.common.out_dir);
    if (resume) opt.resume = train::TrainState{resume->params, resume->adam, resume->epoch};
    if (ctx.debug()) opt.progress = &ctx.out;
    const std::size_t every = std::max<std::size_t>(1, rc.train.epochs / 10);
    if (ctx.info() && !ctx.debug())
        opt.on_epoch = [&](const train::EpochLog& row) {
            if (row.epoch % every == 0 || row.epoch == rc.train.epochs)
                ctx.out << "epoch " << row.epoch << " total " << fmt(row.loss.total) << '\n';
        };
    if (!a.inject_nan.empty()) {
        opt.inject_nan_term = a.inject_nan;
        opt.inject_nan_step = a.inject_nan_step;
    }

    const auto res = train::train(graphs, rc.model, rc.train, opt);
    if (ctx.info()) {
        if (res.early_stopped) ctx.out << "stopped early at epoch " << res.state.epoch << '\n';
        if (!res.log.empty()) {
            const auto& last = res.log.back().loss;
            ctx.out << "final node " << fmt(last.node) << " edge " << fmt(last.edge) << " energy " << fmt(last.energy)
                    << " kl " << fmt(last.kl) << " rdf " << fmt(last.rdf) << " total " << fmt(last.total) << '\n';
        }
        ctx.out << "optimizer steps " << res.state.adam.step << '\n';
        if (res.checkpoint) ctx.out << "wrote " << res.checkpoint->string() << '\n';
    }
    return kExitOk;
}

// --- eval -------------------------------------------------------------------

struct EvalArgs {
    Common common;
    std::string data, checkpoint, split = "test";
};

int cmd_eval(const Context& ctx, const EvalArgs& a) {
    auto rc = resolve_config(a.common);
    const auto which = parse_split(a.split);
    json inputs = {{"data", a.data}, {"checkpoint", a.checkpoint}, {"split", a.split}};
    const auto ck = ckpt::load(a.checkpoint);
    rc.model = ck.params.config();
    rc.train = ck.train;
    rc.loss = ck.weights;
    rc.rdf = ck.rdf;
    rc.data.cutoff = ck.cutoff;
    write_manifest(ctx, "eval", a.common, rc, inputs);

    const auto ds = aligned_dataset(trajio::load_dataset(a.data), ck);
    const auto graphs = train::build_graphs(ds, which, ck.cutoff);
    const auto report = train::evaluate(graphs, ck.params, ck.normalizer);
    const auto pred = train::predict(graphs, ck.params, ck.normalizer);
    const fs::path out(a.common.out_dir);
    metrics::parity_export(pred.energy_pred, pred.energy_true, out / "parity_energy.csv");
    metrics::parity_export(pred.dist_pred, pred.dist_true, out / "parity_distance.csv");

    // Histograms averaged over the split on a common r_max.
    graph::RdfConfig rdf = ck.rdf;
    if (!rdf.r_max) {
        double r = INFINITY;
        for (const auto& g : graphs) r = std::min(r, *std::min_element(g.box.begin(), g.box.end()) / 2.0);
        rdf.r_max = r;
    }
    metrics::RdfComparison avg;
    for (const auto& g : graphs) {
        const auto recon = model::decode(model::encode_mean(g, ck.params), g, ck.params);
        const auto cmp = metrics::rdf_compare(g.reference_positions, recon.positions_hat, g.box, rdf);
        if (avg.original.values.empty()) {
            avg = cmp;
            continue;
        }
        for (std::size_t b = 0; b < cmp.original.values.size(); ++b) {
            avg.original.values[b] += cmp.original.values[b];
            avg.reconstructed.values[b] += cmp.reconstructed.values[b];
        }
    }
    const double inv = 1.0 / static_cast<double>(graphs.size());
    double gap = 0.0;
    for (std::size_t b = 0; b < avg.original.values.size(); ++b) {
        avg.original.values[b] *= inv;
        avg.reconstructed.values[b] *= inv;
        const double d = avg.original.values[b] - avg.reconstructed.values[b];
        gap += d * d;
    }
    avg.gap = std::sqrt(gap);
    metrics::write_rdf_csv(avg, out / "rdf.csv");

    json j = metrics::to_json(report);
    j["split"] = a.split;
    j["rdf_gap"] = avg.gap;
    write_text_atomic(out / "metrics.json", j.dump(2) + "\n");
    if (ctx.info()) {
        ctx.out << "split " << a.split << ": " << report.n_samples << " samples, " << report.n_edges << " edges\n";
        ctx.out << "energy RMSE " << fmt(report.energy_rmse) << " eV/atom, R2 " << fmt(report.energy_r2) << '\n';
        ctx.out << "distance RMSE " << fmt(report.dist_rmse) << " A, R2 " << fmt(report.dist_r2) << '\n';
        ctx.out << "node BCE " << fmt(report.node_bce) << ", species accuracy " << fmt(report.species_accuracy) << '\n';
        ctx.out << "rdf gap " << fmt(avg.gap) << '\n';
    }
    return kExitOk;
}

// --- generate ---------------------------------------------------------------

struct GenerateArgs {
    Common common;
    std::string checkpoint, data, mode = "random";
    std::size_t anchor = 0;
    double gamma = 0, e_min = 0, e_max = 0;
    std::size_t steps = 0, n_samples = 0;
    CLI::Option *gamma_opt = nullptr, *emin_opt = nullptr, *emax_opt = nullptr, *steps_opt = nullptr,
                *n_opt = nullptr;
    bool prior = false;
    bool export_latents = false;
};

int cmd_generate(const Context& ctx, const GenerateArgs& a) {
    auto rc = resolve_config(a.common);
    auto& g = rc.generate;
    if (a.gamma_opt->count()) g.gamma = a.gamma;
    if (a.emin_opt->count()) g.e_min = a.e_min;
    if (a.emax_opt->count()) g.e_max = a.e_max;
    if (a.steps_opt->count()) g.steps = a.steps;
    if (a.n_opt->count()) g.n_samples = a.n_samples;
    if (a.prior) g.prior = true;
    g.validate();
    if (a.mode != "random" && a.mode != "conditional") throw ArgumentError("--mode must be random or conditional");

    const auto ck = ckpt::load(a.checkpoint);
    rc.model = ck.params.config();
    rc.data.cutoff = ck.cutoff;
    const auto ds = aligned_dataset(trajio::load_dataset(a.data), ck);
    if (a.anchor >= ds.configs.size())
        throw ArgumentError("--anchor " + std::to_string(a.anchor) + " is outside the dataset (" +
                            std::to_string(ds.configs.size()) + " rows)");
    json inputs = {{"checkpoint", a.checkpoint}, {"data", a.data}, {"anchor", a.anchor}, {"mode", a.mode},
                   {"export_latents", a.export_latents}};
    write_manifest(ctx, "generate", a.common, rc, inputs);

    const auto anchor = graph::build_graph(ds.configs[a.anchor], ck.cutoff, ck.normalizer, ds.species);
    const fs::path out(a.common.out_dir);
    auto structures = open_out(out / "structures.jsonl");
    auto summary = open_out(out / "summary.csv");
    summary << "sample_id,energy_ev_per_atom,in_target\n";
    auto in_target = [&](double e) -> std::string {
        if (!g.e_min || !g.e_max) return "";
        return (e >= *g.e_min && e <= *g.e_max) ? "1" : "0";
    };
    std::vector<trajio::AtomicConfiguration> emitted;

    if (a.mode == "random") {
        std::mt19937_64 rng(g.seed);
        const auto samples = gen::sample_random(ck.params, anchor, g, ck.normalizer, rng);
        for (std::size_t k = 0; k < samples.size(); ++k) {
            emitted.push_back(gen::to_configuration(samples[k].structure, anchor, ds.species, static_cast<std::int64_t>(k)));
            emitted.back().energy = samples[k].energy_ev_per_atom * static_cast<double>(anchor.n_nodes);
            summary << k << ',' << samples[k].energy_ev_per_atom << ',' << in_target(samples[k].energy_ev_per_atom) << '\n';
        }
        if (ctx.info()) ctx.out << "sampled " << samples.size() << " structures around anchor " << a.anchor << '\n';
    } else {
        const auto r = gen::generate_conditional(ck.params, anchor, g, ck.normalizer);
        emitted.push_back(gen::to_configuration(r.structure, anchor, ds.species, 0));
        emitted.back().energy = r.energy_ev_per_atom * static_cast<double>(anchor.n_nodes);
        summary << 0 << ',' << r.energy_ev_per_atom << ',' << (r.in_target ? "1" : "0") << '\n';
        auto trace = open_out(out / "trace.csv");
        trace << "step,objective,hinge,energy_ev_per_atom,z_norm\n";
        const double n = static_cast<double>(anchor.n_nodes);
        for (std::size_t t = 0; t < r.objective.size(); ++t)
            trace << t << ',' << r.objective[t] << ',' << r.hinge[t] << ','
                  << ck.normalizer.denormalize(r.energy_trace[t]) / n << ',' << r.z_norm[t] << '\n';
        if (ctx.info())
            ctx.out << "refined in " << r.steps_taken << " steps: E = " << fmt(r.energy_ev_per_atom, 8) << " eV/atom, "
                    << (r.in_target ? "inside" : "outside") << " [" << fmt(*g.e_min, 8) << ", " << fmt(*g.e_max, 8)
                    << "]\n";
    }
    trajio::write_jsonl(structures, emitted);

    if (a.export_latents) {
        const auto graphs = train::build_graphs(ds, std::nullopt, ck.cutoff);
        const auto rows = gen::export_latents(ck.params, graphs, ck.normalizer);
        auto f = open_out(out / "latents.csv");
        gen::write_latents_csv(f, rows);
        if (ctx.info()) ctx.out << "exported " << rows.size() << " latent rows\n";
    }
    return kExitOk;
}

// --- check-invariance -------------------------------------------------------

struct InvarianceArgs {
    Common common;
    std::string checkpoint;
    std::size_t fixtures = 20;
    double cutoff = 4.0;
};

int cmd_check_invariance(const Context& ctx, const InvarianceArgs& a) {
    auto rc = resolve_config(a.common);
    model::ModelParams params;
    if (!a.checkpoint.empty()) {
        params = ckpt::load(a.checkpoint).params;
        rc.model = params.config();
    } else {
        params = model::ModelParams::init(rc.model);
    }
    if (!a.common.out_dir.empty())
        write_manifest(ctx, "check-invariance", a.common, rc,
                       {{"checkpoint", a.checkpoint.empty() ? json(nullptr) : json(a.checkpoint)},
                        {"fixtures", a.fixtures},
                        {"cutoff", a.cutoff}});
    inv::CheckConfig cc;
    cc.n_fixtures = a.fixtures;
    cc.cutoff = a.cutoff;
    cc.seed = rc.seed;
    bool ok = true;
    json report = json::array();
    for (const auto& r : inv::run_all(params, cc)) {
        ctx.out << inv::format(r) << '\n';
        ok = ok && r.pass;
        report.push_back({{"property", r.property},
                          {"pass", r.pass},
                          {"max_error", std::isfinite(r.max_error) ? json(r.max_error) : json(nullptr)},
                          {"tolerance", r.tolerance},
                          {"cases", r.n_cases},
                          {"failing_seed", r.failing_seed ? json(*r.failing_seed) : json(nullptr)}});
    }
    if (!a.common.out_dir.empty())
        write_text_atomic(fs::path(a.common.out_dir) / "invariance.json", report.dump(2) + "\n");
    return ok ? kExitOk : kExitNumerical;
}

// --- synth ------------------------------------------------------------------

struct SynthArgs {
    Common common;
    synth::SynthConfig cfg;
};

int cmd_synth(const Context& ctx, const SynthArgs& a) {
    auto rc = resolve_config(a.common);
    auto cfg = a.cfg;
    cfg.seed = rc.seed;
    write_manifest(ctx, "synth", a.common, rc,
                   {{"frames", cfg.n_frames}, {"cells", cfg.cells}, {"temperatures", cfg.temperatures}});
    const auto frames = synth::generate(cfg);
    const auto species = synth::species();
    const fs::path out(a.common.out_dir);

    auto map = open_out(out / "species.map");
    for (const auto& [type, label] : species.types()) map << type << '=' << label << '\n';
    auto energies = open_out(out / "energies.csv");
    energies << "frame_id,energy_eV\n";
    for (const auto& f : frames) energies << f.frame_id << ',' << *f.energy << '\n';

    std::vector<std::string> dump_args;
    for (double t : cfg.temperatures) {
        std::vector<trajio::AtomicConfiguration> at_t;
        for (const auto& f : frames)
            if (f.temperature_tag == t) at_t.push_back(f);
        const fs::path path = out / ("synth_T" + fmt(t) + ".dump");
        auto d = open_out(path);
        trajio::write_dump(d, at_t, species);
        dump_args.push_back(path.string() + "@" + fmt(t));
    }
    if (ctx.info()) {
        ctx.out << "wrote " << frames.size() << " frames of " << frames.front().size() << " atoms to " << out.string()
                << '\n';
        ctx.out << "prepare with:";
        for (const auto& d : dump_args) ctx.out << " --dump " << d;
        ctx.out << " --energies " << (out / "energies.csv").string() << " --species " << (out / "species.map").string()
                << '\n';
    }
    return kExitOk;
}

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
    Context ctx{out, err, verbosity_from_env(), {argv, argv + argc}};

    CLI::App app{"Graph VAE for periodic atomic configurations", "glassvae"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    PrepareArgs prep;
    auto* p = app.add_subcommand("prepare", "Parse dumps, join energies, split and write a dataset");
    add_common(p, prep.common);
    p->add_option("--dump", prep.dumps, "LAMMPS text dump, optionally tagged with a temperature as path@T")
        ->required();
    p->add_option("--energies", prep.energies, "frame_id,energy_eV CSV (one for all dumps, or one per dump)")
        ->required()
        ->check(CLI::ExistingFile);
    p->add_option("--species", prep.species, "Species map with type=Label lines")->required()->check(CLI::ExistingFile);
    prep.ratio_opt = p->add_option("--ratio", prep.ratio, "Train fraction");
    prep.cap_opt = p->add_option("--max-per-temperature", prep.max_per_temperature, "Keep at most this many frames per temperature");

    TrainArgs tr;
    auto* t = app.add_subcommand("train", "Train a model on a prepared dataset");
    add_common(t, tr.common);
    t->add_option("--data", tr.data, "dataset.jsonl from prepare")->required()->check(CLI::ExistingFile);
    tr.epochs_opt = t->add_option("--epochs", tr.epochs, "Total epochs (including any resumed ones)");
    tr.batch_opt = t->add_option("--batch-size", tr.batch_size, "Mini-batch size");
    tr.latent_opt = t->add_option("--latent-dim", tr.latent_dim, "Latent dimension");
    tr.cutoff_opt = t->add_option("--cutoff", tr.cutoff, "Graph cutoff radius (A)");
    tr.lr_opt = t->add_option("--lr", tr.lr, "Adam learning rate");
    t->add_option("--resume", tr.resume, "Checkpoint to continue from")->check(CLI::ExistingFile);
    t->add_option("--inject-nan", tr.inject_nan, "")->group("");
    t->add_option("--inject-nan-step", tr.inject_nan_step, "")->group("");

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Metrics, parity and radial-histogram exports for a checkpoint");
    add_common(e, ev.common);
    e->add_option("--data", ev.data, "dataset.jsonl")->required()->check(CLI::ExistingFile);
    e->add_option("--checkpoint", ev.checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
    e->add_option("--split", ev.split, "train, test or all")->check(CLI::IsMember({"train", "test", "all"}));

    GenerateArgs ge;
    auto* g = app.add_subcommand("generate", "Random or energy-targeted structures from the latent space");
    add_common(g, ge.common);
    g->add_option("--checkpoint", ge.checkpoint, "Model checkpoint")->required()->check(CLI::ExistingFile);
    g->add_option("--data", ge.data, "dataset.jsonl holding the anchor")->required()->check(CLI::ExistingFile);
    g->add_option("--anchor", ge.anchor, "Row of the anchor configuration in the dataset (0-based)");
    g->add_option("--mode", ge.mode, "random or conditional")->check(CLI::IsMember({"random", "conditional"}));
    ge.gamma_opt = g->add_option("--gamma", ge.gamma, "Noise scale around the anchor code");
    ge.emin_opt = g->add_option("--e-min", ge.e_min, "Target lower bound (eV/atom)");
    ge.emax_opt = g->add_option("--e-max", ge.e_max, "Target upper bound (eV/atom)");
    ge.steps_opt = g->add_option("--steps", ge.steps, "Refinement steps");
    ge.n_opt = g->add_option("--n-samples", ge.n_samples, "Random samples");
    g->add_flag("--prior", ge.prior, "Sample z from N(0, I) instead of around the anchor");
    g->add_flag("--export-latents", ge.export_latents, "Also write mu for every dataset row to latents.csv");

    InvarianceArgs ia;
    auto* c = app.add_subcommand("check-invariance", "Symmetry and gradient checks on random fixtures");
    add_common(c, ia.common, false);
    c->add_option("--checkpoint", ia.checkpoint, "Check this model instead of a freshly initialized one")
        ->check(CLI::ExistingFile);
    c->add_option("--fixtures", ia.fixtures, "Number of random fixtures");
    c->add_option("--cutoff", ia.cutoff, "Graph cutoff radius (A)");

    SynthArgs sy;
    auto* s = app.add_subcommand("synth", "Write a synthetic harmonic B2 Cu/Zr trajectory with energies");
    add_common(s, sy.common);
    s->add_option("--frames", sy.cfg.n_frames, "Number of frames");
    s->add_option("--cells", sy.cfg.cells, "Unit cells per axis");
    s->add_option("--temperatures", sy.cfg.temperatures, "Temperature tags, assigned round-robin");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& ex) {
        app.exit(ex, out, err);
        return kExitOk;
    } catch (const CLI::CallForAllHelp& ex) {
        app.exit(ex, out, err);
        return kExitOk;
    } catch (const CLI::CallForVersion& ex) {
        app.exit(ex, out, err);
        return kExitOk;
    } catch (const CLI::ParseError& ex) {
        app.exit(ex, out, err);
        return kExitUsage;
    }

    try {
        if (*p) return cmd_prepare(ctx, prep);
        if (*t) return cmd_train(ctx, tr);
        if (*e) return cmd_eval(ctx, ev);
        if (*g) return cmd_generate(ctx, ge);
        if (*c) return cmd_check_invariance(ctx, ia);
        if (*s) return cmd_synth(ctx, sy);
    } catch (const ArgumentError& ex) {
        err << "error: " << ex.what() << '\n';
        return kExitUsage;
    } catch (const ShapeError& ex) {
        err << "error: " << ex.what() << '\n';
        return kExitUsage;
    } catch (const LookupError& ex) {
        err << "error: " << ex.what() << '\n';
        return kExitUsage;
    } catch (const DivergenceError& ex) {
        err << "error: " << ex.what() << '\n';
        return kExitNumerical;
    } catch (const RefinementError& ex) {
        err << "error: " << ex.what() << '\n';
        return kExitNumerical;
    } catch (const DegenerateGraphError& ex) {
        err << "error: " << ex.what() << '\n';
        return kExitNumerical;
    } catch (const IoError& ex) {
        err << "error: " << ex.what() << '\n';
        return kExitIo;
    } catch (const ParseError& ex) {
        err << "error: " << ex.what() << '\n';
        return kExitIo;
    } catch (const FormatError& ex) {
        err << "error: " << ex.what() << '\n';
        return kExitIo;
    } catch (const fs::filesystem_error& ex) {
        err << "error: " << ex.what() << '\n';
        return kExitIo;
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << '\n';
        return 1;
    }
    return kExitUsage;
}

}  // namespace glassvae::cli

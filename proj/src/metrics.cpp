#include "glassvae/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "glassvae/errors.hpp"

namespace glassvae::metrics {

namespace {

void check_pair(std::span<const double> pred, std::span<const double> truth) {
    if (pred.size() != truth.size()) throw ShapeError("prediction and truth lengths differ");
    if (pred.empty()) throw ArgumentError("metrics need at least one sample");
}

}  // namespace

nlohmann::json to_json(const MetricsReport& r) {
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    return {{"energy_rmse_ev_per_atom", num(r.energy_rmse)},
            {"energy_r2", num(r.energy_r2)},
            {"dist_rmse_angstrom", num(r.dist_rmse)},
            {"dist_r2", num(r.dist_r2)},
            {"node_bce", num(r.node_bce)},
            {"species_accuracy", num(r.species_accuracy)},
            {"n_samples", r.n_samples},
            {"n_edges", r.n_edges}};
}

double rmse(std::span<const double> pred, std::span<const double> truth) {
    check_pair(pred, truth);
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) acc += (pred[i] - truth[i]) * (pred[i] - truth[i]);
    return std::sqrt(acc / static_cast<double>(pred.size()));
}

double r2(std::span<const double> pred, std::span<const double> truth) {
    check_pair(pred, truth);
    double mean = 0.0;
    for (double t : truth) mean += t;
    mean /= static_cast<double>(truth.size());
    double ss_tot = 0.0, ss_res = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        ss_tot += (truth[i] - mean) * (truth[i] - mean);
        ss_res += (truth[i] - pred[i]) * (truth[i] - pred[i]);
    }
    if (!(ss_tot > 0.0)) throw ArgumentError("R² undefined: truth has zero variance");
    return 1.0 - ss_res / ss_tot;
}

void parity_export(std::span<const double> pred, std::span<const double> truth, const std::filesystem::path& path) {
    if (pred.size() != truth.size()) throw ShapeError("prediction and truth lengths differ");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out.precision(17);
    out << "true,pred\n";
    for (std::size_t i = 0; i < pred.size(); ++i) out << truth[i] << ',' << pred[i] << '\n';
}

RdfComparison rdf_compare(std::span<const Vec3> original, std::span<const Vec3> reconstructed, const Vec3& box,
                          const graph::RdfConfig& config) {
    if (original.size() != reconstructed.size()) throw ShapeError("rdf_compare: atom counts differ");
    RdfComparison c{graph::compute_rdf(original, box, config), graph::compute_rdf(reconstructed, box, config), 0.0};
    double acc = 0.0;
    for (std::size_t b = 0; b < c.original.values.size(); ++b) {
        const double d = c.original.values[b] - c.reconstructed.values[b];
        acc += d * d;
    }
    c.gap = std::sqrt(acc);
    return c;
}

void write_rdf_csv(const RdfComparison& cmp, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out.precision(17);
    out << "bin_center,g_true,g_recon\n";
    for (std::size_t b = 0; b < cmp.original.values.size(); ++b)
        out << cmp.original.bin_centers[b] << ',' << cmp.original.values[b] << ',' << cmp.reconstructed.values[b] << '\n';
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw ArgumentError("KS statistic needs two non-empty samples");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double best = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        best = std::max(best, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return best;
}

}  // namespace glassvae::metrics

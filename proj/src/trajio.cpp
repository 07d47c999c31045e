#include "glassvae/trajio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "glassvae/errors.hpp"

namespace glassvae::trajio {
namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

std::vector<std::string> split_ws(std::string_view line) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::size_t j = i;
        while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
        if (j > i) out.emplace_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

template <typename T>
std::optional<T> to_number(std::string_view s) {
    T value{};
    const auto* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(s.data(), end, value);
    if (ec != std::errc{} || ptr != end) return std::nullopt;
    return value;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

// Line source that tracks 1-based line numbers.
class LineReader {
public:
    explicit LineReader(std::istream& in) : in_(in) {}

    bool next(std::string& line) {
        if (!std::getline(in_, line)) return false;
        ++number_;
        return true;
    }
    // Next non-blank line.
    bool next_nonblank(std::string& line) {
        while (next(line))
            if (!trim(line).empty()) return true;
        return false;
    }
    std::size_t number() const noexcept { return number_; }

private:
    std::istream& in_;
    std::size_t number_ = 0;
};

bool starts_with_item(std::string_view line, std::string_view item) {
    line = trim(line);
    const std::string prefix = "ITEM: " + std::string(item);
    return line.substr(0, prefix.size()) == prefix;
}

std::string expect_line(LineReader& reader, std::string_view what) {
    std::string line;
    if (!reader.next_nonblank(line))
        throw ParseError("unexpected end of dump while reading " + std::string(what), reader.number());
    return line;
}

}  // namespace

// ---------------------------------------------------------------------------
// SpeciesMap

SpeciesMap::SpeciesMap(std::map<int, std::string> type_to_label) : type_to_label_(std::move(type_to_label)) {
    std::set<std::string> seen;
    for (const auto& [type, label] : type_to_label_) {
        if (label.empty()) throw ArgumentError("species map: empty label for type " + std::to_string(type));
        if (!seen.insert(label).second) throw ArgumentError("species map: label '" + label + "' assigned twice");
        labels_.push_back(label);
    }
}

SpeciesMap SpeciesMap::parse(std::istream& in) {
    std::map<int, std::string> entries;
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string_view line = raw;
        if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError("species map: expected type=Label", lineno);
        const auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        const auto type = to_number<int>(key);
        if (!type) throw ParseError("species map: type '" + std::string(key) + "' is not an integer", lineno);
        if (value.empty()) throw ParseError("species map: empty label", lineno);
        if (!entries.emplace(*type, std::string(value)).second)
            throw ParseError("species map: duplicate type " + std::string(key), lineno);
    }
    return SpeciesMap(std::move(entries));
}

SpeciesMap SpeciesMap::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open species map " + path.string());
    return parse(in);
}

const std::string& SpeciesMap::label(int type) const {
    auto it = type_to_label_.find(type);
    if (it == type_to_label_.end()) throw LookupError("species map has no entry for atom type " + std::to_string(type));
    return it->second;
}

int SpeciesMap::type_of(const std::string& label) const {
    for (const auto& [type, l] : type_to_label_)
        if (l == label) return type;
    throw LookupError("species '" + label + "' not in species map");
}

std::size_t SpeciesMap::index_of(const std::string& label) const {
    auto it = std::find(labels_.begin(), labels_.end(), label);
    if (it == labels_.end()) throw LookupError("species '" + label + "' not in species map");
    return static_cast<std::size_t>(it - labels_.begin());
}

bool SpeciesMap::contains(const std::string& label) const {
    return std::find(labels_.begin(), labels_.end(), label) != labels_.end();
}

// ---------------------------------------------------------------------------

void validate(const AtomicConfiguration& c, const SpeciesMap* species) {
    const std::string where = "frame " + std::to_string(c.frame_id) + ": ";
    if (c.positions.size() < 2) throw ArgumentError(where + "need at least 2 atoms");
    if (c.species.size() != c.positions.size()) throw ArgumentError(where + "species/positions length mismatch");
    for (int a = 0; a < 3; ++a)
        if (!(c.box[a] > 0.0) || !std::isfinite(c.box[a])) throw ArgumentError(where + "box edges must be positive");
    for (std::size_t i = 0; i < c.positions.size(); ++i) {
        for (int a = 0; a < 3; ++a) {
            const double x = c.positions[i][a];
            if (!std::isfinite(x)) throw ArgumentError(where + "non-finite coordinate for atom " + std::to_string(i));
            if (x < 0.0 || x >= c.box[a])
                throw ArgumentError(where + "coordinate of atom " + std::to_string(i) + " outside [0, L)");
        }
        if (species != nullptr && !species->contains(c.species[i]))
            throw ArgumentError(where + "unknown species '" + c.species[i] + "'");
    }
}

// ---------------------------------------------------------------------------
// LAMMPS dump

std::vector<AtomicConfiguration> parse_dump(std::istream& in, const SpeciesMap& species, double temperature_tag) {
    std::vector<AtomicConfiguration> frames;
    LineReader reader(in);
    std::string line;

    while (reader.next_nonblank(line)) {
        if (!starts_with_item(line, "TIMESTEP")) throw ParseError("expected 'ITEM: TIMESTEP'", reader.number());
        AtomicConfiguration cfg;
        cfg.temperature_tag = temperature_tag;
        line = expect_line(reader, "timestep");
        auto step = to_number<std::int64_t>(trim(line));
        if (!step) throw ParseError("timestep is not an integer", reader.number());
        cfg.frame_id = *step;

        line = expect_line(reader, "atom count header");
        if (!starts_with_item(line, "NUMBER OF ATOMS")) throw ParseError("expected 'ITEM: NUMBER OF ATOMS'", reader.number());
        line = expect_line(reader, "atom count");
        auto count = to_number<std::int64_t>(trim(line));
        if (!count || *count < 0) throw ParseError("atom count is not a non-negative integer", reader.number());
        const auto n = static_cast<std::size_t>(*count);

        line = expect_line(reader, "box header");
        if (!starts_with_item(line, "BOX BOUNDS")) throw ParseError("expected 'ITEM: BOX BOUNDS'", reader.number());
        for (const auto& tok : split_ws(line))
            if (tok == "xy" || tok == "xz" || tok == "yz")
                throw FormatError("triclinic box (tilt factors) is not supported (line " + std::to_string(reader.number()) + ")");
        Vec3 origin{};
        for (int a = 0; a < 3; ++a) {
            line = expect_line(reader, "box bounds");
            auto tokens = split_ws(line);
            if (tokens.size() == 3)
                throw FormatError("triclinic box (tilt factors) is not supported (line " + std::to_string(reader.number()) + ")");
            if (tokens.size() != 2) throw ParseError("box bounds need 'lo hi'", reader.number());
            auto lo = to_number<double>(tokens[0]);
            auto hi = to_number<double>(tokens[1]);
            if (!lo || !hi) throw ParseError("box bounds are not numbers", reader.number());
            origin[a] = *lo;
            cfg.box[a] = *hi - *lo;
            if (!(cfg.box[a] > 0.0)) throw ParseError("box bounds must satisfy hi > lo", reader.number());
        }
        line = expect_line(reader, "atoms header");
        if (!starts_with_item(line, "ATOMS")) throw ParseError("expected 'ITEM: ATOMS'", reader.number());
        auto header = split_ws(line);
        std::vector<std::string> columns(header.begin() + 2, header.end());
        auto col = [&](std::initializer_list<const char*> names) -> std::optional<std::size_t> {
            for (const char* name : names) {
                auto it = std::find(columns.begin(), columns.end(), name);
                if (it != columns.end()) return static_cast<std::size_t>(it - columns.begin());
            }
            return std::nullopt;
        };
        const auto id_col = col({"id"});
        const auto type_col = col({"type"});
        if (!id_col || !type_col) throw ParseError("ATOMS header must contain 'id' and 'type'", reader.number());
        std::array<std::size_t, 3> pos_col{};
        bool scaled = false;
        if (auto x = col({"x"}), y = col({"y"}), z = col({"z"}); x && y && z) {
            pos_col = {*x, *y, *z};
        } else if (auto xu = col({"xu"}), yu = col({"yu"}), zu = col({"zu"}); xu && yu && zu) {
            pos_col = {*xu, *yu, *zu};
        } else if (auto xs = col({"xs"}), ys = col({"ys"}), zs = col({"zs"}); xs && ys && zs) {
            pos_col = {*xs, *ys, *zs};
            scaled = true;
        } else {
            throw ParseError("ATOMS header needs x y z (or xu yu zu, or xs ys zs) columns", reader.number());
        }

        std::vector<std::pair<std::int64_t, std::pair<Vec3, std::string>>> atoms;
        atoms.reserve(n);
        for (std::size_t k = 0; k < n; ++k) {
            if (!reader.next(line)) {
                throw FormatError("frame " + std::to_string(cfg.frame_id) + ": expected " + std::to_string(n) +
                                  " atoms, stream ended after " + std::to_string(k));
            }
            if (trim(line).substr(0, 5) == "ITEM:") {
                throw FormatError("frame " + std::to_string(cfg.frame_id) + ": expected " + std::to_string(n) +
                                  " atoms, found " + std::to_string(k) + " (line " + std::to_string(reader.number()) + ")");
            }
            auto tokens = split_ws(line);
            if (tokens.size() != columns.size())
                throw ParseError("atom row has " + std::to_string(tokens.size()) + " columns, header declares " +
                                     std::to_string(columns.size()),
                                 reader.number());
            auto id = to_number<std::int64_t>(tokens[*id_col]);
            auto type = to_number<int>(tokens[*type_col]);
            if (!id || !type) throw ParseError("atom id/type is not an integer", reader.number());
            Vec3 r{};
            for (int a = 0; a < 3; ++a) {
                auto v = to_number<double>(tokens[pos_col[a]]);
                if (!v || !std::isfinite(*v)) throw ParseError("atom coordinate is not a finite number", reader.number());
                r[a] = *v;
            }
            atoms.push_back({*id, {r, species.label(*type)}});
        }
        std::sort(atoms.begin(), atoms.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        for (std::size_t k = 1; k < atoms.size(); ++k)
            if (atoms[k].first == atoms[k - 1].first)
                throw FormatError("frame " + std::to_string(cfg.frame_id) + ": duplicate atom id " + std::to_string(atoms[k].first));

        cfg.positions.reserve(n);
        cfg.species.reserve(n);
        for (auto& [id, atom] : atoms) {
            Vec3 r = atom.first;
            for (int a = 0; a < 3; ++a) {
                const double c = scaled ? r[a] * cfg.box[a] : r[a] - origin[a];
                r[a] = wrap_coordinate(c, cfg.box[a]);
            }
            cfg.positions.push_back(r);
            cfg.species.push_back(std::move(atom.second));
        }
        frames.push_back(std::move(cfg));
    }
    return frames;
}

void write_dump(std::ostream& out, std::span<const AtomicConfiguration> configs, const SpeciesMap& species) {
    for (const auto& c : configs) {
        out << "ITEM: TIMESTEP\n" << c.frame_id << "\n";
        out << "ITEM: NUMBER OF ATOMS\n" << c.size() << "\n";
        out << "ITEM: BOX BOUNDS pp pp pp\n";
        for (int a = 0; a < 3; ++a) out << "0 " << format_double(c.box[a]) << "\n";
        out << "ITEM: ATOMS id type x y z\n";
        for (std::size_t i = 0; i < c.size(); ++i) {
            out << (i + 1) << ' ' << species.type_of(c.species[i]);
            for (int a = 0; a < 3; ++a) out << ' ' << format_double(c.positions[i][a]);
            out << '\n';
        }
    }
}

// ---------------------------------------------------------------------------
// Energies

EnergyTable parse_energy_csv(std::istream& in) {
    EnergyTable table;
    std::string raw;
    std::size_t lineno = 0;
    bool first_row = true;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string_view line = trim(raw);
        if (line.empty() || line.front() == '#') continue;
        const auto comma = line.find(',');
        if (comma == std::string_view::npos) throw ParseError("energy table: expected 'frame_id,energy'", lineno);
        const auto id = to_number<std::int64_t>(trim(line.substr(0, comma)));
        const auto e = to_number<double>(trim(line.substr(comma + 1)));
        if (!id || !e) {
            if (first_row) {  // header
                first_row = false;
                continue;
            }
            throw ParseError("energy table: row is not 'integer,number'", lineno);
        }
        first_row = false;
        if (!table.emplace(*id, *e).second) throw ParseError("energy table: duplicate frame id " + std::to_string(*id), lineno);
    }
    return table;
}

std::vector<AtomicConfiguration> join_energies(std::vector<AtomicConfiguration> configs, const EnergyTable& table) {
    std::vector<std::int64_t> missing;
    for (auto& c : configs) {
        auto it = table.find(c.frame_id);
        if (it == table.end())
            missing.push_back(c.frame_id);
        else
            c.energy = it->second;
    }
    if (!missing.empty()) {
        std::string ids;
        for (std::size_t k = 0; k < missing.size(); ++k) ids += (k ? ", " : "") + std::to_string(missing[k]);
        throw LookupError("energy table has no entry for frame id(s): " + ids);
    }
    return configs;
}

EnergyNormalizer::EnergyNormalizer(double e_min, double e_max, double lo, double hi)
    : e_min_(e_min), e_max_(e_max), lo_(lo), hi_(hi) {
    if (!(e_min <= e_max)) throw ArgumentError("energy normalizer requires e_min <= e_max");
}

double EnergyNormalizer::scale() const noexcept { return degenerate() ? 0.0 : (hi_ - lo_) / (e_max_ - e_min_); }

double EnergyNormalizer::normalize(double energy) const noexcept {
    if (degenerate()) return lo_;
    return lo_ + (energy - e_min_) * (hi_ - lo_) / (e_max_ - e_min_);
}

double EnergyNormalizer::denormalize(double value) const noexcept {
    if (degenerate()) return e_min_;
    return e_min_ + (value - lo_) * (e_max_ - e_min_) / (hi_ - lo_);
}

EnergyNormalizer fit_normalizer(std::span<const double> energies) {
    if (energies.empty()) throw ArgumentError("fit_normalizer: empty energy list");
    const auto [mn, mx] = std::minmax_element(energies.begin(), energies.end());
    if (!std::isfinite(*mn) || !std::isfinite(*mx)) throw ArgumentError("fit_normalizer: non-finite energy");
    return EnergyNormalizer(*mn, *mx);
}

// ---------------------------------------------------------------------------
// Dataset assembly

std::vector<std::size_t> Dataset::indices(Split which) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < split.size(); ++i)
        if (split[i] == which) out.push_back(i);
    return out;
}

Dataset split_dataset(std::vector<AtomicConfiguration> configs, double ratio, std::uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw ArgumentError("split ratio must lie in (0, 1)");
    if (configs.size() < 2) throw ArgumentError("split_dataset needs at least 2 configurations");
    for (const auto& c : configs)
        if (!c.energy) throw ArgumentError("frame " + std::to_string(c.frame_id) + " has no energy; join energies first");

    std::map<double, std::vector<std::size_t>> strata;
    for (std::size_t i = 0; i < configs.size(); ++i) strata[configs[i].temperature_tag].push_back(i);

    // Largest-remainder allocation of round(ratio * n) train slots.
    // At least one train frame so the normalizer can be fit.
    const auto total_train =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(ratio * static_cast<double>(configs.size()))));
    std::vector<std::size_t> quota;
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    std::size_t s = 0;
    for (const auto& [tag, members] : strata) {
        const double exact = ratio * static_cast<double>(members.size());
        const auto base = static_cast<std::size_t>(std::floor(exact));
        quota.push_back(base);
        assigned += base;
        remainders.emplace_back(exact - static_cast<double>(base), s++);
    }
    std::stable_sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t k = 0; assigned < total_train && k < remainders.size(); ++k, ++assigned) ++quota[remainders[k].second];

    std::mt19937_64 rng(seed);
    Dataset ds;
    ds.split.assign(configs.size(), Split::test);
    s = 0;
    for (auto& [tag, members] : strata) {
        std::shuffle(members.begin(), members.end(), rng);
        for (std::size_t k = 0; k < quota[s]; ++k) ds.split[members[k]] = Split::train;
        ++s;
    }

    std::vector<double> train_e;
    for (std::size_t i = 0; i < configs.size(); ++i)
        if (ds.split[i] == Split::train) train_e.push_back(*configs[i].energy);
    if (train_e.empty()) throw ArgumentError("split leaves the train set empty");
    ds.energy_norm = fit_normalizer(train_e);
    ds.configs = std::move(configs);
    return ds;
}

std::vector<AtomicConfiguration> cap_per_temperature(std::vector<AtomicConfiguration> configs,
                                                     std::size_t max_per_temperature, std::uint64_t seed) {
    std::map<double, std::vector<std::size_t>> strata;
    for (std::size_t i = 0; i < configs.size(); ++i) strata[configs[i].temperature_tag].push_back(i);
    std::mt19937_64 rng(seed);
    std::vector<bool> keep(configs.size(), false);
    for (auto& [tag, members] : strata) {
        std::shuffle(members.begin(), members.end(), rng);
        for (std::size_t k = 0; k < std::min(max_per_temperature, members.size()); ++k) keep[members[k]] = true;
    }
    std::vector<AtomicConfiguration> out;
    for (std::size_t i = 0; i < configs.size(); ++i)
        if (keep[i]) out.push_back(std::move(configs[i]));
    return out;
}

// ---------------------------------------------------------------------------
// JSON-lines

namespace {

nlohmann::json to_json(const AtomicConfiguration& c) {
    nlohmann::json j;
    j["frame_id"] = c.frame_id;
    j["temperature_tag"] = c.temperature_tag;
    j["box"] = c.box;
    j["energy"] = c.energy ? nlohmann::json(*c.energy) : nlohmann::json(nullptr);
    j["species"] = c.species;
    j["positions"] = c.positions;
    return j;
}

AtomicConfiguration from_json(const nlohmann::json& j) {
    AtomicConfiguration c;
    c.frame_id = j.at("frame_id").get<std::int64_t>();
    c.temperature_tag = j.value("temperature_tag", 0.0);
    c.box = j.at("box").get<Vec3>();
    if (j.contains("energy") && !j.at("energy").is_null()) c.energy = j.at("energy").get<double>();
    c.species = j.at("species").get<std::vector<std::string>>();
    c.positions = j.at("positions").get<std::vector<Vec3>>();
    return c;
}

}  // namespace

void write_jsonl(std::ostream& out, std::span<const AtomicConfiguration> configs) {
    for (const auto& c : configs) out << to_json(c).dump() << '\n';
}

std::vector<AtomicConfiguration> read_jsonl(std::istream& in) {
    std::vector<AtomicConfiguration> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            out.push_back(from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(std::string("invalid configuration record: ") + e.what(), lineno);
        }
    }
    return out;
}

void save_dataset(const std::filesystem::path& path, const Dataset& dataset) {
    {
        std::ofstream out(path);
        if (!out) throw IoError("cannot write dataset " + path.string());
        write_jsonl(out, dataset.configs);
    }
    nlohmann::json meta;
    meta["energy_norm"] = {{"e_min", dataset.energy_norm.e_min()},
                           {"e_max", dataset.energy_norm.e_max()},
                           {"lo", dataset.energy_norm.lo()},
                           {"hi", dataset.energy_norm.hi()}};
    auto& split = meta["split"] = nlohmann::json::array();
    for (auto s : dataset.split) split.push_back(s == Split::train ? "train" : "test");
    auto& species = meta["species"] = nlohmann::json::object();
    for (const auto& [type, label] : dataset.species.types()) species[std::to_string(type)] = label;
    std::ofstream out(path.string() + ".meta.json");
    if (!out) throw IoError("cannot write dataset metadata for " + path.string());
    out << meta.dump(2) << '\n';
}

Dataset load_dataset(const std::filesystem::path& path) {
    Dataset ds;
    {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open dataset " + path.string());
        ds.configs = read_jsonl(in);
    }
    std::ifstream in(path.string() + ".meta.json");
    if (!in) throw IoError("cannot open dataset metadata " + path.string() + ".meta.json");
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(in);
        const auto& n = meta.at("energy_norm");
        ds.energy_norm = EnergyNormalizer(n.at("e_min").get<double>(), n.at("e_max").get<double>(), n.at("lo").get<double>(),
                                          n.at("hi").get<double>());
        for (const auto& s : meta.at("split")) ds.split.push_back(s.get<std::string>() == "train" ? Split::train : Split::test);
        if (meta.contains("species")) {
            std::map<int, std::string> types;
            for (const auto& [type, label] : meta["species"].items()) types[std::stoi(type)] = label.get<std::string>();
            ds.species = SpeciesMap(std::move(types));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid dataset metadata: ") + e.what(), 0);
    }
    if (ds.split.size() != ds.configs.size()) throw FormatError("dataset metadata split length does not match configurations");
    return ds;
}

}  // namespace glassvae::trajio

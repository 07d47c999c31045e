#include "glassvae/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "glassvae/config.hpp"
#include "glassvae/errors.hpp"

namespace glassvae::ckpt {

using nlohmann::json;

namespace {

constexpr std::array<char, 8> kMagic{'G', 'V', 'A', 'E', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <class T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T take(std::istream& in, const std::string& what) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError("truncated checkpoint (" + what + ")");
    return v;
}

json manifest(const std::vector<model::NamedTensor>& tensors) {
    json m = json::array();
    for (const auto& t : tensors) m.push_back({{"name", t.name}, {"shape", t.value.shape()}});
    return m;
}

void write_tensor(std::ostream& out, const ad::Tensor& t) {
    out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
}

void read_tensor(std::istream& in, ad::Tensor& t) {
    if (!in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double))))
        throw FormatError("truncated checkpoint tensor data");
}

}  // namespace

void save(const std::filesystem::path& path, const Checkpoint& c) {
    json h;
    h["model"] = config::to_json(c.params.config());
    h["tensors"] = manifest(c.params.tensors());
    h["adam_step"] = c.adam.step;
    h["has_adam"] = !c.adam.m.empty();
    h["epoch"] = c.epoch;
    h["train"] = config::to_json(c.train);
    h["loss"] = config::to_json(c.weights);
    h["rdf"] = config::to_json(c.rdf);
    h["cutoff"] = c.cutoff;
    h["energy_norm"] = config::to_json(c.normalizer);
    h["species"] = config::to_json(c.species);
    const std::string header = h.dump();

    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write checkpoint " + path.string());
        out.write(kMagic.data(), kMagic.size());
        put<std::uint32_t>(out, kVersion);
        put<std::uint64_t>(out, header.size());
        out.write(header.data(), static_cast<std::streamsize>(header.size()));
        for (const auto& t : c.params.tensors()) write_tensor(out, t.value);
        for (const auto& t : c.adam.m) write_tensor(out, t);
        for (const auto& t : c.adam.v) write_tensor(out, t);
        if (!out) throw IoError("write failed for checkpoint " + path.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

Checkpoint load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    std::array<char, 8> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw FormatError(path.string() + " is not a checkpoint");
    const auto version = take<std::uint32_t>(in, "version");
    if (version != kVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
    const auto len = take<std::uint64_t>(in, "header length");
    if (len > (1u << 26)) throw FormatError("checkpoint header too large");
    std::string header(len, '\0');
    if (!in.read(header.data(), static_cast<std::streamsize>(len))) throw FormatError("truncated checkpoint header");

    Checkpoint c;
    try {
        const json h = json::parse(header);
        c.params = model::ModelParams::zeros(config::model_from_json(h.at("model")));
        const auto& m = h.at("tensors");
        if (m.size() != c.params.tensors().size()) throw FormatError("checkpoint tensor count does not match its model config");
        for (std::size_t i = 0; i < m.size(); ++i) {
            const auto& t = c.params.tensors()[i];
            if (m[i].at("name").get<std::string>() != t.name ||
                m[i].at("shape").get<std::vector<std::size_t>>() != t.value.shape())
                throw FormatError("checkpoint tensor " + m[i].at("name").get<std::string>() + " does not match its model config");
        }
        c.adam.step = h.at("adam_step").get<std::uint64_t>();
        if (h.at("has_adam").get<bool>()) c.adam = [&] {
            auto a = train::AdamState::zeros_like(c.params);
            a.step = h.at("adam_step").get<std::uint64_t>();
            return a;
        }();
        c.epoch = h.at("epoch").get<std::size_t>();
        c.train = config::train_from_json(h.at("train"));
        c.weights = config::loss_from_json(h.at("loss"));
        c.rdf = config::rdf_from_json(h.at("rdf"));
        c.cutoff = h.at("cutoff").get<double>();
        c.normalizer = config::normalizer_from_json(h.at("energy_norm"));
        c.species = config::species_from_json(h.at("species"));
    } catch (const json::exception& e) {
        throw FormatError("invalid checkpoint header in " + path.string() + ": " + e.what());
    } catch (const ArgumentError& e) {
        throw FormatError("invalid checkpoint header in " + path.string() + ": " + e.what());
    }
    for (auto& t : c.params.tensors()) read_tensor(in, t.value);
    for (auto& t : c.adam.m) read_tensor(in, t);
    for (auto& t : c.adam.v) read_tensor(in, t);
    if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes in checkpoint " + path.string());
    return c;
}

}  // namespace glassvae::ckpt

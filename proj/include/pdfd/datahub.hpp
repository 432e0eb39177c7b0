#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdfd/errors.hpp"
#include "pdfd/rng.hpp"
#include "pdfd/tensor.hpp"
#include "pdfd/types.hpp"

namespace pdfd {

struct Sample {
    std::int64_t id = 0;
    Modality modality = Modality::sketch; // sketch or image only
    Tensor feature;                       // [d_vis]
    int category = 0;                     // index into Dataset::class_names
};

struct Dataset {
    int d_vis = 0;
    std::vector<std::string> class_names;
    std::vector<Sample> samples;

    const std::string& name_of(int category) const {
        return class_names[static_cast<std::size_t>(category)];
    }
    int category_of(const std::string& name) const {
        for (std::size_t i = 0; i < class_names.size(); ++i)
            if (class_names[i] == name) return static_cast<int>(i);
        throw DataError("dataset has no class '" + name + "'");
    }
};

/// Disjoint seen/unseen class partition. Training may only observe seen
/// classes; evaluation only unseen ones.
struct ZeroShotSplit {
    std::vector<std::string> seen;
    std::vector<std::string> unseen;

    bool is_seen(const std::string& cls) const {
        return std::find(seen.begin(), seen.end(), cls) != seen.end();
    }
    bool is_unseen(const std::string& cls) const {
        return std::find(unseen.begin(), unseen.end(), cls) != unseen.end();
    }

    void validate() const {
        if (seen.empty() || unseen.empty())
            throw ContractViolation("zero-shot split needs non-empty seen and unseen sets");
        std::set<std::string> s(seen.begin(), seen.end());
        for (const auto& u : unseen)
            if (s.count(u))
                throw ContractViolation("class '" + u + "' is both seen and unseen");
    }
};

struct SynthConfig {
    int n_classes = 16;
    int per_class = 40; // per class per modality
    int d_vis = 64;
    int latent_dim = 8;
    double offset_scale = 1.0;
    double noise_scale = 0.05;
    std::uint64_t seed = 1;

    void validate() const {
        if (n_classes < 2) throw ConfigError("synth: n_classes must be >= 2");
        if (per_class < 1) throw ConfigError("synth: per_class must be >= 1");
        if (d_vis < 1 || latent_dim < 1) throw ConfigError("synth: dims must be positive");
        if (latent_dim > d_vis) throw ConfigError("synth: latent_dim must be <= d_vis");
        if (offset_scale < 0 || noise_scale < 0)
            throw ConfigError("synth: scales must be non-negative");
    }
};

/// Planted factors behind a synthetic dataset, kept for diagnostics.
struct SynthTruth {
    Tensor prototypes;            // [n_classes, latent_dim]
    Tensor map_sketch, map_image; // [d_vis, latent_dim], orthonormal columns
    Tensor offset_sketch, offset_image; // [d_vis]
};

struct SynthResult {
    Dataset data;
    SynthTruth truth;
};

namespace detail {

/// Random matrix with orthonormal columns (Gram-Schmidt on Gaussian draws).
inline Tensor random_orthonormal(int rows, int cols, Rng& rng) {
    Tensor m({rows, cols});
    for (int j = 0; j < cols; ++j) {
        std::vector<double> v(static_cast<std::size_t>(rows));
        for (auto& x : v) x = rng.gaussian();
        for (int k = 0; k < j; ++k) {
            double dot = 0.0;
            for (int i = 0; i < rows; ++i) dot += v[static_cast<std::size_t>(i)] * m.at(i, k);
            for (int i = 0; i < rows; ++i) v[static_cast<std::size_t>(i)] -= dot * m.at(i, k);
        }
        double norm = 0.0;
        for (double x : v) norm += x * x;
        norm = std::sqrt(norm);
        for (int i = 0; i < rows; ++i) m.at(i, j) = v[static_cast<std::size_t>(i)] / norm;
    }
    return m;
}

} // namespace detail

/// Features are planted as M_modality * prototype(class) + offset_modality
/// + Gaussian noise, with distinct orthonormal maps per modality, so the
/// semantic factor is linearly recoverable by construction.
inline SynthResult generate_synthetic(const SynthConfig& cfg) {
    cfg.validate();
    Rng rng(cfg.seed);

    SynthResult out;
    out.truth.prototypes = Tensor({cfg.n_classes, cfg.latent_dim});
    for (int i = 0; i < out.truth.prototypes.size(); ++i)
        out.truth.prototypes[i] = rng.gaussian();
    out.truth.map_sketch = detail::random_orthonormal(cfg.d_vis, cfg.latent_dim, rng);
    out.truth.map_image = detail::random_orthonormal(cfg.d_vis, cfg.latent_dim, rng);
    out.truth.offset_sketch = Tensor({cfg.d_vis});
    out.truth.offset_image = Tensor({cfg.d_vis});
    for (int i = 0; i < cfg.d_vis; ++i) {
        out.truth.offset_sketch[i] = cfg.offset_scale * rng.gaussian();
        out.truth.offset_image[i] = cfg.offset_scale * rng.gaussian();
    }

    Dataset& data = out.data;
    data.d_vis = cfg.d_vis;
    for (int c = 0; c < cfg.n_classes; ++c) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "class%03d", c);
        data.class_names.emplace_back(buf);
    }

    std::int64_t next_id = 0;
    for (int c = 0; c < cfg.n_classes; ++c) {
        for (Modality mod : {Modality::sketch, Modality::image}) {
            const Tensor& map = mod == Modality::sketch ? out.truth.map_sketch
                                                        : out.truth.map_image;
            const Tensor& off = mod == Modality::sketch ? out.truth.offset_sketch
                                                        : out.truth.offset_image;
            for (int k = 0; k < cfg.per_class; ++k) {
                Sample s;
                s.id = next_id++;
                s.modality = mod;
                s.category = c;
                s.feature = Tensor({cfg.d_vis});
                for (int i = 0; i < cfg.d_vis; ++i) {
                    double v = off[i];
                    for (int j = 0; j < cfg.latent_dim; ++j)
                        v += map.at(i, j) * out.truth.prototypes.at(c, j);
                    s.feature[i] = v + cfg.noise_scale * rng.gaussian();
                }
                data.samples.push_back(std::move(s));
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Feature files. Text: magic "PDFDFEAT1", header `n_samples d_vis n_classes`,
// class-name lines, then `id modality class_index v1 ... v_dvis` per sample.
// Binary ("PDFDFEATB1"): same magic/header/class-name lines, then per sample
// a little-endian record: i64 id, u8 modality, u32 class_index, f64 values.
// ---------------------------------------------------------------------------

namespace detail {

inline void print_double(std::string& out, double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

template <typename T>
void write_le(std::ostream& os, T v) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& is, const char* what) {
    unsigned char buf[sizeof(T)];
    is.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (is.gcount() != static_cast<std::streamsize>(sizeof(T)))
        throw DataError(std::string("truncated payload while reading ") + what);
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

} // namespace detail

inline void save_features(const Dataset& data, const std::string& path,
                          bool binary = false) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write feature file '" + path + "'");
    os << (binary ? "PDFDFEATB1" : "PDFDFEAT1") << "\n";
    os << data.samples.size() << " " << data.d_vis << " " << data.class_names.size()
       << "\n";
    for (const auto& name : data.class_names) os << name << "\n";
    for (const auto& s : data.samples) {
        if (binary) {
            detail::write_le<std::int64_t>(os, s.id);
            detail::write_le<std::uint8_t>(os, static_cast<std::uint8_t>(modality_code(s.modality)));
            detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(s.category));
            for (int i = 0; i < s.feature.size(); ++i)
                detail::write_le<double>(os, s.feature[i]);
        } else {
            std::string line = std::to_string(s.id);
            line += " ";
            line += std::to_string(modality_code(s.modality));
            line += " ";
            line += std::to_string(s.category);
            for (int i = 0; i < s.feature.size(); ++i) {
                line += " ";
                detail::print_double(line, s.feature[i]);
            }
            os << line << "\n";
        }
    }
    if (!os) throw DataError("failed writing feature file '" + path + "'");
}

inline Dataset load_features(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open feature file '" + path + "'");
    std::string magic;
    if (!std::getline(is, magic)) throw ParseError(path + ": empty file");
    const bool binary = magic == "PDFDFEATB1";
    if (!binary && magic != "PDFDFEAT1")
        throw ParseError(path + ": bad magic '" + magic + "'");

    std::string header;
    if (!std::getline(is, header)) throw ParseError(path + ": missing header line");
    long long n_samples = -1;
    int d_vis = -1, n_classes = -1;
    {
        std::istringstream hs(header);
        std::string extra;
        if (!(hs >> n_samples >> d_vis >> n_classes) || (hs >> extra) || n_samples < 0 ||
            d_vis <= 0 || n_classes <= 0)
            throw ParseError(path + ": malformed header '" + header + "'");
    }

    Dataset data;
    data.d_vis = d_vis;
    for (int c = 0; c < n_classes; ++c) {
        std::string name;
        if (!std::getline(is, name) || name.empty())
            throw DataError(path + ": truncated class-name block");
        data.class_names.push_back(name);
    }

    data.samples.reserve(static_cast<std::size_t>(n_samples));
    for (long long row = 0; row < n_samples; ++row) {
        Sample s;
        s.feature = Tensor({d_vis});
        if (binary) {
            s.id = detail::read_le<std::int64_t>(is, "sample id");
            const int mod = detail::read_le<std::uint8_t>(is, "modality");
            if (mod != 0 && mod != 1)
                throw DataError(path + ": unknown modality byte " + std::to_string(mod) +
                                " in sample " + std::to_string(row));
            s.modality = modality_from_code(mod);
            const auto cat = detail::read_le<std::uint32_t>(is, "class index");
            if (cat >= static_cast<std::uint32_t>(n_classes))
                throw DataError(path + ": class index " + std::to_string(cat) +
                                " outside declared set in sample " + std::to_string(row));
            s.category = static_cast<int>(cat);
            for (int i = 0; i < d_vis; ++i)
                s.feature[i] = detail::read_le<double>(is, "feature value");
        } else {
            std::string line;
            if (!std::getline(is, line))
                throw DataError(path + ": truncated payload: header declares " +
                                std::to_string(n_samples) + " samples, got " +
                                std::to_string(row));
            std::istringstream ls(line);
            long long id;
            int mod, cat;
            if (!(ls >> id >> mod >> cat))
                throw ParseError(path + ": malformed sample row " + std::to_string(row));
            if (mod != 0 && mod != 1)
                throw DataError(path + ": unknown modality " + std::to_string(mod) +
                                " in sample " + std::to_string(row));
            if (cat < 0 || cat >= n_classes)
                throw DataError(path + ": class index " + std::to_string(cat) +
                                " outside declared set in sample " + std::to_string(row));
            s.id = id;
            s.modality = modality_from_code(mod);
            s.category = cat;
            for (int i = 0; i < d_vis; ++i) {
                if (!(ls >> s.feature[i]))
                    throw ParseError(path + ": sample row " + std::to_string(row) +
                                     " has fewer than " + std::to_string(d_vis) +
                                     " values");
            }
            double extra;
            if (ls >> extra)
                throw ParseError(path + ": sample row " + std::to_string(row) +
                                 " has more than " + std::to_string(d_vis) + " values");
        }
        if (!s.feature.all_finite())
            throw DataError(path + ": non-finite feature in sample " + std::to_string(row));
        data.samples.push_back(std::move(s));
    }
    return data;
}

inline void save_split(const ZeroShotSplit& split, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write split file '" + path + "'");
    nlohmann::ordered_json j;
    j["seen"] = split.seen;
    j["unseen"] = split.unseen;
    os << j.dump(2) << "\n";
}

inline ZeroShotSplit load_split(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open split file '" + path + "'");
    nlohmann::json j;
    try {
        is >> j;
    } catch (const std::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    ZeroShotSplit split;
    try {
        split.seen = j.at("seen").get<std::vector<std::string>>();
        split.unseen = j.at("unseen").get<std::vector<std::string>>();
    } catch (const std::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    split.validate();
    return split;
}

/// Deterministic disjoint seen/unseen partition of the class list.
inline ZeroShotSplit make_split(const std::vector<std::string>& classes,
                                double seen_fraction, std::uint64_t seed) {
    if (classes.size() < 2) throw DataError("make_split: need at least 2 classes");
    if (!(seen_fraction > 0.0 && seen_fraction < 1.0))
        throw ConfigError("make_split: seen fraction must lie in (0, 1)");
    std::vector<std::string> pool = classes;
    Rng rng(seed);
    rng.shuffle(pool.begin(), pool.end());
    const int n = static_cast<int>(pool.size());
    int n_seen = static_cast<int>(std::lround(seen_fraction * n));
    n_seen = std::max(1, std::min(n - 1, n_seen));
    ZeroShotSplit split;
    split.seen.assign(pool.begin(), pool.begin() + n_seen);
    split.unseen.assign(pool.begin() + n_seen, pool.end());
    std::sort(split.seen.begin(), split.seen.end());
    std::sort(split.unseen.begin(), split.unseen.end());
    split.validate();
    return split;
}

} // namespace pdfd

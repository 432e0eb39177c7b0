#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdfd/datahub.hpp"
#include "pdfd/model.hpp"

namespace pdfd {

/// Everything an evaluation needs to rebuild the model and enforce the
/// zero-shot contract: dimensions plus the class bookkeeping of the run.
struct CheckpointMeta {
    ModelConfig config;
    std::vector<std::string> class_names;  // dataset classes, file order
    std::vector<std::string> seen_classes; // category-head label order
};

// Layout (all integers little-endian):
//   magic "PDFDCKPT1\n"
//   u32 meta_len, meta JSON (utf-8)
//   u32 n_tensors, then per tensor:
//     u32 name_len, name bytes, u32 ndim, u32 dims[ndim], f64 values (row-major)
inline void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                            const PdfdParams& params) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write checkpoint '" + path + "'");
    os << "PDFDCKPT1\n";

    nlohmann::ordered_json j;
    j["d_vis"] = meta.config.d_vis;
    j["d_sem"] = meta.config.d_sem;
    j["d_ret"] = meta.config.d_ret;
    j["hidden"] = meta.config.hidden;
    j["n_seen_classes"] = meta.config.n_seen_classes;
    j["progressive"] = meta.config.progressive;
    j["class_names"] = meta.class_names;
    j["seen_classes"] = meta.seen_classes;
    const std::string meta_str = j.dump();
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(meta_str.size()));
    os.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));

    const auto named = params.named(meta.config.progressive);
    detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(named.size()));
    for (const auto& [name, tensor] : named) {
        detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        detail::write_le<std::uint32_t>(os,
                                        static_cast<std::uint32_t>(tensor->shape().size()));
        for (int d : tensor->shape())
            detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
        for (int i = 0; i < tensor->size(); ++i)
            detail::write_le<double>(os, (*tensor)[i]);
    }
    if (!os) throw DataError("failed writing checkpoint '" + path + "'");
}

struct Checkpoint {
    CheckpointMeta meta;
    PdfdParams params;
};

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open checkpoint '" + path + "'");
    std::string magic;
    if (!std::getline(is, magic) || magic != "PDFDCKPT1")
        throw ParseError(path + ": not a checkpoint file");

    const auto meta_len = detail::read_le<std::uint32_t>(is, "meta length");
    std::string meta_str(meta_len, '\0');
    is.read(meta_str.data(), meta_len);
    if (is.gcount() != static_cast<std::streamsize>(meta_len))
        throw DataError(path + ": truncated meta block");

    Checkpoint out;
    try {
        const auto j = nlohmann::json::parse(meta_str);
        out.meta.config.d_vis = j.at("d_vis").get<int>();
        out.meta.config.d_sem = j.at("d_sem").get<int>();
        out.meta.config.d_ret = j.at("d_ret").get<int>();
        out.meta.config.hidden = j.at("hidden").get<int>();
        out.meta.config.n_seen_classes = j.at("n_seen_classes").get<int>();
        out.meta.config.progressive = j.at("progressive").get<bool>();
        out.meta.class_names = j.at("class_names").get<std::vector<std::string>>();
        out.meta.seen_classes = j.at("seen_classes").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": bad meta block: " + e.what());
    }
    out.meta.config.validate();

    const auto n_tensors = detail::read_le<std::uint32_t>(is, "tensor count");
    std::map<std::string, Tensor> loaded;
    for (std::uint32_t t = 0; t < n_tensors; ++t) {
        const auto name_len = detail::read_le<std::uint32_t>(is, "tensor name length");
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (is.gcount() != static_cast<std::streamsize>(name_len))
            throw DataError(path + ": truncated tensor name");
        const auto ndim = detail::read_le<std::uint32_t>(is, "tensor rank");
        std::vector<int> shape;
        for (std::uint32_t d = 0; d < ndim; ++d)
            shape.push_back(static_cast<int>(detail::read_le<std::uint32_t>(is, "tensor dim")));
        Tensor tensor(shape);
        for (int i = 0; i < tensor.size(); ++i)
            tensor[i] = detail::read_le<double>(is, "tensor value");
        if (!loaded.emplace(name, std::move(tensor)).second)
            throw ParseError(path + ": duplicate tensor '" + name + "'");
    }

    // shapes must agree with a freshly constructed parameter set
    PdfdParams expected = PdfdParams::init(out.meta.config, 0);
    for (auto& [name, slot] : out.params.named(out.meta.config.progressive)) {
        auto it = loaded.find(name);
        if (it == loaded.end())
            throw DataError(path + ": missing tensor '" + name + "'");
        const Tensor* want = nullptr;
        for (auto& [ename, etensor] : expected.named(out.meta.config.progressive))
            if (ename == name) want = etensor;
        if (want && !it->second.same_shape(*want))
            throw DataError(path + ": tensor '" + name + "' has shape " +
                            it->second.shape_str() + ", expected " + want->shape_str());
        *slot = std::move(it->second);
    }
    return out;
}

} // namespace pdfd

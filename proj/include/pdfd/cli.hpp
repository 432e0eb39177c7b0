#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "pdfd/checkpoint.hpp"
#include "pdfd/config.hpp"
#include "pdfd/datahub.hpp"
#include "pdfd/retrieval.hpp"
#include "pdfd/semantic.hpp"
#include "pdfd/trainer.hpp"

namespace pdfd::cli {

namespace detail {

inline std::string join(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

inline void write_text(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write '" + path + "'");
    os << content;
    if (!os) throw DataError("failed writing '" + path + "'");
}

inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline Dataset filter_by_classes(const Dataset& data,
                                 const std::vector<std::string>& classes) {
    Dataset out;
    out.d_vis = data.d_vis;
    out.class_names = data.class_names; // keep category ids stable
    std::vector<char> keep(data.class_names.size(), 0);
    for (const auto& name : classes) keep[static_cast<std::size_t>(data.category_of(name))] = 1;
    for (const auto& s : data.samples)
        if (keep[static_cast<std::size_t>(s.category)]) out.samples.push_back(s);
    return out;
}

/// Fixed random map squashing full-dimensional semantic embeddings into the
/// retrieval space; used only when the progressive projection is disabled.
inline SemanticTable project_table(const SemanticTable& table, int d_full, int d_ret,
                                   std::uint64_t seed) {
    Rng rng(seed ^ 0x70726f6aULL);
    Tensor proj({d_full, d_ret});
    const double scale = 1.0 / std::sqrt(static_cast<double>(d_full));
    for (int i = 0; i < proj.size(); ++i) proj[i] = scale * rng.gaussian();
    SemanticTable out;
    for (const auto& [cat, vec] : table) {
        Tensor low({d_ret});
        for (int i = 0; i < d_full; ++i)
            for (int j = 0; j < d_ret; ++j) low[j] += vec[i] * proj.at(i, j);
        out[cat] = std::move(low);
    }
    return out;
}

/// Semantic embeddings of the seen classes, keyed by dataset category id,
/// plus the resulting d_sem. The taxonomy is restricted to the seen classes.
inline std::pair<SemanticTable, int> build_semantic_table(const Dataset& data,
                                                          const ZeroShotSplit& split,
                                                          const RunConfig& cfg) {
    const WordVectorTable wv = load_word_vectors_file(cfg.wordvecs);
    const TaxonomyGraph full = TaxonomyGraph::load_file(cfg.taxonomy);
    const TaxonomyGraph tax = full.restrict_to(split.seen);
    const SimilarityKind kind = parse_similarity_kind(cfg.hierarchy);

    SemanticTable table;
    for (const auto& name : split.seen) {
        SemanticEmbedding emb = semantic_embedding(name, wv, tax, kind);
        table[data.category_of(name)] = std::move(emb.vector);
    }
    int d_sem = wv.dim + tax.size();
    if (!cfg.progressive) {
        table = project_table(table, d_sem, cfg.d_ret, cfg.seed);
        d_sem = cfg.d_ret;
    }
    return {std::move(table), d_sem};
}

} // namespace detail

/// `synth`: plant a synthetic dataset and emit every file the rest of the
/// pipeline consumes: train/test features, split, word vectors, taxonomy,
/// and a manifest.
inline int run_synth(const RunConfig& cfg) {
    require_out_dir(cfg);
    SynthConfig scfg;
    scfg.n_classes = cfg.n_classes;
    scfg.per_class = cfg.per_class;
    scfg.d_vis = cfg.d_vis;
    scfg.latent_dim = cfg.latent_dim;
    scfg.offset_scale = cfg.offset_scale;
    scfg.noise_scale = cfg.noise_scale;
    scfg.seed = cfg.seed;
    SynthResult synth = generate_synthetic(scfg);

    ZeroShotSplit split = make_split(synth.data.class_names, cfg.seen_fraction, cfg.seed);
    const bool binary = cfg.feature_format == "binary";

    const std::string f_train = detail::join(cfg.out, "features_train.txt");
    const std::string f_test = detail::join(cfg.out, "features_test.txt");
    const std::string f_split = detail::join(cfg.out, "split.json");
    const std::string f_wv = detail::join(cfg.out, "wordvecs.txt");
    const std::string f_tax = detail::join(cfg.out, "taxonomy.txt");

    Dataset train_set = detail::filter_by_classes(synth.data, split.seen);
    Dataset test_set = detail::filter_by_classes(synth.data, split.unseen);
    save_features(train_set, f_train, binary);
    save_features(test_set, f_test, binary);
    save_split(split, f_split);

    // the planted prototypes double as the text-based word vectors
    {
        std::string wv = std::to_string(cfg.latent_dim) + "\n";
        for (int c = 0; c < cfg.n_classes; ++c) {
            wv += synth.data.class_names[static_cast<std::size_t>(c)];
            for (int j = 0; j < cfg.latent_dim; ++j) {
                wv += " ";
                wv += detail::fmt_double(synth.truth.prototypes.at(c, j));
            }
            wv += "\n";
        }
        detail::write_text(f_wv, wv);
    }
    {
        std::string tax;
        for (const auto& name : synth.data.class_names) tax += name + "\troot\n";
        detail::write_text(f_tax, tax);
    }

    nlohmann::ordered_json manifest;
    manifest["seed"] = cfg.seed;
    manifest["n_classes"] = cfg.n_classes;
    manifest["per_class_per_modality"] = cfg.per_class;
    manifest["d_vis"] = cfg.d_vis;
    manifest["latent_dim"] = cfg.latent_dim;
    manifest["offset_scale"] = cfg.offset_scale;
    manifest["noise_scale"] = cfg.noise_scale;
    manifest["seen_fraction"] = cfg.seen_fraction;
    manifest["n_train_samples"] = train_set.samples.size();
    manifest["n_test_samples"] = test_set.samples.size();
    manifest["seen"] = split.seen;
    manifest["unseen"] = split.unseen;
    manifest["files"] = {{"features_train", f_train}, {"features_test", f_test},
                         {"split", f_split},         {"wordvecs", f_wv},
                         {"taxonomy", f_tax}};
    detail::write_text(detail::join(cfg.out, "manifest.json"), manifest.dump(2) + "\n");
    std::cout << manifest.dump(2) << std::endl;
    return 0;
}

/// `train`: seen-class min-max training; writes checkpoint, JSON-lines
/// metrics, and a plot-ready CSV.
inline int run_train(const RunConfig& cfg) {
    require_readable(cfg.features, "features");
    require_readable(cfg.split, "split");
    require_readable(cfg.wordvecs, "wordvecs");
    require_readable(cfg.taxonomy, "taxonomy");
    require_out_dir(cfg);

    const Dataset data = load_features(cfg.features);
    const ZeroShotSplit split = load_split(cfg.split);
    auto [table, d_sem] = detail::build_semantic_table(data, split, cfg);

    ModelConfig model_cfg;
    model_cfg.d_vis = data.d_vis;
    model_cfg.d_sem = d_sem;
    model_cfg.d_ret = cfg.d_ret;
    model_cfg.hidden = cfg.hidden;
    model_cfg.n_seen_classes = static_cast<int>(split.seen.size());
    model_cfg.progressive = cfg.progressive;

    TrainConfig tcfg;
    tcfg.learning_rate = cfg.lr;
    tcfg.beta1 = cfg.beta1;
    tcfg.beta2 = cfg.beta2;
    tcfg.epsilon = cfg.epsilon;
    tcfg.batch_size = cfg.batch_size;
    tcfg.epochs = cfg.epochs;
    tcfg.seed = cfg.seed;
    tcfg.weights = cfg.weights;
    tcfg.disc_steps_per_gen_step = cfg.disc_steps;
    tcfg.clip_norm = cfg.clip_norm;
    tcfg.non_saturating = cfg.non_saturating;

    CheckpointMeta meta;
    meta.config = model_cfg;
    meta.class_names = data.class_names;
    for (int id : seen_category_ids(data, split))
        meta.seen_classes.push_back(data.class_names[static_cast<std::size_t>(id)]);

    auto on_epoch = [&](int epoch, const PdfdModel& model) {
        if (cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0) {
            char name[64];
            std::snprintf(name, sizeof(name), "checkpoint_epoch_%04d.bin", epoch + 1);
            save_checkpoint(detail::join(cfg.out, name), meta, model.params);
        }
    };

    TrainResult result =
        train(data, split, tcfg, model_cfg, table, on_epoch, cfg.max_steps);

    save_checkpoint(detail::join(cfg.out, "checkpoint.bin"), meta, result.model.params);
    {
        std::string lines;
        for (std::size_t i = 0; i < result.history.size(); ++i) {
            nlohmann::ordered_json j = result.history[i].to_json(static_cast<long>(i));
            j["epoch"] = result.epochs[i];
            lines += j.dump() + "\n";
        }
        detail::write_text(detail::join(cfg.out, "metrics.jsonl"), lines);
    }
    {
        std::string csv = "step,total,adv,rec,mcls,ccls\n";
        for (std::size_t i = 0; i < result.history.size(); ++i) {
            const LossReport& r = result.history[i];
            csv += std::to_string(i) + "," + detail::fmt_double(r.total) + "," +
                   detail::fmt_double(r.adv) + "," + detail::fmt_double(r.rec) + "," +
                   detail::fmt_double(r.mcls) + "," + detail::fmt_double(r.ccls) + "\n";
        }
        detail::write_text(detail::join(cfg.out, "plot.csv"), csv);
    }
    if (result.history.empty()) {
        std::cout << "{}" << std::endl;
    } else {
        nlohmann::ordered_json j =
            result.history.back().to_json(static_cast<long>(result.history.size()) - 1);
        j["epoch"] = result.epochs.back();
        std::cout << j.dump() << std::endl;
    }
    return 0;
}

/// `eval`: zero-shot retrieval of unseen-class images from unseen-class
/// sketch queries, real-valued or ITQ-binarized.
inline int run_eval(const RunConfig& cfg) {
    require_readable(cfg.features, "features");
    require_readable(cfg.split, "split");
    require_readable(cfg.checkpoint, "checkpoint");

    const Checkpoint ckpt = load_checkpoint(cfg.checkpoint);
    const Dataset data = load_features(cfg.features);
    const ZeroShotSplit split = load_split(cfg.split);

    if (data.d_vis != ckpt.meta.config.d_vis)
        throw DataError("eval: feature dim " + std::to_string(data.d_vis) +
                        " does not match checkpoint d_vis " +
                        std::to_string(ckpt.meta.config.d_vis));

    // zero-shot contract: the test set may only contain unseen classes
    for (const auto& s : data.samples) {
        const std::string& cls = data.name_of(s.category);
        const bool was_seen =
            std::find(ckpt.meta.seen_classes.begin(), ckpt.meta.seen_classes.end(),
                      cls) != ckpt.meta.seen_classes.end();
        if (was_seen || !split.is_unseen(cls))
            throw ContractViolation("eval: sample " + std::to_string(s.id) + " of class '" +
                                    cls + "' is not an unseen class (zero-shot breach)");
    }

    const PdfdModel model{ckpt.meta.config, ckpt.params};
    std::vector<RetrievalFeature> queries, gallery;
    for (const auto& s : data.samples) {
        DecomposedFeatures dec = model.decompose(s.feature, s.modality);
        RetrievalFeature f;
        f.vector = model.to_retrieval(dec.semantic);
        f.source = s.modality;
        f.category = s.category;
        f.id = s.id;
        (s.modality == Modality::sketch ? queries : gallery).push_back(std::move(f));
    }
    if (queries.empty()) throw DataError("eval: no sketch queries in the test set");
    if (gallery.empty()) throw DataError("eval: no gallery images in the test set");

    EvalReport report;
    if (cfg.binary) {
        if (cfg.bits > ckpt.meta.config.d_ret)
            throw ConfigError("eval: bits " + std::to_string(cfg.bits) +
                              " exceed retrieval dim " +
                              std::to_string(ckpt.meta.config.d_ret));
        Tensor gal_mat({static_cast<int>(gallery.size()), ckpt.meta.config.d_ret});
        for (std::size_t i = 0; i < gallery.size(); ++i)
            for (int j = 0; j < ckpt.meta.config.d_ret; ++j)
                gal_mat.at(static_cast<int>(i), j) = gallery[i].vector[j];
        ItqModel itq = itq_fit(gal_mat, cfg.bits, cfg.itq_iters);
        std::vector<BinaryCode> qcodes, gcodes;
        std::vector<int> qcats, gcats;
        for (const auto& q : queries) {
            qcodes.push_back(itq_encode(itq, q.vector));
            qcats.push_back(q.category);
        }
        for (const auto& g : gallery) {
            gcodes.push_back(itq_encode(itq, g.vector));
            gcats.push_back(g.category);
        }
        report = evaluate_retrieval_binary(qcodes, qcats, gcodes, gcats,
                                           ckpt.meta.config.d_ret);
    } else {
        report = evaluate_retrieval(queries, gallery, parse_metric(cfg.metric),
                                    ckpt.meta.config.d_ret);
    }

    std::cout << report.to_json().dump() << std::endl;
    if (!cfg.out.empty()) {
        require_out_dir(cfg);
        detail::write_text(detail::join(cfg.out, "eval_report.json"),
                           report.to_json().dump(2) + "\n");
    }
    return 0;
}

/// `embed`: dump the semantic embeddings of the dataset's classes to CSV.
/// With a split file the taxonomy is restricted to its seen classes, exactly
/// as training would see it.
inline int run_embed(const RunConfig& cfg) {
    require_readable(cfg.wordvecs, "wordvecs");
    require_readable(cfg.taxonomy, "taxonomy");
    require_readable(cfg.features, "features");
    require_out_dir(cfg);

    const Dataset data = load_features(cfg.features);
    const WordVectorTable wv = load_word_vectors_file(cfg.wordvecs);
    TaxonomyGraph tax = TaxonomyGraph::load_file(cfg.taxonomy);
    std::vector<std::string> classes = data.class_names;
    if (!cfg.split.empty()) {
        require_readable(cfg.split, "split");
        const ZeroShotSplit split = load_split(cfg.split);
        tax = tax.restrict_to(split.seen);
        classes = split.seen; // only these exist in the restricted taxonomy
    }
    const SimilarityKind kind = parse_similarity_kind(cfg.hierarchy);

    std::string csv = "class";
    const int dim = wv.dim + tax.size();
    for (int j = 0; j < dim; ++j) csv += ",v" + std::to_string(j);
    csv += "\n";
    for (const auto& cls : classes) {
        SemanticEmbedding emb = semantic_embedding(cls, wv, tax, kind);
        csv += cls;
        for (int j = 0; j < emb.vector.size(); ++j)
            csv += "," + detail::fmt_double(emb.vector[j]);
        csv += "\n";
    }
    detail::write_text(detail::join(cfg.out, "embeddings.csv"), csv);
    std::cout << "wrote " << detail::join(cfg.out, "embeddings.csv") << " ("
              << classes.size() << " classes, dim " << dim << ")" << std::endl;
    return 0;
}

} // namespace pdfd::cli

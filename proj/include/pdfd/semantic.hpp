#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pdfd/errors.hpp"
#include "pdfd/tensor.hpp"

namespace pdfd {

/// Text-based word embeddings (word2vec/GloVe style table).
struct WordVectorTable {
    int dim = 0;
    std::map<std::string, std::vector<double>> entries;
};

enum class SimilarityKind { path, jiang_conrath };

inline SimilarityKind parse_similarity_kind(const std::string& s) {
    if (s == "path") return SimilarityKind::path;
    if (s == "jiang-conrath" || s == "jc") return SimilarityKind::jiang_conrath;
    throw ConfigError("unknown hierarchy similarity kind '" + s + "'");
}

/// Class taxonomy: a rooted tree with per-node occurrence counts. The
/// canonical node order (order of first appearance in the source file) is
/// part of the structure; hierarchical embeddings index into it.
class TaxonomyGraph {
public:
    /// Parse `child<TAB>parent[<TAB>count]` lines. Counts name the child
    /// node's own occurrences; when no line carries a count every node
    /// defaults to 1, otherwise unlisted nodes default to 0.
    static TaxonomyGraph load(std::istream& in, const std::string& origin = "<stream>") {
        TaxonomyGraph t;
        std::string line;
        int lineno = 0;
        bool any_count = false;
        std::vector<double> raw_counts;
        std::vector<char> has_count;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty() || line[0] == '#') continue;
            std::vector<std::string> fields;
            std::size_t start = 0;
            while (true) {
                std::size_t tab = line.find('\t', start);
                fields.push_back(line.substr(start, tab == std::string::npos
                                                        ? std::string::npos
                                                        : tab - start));
                if (tab == std::string::npos) break;
                start = tab + 1;
            }
            if (fields[0].empty())
                throw ParseError(origin + ":" + std::to_string(lineno) +
                                 ": expected child<TAB>parent");
            int child = t.intern(fields[0], raw_counts, has_count);
            // a line without a parent field declares a parentless node
            if (fields.size() >= 2 && !fields[1].empty()) {
                int parent = t.intern(fields[1], raw_counts, has_count);
                if (child == parent)
                    throw ParseError(origin + ":" + std::to_string(lineno) +
                                     ": node '" + fields[0] + "' is its own parent");
                if (t.parent_[child] != -1)
                    throw ParseError(origin + ":" + std::to_string(lineno) + ": node '" +
                                     fields[0] + "' already has a parent (tree only)");
                t.parent_[child] = parent;
            }
            if (fields.size() >= 3 && !fields[2].empty()) {
                double c;
                try {
                    c = std::stod(fields[2]);
                } catch (const std::exception&) {
                    throw ParseError(origin + ":" + std::to_string(lineno) +
                                     ": bad count '" + fields[2] + "'");
                }
                if (!(c >= 0.0) || !std::isfinite(c))
                    throw ParseError(origin + ":" + std::to_string(lineno) +
                                     ": count must be a finite non-negative real");
                raw_counts[child] = c;
                has_count[child] = 1;
                any_count = true;
            }
        }
        if (t.names_.empty()) throw ParseError(origin + ": empty taxonomy");
        t.counts_.resize(t.names_.size());
        for (std::size_t i = 0; i < t.names_.size(); ++i)
            t.counts_[i] = has_count[i] ? raw_counts[i] : (any_count ? 0.0 : 1.0);
        t.finalize(origin);
        return t;
    }

    static TaxonomyGraph load_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ParseError("cannot open taxonomy file '" + path + "'");
        return load(in, path);
    }

    int size() const { return static_cast<int>(names_.size()); }
    const std::vector<std::string>& nodes() const { return names_; }
    bool contains(const std::string& name) const { return index_.count(name) > 0; }

    int index_of(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw DataError("taxonomy has no node '" + name + "'");
        return it->second;
    }

    int parent_of(int node) const { return parent_[static_cast<std::size_t>(node)]; }
    int depth_of(int node) const { return depth_[static_cast<std::size_t>(node)]; }
    double count_of(int node) const { return counts_[static_cast<std::size_t>(node)]; }
    double subtree_mass(int node) const { return mass_[static_cast<std::size_t>(node)]; }
    double total_mass() const { return mass_[static_cast<std::size_t>(root_)]; }
    int root() const { return root_; }

    /// Deepest common ancestor of two nodes.
    int lowest_common_ancestor(int a, int b) const {
        while (depth_[a] > depth_[b]) a = parent_[a];
        while (depth_[b] > depth_[a]) b = parent_[b];
        while (a != b) {
            a = parent_[a];
            b = parent_[b];
        }
        return a;
    }

    /// -ln(subtree mass / total mass). Errors on zero-mass subtrees, where
    /// the information content would be infinite.
    double information_content(int node) const {
        if (!(total_mass() > 0.0))
            throw DataError("taxonomy has zero total occurrence mass");
        const double m = mass_[static_cast<std::size_t>(node)];
        if (!(m > 0.0))
            throw DataError("node '" + names_[static_cast<std::size_t>(node)] +
                            "' has zero subtree mass; Jiang-Conrath undefined");
        return -std::log(m / total_mass());
    }

    /// New taxonomy keeping only the given classes and their ancestors, in
    /// the original canonical order with the original counts.
    TaxonomyGraph restrict_to(const std::vector<std::string>& classes) const {
        std::vector<char> keep(names_.size(), 0);
        for (const auto& c : classes) {
            int n = index_of(c);
            while (n != -1 && !keep[static_cast<std::size_t>(n)]) {
                keep[static_cast<std::size_t>(n)] = 1;
                n = parent_[static_cast<std::size_t>(n)];
            }
        }
        TaxonomyGraph out;
        std::vector<int> remap(names_.size(), -1);
        for (std::size_t i = 0; i < names_.size(); ++i) {
            if (!keep[i]) continue;
            remap[i] = static_cast<int>(out.names_.size());
            out.names_.push_back(names_[i]);
            out.index_[names_[i]] = remap[i];
            out.counts_.push_back(counts_[i]);
        }
        for (std::size_t i = 0; i < names_.size(); ++i)
            if (keep[i])
                out.parent_.push_back(parent_[i] == -1 ? -1 : remap[parent_[i]]);
        out.finalize("<restricted>");
        return out;
    }

private:
    int intern(const std::string& name, std::vector<double>& raw_counts,
               std::vector<char>& has_count) {
        auto it = index_.find(name);
        if (it != index_.end()) return it->second;
        int id = static_cast<int>(names_.size());
        names_.push_back(name);
        index_[name] = id;
        parent_.push_back(-1);
        raw_counts.push_back(0.0);
        has_count.push_back(0);
        return id;
    }

    void finalize(const std::string& origin) {
        root_ = -1;
        for (std::size_t i = 0; i < names_.size(); ++i) {
            if (parent_[i] == -1) {
                if (root_ != -1)
                    throw ParseError(origin + ": multiple roots ('" + names_[root_] +
                                     "', '" + names_[i] + "')");
                root_ = static_cast<int>(i);
            }
        }
        if (root_ == -1) throw ParseError(origin + ": no root (cycle in edges)");

        depth_.assign(names_.size(), -1);
        depth_[static_cast<std::size_t>(root_)] = 0;
        for (std::size_t i = 0; i < names_.size(); ++i) {
            // walk up until a known depth; bail out on cycles
            std::vector<int> chain;
            int n = static_cast<int>(i);
            while (depth_[static_cast<std::size_t>(n)] == -1) {
                chain.push_back(n);
                n = parent_[static_cast<std::size_t>(n)];
                if (chain.size() > names_.size())
                    throw ParseError(origin + ": cycle through node '" + names_[i] + "'");
            }
            int d = depth_[static_cast<std::size_t>(n)];
            for (auto it = chain.rbegin(); it != chain.rend(); ++it)
                depth_[static_cast<std::size_t>(*it)] = ++d;
        }

        // subtree masses: accumulate children into parents, deepest first
        mass_ = counts_;
        std::vector<int> order(names_.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        std::sort(order.begin(), order.end(),
                  [&](int a, int b) { return depth_[a] > depth_[b]; });
        for (int n : order)
            if (parent_[static_cast<std::size_t>(n)] != -1)
                mass_[static_cast<std::size_t>(parent_[n])] += mass_[static_cast<std::size_t>(n)];
    }

    std::vector<std::string> names_; // canonical order
    std::map<std::string, int> index_;
    std::vector<int> parent_;
    std::vector<double> counts_;
    std::vector<double> mass_;
    std::vector<int> depth_;
    int root_ = -1;
};

/// Class-level semantic embedding: text block followed by the hierarchical
/// similarity block. All hierarchical entries lie in (0, 1].
struct SemanticEmbedding {
    std::string class_name;
    Tensor vector;
};

/// Parse a word-vector table. First line: the integer dimension; then one
/// `word v1 ... vD` row per word.
inline WordVectorTable load_word_vectors(std::istream& in,
                                         const std::string& origin = "<stream>") {
    WordVectorTable table;
    std::string line;
    if (!std::getline(in, line)) throw ParseError(origin + ": missing header");
    {
        std::istringstream hs(line);
        std::string extra;
        if (!(hs >> table.dim) || table.dim <= 0 || (hs >> extra))
            throw ParseError(origin + ":1: header must be a single positive integer");
    }
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string word;
        ls >> word;
        std::vector<double> vec;
        vec.reserve(static_cast<std::size_t>(table.dim));
        double v;
        while (ls >> v) vec.push_back(v);
        if (static_cast<int>(vec.size()) != table.dim)
            throw ParseError(origin + ":" + std::to_string(lineno) + ": expected " +
                             std::to_string(table.dim) + " values for '" + word +
                             "', got " + std::to_string(vec.size()));
        for (double x : vec)
            if (!std::isfinite(x))
                throw ParseError(origin + ":" + std::to_string(lineno) +
                                 ": non-finite value for '" + word + "'");
        if (!table.entries.emplace(word, std::move(vec)).second)
            throw ParseError(origin + ":" + std::to_string(lineno) + ": duplicate word '" +
                             word + "'");
    }
    return table;
}

inline WordVectorTable load_word_vectors_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open word vector file '" + path + "'");
    return load_word_vectors(in, path);
}

/// Text embedding of a class name: the word's vector, or the mean of the
/// component words for underscore/space separated names.
inline std::vector<double> class_text_embedding(const std::string& class_name,
                                                const WordVectorTable& table) {
    if (class_name.empty()) throw DataError("empty class name");
    std::vector<std::string> words;
    std::string cur;
    for (char c : class_name) {
        if (c == '_' || c == ' ') {
            if (!cur.empty()) words.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) words.push_back(cur);
    if (words.empty()) throw DataError("class name '" + class_name + "' has no words");

    std::string missing;
    for (const auto& w : words)
        if (!table.entries.count(w)) missing += (missing.empty() ? "" : ", ") + w;
    if (!missing.empty())
        throw DataError("class '" + class_name + "': words not in table: " + missing);

    std::vector<double> mean(static_cast<std::size_t>(table.dim), 0.0);
    for (const auto& w : words) {
        const auto& v = table.entries.at(w);
        for (int i = 0; i < table.dim; ++i) mean[static_cast<std::size_t>(i)] += v[i];
    }
    for (double& x : mean) x /= static_cast<double>(words.size());
    return mean;
}

/// Similarity of two taxonomy nodes, in (0, 1].
///   path:          1 / (1 + shortest undirected path length)
///   jiang-conrath: 1 / (1 + IC(a) + IC(b) - 2 IC(lca))
inline double node_similarity(const TaxonomyGraph& tax, const std::string& a,
                              const std::string& b, SimilarityKind kind) {
    const int ia = tax.index_of(a);
    const int ib = tax.index_of(b);
    const int lca = tax.lowest_common_ancestor(ia, ib);
    if (kind == SimilarityKind::path) {
        const int d = tax.depth_of(ia) + tax.depth_of(ib) - 2 * tax.depth_of(lca);
        return 1.0 / (1.0 + d);
    }
    const double dist = tax.information_content(ia) + tax.information_content(ib) -
                        2.0 * tax.information_content(lca);
    return 1.0 / (1.0 + dist);
}

/// Similarities of one class against every node, in canonical node order.
inline Tensor hierarchical_embedding(const TaxonomyGraph& tax, const std::string& cls,
                                     SimilarityKind kind) {
    Tensor out({tax.size()});
    for (int i = 0; i < tax.size(); ++i)
        out[i] = node_similarity(tax, cls, tax.nodes()[static_cast<std::size_t>(i)], kind);
    return out;
}

/// [text block || hierarchical block], dimension dim_text + |nodes|.
inline SemanticEmbedding semantic_embedding(const std::string& cls,
                                            const WordVectorTable& table,
                                            const TaxonomyGraph& tax,
                                            SimilarityKind kind) {
    const std::vector<double> text = class_text_embedding(cls, table);
    const Tensor hier = hierarchical_embedding(tax, cls, kind);
    Tensor vec({table.dim + tax.size()});
    for (int i = 0; i < table.dim; ++i) vec[i] = text[static_cast<std::size_t>(i)];
    for (int i = 0; i < tax.size(); ++i) vec[table.dim + i] = hier[i];
    return SemanticEmbedding{cls, std::move(vec)};
}

} // namespace pdfd

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "pdfd/semantic.hpp"

using namespace pdfd;

namespace {

TaxonomyGraph tax_from(const std::string& text) {
    std::istringstream in(text);
    return TaxonomyGraph::load(in);
}

WordVectorTable words_from(const std::string& text) {
    std::istringstream in(text);
    return load_word_vectors(in);
}

// root with two leaves; counts force IC(leaf) = -ln(1/2)
const char* kThreeNode = "leaf1\troot\t1\nleaf2\troot\t1\n";

// two-level tree used for distinctness and symmetry sweeps
const char* kSevenNode =
    "animal\tentity\n"
    "tool\tentity\n"
    "cat\tanimal\n"
    "dog\tanimal\n"
    "hammer\ttool\n"
    "saw\ttool\n";

} // namespace

TEST_CASE("word vector table parses the documented format", "[semantic]") {
    auto table = words_from("2\ncat 0.1 0.2\ndog 0.3 0.4\n");
    CHECK(table.dim == 2);
    CHECK(table.entries.at("cat") == std::vector<double>{0.1, 0.2});
    CHECK(table.entries.at("dog") == std::vector<double>{0.3, 0.4});
}

TEST_CASE("word vector parse failures", "[semantic]") {
    SECTION("short row reports its line number") {
        try {
            words_from("2\ncat 0.1\n");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find(":2") != std::string::npos);
        }
    }
    SECTION("empty file is a missing header") {
        CHECK_THROWS_MATCHES(words_from(""), ParseError,
                             Catch::Matchers::MessageMatches(
                                 Catch::Matchers::ContainsSubstring("missing header")));
    }
    SECTION("duplicate words are rejected") {
        CHECK_THROWS_AS(words_from("1\ncat 0.1\ncat 0.2\n"), ParseError);
    }
}

TEST_CASE("class text embedding", "[semantic]") {
    auto table = words_from("2\ncat 0.1 0.2\nteddy 0.5 0.5\nbear 0.5 0.5\n");
    SECTION("single word is a lookup") {
        CHECK(class_text_embedding("cat", table) == std::vector<double>{0.1, 0.2});
    }
    SECTION("multi-word names average the components") {
        CHECK(class_text_embedding("teddy_bear", table) == std::vector<double>{0.5, 0.5});
        CHECK(class_text_embedding("teddy bear", table) == std::vector<double>{0.5, 0.5});
    }
    SECTION("missing words are listed in the error") {
        CHECK_THROWS_MATCHES(class_text_embedding("zzz", table), DataError,
                             Catch::Matchers::MessageMatches(
                                 Catch::Matchers::ContainsSubstring("zzz")));
    }
}

TEST_CASE("path similarity fixtures", "[semantic]") {
    auto tax = tax_from(kThreeNode);
    CHECK(node_similarity(tax, "leaf1", "leaf1", SimilarityKind::path) == 1.0);
    CHECK(node_similarity(tax, "leaf1", "root", SimilarityKind::path) == 0.5);
    CHECK(node_similarity(tax, "leaf1", "leaf2", SimilarityKind::path) ==
          Catch::Approx(1.0 / 3.0).margin(1e-15));
}

TEST_CASE("jiang-conrath fixtures", "[semantic]") {
    auto tax = tax_from(kThreeNode);
    SECTION("self similarity is exactly 1") {
        CHECK(node_similarity(tax, "leaf1", "leaf1", SimilarityKind::jiang_conrath) == 1.0);
    }
    SECTION("unit leaf counts give 1/(1 + 2 ln 2)") {
        // IC(leaf) = -ln(1/2), IC(root) = 0, dist = 2 ln 2
        const double expected = 1.0 / (1.0 + 2.0 * std::log(2.0));
        double got = node_similarity(tax, "leaf1", "leaf2", SimilarityKind::jiang_conrath);
        CHECK(got == Catch::Approx(expected).margin(1e-12));
        CHECK(got == Catch::Approx(0.4191).margin(5e-5));
    }
    SECTION("zero total mass is an error") {
        auto zero = tax_from("leaf1\troot\t0\nleaf2\troot\t0\n");
        CHECK_THROWS_AS(node_similarity(zero, "leaf1", "leaf2",
                                        SimilarityKind::jiang_conrath),
                        DataError);
    }
    SECTION("unknown node is an error") {
        CHECK_THROWS_AS(node_similarity(tax, "leaf1", "ghost", SimilarityKind::path),
                        DataError);
    }
}

TEST_CASE("taxonomy structural validation", "[semantic]") {
    CHECK_THROWS_MATCHES(tax_from("a\tb\nc\td\n"), ParseError,
                         Catch::Matchers::MessageMatches(
                             Catch::Matchers::ContainsSubstring("multiple roots")));
    CHECK_THROWS_AS(tax_from("a\tb\nb\ta\n"), ParseError);
    CHECK_THROWS_AS(tax_from("a\tb\na\tc\nc\tb\n"), ParseError); // two parents
    CHECK_THROWS_AS(tax_from(""), ParseError);
}

TEST_CASE("hierarchical embedding", "[semantic]") {
    SECTION("single-node taxonomy") {
        auto tax = tax_from("only\n");
        Tensor h = hierarchical_embedding(tax, "only", SimilarityKind::path);
        REQUIRE(h.size() == 1);
        CHECK(h[0] == 1.0);
    }
    SECTION("own canonical position is always 1") {
        auto tax = tax_from(kSevenNode);
        for (const auto& cls : tax.nodes()) {
            Tensor h = hierarchical_embedding(tax, cls, SimilarityKind::path);
            CHECK(h[tax.index_of(cls)] == 1.0);
        }
    }
    SECTION("three-node tree, path kind, canonical first-appearance order") {
        auto tax = tax_from(kThreeNode);
        REQUIRE(tax.nodes() == std::vector<std::string>{"leaf1", "root", "leaf2"});
        Tensor h = hierarchical_embedding(tax, "leaf1", SimilarityKind::path);
        CHECK(h[0] == 1.0);
        CHECK(h[1] == 0.5);
        CHECK(h[2] == Catch::Approx(1.0 / 3.0).margin(1e-15));
    }
}

TEST_CASE("semantic embedding concatenates text and hierarchy blocks", "[semantic]") {
    auto table = words_from("2\nleaf1 0.1 0.2\n");
    auto tax = tax_from("leaf1\n");
    auto emb = semantic_embedding("leaf1", table, tax, SimilarityKind::path);
    REQUIRE(emb.vector.size() == 3);
    CHECK(emb.vector[0] == 0.1);
    CHECK(emb.vector[1] == 0.2);
    CHECK(emb.vector[2] == 1.0);
}

TEST_CASE("distinct classes get distinct hierarchical blocks", "[semantic]") {
    auto tax = tax_from(kSevenNode);
    for (auto kind : {SimilarityKind::path, SimilarityKind::jiang_conrath}) {
        for (const auto& a : tax.nodes()) {
            for (const auto& b : tax.nodes()) {
                if (a == b) continue;
                Tensor ha = hierarchical_embedding(tax, a, kind);
                Tensor hb = hierarchical_embedding(tax, b, kind);
                INFO(a << " vs " << b);
                CHECK_FALSE(ha == hb);
            }
        }
    }
}

TEST_CASE("similarity invariants", "[semantic]") {
    auto tax = tax_from(kSevenNode);
    SECTION("symmetry over all pairs, both kinds") {
        for (auto kind : {SimilarityKind::path, SimilarityKind::jiang_conrath}) {
            for (const auto& a : tax.nodes())
                for (const auto& b : tax.nodes())
                    CHECK(node_similarity(tax, a, b, kind) ==
                          node_similarity(tax, b, a, kind));
        }
    }
    SECTION("self-similarity is the maximum") {
        for (auto kind : {SimilarityKind::path, SimilarityKind::jiang_conrath}) {
            for (const auto& a : tax.nodes()) {
                for (const auto& b : tax.nodes()) {
                    double sab = node_similarity(tax, a, b, kind);
                    CHECK(sab <= 1.0);
                    CHECK(sab > 0.0);
                    CHECK(node_similarity(tax, a, a, kind) >= sab);
                }
            }
        }
    }
    SECTION("path similarity strictly decreases along a chain") {
        auto chain = tax_from("b\ta\nc\tb\nd\tc\ne\td\n");
        double prev = 2.0;
        for (const char* node : {"a", "b", "c", "d", "e"}) {
            double s = node_similarity(chain, "a", node, SimilarityKind::path);
            CHECK(s < prev);
            prev = s;
        }
    }
    SECTION("embedding length equals node count for every class") {
        for (const auto& cls : tax.nodes())
            CHECK(hierarchical_embedding(tax, cls, SimilarityKind::path).size() ==
                  tax.size());
    }
}

TEST_CASE("restriction to a class subset keeps ancestors and order", "[semantic]") {
    auto tax = tax_from(kSevenNode);
    auto sub = tax.restrict_to({"cat", "dog"});
    CHECK(sub.nodes() == std::vector<std::string>{"animal", "entity", "cat", "dog"});
    CHECK(sub.parent_of(sub.index_of("cat")) == sub.index_of("animal"));
    CHECK(sub.parent_of(sub.index_of("animal")) == sub.index_of("entity"));
    // counts carried over: every node defaulted to 1, so masses follow sizes
    CHECK(sub.total_mass() == 4.0);
    CHECK_THROWS_AS(tax.restrict_to({"ghost"}), DataError);
}

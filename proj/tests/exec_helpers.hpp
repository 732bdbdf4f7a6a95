#pragma once

#include "ath/executor.hpp"
#include "ath/opseq.hpp"
#include "ath/scene_graph.hpp"

#include "helpers.hpp"

#include <random>
#include <string>
#include <vector>

namespace test {

// Seeded random (graph, chain) instances for the Viterbi-vs-oracle property:
// up to 8 nodes, up to 6 path-consuming ops, random but valid distributions.
struct RandomInstance {
    ath::SceneGraph graph;
    ath::OpSeq chain;
};

inline ath::CategoricalDist random_dist(std::mt19937_64& rng, ath::VocabSlice slice,
                                        std::size_t size) {
    std::vector<double> raw(size);
    bool any = false;
    for (auto& r : raw) {
        r = static_cast<double>(rng() >> 11) * 0x1p-53;
        if (rng() % 3 == 0) r = 0.0; // sprinkle hard zeros
        if (r > 0.0) any = true;
    }
    if (!any) raw[rng() % size] = 1.0;
    return ath::normalize_dist(slice, raw);
}

inline RandomInstance random_instance(std::mt19937_64& rng, const ath::Vocabulary& vocab,
                                      const ath::OperationRegistry& registry) {
    const std::size_t n_nodes = 1 + rng() % 8;
    std::vector<ath::ObjectNode> nodes;
    for (std::size_t i = 0; i < n_nodes; ++i) {
        ath::ObjectNode node;
        node.id = "n" + std::to_string(i);
        const double x = static_cast<double>(rng() % 80);
        const double y = static_cast<double>(rng() % 80);
        node.bbox = {x, y, x + 1 + static_cast<double>(rng() % 20),
                     y + 1 + static_cast<double>(rng() % 20)};
        node.class_dist = random_dist(rng, ath::VocabSlice::objects(), vocab.object_count());
        for (std::uint32_t c = 0; c < vocab.category_count(); ++c)
            if (rng() % 4 != 0)
                node.attr_dists[c] = random_dist(rng, ath::VocabSlice::attributes(c),
                                                 vocab.category(c).members.size());
        nodes.push_back(std::move(node));
    }
    std::vector<ath::RelationEdge> edges;
    for (std::size_t a = 0; a < n_nodes; ++a)
        for (std::size_t b = 0; b < n_nodes; ++b) {
            if (a == b || rng() % 3 != 0) continue;
            edges.push_back({nodes[a].id, nodes[b].id,
                             random_dist(rng, ath::VocabSlice::relationships(),
                                         vocab.relationship_count())});
        }
    RandomInstance inst{ath::SceneGraph("rand", 100, 100, std::move(nodes), std::move(edges)), {}};

    const std::size_t n_steps = 1 + rng() % 6;
    auto pick = [&rng](const std::vector<std::string>& xs) { return xs[rng() % xs.size()]; };
    for (std::size_t t = 0; t < n_steps; ++t) {
        ath::Operation op;
        const std::size_t roll = t == 0 ? 0 : rng() % 3;
        if (roll == 0) {
            op.kind = "select";
            op.args = {rng() % 5 == 0 ? "_" : pick(vocab.object_names())};
        } else if (roll == 1) {
            const std::uint32_t c = static_cast<std::uint32_t>(rng() % vocab.category_count());
            op.kind = "filter";
            op.qualifier = vocab.category(c).name;
            std::string attr = pick(vocab.category(c).members);
            op.args = {rng() % 4 == 0 ? "not(" + attr + ")" : attr};
        } else {
            op.kind = "relate";
            op.args = {rng() % 2 == 0 ? "_" : pick(vocab.object_names()),
                       pick(vocab.relationship_names()), rng() % 2 == 0 ? "s" : "o"};
        }
        if (t > 0) op.dependencies = {t - 1};
        inst.chain.ops.push_back(std::move(op));
    }
    (void)registry;
    return inst;
}

} // namespace test

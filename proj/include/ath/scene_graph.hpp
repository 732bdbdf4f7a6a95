#pragma once

#include "ath/dist.hpp"
#include "ath/errors.hpp"
#include "ath/geometry.hpp"
#include "ath/vocab.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ath {

using NodeId = std::string;

// One detected or annotated object: a box, a class distribution over the
// object vocabulary, and one distribution per attribute category. Generated
// graphs carry every category; oracle graphs may carry a subset.
struct ObjectNode {
    NodeId id;
    BoundingBox bbox;
    CategoricalDist class_dist;
    std::map<std::uint32_t, CategoricalDist> attr_dists; // keyed by category index

    bool operator==(const ObjectNode&) const = default;
};

// Directed relationship edge: (src = subject) -> (dst = object), carrying a
// distribution over relationship names. (a,b) and (b,a) are distinct edges.
struct RelationEdge {
    NodeId src;
    NodeId dst;
    CategoricalDist rel_dist;

    bool operator==(const RelationEdge&) const = default;
};

enum class LayerSource : std::uint8_t { Oracle, Predicted };

inline const char* to_string(LayerSource s) {
    return s == LayerSource::Oracle ? "oracle" : "predicted";
}

inline LayerSource layer_source_from_string(std::string_view s) {
    if (s == "oracle") return LayerSource::Oracle;
    if (s == "predicted") return LayerSource::Predicted;
    throw ConfigError("unknown layer source: " + std::string(s));
}

struct LayerProvenance {
    LayerSource objects = LayerSource::Oracle;
    LayerSource attributes = LayerSource::Oracle;
    LayerSource relationships = LayerSource::Oracle;

    bool operator==(const LayerProvenance&) const = default;
};

// Immutable probabilistic scene graph for one image. Construction validates
// all structural invariants and builds the adjacency indexes the executor
// traverses; afterwards the graph is safe for concurrent reads.
class SceneGraph {
public:
    // (neighbor node index, edge index) adjacency entry.
    using Arc = std::pair<std::uint32_t, std::uint32_t>;

    SceneGraph() = default;

    SceneGraph(std::string image_id, double width, double height,
               std::vector<ObjectNode> nodes, std::vector<RelationEdge> edges,
               LayerProvenance provenance = {})
        : image_id_(std::move(image_id)), width_(width), height_(height),
          nodes_(std::move(nodes)), edges_(std::move(edges)), provenance_(provenance) {
        build_indexes();
    }

    const std::string& image_id() const { return image_id_; }
    double width() const { return width_; }
    double height() const { return height_; }
    const LayerProvenance& provenance() const { return provenance_; }

    std::size_t node_count() const { return nodes_.size(); }
    const std::vector<ObjectNode>& nodes() const { return nodes_; }
    const ObjectNode& node(std::uint32_t i) const { return nodes_.at(i); }
    const std::vector<RelationEdge>& edges() const { return edges_; }
    const RelationEdge& edge(std::uint32_t i) const { return edges_.at(i); }

    std::optional<std::uint32_t> find_node(const NodeId& id) const {
        auto it = node_by_id_.find(id);
        if (it == node_by_id_.end()) return std::nullopt;
        return it->second;
    }

    // Edge src -> dst, or nullptr when the ordered pair has none.
    const RelationEdge* edge_between(std::uint32_t src, std::uint32_t dst) const {
        auto it = edge_by_pair_.find(pair_key(src, dst));
        if (it == edge_by_pair_.end()) return nullptr;
        return &edges_[it->second];
    }

    // Arcs where node i is the subject (edges leaving i).
    const std::vector<Arc>& out_arcs(std::uint32_t i) const { return out_arcs_.at(i); }
    // Arcs where node i is the object (edges entering i).
    const std::vector<Arc>& in_arcs(std::uint32_t i) const { return in_arcs_.at(i); }

    bool operator==(const SceneGraph& o) const {
        return image_id_ == o.image_id_ && width_ == o.width_ && height_ == o.height_ &&
               nodes_ == o.nodes_ && edges_ == o.edges_ && provenance_ == o.provenance_;
    }

private:
    static std::uint64_t pair_key(std::uint32_t a, std::uint32_t b) {
        return (static_cast<std::uint64_t>(a) << 32) | b;
    }

    void build_indexes() {
        node_by_id_.reserve(nodes_.size());
        for (std::uint32_t i = 0; i < nodes_.size(); ++i) {
            const auto& n = nodes_[i];
            if (!node_by_id_.emplace(n.id, i).second)
                throw Error("scene graph " + image_id_ + ": duplicate node id " + n.id);
            if (!n.bbox.valid())
                throw Error("scene graph " + image_id_ + ": invalid bbox on node " + n.id);
            n.class_dist.validate();
            if (n.class_dist.slice().kind != VocabSlice::Kind::Objects)
                throw Error("scene graph " + image_id_ + ": class dist on wrong slice, node " + n.id);
            for (const auto& [cat, dist] : n.attr_dists) {
                dist.validate();
                if (dist.slice() != VocabSlice::attributes(cat))
                    throw Error("scene graph " + image_id_ + ": attribute dist slice mismatch on node " +
                                n.id + " (category " + std::to_string(cat) + ")");
            }
        }
        out_arcs_.assign(nodes_.size(), {});
        in_arcs_.assign(nodes_.size(), {});
        for (std::uint32_t e = 0; e < edges_.size(); ++e) {
            const auto& edge = edges_[e];
            auto src = find_node(edge.src);
            auto dst = find_node(edge.dst);
            if (!src || !dst)
                throw Error("scene graph " + image_id_ + ": edge endpoint missing: " +
                            edge.src + " -> " + edge.dst);
            if (*src == *dst)
                throw Error("scene graph " + image_id_ + ": self edge on node " + edge.src);
            if (!edge_by_pair_.emplace(pair_key(*src, *dst), e).second)
                throw Error("scene graph " + image_id_ + ": duplicate edge " +
                            edge.src + " -> " + edge.dst);
            edge.rel_dist.validate();
            if (edge.rel_dist.slice().kind != VocabSlice::Kind::Relationships)
                throw Error("scene graph " + image_id_ + ": relation dist on wrong slice");
            out_arcs_[*src].emplace_back(*dst, e);
            in_arcs_[*dst].emplace_back(*src, e);
        }
    }

    std::string image_id_;
    double width_ = 0.0;
    double height_ = 0.0;
    std::vector<ObjectNode> nodes_;
    std::vector<RelationEdge> edges_;
    LayerProvenance provenance_;

    std::unordered_map<NodeId, std::uint32_t> node_by_id_;
    std::unordered_map<std::uint64_t, std::uint32_t> edge_by_pair_;
    std::vector<std::vector<Arc>> out_arcs_;
    std::vector<std::vector<Arc>> in_arcs_;
};

} // namespace ath

#pragma once

#include "ath/dist.hpp"
#include "ath/errors.hpp"
#include "ath/geometry.hpp"
#include "ath/opseq.hpp"
#include "ath/registry.hpp"
#include "ath/scene_graph.hpp"
#include "ath/tokenize.hpp"
#include "ath/vocab.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

namespace ath {

// Inference-object categories annotated per question: referenced in the
// question, in the short answer, and in the full-sentence answer, plus the
// pooled union of all three.
enum class RefCategory : std::uint8_t { Question = 0, Answer = 1, FullAnswer = 2, Combined = 3 };

inline constexpr std::array<const char*, 4> kRefCategoryNames{"Q", "A", "FA", "Q+A+FA"};

struct InferenceObjectRef {
    std::string id; // may be empty when the source has no object ids
    BoundingBox bbox;

    bool operator==(const InferenceObjectRef&) const = default;
};

struct QuestionRecord {
    std::string question_id;
    std::string image_id;
    std::vector<std::string> question_words;
    std::string gold_answer;
    std::string gold_full_answer;
    std::vector<std::string> opseq_lines;
    enum class Type : std::uint8_t { Binary, Open } type = Type::Open;
    // Indexed by RefCategory (Question/Answer/FullAnswer); Combined is derived.
    std::array<std::vector<InferenceObjectRef>, 3> inference_objects;

    std::string opseq_text() const {
        std::string out;
        for (const auto& line : opseq_lines) {
            out += line;
            out += '\n';
        }
        return out;
    }

    OpSeq parse_gold(const OperationRegistry& registry) const {
        return parse_opseq(opseq_text(), registry, question_id);
    }

    // Union of the three categories, deduplicated by id when present and by
    // box otherwise.
    std::vector<InferenceObjectRef> combined_refs() const {
        std::vector<InferenceObjectRef> out;
        for (const auto& refs : inference_objects)
            for (const auto& r : refs) {
                bool seen = false;
                for (const auto& existing : out) {
                    if (!r.id.empty() || !existing.id.empty()) {
                        if (existing.id == r.id) seen = true;
                    } else if (existing.bbox == r.bbox) {
                        seen = true;
                    }
                }
                if (!seen) out.push_back(r);
            }
        return out;
    }

    std::span<const InferenceObjectRef> refs(RefCategory cat) const {
        return inference_objects.at(static_cast<std::size_t>(cat));
    }

    bool operator==(const QuestionRecord&) const = default;
};

struct DetectedObject {
    std::string id;
    BoundingBox bbox;
    CategoricalDist class_dist;
    std::map<std::uint32_t, CategoricalDist> attr_dists;

    bool operator==(const DetectedObject&) const = default;
};

struct DetectedRelation {
    std::string src;
    std::string dst;
    CategoricalDist rel_dist;

    bool operator==(const DetectedRelation&) const = default;
};

struct DetectionRecord {
    std::string image_id;
    double width = 0.0;
    double height = 0.0;
    std::vector<DetectedObject> objects;
    std::vector<DetectedRelation> relations;

    bool operator==(const DetectionRecord&) const = default;
};

// Which source feeds each scene-graph layer when building evaluation graphs.
struct GraphRecipe {
    LayerSource objects = LayerSource::Oracle;
    LayerSource attributes = LayerSource::Oracle;
    LayerSource relationships = LayerSource::Oracle;

    bool all_oracle() const {
        return objects == LayerSource::Oracle && attributes == LayerSource::Oracle &&
               relationships == LayerSource::Oracle;
    }

    std::string describe() const {
        if (all_oracle()) return "oracle";
        std::string out = "pred-obj";
        if (objects == LayerSource::Oracle) out = "oracle-obj";
        if (attributes == LayerSource::Predicted) out += "+attr";
        if (relationships == LayerSource::Predicted) out += "+rel";
        return out;
    }

    bool operator==(const GraphRecipe&) const = default;
};

namespace detail {

inline nlohmann::json read_json_file(const std::filesystem::path& path, const char* what) {
    std::ifstream in(path);
    if (!in) throw IngestError(std::string(what) + ": cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw IngestError(std::string(what) + ": " + path.string() + ": " + e.what());
    }
    return j;
}

inline void write_json_file(const nlohmann::ordered_json& j, const std::filesystem::path& path,
                            const char* what) {
    std::ofstream out(path);
    if (!out) throw IngestError(std::string(what) + ": cannot write " + path.string());
    out << j.dump(2) << '\n';
}

inline BoundingBox bbox_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 4) throw IngestError("bbox must be [x1,y1,x2,y2]");
    BoundingBox b{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
    if (!b.valid()) throw IngestError("invalid bbox");
    return b;
}

inline nlohmann::ordered_json bbox_to_json(const BoundingBox& b) {
    return nlohmann::ordered_json::array({b.x1, b.y1, b.x2, b.y2});
}

// name -> probability map over one slice. Probabilities round-trip exactly:
// the serializer emits shortest-exact decimal forms.
inline CategoricalDist dist_from_json(const nlohmann::json& probs, VocabSlice slice,
                                      const Vocabulary& vocab, bool truncated, double other_mass) {
    std::vector<CategoricalDist::Entry> entries;
    for (auto it = probs.begin(); it != probs.end(); ++it) {
        auto idx = slice.index_of(vocab, it.key());
        if (!idx)
            throw IngestError("'" + it.key() + "' not in " + slice.describe());
        entries.emplace_back(*idx, it.value().get<double>());
    }
    try {
        return CategoricalDist(slice, std::move(entries), truncated, other_mass);
    } catch (const DegenerateDistribution& e) {
        throw IngestError(std::string("invalid distribution: ") + e.what());
    }
}

inline nlohmann::ordered_json dist_to_json(const CategoricalDist& dist, const Vocabulary& vocab) {
    nlohmann::ordered_json probs;
    for (const auto& [idx, p] : dist.entries())
        probs[dist.slice().name_of(vocab, idx)] = p;
    return probs;
}

inline std::vector<std::string> split_words(const std::string& text) {
    std::vector<std::string> words;
    std::istringstream in(text);
    std::string w;
    while (in >> w) words.push_back(w);
    return words;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Oracle scene-graph annotations.
//
// {"schema_version": 1, "graphs": [{"image_id", "width", "height",
//   "objects": [{"id", "name", "bbox": [x1,y1,x2,y2],
//                "attributes": ["red", ...],
//                "relations": [{"target": "<id>", "name": "on"}]}]}]}
// ---------------------------------------------------------------------------

inline SceneGraph oracle_graph_from_json(const nlohmann::json& jg, const Vocabulary& vocab) {
    const std::string image_id = jg.at("image_id").get<std::string>();
    std::vector<ObjectNode> nodes;
    std::vector<RelationEdge> edges;
    for (const auto& jo : jg.at("objects")) {
        ObjectNode node;
        node.id = jo.at("id").get<std::string>();
        node.bbox = detail::bbox_from_json(jo.at("bbox"));
        const std::string name = jo.at("name").get<std::string>();
        auto obj = vocab.object_index(name);
        if (!obj) throw IngestError(image_id + "/" + node.id + ": unknown object '" + name + "'");
        node.class_dist = CategoricalDist::one_hot(VocabSlice::objects(), *obj);

        // Multiple annotated attributes in one category become uniform mass.
        std::map<std::uint32_t, std::vector<std::uint32_t>> per_category;
        for (const auto& ja : jo.value("attributes", nlohmann::json::array())) {
            const std::string attr = ja.get<std::string>();
            auto home = vocab.attribute_home(attr);
            if (!home)
                throw IngestError(image_id + "/" + node.id + ": unknown attribute '" + attr + "'");
            auto& members = per_category[home->first];
            if (std::find(members.begin(), members.end(), home->second) == members.end())
                members.push_back(home->second);
        }
        for (auto& [cat, members] : per_category)
            node.attr_dists[cat] = CategoricalDist::uniform(VocabSlice::attributes(cat), members);

        for (const auto& jr : jo.value("relations", nlohmann::json::array())) {
            const std::string rel = jr.at("name").get<std::string>();
            auto rel_idx = vocab.relationship_index(rel);
            if (!rel_idx)
                throw IngestError(image_id + "/" + node.id + ": unknown relationship '" + rel + "'");
            edges.push_back({node.id, jr.at("target").get<std::string>(),
                             CategoricalDist::one_hot(VocabSlice::relationships(), *rel_idx)});
        }
        nodes.push_back(std::move(node));
    }
    try {
        return SceneGraph(image_id, jg.at("width").get<double>(), jg.at("height").get<double>(),
                          std::move(nodes), std::move(edges),
                          {LayerSource::Oracle, LayerSource::Oracle, LayerSource::Oracle});
    } catch (const Error& e) {
        throw IngestError(std::string("scene graph ") + image_id + ": " + e.what());
    }
}

inline std::vector<SceneGraph> load_scene_graph_annotations(const std::filesystem::path& path,
                                                            const Vocabulary& vocab) {
    auto j = detail::read_json_file(path, "scene graphs");
    try {
        std::vector<SceneGraph> graphs;
        for (const auto& jg : j.at("graphs")) graphs.push_back(oracle_graph_from_json(jg, vocab));
        return graphs;
    } catch (const nlohmann::json::exception& e) {
        throw IngestError("scene graphs: " + path.string() + ": " + e.what());
    }
}

inline nlohmann::ordered_json oracle_graph_to_json(const SceneGraph& graph, const Vocabulary& vocab) {
    nlohmann::ordered_json jg;
    jg["image_id"] = graph.image_id();
    jg["width"] = graph.width();
    jg["height"] = graph.height();
    auto objects = nlohmann::ordered_json::array();
    for (std::uint32_t i = 0; i < graph.node_count(); ++i) {
        const auto& node = graph.node(i);
        nlohmann::ordered_json jo;
        jo["id"] = node.id;
        if (node.class_dist.entries().size() != 1 || node.class_dist.entries()[0].second != 1.0)
            throw IngestError("graph " + graph.image_id() + " is not an oracle graph");
        jo["name"] = vocab.object_name(node.class_dist.entries()[0].first);
        jo["bbox"] = detail::bbox_to_json(node.bbox);
        auto attrs = nlohmann::ordered_json::array();
        for (const auto& [cat, dist] : node.attr_dists)
            for (const auto& [member, p] : dist.entries())
                attrs.push_back(vocab.category(cat).members.at(member));
        jo["attributes"] = std::move(attrs);
        auto relations = nlohmann::ordered_json::array();
        for (const auto& [dst, edge_idx] : graph.out_arcs(i)) {
            const auto& e = graph.edge(edge_idx);
            if (e.rel_dist.entries().size() != 1 || e.rel_dist.entries()[0].second != 1.0)
                throw IngestError("graph " + graph.image_id() + " has non-oracle relations");
            relations.push_back(
                {{"target", graph.node(dst).id},
                 {"name", vocab.relationship_name(e.rel_dist.entries()[0].first)}});
        }
        jo["relations"] = std::move(relations);
        objects.push_back(std::move(jo));
    }
    jg["objects"] = std::move(objects);
    return jg;
}

inline void save_scene_graph_annotations(std::span<const SceneGraph> graphs,
                                         const Vocabulary& vocab,
                                         const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    auto arr = nlohmann::ordered_json::array();
    for (const auto& g : graphs) arr.push_back(oracle_graph_to_json(g, vocab));
    j["graphs"] = std::move(arr);
    detail::write_json_file(j, path, "scene graphs");
}

// ---------------------------------------------------------------------------
// Question records.
// ---------------------------------------------------------------------------

inline std::vector<QuestionRecord> load_questions(const std::filesystem::path& path) {
    auto j = detail::read_json_file(path, "questions");
    std::vector<QuestionRecord> records;
    try {
        for (const auto& jq : j.at("questions")) {
            QuestionRecord r;
            r.question_id = jq.at("question_id").get<std::string>();
            r.image_id = jq.at("image_id").get<std::string>();
            r.question_words = detail::split_words(jq.at("question").get<std::string>());
            r.gold_answer = jq.at("answer").get<std::string>();
            r.gold_full_answer = jq.value("full_answer", "");
            r.opseq_lines = jq.at("opseq").get<std::vector<std::string>>();
            const std::string type = jq.at("type").get<std::string>();
            if (type == "binary") r.type = QuestionRecord::Type::Binary;
            else if (type == "open") r.type = QuestionRecord::Type::Open;
            else throw IngestError("question " + r.question_id + ": unknown type '" + type + "'");
            const auto refs = jq.value("inference_objects", nlohmann::json::object());
            const std::array<const char*, 3> keys{"question", "answer", "full_answer"};
            for (std::size_t c = 0; c < keys.size(); ++c) {
                for (const auto& jr : refs.value(keys[c], nlohmann::json::array())) {
                    InferenceObjectRef ref;
                    ref.id = jr.value("id", "");
                    ref.bbox = detail::bbox_from_json(jr.at("bbox"));
                    r.inference_objects[c].push_back(std::move(ref));
                }
            }
            records.push_back(std::move(r));
        }
    } catch (const nlohmann::json::exception& e) {
        throw IngestError("questions: " + path.string() + ": " + e.what());
    }
    return records;
}

inline void save_questions(std::span<const QuestionRecord> records,
                           const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : records) {
        nlohmann::ordered_json jq;
        jq["question_id"] = r.question_id;
        jq["image_id"] = r.image_id;
        jq["question"] = detail::join(r.question_words, " ");
        jq["answer"] = r.gold_answer;
        jq["full_answer"] = r.gold_full_answer;
        jq["type"] = r.type == QuestionRecord::Type::Binary ? "binary" : "open";
        jq["opseq"] = r.opseq_lines;
        nlohmann::ordered_json refs;
        const std::array<const char*, 3> keys{"question", "answer", "full_answer"};
        for (std::size_t c = 0; c < keys.size(); ++c) {
            auto list = nlohmann::ordered_json::array();
            for (const auto& ref : r.inference_objects[c]) {
                nlohmann::ordered_json jr;
                if (!ref.id.empty()) jr["id"] = ref.id;
                jr["bbox"] = detail::bbox_to_json(ref.bbox);
                list.push_back(std::move(jr));
            }
            refs[keys[c]] = std::move(list);
        }
        jq["inference_objects"] = std::move(refs);
        arr.push_back(std::move(jq));
    }
    j["questions"] = std::move(arr);
    detail::write_json_file(j, path, "questions");
}

// ---------------------------------------------------------------------------
// Detection records (externally produced model outputs).
// ---------------------------------------------------------------------------

inline std::vector<DetectionRecord> load_detections(const std::filesystem::path& path,
                                                    const Vocabulary& vocab,
                                                    std::size_t object_cap = 100) {
    auto j = detail::read_json_file(path, "detections");
    std::vector<DetectionRecord> records;
    try {
        for (const auto& jd : j.at("detections")) {
            DetectionRecord rec;
            rec.image_id = jd.at("image_id").get<std::string>();
            rec.width = jd.value("width", 0.0);
            rec.height = jd.value("height", 0.0);
            const auto& objects = jd.at("objects");
            if (objects.size() > object_cap)
                throw IngestError("detections for " + rec.image_id + ": " +
                                  std::to_string(objects.size()) + " objects exceed the cap of " +
                                  std::to_string(object_cap));
            std::unordered_map<std::string, bool> ids;
            for (const auto& jo : objects) {
                DetectedObject obj;
                obj.id = jo.at("id").get<std::string>();
                if (!ids.emplace(obj.id, true).second)
                    throw IngestError("detections for " + rec.image_id + ": duplicate id " + obj.id);
                obj.bbox = detail::bbox_from_json(jo.at("bbox"));
                obj.class_dist = detail::dist_from_json(
                    jo.at("classes"), VocabSlice::objects(), vocab, jo.value("truncated", false),
                    jo.value("other_mass", 0.0));
                for (const auto& [cat_name, probs] :
                     jo.value("attributes", nlohmann::json::object()).items()) {
                    auto cat = vocab.category_index(cat_name);
                    if (!cat)
                        throw IngestError("detections for " + rec.image_id +
                                          ": unknown attribute category '" + cat_name + "'");
                    obj.attr_dists[*cat] = detail::dist_from_json(
                        probs, VocabSlice::attributes(*cat), vocab, false, 0.0);
                }
                rec.objects.push_back(std::move(obj));
            }
            for (const auto& jr : jd.value("relations", nlohmann::json::array())) {
                DetectedRelation rel;
                rel.src = jr.at("src").get<std::string>();
                rel.dst = jr.at("dst").get<std::string>();
                if (!ids.count(rel.src) || !ids.count(rel.dst))
                    throw IngestError("detections for " + rec.image_id +
                                      ": relation endpoint missing: " + rel.src + " -> " + rel.dst);
                rel.rel_dist = detail::dist_from_json(jr.at("probs"), VocabSlice::relationships(),
                                                      vocab, jr.value("truncated", false),
                                                      jr.value("other_mass", 0.0));
                rec.relations.push_back(std::move(rel));
            }
            records.push_back(std::move(rec));
        }
    } catch (const nlohmann::json::exception& e) {
        throw IngestError("detections: " + path.string() + ": " + e.what());
    }
    return records;
}

inline void save_detections(std::span<const DetectionRecord> records, const Vocabulary& vocab,
                            const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    auto arr = nlohmann::ordered_json::array();
    for (const auto& rec : records) {
        nlohmann::ordered_json jd;
        jd["image_id"] = rec.image_id;
        jd["width"] = rec.width;
        jd["height"] = rec.height;
        auto objects = nlohmann::ordered_json::array();
        for (const auto& obj : rec.objects) {
            nlohmann::ordered_json jo;
            jo["id"] = obj.id;
            jo["bbox"] = detail::bbox_to_json(obj.bbox);
            jo["classes"] = detail::dist_to_json(obj.class_dist, vocab);
            if (obj.class_dist.truncated()) {
                jo["truncated"] = true;
                jo["other_mass"] = obj.class_dist.other_mass();
            }
            if (!obj.attr_dists.empty()) {
                nlohmann::ordered_json attrs;
                for (const auto& [cat, dist] : obj.attr_dists)
                    attrs[vocab.category(cat).name] = detail::dist_to_json(dist, vocab);
                jo["attributes"] = std::move(attrs);
            }
            objects.push_back(std::move(jo));
        }
        jd["objects"] = std::move(objects);
        auto relations = nlohmann::ordered_json::array();
        for (const auto& rel : rec.relations) {
            nlohmann::ordered_json jr;
            jr["src"] = rel.src;
            jr["dst"] = rel.dst;
            jr["probs"] = detail::dist_to_json(rel.rel_dist, vocab);
            relations.push_back(std::move(jr));
        }
        jd["relations"] = std::move(relations);
        arr.push_back(std::move(jd));
    }
    j["detections"] = std::move(arr);
    detail::write_json_file(j, path, "detections");
}

// Predicted op-seq files: {"schema_version": 1, "opseqs": {"<qid>": [lines]}}
inline std::unordered_map<std::string, std::vector<std::string>> load_predicted_opseqs(
    const std::filesystem::path& path) {
    auto j = detail::read_json_file(path, "predicted op-seqs");
    std::unordered_map<std::string, std::vector<std::string>> out;
    try {
        for (const auto& [qid, lines] : j.at("opseqs").items())
            out[qid] = lines.get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw IngestError("predicted op-seqs: " + path.string() + ": " + e.what());
    }
    return out;
}

inline void save_predicted_opseqs(
    const std::map<std::string, std::vector<std::string>>& opseqs,
    const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    nlohmann::ordered_json map;
    for (const auto& [qid, lines] : opseqs) map[qid] = lines;
    j["opseqs"] = std::move(map);
    detail::write_json_file(j, path, "predicted op-seqs");
}

// ---------------------------------------------------------------------------
// Geometry-driven construction.
// ---------------------------------------------------------------------------

// Ordered node-index pairs whose boxes, each grown by `expansion` per side,
// still overlap. Both orderings of a qualifying pair are returned.
inline std::vector<std::pair<std::uint32_t, std::uint32_t>> candidate_pairs(
    std::span<const ObjectNode> nodes, double expansion = 0.15) {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs;
    std::vector<BoundingBox> grown;
    grown.reserve(nodes.size());
    for (const auto& n : nodes) grown.push_back(n.bbox.expanded(expansion));
    for (std::uint32_t a = 0; a < nodes.size(); ++a)
        for (std::uint32_t b = a + 1; b < nodes.size(); ++b)
            if (overlaps(grown[a], grown[b])) {
                pairs.emplace_back(a, b);
                pairs.emplace_back(b, a);
            }
    return pairs;
}

// Greedy bipartite matching by descending IoU above the threshold; each
// annotation is consumed at most once. Returns, per detection index, the
// matched annotation node index.
inline std::vector<std::optional<std::uint32_t>> greedy_iou_match(
    std::span<const BoundingBox> detections, std::span<const BoundingBox> annotations,
    double threshold) {
    struct Pair {
        double score;
        std::uint32_t det;
        std::uint32_t ann;
    };
    std::vector<Pair> pairs;
    for (std::uint32_t d = 0; d < detections.size(); ++d)
        for (std::uint32_t a = 0; a < annotations.size(); ++a) {
            const double score = iou(detections[d], annotations[a]);
            if (score > threshold) pairs.push_back({score, d, a});
        }
    std::stable_sort(pairs.begin(), pairs.end(),
                     [](const Pair& x, const Pair& y) { return x.score > y.score; });
    std::vector<std::optional<std::uint32_t>> match(detections.size());
    std::vector<bool> ann_used(annotations.size(), false);
    for (const auto& p : pairs) {
        if (match[p.det] || ann_used[p.ann]) continue;
        match[p.det] = p.ann;
        ann_used[p.ann] = true;
    }
    return match;
}

// Builds the evaluation scene graph for one image according to the recipe.
// Predicted objects with an oracle attribute/relationship layer inherit the
// annotations of their best-IoU match (>threshold, annotation consumed at
// most once); unmatched detections keep empty oracle layers.
inline SceneGraph build_graph(const GraphRecipe& recipe, const SceneGraph& oracle,
                              const DetectionRecord* detections, const Vocabulary& vocab,
                              double iou_threshold = 0.5) {
    if (recipe.all_oracle()) return oracle;
    const bool need_detections = recipe.objects == LayerSource::Predicted ||
                                 recipe.attributes == LayerSource::Predicted ||
                                 recipe.relationships == LayerSource::Predicted;
    if (need_detections && detections == nullptr)
        throw IngestError("recipe needs detections for image " + oracle.image_id() +
                          " but none were supplied");

    std::vector<BoundingBox> det_boxes, ann_boxes;
    for (const auto& o : detections->objects) det_boxes.push_back(o.bbox);
    for (const auto& n : oracle.nodes()) ann_boxes.push_back(n.bbox);
    const auto match = greedy_iou_match(det_boxes, ann_boxes, iou_threshold);

    LayerProvenance provenance{recipe.objects, recipe.attributes, recipe.relationships};

    if (recipe.objects == LayerSource::Predicted) {
        std::vector<ObjectNode> nodes;
        // ann node index -> det node index, for transplanting oracle edges.
        std::unordered_map<std::uint32_t, std::uint32_t> ann_to_det;
        for (std::uint32_t d = 0; d < detections->objects.size(); ++d) {
            const auto& det = detections->objects[d];
            ObjectNode node;
            node.id = det.id;
            node.bbox = det.bbox;
            node.class_dist = det.class_dist;
            if (recipe.attributes == LayerSource::Predicted) {
                node.attr_dists = det.attr_dists;
            } else if (match[d]) {
                node.attr_dists = oracle.node(*match[d]).attr_dists;
            }
            if (match[d]) ann_to_det.emplace(*match[d], d);
            nodes.push_back(std::move(node));
        }
        std::vector<RelationEdge> edges;
        if (recipe.relationships == LayerSource::Predicted) {
            for (const auto& rel : detections->relations)
                edges.push_back({rel.src, rel.dst, rel.rel_dist});
        } else {
            for (const auto& e : oracle.edges()) {
                auto src = ann_to_det.find(*oracle.find_node(e.src));
                auto dst = ann_to_det.find(*oracle.find_node(e.dst));
                if (src == ann_to_det.end() || dst == ann_to_det.end()) continue;
                edges.push_back({detections->objects[src->second].id,
                                 detections->objects[dst->second].id, e.rel_dist});
            }
        }
        return SceneGraph(oracle.image_id(), oracle.width(), oracle.height(), std::move(nodes),
                          std::move(edges), provenance);
    }

    // Oracle objects with predicted attribute/relationship layers transplanted
    // from matched detections.
    std::vector<ObjectNode> nodes = oracle.nodes();
    std::unordered_map<std::uint32_t, std::uint32_t> ann_to_det;
    for (std::uint32_t d = 0; d < match.size(); ++d)
        if (match[d]) ann_to_det.emplace(*match[d], d);
    if (recipe.attributes == LayerSource::Predicted) {
        for (std::uint32_t a = 0; a < nodes.size(); ++a) {
            auto it = ann_to_det.find(a);
            nodes[a].attr_dists = it == ann_to_det.end()
                                      ? std::map<std::uint32_t, CategoricalDist>{}
                                      : detections->objects[it->second].attr_dists;
        }
    }
    std::vector<RelationEdge> edges;
    if (recipe.relationships == LayerSource::Predicted) {
        std::unordered_map<std::string, std::uint32_t> det_index;
        for (std::uint32_t d = 0; d < detections->objects.size(); ++d)
            det_index.emplace(detections->objects[d].id, d);
        for (const auto& rel : detections->relations) {
            const std::uint32_t ds = det_index.at(rel.src);
            const std::uint32_t dd = det_index.at(rel.dst);
            if (!match[ds] || !match[dd]) continue;
            edges.push_back({nodes[*match[ds]].id, nodes[*match[dd]].id, rel.rel_dist});
        }
    } else {
        edges = oracle.edges();
    }
    return SceneGraph(oracle.image_id(), oracle.width(), oracle.height(), std::move(nodes),
                      std::move(edges), provenance);
}

// ---------------------------------------------------------------------------
// Dataset bundle: everything one evaluation run needs.
// ---------------------------------------------------------------------------

struct Dataset {
    Vocabulary vocab;
    OperationRegistry registry;
    ClassInventory inventory;
    std::vector<SceneGraph> graphs; // oracle annotations
    std::vector<QuestionRecord> questions;
    std::vector<DetectionRecord> detections;
    std::unordered_map<std::string, std::vector<std::string>> predicted_opseqs;

    std::unordered_map<std::string, std::size_t> graph_by_image;
    std::unordered_map<std::string, std::size_t> detection_by_image;

    void index() {
        graph_by_image.clear();
        detection_by_image.clear();
        for (std::size_t i = 0; i < graphs.size(); ++i)
            graph_by_image.emplace(graphs[i].image_id(), i);
        for (std::size_t i = 0; i < detections.size(); ++i)
            detection_by_image.emplace(detections[i].image_id, i);
    }

    const SceneGraph* graph_for(const std::string& image_id) const {
        auto it = graph_by_image.find(image_id);
        return it == graph_by_image.end() ? nullptr : &graphs[it->second];
    }

    const DetectionRecord* detections_for(const std::string& image_id) const {
        auto it = detection_by_image.find(image_id);
        return it == detection_by_image.end() ? nullptr : &detections[it->second];
    }
};

} // namespace ath

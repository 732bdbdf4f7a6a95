#pragma once

#include "ath/errors.hpp"
#include "ath/execute.hpp"
#include "ath/ingest.hpp"
#include "ath/metrics.hpp"
#include "ath/tokenize.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace ath {

// Desk-scale truth source: random scene graphs with planted, uniquely
// identifying inference paths, gold op-seqs and answers known by
// construction, plus noise-controlled detection files and a corrupted
// "predicted" op-seq file standing in for a learned question parser.
struct SyntheticParams {
    std::uint64_t seed = 1;
    std::size_t graph_count = 10;
    std::size_t questions_per_graph = 2;
    // Master knob for the predicted layers; 0 keeps every predicted
    // distribution identical to its one-hot oracle counterpart.
    double noise = 0.0;
    std::size_t min_nodes = 4;
    std::size_t max_nodes = 8;
    std::size_t object_vocab = 40;
    double image_size = 480.0;
    // Language phenomena that exercise the processed-gold condition.
    double case_noise = 0.05;       // question capitalizes an argument word
    double paraphrase_noise = 0.06; // question paraphrases an argument word away
    bool verify_generated = true;   // re-execute each question against its oracle graph
};

struct SyntheticOutput {
    Vocabulary vocab;
    OperationRegistry registry;
    ClassInventory inventory;
    std::vector<SceneGraph> graphs;
    std::vector<QuestionRecord> questions;
    std::vector<DetectionRecord> detections;
    std::map<std::string, std::vector<std::string>> predicted_opseqs;
};

namespace detail {

// Self-contained generator so byte-identical output depends only on the seed,
// not on any library's distribution implementation.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t raw() { return engine_(); }
    std::size_t below(std::size_t n) { return n == 0 ? 0 : raw() % n; }
    double unit() { return static_cast<double>(raw() >> 11) * 0x1p-53; }
    bool chance(double p) { return unit() < p; }

    template <typename T>
    const T& pick(const std::vector<T>& v) {
        return v[below(v.size())];
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
    }

private:
    std::mt19937_64 engine_;
};

inline Vocabulary synthetic_vocabulary(std::size_t object_vocab) {
    static const std::vector<std::string> noun_pool{
        "cup",    "table",  "chair",  "dog",    "cat",    "plate",  "lamp",   "book",
        "box",    "ball",   "bottle", "phone",  "shoe",   "hat",    "car",    "tree",
        "flower", "bird",   "fish",   "clock",  "bag",    "key",    "coin",   "brush",
        "mirror", "towel",  "fork",   "spoon",  "knife",  "bowl",   "glass",  "pen",
        "pencil", "laptop", "pillow", "blanket","candle", "vase",   "basket", "frame"};
    if (object_vocab < 4 || object_vocab > noun_pool.size())
        throw ConfigError("object vocabulary size must be in [4, " +
                          std::to_string(noun_pool.size()) + "]");
    std::vector<std::string> objects(noun_pool.begin(), noun_pool.begin() + object_vocab);
    std::vector<Vocabulary::AttributeCategory> categories{
        {"color", {"red", "blue", "green", "white", "black", "brown", "yellow", "gray"}},
        {"material", {"wood", "metal", "glass", "plastic", "fabric", "ceramic"}},
        {"size", {"small", "large"}}};
    std::vector<std::string> relationships{"on",     "under",  "near",    "behind",
                                           "beside", "above",  "holding", "touching"};
    std::vector<bool> spatial{true, true, true, true, true, true, false, false};
    return Vocabulary(std::move(objects), std::move(categories), std::move(relationships),
                      std::move(spatial));
}

inline ClassInventory synthetic_inventory(const Vocabulary& vocab) {
    std::vector<std::string> words{"name"};
    for (const auto& c : vocab.attribute_categories()) words.push_back(c.name);
    return ClassInventory(20, {",", "_", "|", "not(", ")", "s", "o", "?"}, std::move(words));
}

// One-hot when peak reaches 1, otherwise peak mass on the argmax and the rest
// spread uniformly.
inline CategoricalDist peaked_dist(VocabSlice slice, std::uint32_t argmax, double peak,
                                   std::size_t size) {
    if (peak >= 1.0 || size == 1) return CategoricalDist::one_hot(slice, argmax);
    std::vector<CategoricalDist::Entry> entries;
    const double rest = (1.0 - peak) / static_cast<double>(size - 1);
    for (std::uint32_t i = 0; i < size; ++i)
        entries.emplace_back(i, i == argmax ? peak : rest);
    return CategoricalDist(slice, std::move(entries));
}

struct PlantedGraph {
    SceneGraph graph;
    std::vector<std::uint32_t> node_class; // object index per node
    std::vector<std::vector<std::uint32_t>> node_attr; // member per category per node
};

inline PlantedGraph make_graph(Rng& rng, const Vocabulary& vocab, const SyntheticParams& params,
                               std::size_t graph_index) {
    const std::size_t n =
        params.min_nodes + rng.below(params.max_nodes - params.min_nodes + 1);
    const double S = params.image_size;

    // Distinct classes per graph make every select unambiguous.
    std::vector<std::uint32_t> classes(vocab.object_count());
    for (std::uint32_t i = 0; i < classes.size(); ++i) classes[i] = i;
    rng.shuffle(classes);
    classes.resize(n);

    std::vector<ObjectNode> nodes;
    PlantedGraph out;
    for (std::size_t i = 0; i < n; ++i) {
        ObjectNode node;
        node.id = "o" + std::to_string(i);
        const double w = (0.18 + 0.20 * rng.unit()) * S;
        const double h = (0.18 + 0.20 * rng.unit()) * S;
        const double x = rng.unit() * (S - w);
        const double y = rng.unit() * (S - h);
        node.bbox = {x, y, x + w, y + h};
        node.class_dist = CategoricalDist::one_hot(VocabSlice::objects(), classes[i]);
        out.node_attr.emplace_back();
        for (std::uint32_t c = 0; c < vocab.category_count(); ++c) {
            const auto member =
                static_cast<std::uint32_t>(rng.below(vocab.category(c).members.size()));
            node.attr_dists[c] = CategoricalDist::one_hot(VocabSlice::attributes(c), member);
            out.node_attr.back().push_back(member);
        }
        nodes.push_back(std::move(node));
    }

    // Edges only between candidate pairs, and at most one edge per
    // (node, relationship, direction): every relate step has a unique target.
    auto pairs = candidate_pairs(nodes, 0.15);
    std::vector<RelationEdge> edges;
    std::set<std::pair<std::uint32_t, std::uint32_t>> edged;
    std::set<std::pair<std::uint32_t, std::uint32_t>> out_used, in_used; // (node, rel)
    const std::size_t want = n;
    for (std::size_t attempt = 0; attempt < 6 * want && edges.size() < want; ++attempt) {
        if (pairs.empty()) break;
        auto [a, b] = pairs[rng.below(pairs.size())];
        if (edged.count({a, b})) continue;
        const auto rel = static_cast<std::uint32_t>(rng.below(vocab.relationship_count()));
        if (out_used.count({a, rel}) || in_used.count({b, rel})) continue;
        edges.push_back({nodes[a].id, nodes[b].id,
                         CategoricalDist::one_hot(VocabSlice::relationships(), rel)});
        edged.insert({a, b});
        out_used.insert({a, rel});
        in_used.insert({b, rel});
    }

    out.node_class = std::move(classes);
    out.graph = SceneGraph("synthetic-" + std::to_string(graph_index), S, S, std::move(nodes),
                           std::move(edges),
                           {LayerSource::Oracle, LayerSource::Oracle, LayerSource::Oracle});
    return out;
}

struct QuestionDraft {
    std::vector<std::string> words;
    std::vector<std::string> opseq_lines;
    std::string answer;
    std::string full_answer;
    QuestionRecord::Type type = QuestionRecord::Type::Open;
    std::vector<std::uint32_t> q_refs, a_refs, fa_refs; // node indexes
};

inline std::string attr_name(const Vocabulary& vocab, std::uint32_t cat, std::uint32_t member) {
    return vocab.category(cat).members.at(member);
}

// The template pool spans select / filter / relate / query / exist / and /
// or / verify / choose. Every draft's answer is read off the planted graph,
// and the full-answer references cover every node a correct inference path
// can traverse.
inline QuestionDraft draft_question(Rng& rng, const Vocabulary& vocab, const PlantedGraph& pg) {
    const SceneGraph& g = pg.graph;
    const std::size_t n = g.node_count();
    auto cls = [&](std::uint32_t node) { return vocab.object_name(pg.node_class[node]); };

    std::vector<std::uint32_t> absent;
    {
        std::set<std::uint32_t> used(pg.node_class.begin(), pg.node_class.end());
        for (std::uint32_t i = 0; i < vocab.object_count(); ++i)
            if (!used.count(i)) absent.push_back(i);
    }

    QuestionDraft d;
    const std::size_t kind = rng.below(8);
    switch (kind) {
        case 0: { // relate + query name
            if (g.edges().empty()) return draft_question(rng, vocab, pg);
            const auto& e = g.edge(static_cast<std::uint32_t>(rng.below(g.edges().size())));
            const std::uint32_t a = *g.find_node(e.src);
            const std::uint32_t b = *g.find_node(e.dst);
            const std::string rel = vocab.relationship_name(e.rel_dist.entries()[0].first);
            const bool subject_side = rng.chance(0.5);
            const std::uint32_t anchor = subject_side ? a : b;
            const std::uint32_t target = subject_side ? b : a;
            const std::string target_arg = rng.chance(0.8) ? "_" : cls(target);
            if (subject_side)
                d.words = {"what", "is", "the", cls(anchor), rel};
            else
                d.words = {"what", "is", rel, "the", cls(anchor)};
            d.opseq_lines = {"select: " + cls(anchor),
                             "relate: " + target_arg + "," + rel + "," +
                                 (subject_side ? "s" : "o") + " [0]",
                             "query: name [1]"};
            d.answer = cls(target);
            d.full_answer = "the " + cls(a) + " is " + rel + " the " + cls(b);
            d.q_refs = {anchor};
            d.a_refs = {target};
            d.fa_refs = {a, b};
            d.type = QuestionRecord::Type::Open;
            return d;
        }
        case 1: { // query attribute, optionally through a filter
            const auto node = static_cast<std::uint32_t>(rng.below(n));
            const auto cat = static_cast<std::uint32_t>(rng.below(vocab.category_count()));
            const std::string& cat_name = vocab.category(cat).name;
            d.answer = attr_name(vocab, cat, pg.node_attr[node][cat]);
            if (rng.chance(0.5) && vocab.category_count() > 1) {
                const auto fcat = static_cast<std::uint32_t>((cat + 1) % vocab.category_count());
                const std::string fattr = attr_name(vocab, fcat, pg.node_attr[node][fcat]);
                d.words = {"what", cat_name, "is", "the", fattr, cls(node)};
                d.opseq_lines = {"select: " + cls(node),
                                 "filter " + vocab.category(fcat).name + ": " + fattr + " [0]",
                                 "query: " + cat_name + " [1]"};
            } else {
                d.words = {"what", cat_name, "is", "the", cls(node)};
                d.opseq_lines = {"select: " + cls(node), "query: " + cat_name + " [0]"};
            }
            d.full_answer = "the " + cls(node) + " is " + d.answer;
            d.q_refs = {node};
            d.a_refs = {node};
            d.fa_refs = {node};
            d.type = QuestionRecord::Type::Open;
            return d;
        }
        case 2: { // exist, present
            const auto node = static_cast<std::uint32_t>(rng.below(n));
            d.words = {"is", "there", "a", cls(node)};
            d.opseq_lines = {"select: " + cls(node), "exist: ? [0]"};
            d.answer = "yes";
            d.full_answer = "yes , there is a " + cls(node);
            d.q_refs = {node};
            d.fa_refs = {node};
            d.type = QuestionRecord::Type::Binary;
            return d;
        }
        case 3: { // exist, absent class or wrong attribute
            if (rng.chance(0.5) || absent.empty()) {
                const auto node = static_cast<std::uint32_t>(rng.below(n));
                const auto cat = static_cast<std::uint32_t>(rng.below(vocab.category_count()));
                const auto actual = pg.node_attr[node][cat];
                const auto members = vocab.category(cat).members.size();
                const auto wrong =
                    static_cast<std::uint32_t>((actual + 1 + rng.below(members - 1)) % members);
                const std::string wrong_name = attr_name(vocab, cat, wrong);
                d.words = {"is", "there", "a", wrong_name, cls(node)};
                d.opseq_lines = {"select: " + cls(node),
                                 "filter " + vocab.category(cat).name + ": " + wrong_name + " [0]",
                                 "exist: ? [1]"};
                d.q_refs = {node};
            } else {
                const std::string name = vocab.object_name(rng.pick(absent));
                d.words = {"is", "there", "a", name};
                d.opseq_lines = {"select: " + name, "exist: ? [0]"};
            }
            d.answer = "no";
            d.full_answer = "no , there is not";
            d.type = QuestionRecord::Type::Binary;
            return d;
        }
        case 4:
        case 5: { // and / or over two existence branches
            const bool conj = kind == 4;
            const auto first = static_cast<std::uint32_t>(rng.below(n));
            const bool second_present = rng.chance(0.5) || absent.empty();
            std::string second_name;
            std::optional<std::uint32_t> second_node;
            if (second_present) {
                auto other = static_cast<std::uint32_t>(rng.below(n));
                if (other == first) other = static_cast<std::uint32_t>((other + 1) % n);
                second_node = other;
                second_name = cls(other);
            } else {
                second_name = vocab.object_name(rng.pick(absent));
            }
            d.words = {"is", "there", "a", cls(first), conj ? "and" : "or", "a", second_name};
            d.opseq_lines = {"select: " + cls(first), "exist: ? [0]", "select: " + second_name,
                             "exist: ? [2]", std::string(conj ? "and" : "or") + ": [1,3]"};
            const bool v1 = true, v2 = second_present;
            d.answer = (conj ? (v1 && v2) : (v1 || v2)) ? "yes" : "no";
            d.full_answer = d.answer + " , checked both";
            d.q_refs = {first};
            d.fa_refs = {first};
            if (second_node) {
                d.q_refs.push_back(*second_node);
                d.fa_refs.push_back(*second_node);
            }
            d.type = QuestionRecord::Type::Binary;
            return d;
        }
        case 6: { // verify attribute
            const auto node = static_cast<std::uint32_t>(rng.below(n));
            const auto cat = static_cast<std::uint32_t>(rng.below(vocab.category_count()));
            const auto actual = pg.node_attr[node][cat];
            const auto members = vocab.category(cat).members.size();
            const bool truthy = rng.chance(0.5);
            const auto asked =
                truthy ? actual
                       : static_cast<std::uint32_t>((actual + 1 + rng.below(members - 1)) % members);
            const std::string asked_name = attr_name(vocab, cat, asked);
            d.words = {"is", "the", cls(node), asked_name};
            d.opseq_lines = {"select: " + cls(node),
                             "verify " + vocab.category(cat).name + ": " + asked_name + " [0]"};
            d.answer = truthy ? "yes" : "no";
            d.full_answer = d.answer + " , the " + cls(node) + " is " +
                            attr_name(vocab, cat, actual);
            d.q_refs = {node};
            d.fa_refs = {node};
            d.type = QuestionRecord::Type::Binary;
            return d;
        }
        default: { // choose between two attribute values
            const auto node = static_cast<std::uint32_t>(rng.below(n));
            const auto cat = static_cast<std::uint32_t>(rng.below(vocab.category_count()));
            const auto actual = pg.node_attr[node][cat];
            const auto members = vocab.category(cat).members.size();
            const auto decoy =
                static_cast<std::uint32_t>((actual + 1 + rng.below(members - 1)) % members);
            const std::string a = attr_name(vocab, cat, actual);
            const std::string b = attr_name(vocab, cat, decoy);
            const bool actual_first = rng.chance(0.5);
            const std::string first = actual_first ? a : b;
            const std::string second = actual_first ? b : a;
            d.words = {"is", "the", cls(node), first, "or", second};
            d.opseq_lines = {"select: " + cls(node),
                             "choose " + vocab.category(cat).name + ": " + first + "|" + second +
                                 " [0]"};
            d.answer = a;
            d.full_answer = "the " + cls(node) + " is " + a;
            d.q_refs = {node};
            d.a_refs = {node};
            d.fa_refs = {node};
            d.type = QuestionRecord::Type::Binary; // two-choice questions count as binary
            return d;
        }
    }
}

// Noise rates derived from the master knob.
struct NoiseModel {
    double p_miss, p_fp, p_class_flip, class_peak;
    double p_attr_flip, attr_peak;
    double p_rel_flip, rel_peak, p_rel_spurious;
    double jitter;

    explicit NoiseModel(double noise)
        : p_miss(0.30 * noise), p_fp(0.15 * noise), p_class_flip(0.25 * noise),
          class_peak(1.0 - 0.5 * noise), p_attr_flip(0.25 * noise), attr_peak(1.0 - 0.4 * noise),
          p_rel_flip(0.25 * noise), rel_peak(1.0 - 0.4 * noise), p_rel_spurious(0.10 * noise),
          jitter(0.20 * noise) {}
};

inline BoundingBox jitter_box(Rng& rng, const BoundingBox& box, double jitter, double image_size) {
    if (jitter <= 0.0) return box;
    const double w = box.width(), h = box.height();
    double dx = (2.0 * rng.unit() - 1.0) * jitter * w;
    double dy = (2.0 * rng.unit() - 1.0) * jitter * h;
    dx = std::clamp(dx, -box.x1, image_size - box.x2);
    dy = std::clamp(dy, -box.y1, image_size - box.y2);
    return {box.x1 + dx, box.y1 + dy, box.x2 + dx, box.y2 + dy};
}

inline DetectionRecord make_detections(Rng& rng, const Vocabulary& vocab, const PlantedGraph& pg,
                                       const NoiseModel& nm, double image_size) {
    const SceneGraph& g = pg.graph;
    DetectionRecord rec;
    rec.image_id = g.image_id();
    rec.width = g.width();
    rec.height = g.height();

    std::vector<std::optional<std::uint32_t>> det_of_node(g.node_count());
    for (std::uint32_t i = 0; i < g.node_count(); ++i) {
        if (rng.chance(nm.p_miss)) continue; // undetected object
        DetectedObject det;
        det.id = "d" + std::to_string(rec.objects.size());
        det.bbox = jitter_box(rng, g.node(i).bbox, nm.jitter, image_size);
        std::uint32_t argmax = pg.node_class[i];
        if (rng.chance(nm.p_class_flip))
            argmax = static_cast<std::uint32_t>(rng.below(vocab.object_count()));
        det.class_dist =
            peaked_dist(VocabSlice::objects(), argmax, nm.class_peak, vocab.object_count());
        for (std::uint32_t c = 0; c < vocab.category_count(); ++c) {
            std::uint32_t member = pg.node_attr[i][c];
            const std::size_t size = vocab.category(c).members.size();
            if (rng.chance(nm.p_attr_flip)) member = static_cast<std::uint32_t>(rng.below(size));
            det.attr_dists[c] = peaked_dist(VocabSlice::attributes(c), member, nm.attr_peak, size);
        }
        det_of_node[i] = static_cast<std::uint32_t>(rec.objects.size());
        rec.objects.push_back(std::move(det));
    }

    // Hallucinated extra detections.
    for (std::uint32_t i = 0; i < g.node_count(); ++i) {
        if (!rng.chance(nm.p_fp)) continue;
        DetectedObject det;
        det.id = "f" + std::to_string(rec.objects.size());
        const double w = (0.10 + 0.15 * rng.unit()) * image_size;
        const double h = (0.10 + 0.15 * rng.unit()) * image_size;
        const double x = rng.unit() * (image_size - w);
        const double y = rng.unit() * (image_size - h);
        det.bbox = {x, y, x + w, y + h};
        const auto argmax = static_cast<std::uint32_t>(rng.below(vocab.object_count()));
        det.class_dist =
            peaked_dist(VocabSlice::objects(), argmax, nm.class_peak, vocab.object_count());
        for (std::uint32_t c = 0; c < vocab.category_count(); ++c) {
            const std::size_t size = vocab.category(c).members.size();
            det.attr_dists[c] = peaked_dist(VocabSlice::attributes(c),
                                            static_cast<std::uint32_t>(rng.below(size)),
                                            nm.attr_peak, size);
        }
        rec.objects.push_back(std::move(det));
    }

    // Relationships are classified for candidate pairs only (15% expansion).
    std::vector<ObjectNode> det_nodes;
    for (const auto& o : rec.objects) {
        ObjectNode n;
        n.id = o.id;
        n.bbox = o.bbox;
        n.class_dist = o.class_dist;
        det_nodes.push_back(std::move(n));
    }
    std::set<std::pair<std::uint32_t, std::uint32_t>> candidates;
    for (auto [a, b] : candidate_pairs(det_nodes, 0.15)) candidates.insert({a, b});

    std::set<std::pair<std::uint32_t, std::uint32_t>> edged;
    for (const auto& e : g.edges()) {
        const auto src_det = det_of_node[*g.find_node(e.src)];
        const auto dst_det = det_of_node[*g.find_node(e.dst)];
        if (!src_det || !dst_det) continue;
        if (!candidates.count({*src_det, *dst_det})) continue;
        std::uint32_t rel = e.rel_dist.entries()[0].first;
        if (rng.chance(nm.p_rel_flip))
            rel = static_cast<std::uint32_t>(rng.below(vocab.relationship_count()));
        rec.relations.push_back(
            {rec.objects[*src_det].id, rec.objects[*dst_det].id,
             peaked_dist(VocabSlice::relationships(), rel, nm.rel_peak,
                         vocab.relationship_count())});
        edged.insert({*src_det, *dst_det});
    }
    for (const auto& [a, b] : candidates) {
        if (edged.count({a, b}) || !rng.chance(nm.p_rel_spurious)) continue;
        const auto rel = static_cast<std::uint32_t>(rng.below(vocab.relationship_count()));
        rec.relations.push_back({rec.objects[a].id, rec.objects[b].id,
                                 peaked_dist(VocabSlice::relationships(), rel, nm.rel_peak,
                                             vocab.relationship_count())});
        edged.insert({a, b});
    }
    return rec;
}

} // namespace detail

inline SyntheticOutput generate_synthetic(const SyntheticParams& params) {
    if (params.min_nodes < 2 || params.max_nodes < params.min_nodes)
        throw ConfigError("node count range must satisfy 2 <= min <= max");
    if (params.object_vocab < params.max_nodes + 2)
        throw ConfigError("object vocabulary too small for unique planted answers: need at least " +
                          std::to_string(params.max_nodes + 2) + " names");
    if (params.noise < 0.0 || params.noise > 1.0)
        throw ConfigError("noise must lie in [0,1]");

    SyntheticOutput out;
    out.vocab = detail::synthetic_vocabulary(params.object_vocab);
    out.registry = OperationRegistry::standard(out.vocab);
    out.inventory = detail::synthetic_inventory(out.vocab);
    TokenCodec codec(out.registry, out.inventory);

    detail::Rng rng(params.seed);
    const detail::NoiseModel nm(params.noise);
    const VerifyThreshold tau{0.5, 0.0, "synthetic-default"};
    const double qp_corruption = 0.30 * params.noise;

    for (std::size_t gi = 0; gi < params.graph_count; ++gi) {
        auto planted = detail::make_graph(rng, out.vocab, params, gi);

        for (std::size_t qi = 0; qi < params.questions_per_graph; ++qi) {
            auto draft = detail::draft_question(rng, out.vocab, planted);

            QuestionRecord record;
            record.question_id = "q" + std::to_string(gi) + "-" + std::to_string(qi);
            record.image_id = planted.graph.image_id();
            record.question_words = draft.words;
            record.gold_answer = draft.answer;
            record.gold_full_answer = draft.full_answer;
            record.opseq_lines = draft.opseq_lines;
            record.type = draft.type;
            auto add_refs = [&](const std::vector<std::uint32_t>& nodes, std::size_t cat) {
                for (auto nidx : nodes)
                    record.inference_objects[cat].push_back(
                        {planted.graph.node(nidx).id, planted.graph.node(nidx).bbox});
            };
            add_refs(draft.q_refs, 0);
            add_refs(draft.a_refs, 1);
            add_refs(draft.fa_refs, 2);

            // Language-side lossiness: mutate the question occurrence of the
            // select target so the processed condition has real conflicts.
            const std::string& target = draft.opseq_lines[0].substr(8); // after "select: "
            for (auto& word : record.question_words) {
                if (word != target) continue;
                if (rng.chance(params.case_noise)) {
                    word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
                } else if (rng.chance(params.paraphrase_noise)) {
                    word = "thing";
                }
                break;
            }

            if (params.verify_generated) {
                auto outcome = execute_question(record.parse_gold(out.registry), planted.graph,
                                                tau, out.vocab, out.registry);
                if (!outcome.answer || detail::lower(outcome.answer->value) !=
                                           detail::lower(record.gold_answer))
                    throw Error("synthetic generator: planted answer mismatch on " +
                                record.question_id);
            }

            // The stand-in for a learned parser: the processed op-seq with
            // occasional argument corruption on top.
            auto rt = process_roundtrip(record.parse_gold(out.registry), record.question_words,
                                        codec);
            OpSeq predicted = rt.processed;
            if (!predicted.ops.empty() && rng.chance(qp_corruption)) {
                auto& op = predicted.ops[rng.below(predicted.ops.size())];
                if (!op.args.empty()) {
                    std::string& arg = op.args[rng.below(op.args.size())];
                    arg = rng.chance(0.5) ? rng.pick(out.vocab.object_names())
                                          : out.vocab.category(0).members[rng.below(
                                                out.vocab.category(0).members.size())];
                }
            }
            std::vector<std::string> lines;
            for (const auto& op : predicted.ops) lines.push_back(serialize_operation(op));
            out.predicted_opseqs[record.question_id] = std::move(lines);

            out.questions.push_back(std::move(record));
        }

        out.detections.push_back(
            detail::make_detections(rng, out.vocab, planted, nm, params.image_size));
        out.graphs.push_back(std::move(planted.graph));
    }
    return out;
}

// Writes the complete bundle plus a ready-to-run configuration file.
inline void write_synthetic(const SyntheticOutput& out, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    out.vocab.save(dir / "vocab.json");
    out.registry.save(dir / "registry.txt");
    out.inventory.save(dir / "inventory.txt");
    save_scene_graph_annotations(out.graphs, out.vocab, dir / "graphs.json");
    save_questions(out.questions, dir / "questions.json");
    save_detections(out.detections, out.vocab, dir / "detections.json");
    save_predicted_opseqs(out.predicted_opseqs, dir / "opseqs_predicted.json");

    nlohmann::ordered_json config;
    config["schema_version"] = 1;
    config["paths"] = {{"vocab", (dir / "vocab.json").string()},
                       {"registry", (dir / "registry.txt").string()},
                       {"inventory", (dir / "inventory.txt").string()},
                       {"graphs", (dir / "graphs.json").string()},
                       {"questions", (dir / "questions.json").string()},
                       {"detections", (dir / "detections.json").string()},
                       {"opseqs", (dir / "opseqs_predicted.json").string()}};
    config["recipe"] = {{"objects", "oracle"}, {"attributes", "oracle"}, {"relationships", "oracle"}};
    config["opseq_source"] = "gold";
    config["tau"] = 0.5;
    detail::write_json_file(config, dir / "config.json", "config");
}

inline Dataset dataset_from_synthetic(SyntheticOutput&& out) {
    Dataset data;
    data.vocab = std::move(out.vocab);
    data.registry = std::move(out.registry);
    data.inventory = std::move(out.inventory);
    data.graphs = std::move(out.graphs);
    data.questions = std::move(out.questions);
    data.detections = std::move(out.detections);
    for (auto& [qid, lines] : out.predicted_opseqs)
        data.predicted_opseqs.emplace(qid, std::move(lines));
    data.index();
    return data;
}

} // namespace ath

#pragma once

#include "ath/dist.hpp"
#include "ath/errors.hpp"
#include "ath/opseq.hpp"
#include "ath/registry.hpp"
#include "ath/scene_graph.hpp"
#include "ath/vocab.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace ath {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Per-node match likelihood for one operation step. These are not a
// distribution over nodes; each value lives in [0,1] on its own.
struct StepScores {
    std::vector<double> by_node; // indexed by node position in the graph
};

// Per-ordered-pair movement scores for one step. Non-relational steps stay
// on the current node (identity); relational steps move along edges whose
// relationship distribution supports the requested name.
struct TransitionScores {
    bool identity = true;
    // arcs[dst] = (src, probability), sorted by src; absent pairs score 0.
    std::vector<std::vector<std::pair<std::uint32_t, double>>> arcs;

    double prob(std::uint32_t src, std::uint32_t dst) const {
        if (identity) return src == dst ? 1.0 : 0.0;
        for (const auto& [s, p] : arcs[dst])
            if (s == src) return p;
        return 0.0;
    }
};

enum class Side : std::uint8_t { Subject, Object };

namespace detail {

struct AttrRef {
    std::uint32_t category = 0;
    std::uint32_t member = 0;
    bool negated = false;
};

// Accepts "x", "not(x)" and "not x".
inline std::pair<std::string, bool> strip_negation(std::string_view arg) {
    if (arg.size() > 5 && arg.substr(0, 4) == "not(" && arg.back() == ')')
        return {std::string(arg.substr(4, arg.size() - 5)), true};
    if (arg.size() > 4 && arg.substr(0, 4) == "not ")
        return {std::string(arg.substr(4)), true};
    return {std::string(arg), false};
}

// The qualifier is a category hint from the operation string. When the
// vocabulary knows that category the attribute must live in it; otherwise the
// name resolves through the attribute partition.
inline AttrRef resolve_attribute(const Operation& op, std::string_view raw, const Vocabulary& vocab) {
    auto [name, negated] = strip_negation(raw);
    AttrRef ref;
    ref.negated = negated;
    if (!op.qualifier.empty()) {
        if (auto cat = vocab.category_index(op.qualifier)) {
            auto member = vocab.member_index(*cat, name);
            if (!member)
                throw UnknownVocabularyTerm("'" + name + "' not in attribute category '" +
                                            op.qualifier + "'");
            ref.category = *cat;
            ref.member = *member;
            return ref;
        }
    }
    auto home = vocab.attribute_home(name);
    if (!home) throw UnknownVocabularyTerm("unknown attribute '" + name + "'");
    ref.category = home->first;
    ref.member = home->second;
    return ref;
}

// Argument layout of relational operations: (target, relation, side),
// (target, relation) or (relation). The side marker names the role of the
// current node; when omitted, subject is assumed (callers log the note).
struct RelateArgs {
    std::string target = "_";
    std::string relation;
    Side side = Side::Subject;
    bool side_assumed = false;
};

inline RelateArgs parse_relate_args(const Operation& op) {
    RelateArgs out;
    const auto& a = op.args;
    if (a.empty()) throw UnsupportedOperation("'" + op.full_op() + "' needs arguments");
    if (a.size() == 1) {
        out.relation = a[0];
        out.side_assumed = true;
        return out;
    }
    out.target = a[0];
    out.relation = a[1];
    if (a.size() == 2) {
        out.side_assumed = true;
        return out;
    }
    if (a[2] == "s" || a[2] == "subject") out.side = Side::Subject;
    else if (a[2] == "o" || a[2] == "object") out.side = Side::Object;
    else throw UnsupportedOperation("unknown side marker '" + a[2] + "' in '" + op.full_op() + "'");
    return out;
}

inline StepScores name_scores(const std::string& name, const SceneGraph& graph,
                              const Vocabulary& vocab) {
    StepScores s;
    s.by_node.assign(graph.node_count(), 1.0);
    if (name == "_" || name.empty()) return s; // wildcard: any object
    auto idx = vocab.object_index(name);
    if (!idx) throw UnknownVocabularyTerm("unknown object name '" + name + "'");
    for (std::uint32_t n = 0; n < graph.node_count(); ++n)
        s.by_node[n] = graph.node(n).class_dist.prob_at(*idx);
    return s;
}

inline StepScores attribute_scores(const AttrRef& ref, const SceneGraph& graph) {
    StepScores s;
    s.by_node.assign(graph.node_count(), 0.0);
    for (std::uint32_t n = 0; n < graph.node_count(); ++n) {
        const auto& dists = graph.node(n).attr_dists;
        auto it = dists.find(ref.category);
        const double p = it == dists.end() ? 0.0 : it->second.prob_at(ref.member);
        s.by_node[n] = ref.negated ? 1.0 - p : p;
    }
    return s;
}

} // namespace detail

inline OpSemantics resolve_semantics(const Operation& op, const OperationRegistry& registry) {
    const RegistryEntry* entry = registry.find(op.full_op());
    if (entry == nullptr)
        throw UnsupportedOperation("operation '" + op.full_op() + "' not in registry");
    if (!entry->enabled)
        throw UnsupportedOperation("operation '" + op.full_op() + "' is disabled");
    return entry->semantics;
}

inline bool path_consuming(OpSemantics s) {
    switch (s) {
        case OpSemantics::Select:
        case OpSemantics::FilterAttr:
        case OpSemantics::Relate:
        case OpSemantics::VerifyAttr:
        case OpSemantics::VerifyRel:
            return true;
        default:
            return false;
    }
}

// Probability of each node matching the description in one path-consuming
// operation. The semantics table: select reads the class distribution,
// filter/verify read the argument's attribute category distribution (negated
// arguments complement), relate scores its target name (wildcard "_").
inline StepScores emission(const Operation& op, const SceneGraph& graph, const Vocabulary& vocab,
                           const OperationRegistry& registry) {
    const OpSemantics sem = resolve_semantics(op, registry);
    switch (sem) {
        case OpSemantics::Select: {
            if (op.args.empty()) throw UnsupportedOperation("'select' needs an argument");
            return detail::name_scores(op.args[0], graph, vocab);
        }
        case OpSemantics::FilterAttr:
        case OpSemantics::VerifyAttr: {
            if (op.args.empty())
                throw UnsupportedOperation("'" + op.full_op() + "' needs an argument");
            return detail::attribute_scores(detail::resolve_attribute(op, op.args[0], vocab), graph);
        }
        case OpSemantics::Relate:
        case OpSemantics::VerifyRel: {
            return detail::name_scores(detail::parse_relate_args(op).target, graph, vocab);
        }
        default:
            throw UnsupportedOperation("operation '" + op.full_op() + "' is not path-consuming");
    }
}

// Movement scores for one step: relational operations score edges carrying
// the requested relationship in the stated direction, every other operation
// keeps the path on its current node.
inline TransitionScores transition(const Operation& op, const SceneGraph& graph,
                                   const Vocabulary& vocab, const OperationRegistry& registry) {
    const OpSemantics sem = resolve_semantics(op, registry);
    TransitionScores t;
    if (sem != OpSemantics::Relate && sem != OpSemantics::VerifyRel) return t;

    const auto rel = detail::parse_relate_args(op);
    auto rel_idx = vocab.relationship_index(rel.relation);
    if (!rel_idx) throw UnknownVocabularyTerm("unknown relationship '" + rel.relation + "'");

    t.identity = false;
    t.arcs.assign(graph.node_count(), {});
    for (const auto& e : graph.edges()) {
        const double p = e.rel_dist.prob_at(*rel_idx);
        if (p <= 0.0) continue;
        const std::uint32_t s = *graph.find_node(e.src);
        const std::uint32_t d = *graph.find_node(e.dst);
        if (rel.side == Side::Subject)
            t.arcs[d].emplace_back(s, p); // current node is the subject: follow s -> d
        else
            t.arcs[s].emplace_back(d, p); // current node is the object: arrive from d's side
    }
    for (auto& a : t.arcs)
        std::sort(a.begin(), a.end());
    return t;
}

// The maximum-product node sequence for one branch, with every multiplied
// factor kept for diagnostics. The geometric mean is taken over the
// non-unit factors; factors of exactly one neither change the product nor
// dilute the mean.
struct InferencePath {
    std::vector<std::uint32_t> nodes; // one per path-consuming step
    std::vector<double> factors;      // emissions plus relational transitions
    double log_joint = 0.0;

    double joint() const { return std::exp(log_joint); }

    std::size_t nontrivial_factors() const {
        std::size_t n = 0;
        for (double f : factors)
            if (f != 1.0) ++n;
        return n;
    }

    double geometric_mean() const {
        const std::size_t n = nontrivial_factors();
        if (n == 0) return 1.0;
        return std::exp(log_joint / static_cast<double>(n));
    }
};

// One compiled path-consuming step.
struct CompiledStep {
    Operation op;
    OpSemantics semantics = OpSemantics::Unmapped;
    StepScores em;
    TransitionScores tr;
};

// Compiles a linear chain of path-consuming operations into scored steps.
inline std::vector<CompiledStep> compile_chain(std::span<const Operation> ops,
                                               const SceneGraph& graph, const Vocabulary& vocab,
                                               const OperationRegistry& registry) {
    std::vector<CompiledStep> steps;
    steps.reserve(ops.size());
    for (const auto& op : ops) {
        CompiledStep step;
        step.op = op;
        step.semantics = resolve_semantics(op, registry);
        step.em = emission(op, graph, vocab, registry);
        step.tr = transition(op, graph, vocab, registry);
        steps.push_back(std::move(step));
    }
    return steps;
}

// Dynamic-programming table over (step, node): best log-score reachable and
// the previous-step node it came from.
struct Trellis {
    struct Column {
        std::vector<double> log_score;
        std::vector<std::int32_t> back; // -1 at the first column
    };
    std::vector<Column> columns;
};

inline Trellis build_trellis(std::span<const CompiledStep> steps, const SceneGraph& graph) {
    Trellis trellis;
    const std::size_t n = graph.node_count();
    trellis.columns.resize(steps.size());
    for (std::size_t t = 0; t < steps.size(); ++t) {
        auto& col = trellis.columns[t];
        col.log_score.assign(n, kNegInf);
        col.back.assign(n, -1);
        const auto& em = steps[t].em.by_node;
        if (t == 0) {
            for (std::size_t v = 0; v < n; ++v)
                if (em[v] > 0.0) col.log_score[v] = std::log(em[v]);
            continue;
        }
        const auto& prev = trellis.columns[t - 1].log_score;
        const auto& tr = steps[t].tr;
        for (std::uint32_t v = 0; v < n; ++v) {
            if (em[v] <= 0.0) continue;
            double best = kNegInf;
            std::int32_t best_src = -1;
            if (tr.identity) {
                best = prev[v];
                best_src = static_cast<std::int32_t>(v);
            } else {
                for (const auto& [src, p] : tr.arcs[v]) { // sorted by src: ties keep the lowest
                    if (prev[src] == kNegInf) continue;
                    const double cand = prev[src] + std::log(p);
                    if (cand > best) {
                        best = cand;
                        best_src = static_cast<std::int32_t>(src);
                    }
                }
            }
            if (best == kNegInf) continue;
            col.log_score[v] = best + std::log(em[v]);
            col.back[v] = best_src;
        }
    }
    return trellis;
}

namespace detail {

inline InferencePath path_from_nodes(std::span<const CompiledStep> steps,
                                     std::vector<std::uint32_t> nodes) {
    InferencePath path;
    path.nodes = std::move(nodes);
    double log_joint = 0.0;
    for (std::size_t t = 0; t < steps.size(); ++t) {
        const double em = steps[t].em.by_node[path.nodes[t]];
        if (t > 0 && !steps[t].tr.identity) {
            const double tp = steps[t].tr.prob(path.nodes[t - 1], path.nodes[t]);
            path.factors.push_back(tp);
            log_joint += tp > 0.0 ? std::log(tp) : kNegInf;
        }
        path.factors.push_back(em);
        log_joint += em > 0.0 ? std::log(em) : kNegInf;
    }
    path.log_joint = log_joint;
    return path;
}

} // namespace detail

// Viterbi decoding in log space, deterministic ties to the lowest node index.
inline InferencePath viterbi(std::span<const CompiledStep> steps, const SceneGraph& graph) {
    if (steps.empty()) throw UnsupportedStructure("empty operation chain");
    if (graph.node_count() == 0) throw NoViablePath("scene graph has no nodes");

    const Trellis trellis = build_trellis(steps, graph);
    const auto& last = trellis.columns.back().log_score;
    std::int32_t best = -1;
    for (std::uint32_t v = 0; v < last.size(); ++v)
        if (last[v] != kNegInf && (best < 0 || last[v] > last[best])) best = static_cast<std::int32_t>(v);
    if (best < 0) throw NoViablePath("no node sequence with nonzero probability");

    std::vector<std::uint32_t> nodes(steps.size());
    std::int32_t cur = best;
    for (std::size_t t = steps.size(); t-- > 0;) {
        nodes[t] = static_cast<std::uint32_t>(cur);
        cur = trellis.columns[t].back[cur];
    }
    return detail::path_from_nodes(steps, std::move(nodes));
}

// Exhaustive max-product search over all |V|^T node sequences, sharing the
// emission/transition tables with viterbi. Test oracle; refuses instances
// beyond 10^7 sequences.
inline InferencePath brute_force_best_path(std::span<const CompiledStep> steps,
                                           const SceneGraph& graph) {
    if (steps.empty()) throw UnsupportedStructure("empty operation chain");
    const std::size_t n = graph.node_count();
    if (n == 0) throw NoViablePath("scene graph has no nodes");

    double total = 1.0;
    for (std::size_t t = 0; t < steps.size(); ++t) {
        total *= static_cast<double>(n);
        if (total > 1e7) throw OracleTooLarge("brute force oracle over " + std::to_string(n) +
                                              "^" + std::to_string(steps.size()) + " sequences");
    }

    std::vector<std::uint32_t> assign(steps.size(), 0);
    std::vector<std::uint32_t> best_assign;
    double best = 0.0;
    while (true) {
        double product = 1.0;
        for (std::size_t t = 0; t < steps.size() && product > 0.0; ++t) {
            product *= steps[t].em.by_node[assign[t]];
            if (t > 0) product *= steps[t].tr.prob(assign[t - 1], assign[t]);
        }
        if (product > best) {
            best = product;
            best_assign = assign;
        }
        std::size_t t = 0;
        while (t < assign.size() && ++assign[t] == n) {
            assign[t] = 0;
            ++t;
        }
        if (t == assign.size()) break;
    }
    if (best <= 0.0) throw NoViablePath("no node sequence with nonzero probability");
    return detail::path_from_nodes(steps, std::move(best_assign));
}

// Attention over graph nodes, one equal share per traversed path step,
// normalized over all steps of all supplied paths.
inline std::map<std::uint32_t, double> path_attention(std::span<const InferencePath> paths) {
    std::size_t total_steps = 0;
    for (const auto& p : paths) total_steps += p.nodes.size();
    if (total_steps == 0) throw EmptyPath("attention over empty paths");
    std::map<std::uint32_t, double> attention;
    const double share = 1.0 / static_cast<double>(total_steps);
    for (const auto& p : paths)
        for (auto node : p.nodes) attention[node] += share;
    return attention;
}

// Decision threshold for binary verify/exist questions; fixed per deployment
// and calibrated once on a dev set by F1 of the "yes" class.
struct VerifyThreshold {
    double value = 0.5;
    double f1 = 0.0;
    std::string dev_set_id;
};

// Candidate thresholds are the midpoints of adjacent sorted unique scores
// plus the sentinels 0 and 1; the smallest maximizer wins. F1 is computed as
// 2TP / (2TP + FP + FN) from integer counts.
inline VerifyThreshold calibrate_threshold(std::span<const std::pair<double, bool>> dev,
                                           std::string dev_set_id = {}) {
    std::size_t yes_total = 0;
    for (const auto& [score, label] : dev) yes_total += label ? 1 : 0;
    if (dev.empty() || yes_total == 0 || yes_total == dev.size())
        throw CalibrationError("dev set must contain both labels");

    std::vector<std::pair<double, bool>> sorted(dev.begin(), dev.end());
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    std::vector<double> candidates{0.0, 1.0};
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i)
        if (sorted[i].first != sorted[i + 1].first)
            candidates.push_back((sorted[i].first + sorted[i + 1].first) / 2.0);
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    // yes_below[i]: gold-yes points among the first i sorted scores.
    std::vector<std::size_t> yes_below(sorted.size() + 1, 0);
    for (std::size_t i = 0; i < sorted.size(); ++i)
        yes_below[i + 1] = yes_below[i] + (sorted[i].second ? 1 : 0);

    VerifyThreshold best;
    best.value = candidates.front();
    best.f1 = -1.0;
    for (double tau : candidates) {
        // first index with score >= tau
        std::size_t lo = std::lower_bound(sorted.begin(), sorted.end(), tau,
                                          [](const auto& e, double v) { return e.first < v; }) -
                         sorted.begin();
        const std::size_t predicted_yes = sorted.size() - lo;
        const std::size_t tp = yes_total - yes_below[lo];
        const std::size_t fp = predicted_yes - tp;
        const std::size_t fn = yes_total - tp;
        const double denom = static_cast<double>(2 * tp + fp + fn);
        const double f1 = denom == 0.0 ? 0.0 : (2.0 * static_cast<double>(tp)) / denom;
        if (f1 > best.f1) {
            best.f1 = f1;
            best.value = tau;
        }
    }
    best.dev_set_id = std::move(dev_set_id);
    return best;
}

} // namespace ath

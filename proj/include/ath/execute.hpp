#pragma once

#include "ath/executor.hpp"
#include "ath/opseq.hpp"
#include "ath/registry.hpp"
#include "ath/scene_graph.hpp"
#include "ath/tokenize.hpp"
#include "ath/vocab.hpp"

#include <algorithm>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace ath {

// Final answer for one question. Open answers are vocabulary terms read off
// the scene graph at the end of the inference path — there is no fixed
// answer classifier anywhere in this system.
struct Answer {
    enum class Kind : std::uint8_t { Open, Binary };

    Kind kind = Kind::Open;
    std::string value;
    std::vector<InferencePath> paths;          // one or two
    std::optional<double> decision_score;      // geometric-mean score for threshold answers
};

// Step-by-step record of one execution, for the transparent trace output.
struct TraceStep {
    std::string op_text;
    std::vector<std::pair<NodeId, double>> top_emissions;
    NodeId chosen;
};

struct BranchTrace {
    std::vector<TraceStep> steps;
    std::optional<double> geometric_mean;
    std::string outcome;
};

struct Trace {
    std::vector<BranchTrace> branches;
    std::vector<std::string> notes;
    std::map<NodeId, double> attention;
    std::string answer;
};

namespace detail {

enum class FinalKind : std::uint8_t { HandOff, Threshold, Query, Choose, ChooseRel };

struct BranchProgram {
    std::vector<CompiledStep> steps;
    FinalKind final_kind = FinalKind::HandOff;
    std::optional<Operation> final_op;
};

inline BranchProgram compile_branch(const OpSeq& seq, const std::vector<std::size_t>& indices,
                                    const SceneGraph& graph, const Vocabulary& vocab,
                                    const OperationRegistry& registry, Trace* trace) {
    BranchProgram program;
    if (indices.empty()) throw UnsupportedStructure("empty branch");
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const Operation& op = seq.ops[indices[k]];
        const OpSemantics sem = resolve_semantics(op, registry);
        const bool last = k + 1 == indices.size();
        if (path_consuming(sem)) {
            CompiledStep step;
            step.op = op;
            step.semantics = sem;
            step.em = emission(op, graph, vocab, registry);
            step.tr = transition(op, graph, vocab, registry);
            if ((sem == OpSemantics::Relate || sem == OpSemantics::VerifyRel) && trace) {
                if (parse_relate_args(op).side_assumed)
                    trace->notes.push_back("side marker missing on '" + serialize_operation(op) +
                                           "': assuming the current node is the subject");
            }
            program.steps.push_back(std::move(step));
            if (last && (sem == OpSemantics::VerifyAttr || sem == OpSemantics::VerifyRel)) {
                program.final_kind = FinalKind::Threshold;
                program.final_op = op;
            }
            continue;
        }
        if (!last)
            throw UnsupportedStructure("operation '" + op.full_op() +
                                       "' must be the last of its branch");
        switch (sem) {
            case OpSemantics::Exist:
                program.final_kind = FinalKind::Threshold;
                break;
            case OpSemantics::Query:
                program.final_kind = FinalKind::Query;
                break;
            case OpSemantics::Choose:
                program.final_kind = FinalKind::Choose;
                break;
            case OpSemantics::ChooseRel:
                program.final_kind = FinalKind::ChooseRel;
                break;
            default:
                throw UnsupportedStructure("combining operation '" + op.full_op() +
                                           "' inside a branch");
        }
        program.final_op = op;
    }
    if (program.steps.empty())
        throw UnsupportedStructure("branch has no path-consuming operations");
    return program;
}

inline void record_branch_trace(Trace* trace, const BranchProgram& program,
                                const SceneGraph& graph, const InferencePath* path) {
    if (!trace) return;
    BranchTrace bt;
    for (std::size_t t = 0; t < program.steps.size(); ++t) {
        TraceStep ts;
        ts.op_text = serialize_operation(program.steps[t].op);
        std::vector<std::pair<NodeId, double>> scored;
        const auto& em = program.steps[t].em.by_node;
        for (std::uint32_t v = 0; v < em.size(); ++v)
            if (em[v] > 0.0) scored.emplace_back(graph.node(v).id, em[v]);
        std::stable_sort(scored.begin(), scored.end(),
                         [](const auto& a, const auto& b) { return a.second > b.second; });
        if (scored.size() > 5) scored.resize(5);
        ts.top_emissions = std::move(scored);
        if (path) ts.chosen = graph.node(path->nodes[t]).id;
        bt.steps.push_back(std::move(ts));
    }
    if (path) bt.geometric_mean = path->geometric_mean();
    bt.outcome = path ? "path found" : "no viable path";
    trace->branches.push_back(std::move(bt));
}

// Split "a|b" (or use the two explicit arguments) of a choose operation.
inline std::pair<std::string, std::string> choose_candidates(const Operation& op) {
    std::vector<std::string> cands;
    for (const auto& arg : op.args) {
        std::string cur;
        for (char c : arg) {
            if (c == '|') {
                if (!cur.empty()) cands.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        if (!cur.empty()) cands.push_back(cur);
    }
    if (cands.size() != 2)
        throw UnsupportedOperation("'" + op.full_op() + "' needs exactly two candidates");
    return {cands[0], cands[1]};
}

inline double candidate_prob(const Operation& op, const std::string& name,
                             const ObjectNode& node, const Vocabulary& vocab) {
    if (!op.qualifier.empty() && op.qualifier != "name") {
        if (auto cat = vocab.category_index(op.qualifier)) {
            auto member = vocab.member_index(*cat, name);
            if (!member)
                throw UnknownVocabularyTerm("'" + name + "' not in category '" + op.qualifier +
                                            "'");
            auto it = node.attr_dists.find(*cat);
            return it == node.attr_dists.end() ? 0.0 : it->second.prob_at(*member);
        }
    }
    if (auto obj = vocab.object_index(name)) return node.class_dist.prob_at(*obj);
    if (auto home = vocab.attribute_home(name)) {
        auto it = node.attr_dists.find(home->first);
        return it == node.attr_dists.end() ? 0.0 : it->second.prob_at(home->second);
    }
    throw UnknownVocabularyTerm("choose candidate '" + name + "' not in vocabulary");
}

// Category targets fall back to the single category of flat vocabularies.
inline std::optional<std::uint32_t> target_category(const std::string& target,
                                                    const Vocabulary& vocab) {
    if (auto cat = vocab.category_index(target)) return cat;
    if (vocab.category_count() == 1) return 0u;
    return std::nullopt;
}

inline std::string query_answer(const Operation& op, const ObjectNode& node,
                                const Vocabulary& vocab) {
    if (op.args.empty()) throw UnsupportedOperation("'query' needs a target");
    const std::string& target = op.args[0];
    if (target == "name" || target == "_")
        return top_class(node.class_dist, vocab).first;
    auto cat = target_category(target, vocab);
    if (!cat)
        throw UnsupportedOperation("query target '" + target + "' not supported");
    auto it = node.attr_dists.find(*cat);
    if (it == node.attr_dists.end())
        throw AnswerFailure("final node '" + node.id + "' has no '" + target + "' attributes");
    return top_class(it->second, vocab).first;
}

// Category compared by same/different/common-style operations; "name"/"type"
// compare object classes.
inline std::string compare_name(const Operation& op, const ObjectNode& node,
                                const Vocabulary& vocab) {
    std::string target = op.qualifier;
    if (target.empty() && !op.args.empty()) target = op.args[0];
    if (target.empty() || target == "name" || target == "type")
        return top_class(node.class_dist, vocab).first;
    auto cat = target_category(target, vocab);
    if (!cat) throw UnknownVocabularyTerm("unknown attribute category '" + target + "'");
    auto it = node.attr_dists.find(*cat);
    if (it == node.attr_dists.end())
        throw AnswerFailure("node '" + node.id + "' has no '" + target + "' attributes");
    return top_class(it->second, vocab).first;
}

inline std::string relation_choice(const Operation& op, const InferencePath& path,
                                   const SceneGraph& graph, const Vocabulary& vocab) {
    const auto args = parse_relate_args(op);
    std::vector<std::string> rels;
    std::string cur;
    for (char c : args.relation + "|") {
        if (c == '|') {
            if (!cur.empty()) rels.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (rels.size() < 2)
        throw UnsupportedOperation("'choose rel' needs two relationship candidates");

    const std::uint32_t cur_node = path.nodes.back();
    StepScores target = detail::name_scores(args.target, graph, vocab);
    std::string best_rel;
    double best_score = -1.0;
    for (const auto& rel : rels) {
        auto idx = vocab.relationship_index(rel);
        if (!idx) throw UnknownVocabularyTerm("unknown relationship '" + rel + "'");
        double best_here = 0.0;
        const auto& arcs =
            args.side == Side::Subject ? graph.out_arcs(cur_node) : graph.in_arcs(cur_node);
        for (const auto& [next, edge_idx] : arcs) {
            const double p = graph.edge(edge_idx).rel_dist.prob_at(*idx) * target.by_node[next];
            if (p > best_here) best_here = p;
        }
        if (best_here > best_score) {
            best_score = best_here;
            best_rel = rel;
        }
    }
    return best_rel;
}

} // namespace detail

// Runs one op-seq against one scene graph and extracts the answer from the
// graph at the end of the decoded path(s). Binary verify/exist decisions
// compare the geometric mean of the best path against the calibrated
// threshold; two-branch questions decode both paths separately and combine
// at the final operation.
inline Answer execute(const OpSeq& seq, const SceneGraph& graph, const VerifyThreshold& tau,
                      const Vocabulary& vocab, const OperationRegistry& registry,
                      Trace* trace = nullptr) {
    if (seq.ops.empty()) throw UnsupportedStructure("empty op-seq");
    const BranchPlan plan = split_branches(seq, registry);

    std::vector<detail::BranchProgram> programs;
    std::vector<std::optional<InferencePath>> paths;
    for (const auto& branch : plan.branches) {
        programs.push_back(detail::compile_branch(seq, branch, graph, vocab, registry, trace));
        try {
            paths.push_back(viterbi(programs.back().steps, graph));
        } catch (const NoViablePath&) {
            paths.push_back(std::nullopt);
        }
        detail::record_branch_trace(trace, programs.back(), graph,
                                    paths.back() ? &*paths.back() : nullptr);
    }

    Answer answer;
    for (const auto& p : paths)
        if (p) answer.paths.push_back(*p);

    auto branch_score = [&](std::size_t i) {
        return paths[i] ? paths[i]->geometric_mean() : 0.0;
    };
    auto final_node = [&](std::size_t i) -> const ObjectNode& {
        if (!paths[i]) throw NoViablePath("branch " + std::to_string(i) + " found no path");
        return graph.node(paths[i]->nodes.back());
    };

    if (!plan.combiner) {
        const auto& program = programs[0];
        switch (program.final_kind) {
            case detail::FinalKind::HandOff:
                throw UnsupportedStructure("op-seq has no answer-producing final operation");
            case detail::FinalKind::Threshold: {
                const double score = branch_score(0);
                answer.kind = Answer::Kind::Binary;
                answer.decision_score = score;
                answer.value = score >= tau.value ? "yes" : "no";
                break;
            }
            case detail::FinalKind::Query: {
                answer.kind = Answer::Kind::Open;
                answer.value = detail::query_answer(*program.final_op, final_node(0), vocab);
                break;
            }
            case detail::FinalKind::Choose: {
                const auto [a, b] = detail::choose_candidates(*program.final_op);
                const auto& node = final_node(0);
                const double pa = detail::candidate_prob(*program.final_op, a, node, vocab);
                const double pb = detail::candidate_prob(*program.final_op, b, node, vocab);
                answer.kind = Answer::Kind::Open;
                answer.value = pb > pa ? b : a; // ties take the first candidate
                break;
            }
            case detail::FinalKind::ChooseRel: {
                if (!paths[0]) throw NoViablePath("no path for relationship choice");
                answer.kind = Answer::Kind::Open;
                answer.value = detail::relation_choice(*program.final_op, *paths[0], graph, vocab);
                break;
            }
        }
    } else {
        const Operation& comb = seq.ops[*plan.combiner];
        const OpSemantics sem = resolve_semantics(comb, registry);
        switch (sem) {
            case OpSemantics::And:
            case OpSemantics::Or: {
                for (const auto& program : programs)
                    if (program.final_kind != detail::FinalKind::Threshold &&
                        program.final_kind != detail::FinalKind::HandOff)
                        throw UnsupportedStructure("logical combiner over non-verify branches");
                const double s0 = branch_score(0);
                const double s1 = branch_score(1);
                const bool v0 = s0 >= tau.value;
                const bool v1 = s1 >= tau.value;
                answer.kind = Answer::Kind::Binary;
                if (sem == OpSemantics::And) {
                    answer.value = (v0 && v1) ? "yes" : "no";
                    answer.decision_score = std::min(s0, s1);
                } else {
                    answer.value = (v0 || v1) ? "yes" : "no";
                    answer.decision_score = std::max(s0, s1);
                }
                break;
            }
            case OpSemantics::Same:
            case OpSemantics::Different: {
                answer.kind = Answer::Kind::Binary;
                if (!paths[0] || !paths[1]) {
                    answer.value = "no";
                    break;
                }
                const std::string n0 = detail::compare_name(comb, final_node(0), vocab);
                const std::string n1 = detail::compare_name(comb, final_node(1), vocab);
                const bool same = n0 == n1;
                answer.value = (sem == OpSemantics::Same ? same : !same) ? "yes" : "no";
                break;
            }
            case OpSemantics::Common: {
                const auto& node0 = final_node(0);
                const auto& node1 = final_node(1);
                answer.kind = Answer::Kind::Open;
                std::string found;
                for (std::uint32_t c = 0; c < vocab.category_count() && found.empty(); ++c) {
                    auto it0 = node0.attr_dists.find(c);
                    auto it1 = node1.attr_dists.find(c);
                    if (it0 == node0.attr_dists.end() || it1 == node1.attr_dists.end()) continue;
                    if (top_class(it0->second, vocab).first == top_class(it1->second, vocab).first)
                        found = vocab.category(c).name;
                }
                if (found.empty())
                    throw AnswerFailure("no attribute category shared by the two final nodes");
                answer.value = found;
                break;
            }
            default:
                throw UnsupportedStructure("operation '" + comb.full_op() +
                                           "' cannot combine branches");
        }
    }

    if (trace) {
        trace->answer = answer.value;
        if (!answer.paths.empty())
            for (const auto& [node, w] : path_attention(answer.paths))
                trace->attention[graph.node(node).id] = w;
    }
    return answer;
}

// Failure taxonomy for evaluation: execution problems are counted per kind,
// never crashed on.
enum class FailureKind : std::uint8_t {
    NoViablePath,
    UnsupportedOperation,
    UnsupportedStructure,
    UnknownVocabularyTerm,
    UnknownOperation,
    ParseFailure,
    DetokenizeFailure,
    AnswerExtraction,
    MissingPrediction,
    Other,
};

inline const char* to_string(FailureKind k) {
    switch (k) {
        case FailureKind::NoViablePath: return "NoViablePath";
        case FailureKind::UnsupportedOperation: return "UnsupportedOperation";
        case FailureKind::UnsupportedStructure: return "UnsupportedStructure";
        case FailureKind::UnknownVocabularyTerm: return "UnknownVocabularyTerm";
        case FailureKind::UnknownOperation: return "UnknownOperation";
        case FailureKind::ParseFailure: return "ParseError";
        case FailureKind::DetokenizeFailure: return "DetokenizeError";
        case FailureKind::AnswerExtraction: return "AnswerFailure";
        case FailureKind::MissingPrediction: return "MissingPrediction";
        case FailureKind::Other: return "Other";
    }
    return "?";
}

struct QuestionOutcome {
    std::optional<Answer> answer;
    std::optional<FailureKind> failure;
    std::string detail;
};

// Exception-to-outcome boundary: open questions with no viable path score as
// answer failures, unsupported operations are counted, everything else that
// the executor throws is classified for the failure report.
inline QuestionOutcome execute_question(const OpSeq& seq, const SceneGraph& graph,
                                        const VerifyThreshold& tau, const Vocabulary& vocab,
                                        const OperationRegistry& registry,
                                        Trace* trace = nullptr) {
    QuestionOutcome out;
    try {
        out.answer = execute(seq, graph, tau, vocab, registry, trace);
    } catch (const NoViablePath& e) {
        out.failure = FailureKind::NoViablePath;
        out.detail = e.what();
    } catch (const UnsupportedOperation& e) {
        out.failure = FailureKind::UnsupportedOperation;
        out.detail = e.what();
    } catch (const UnsupportedStructure& e) {
        out.failure = FailureKind::UnsupportedStructure;
        out.detail = e.what();
    } catch (const UnknownVocabularyTerm& e) {
        out.failure = FailureKind::UnknownVocabularyTerm;
        out.detail = e.what();
    } catch (const UnknownOperation& e) {
        out.failure = FailureKind::UnknownOperation;
        out.detail = e.what();
    } catch (const AnswerFailure& e) {
        out.failure = FailureKind::AnswerExtraction;
        out.detail = e.what();
    } catch (const Error& e) {
        out.failure = FailureKind::Other;
        out.detail = e.what();
    }
    return out;
}

} // namespace ath

#pragma once

#include "ath/execute.hpp"
#include "ath/executor.hpp"
#include "ath/ingest.hpp"
#include "ath/tokenize.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace ath {

// ---------------------------------------------------------------------------
// Answer scoring and per-question evaluation records.
// ---------------------------------------------------------------------------

inline bool score_answer(const std::optional<Answer>& predicted, const QuestionRecord& gold) {
    if (!predicted) return false;
    return detail::lower(predicted->value) == detail::lower(gold.gold_answer);
}

struct QuestionEval {
    std::string question_id;
    std::string predicted; // empty on failure
    std::string gold;
    bool correct = false;
    QuestionRecord::Type type = QuestionRecord::Type::Open;
    std::optional<FailureKind> failure;
    std::string failure_detail;
    bool lossy_roundtrip = false;
    // Attention mass on matched inference objects, percent, per category;
    // absent when the category has no annotations or the question no path.
    std::array<std::optional<double>, 4> grounding;
};

struct EvalAggregates {
    std::size_t total = 0, correct = 0;
    std::size_t binary_total = 0, binary_correct = 0;
    std::size_t open_total = 0, open_correct = 0;
    std::map<std::string, std::size_t> failure_counts;
    std::size_t lossy_roundtrips = 0;

    double overall_accuracy() const { return percent(correct, total); }
    double binary_accuracy() const { return percent(binary_correct, binary_total); }
    double open_accuracy() const { return percent(open_correct, open_total); }

    static double percent(std::size_t num, std::size_t den) {
        return den == 0 ? 0.0 : 100.0 * static_cast<double>(num) / static_cast<double>(den);
    }
};

struct EvalResult {
    std::vector<QuestionEval> per_question;

    // Aggregates are always recomputed from the per-question flags so they
    // cannot drift from the partition counts.
    EvalAggregates aggregate() const {
        EvalAggregates a;
        for (const auto& q : per_question) {
            ++a.total;
            const bool binary = q.type == QuestionRecord::Type::Binary;
            (binary ? a.binary_total : a.open_total) += 1;
            if (q.correct) {
                ++a.correct;
                (binary ? a.binary_correct : a.open_correct) += 1;
            }
            if (q.failure) ++a.failure_counts[to_string(*q.failure)];
            if (q.lossy_roundtrip) ++a.lossy_roundtrips;
        }
        return a;
    }
};

// Average attention-on-inference-objects per question, percent, by category.
struct GroundingReport {
    std::array<double, 4> average{};      // over questions with a defined score
    std::array<std::size_t, 4> counted{}; // questions contributing to each category
};

struct CoverageReport {
    std::array<std::size_t, 4> matched{};
    std::array<std::size_t, 4> total{};

    double percent(std::size_t cat) const {
        return total[cat] == 0
                   ? 0.0
                   : 100.0 * static_cast<double>(matched[cat]) / static_cast<double>(total[cat]);
    }
};

// ---------------------------------------------------------------------------
// Grounding: attention mass on IoU-matched inference objects.
// ---------------------------------------------------------------------------

// For one question: per category, the summed attention of scene-graph objects
// that IoU-match (>threshold) at least one annotated inference object of that
// category, in percent. Each object's weight counts at most once per
// category; categories without annotations yield no score.
inline std::array<std::optional<double>, 4> grounding_score(
    const std::map<std::uint32_t, double>& attention, const QuestionRecord& record,
    const SceneGraph& graph, double iou_threshold = 0.5) {
    std::array<std::optional<double>, 4> scores;
    auto score_refs = [&](std::span<const InferenceObjectRef> refs) -> std::optional<double> {
        if (refs.empty()) return std::nullopt;
        double sum = 0.0;
        for (const auto& [node, weight] : attention) {
            const auto& box = graph.node(node).bbox;
            for (const auto& ref : refs) {
                if (iou(box, ref.bbox) > iou_threshold) {
                    sum += weight; // counted once per category
                    break;
                }
            }
        }
        return 100.0 * sum;
    };
    for (std::size_t c = 0; c < 3; ++c) scores[c] = score_refs(record.inference_objects[c]);
    const auto combined = record.combined_refs();
    scores[3] = score_refs(combined);
    return scores;
}

// Percentage of annotated inference objects covered by any scene-graph object
// at IoU above the threshold, per category and pooled.
inline CoverageReport detection_coverage(
    const std::vector<QuestionRecord>& records,
    const std::function<const SceneGraph*(const std::string&)>& graph_for,
    double iou_threshold = 0.5) {
    CoverageReport report;
    for (const auto& record : records) {
        const SceneGraph* graph = graph_for(record.image_id);
        if (graph == nullptr) continue;
        auto count = [&](std::span<const InferenceObjectRef> refs, std::size_t cat) {
            for (const auto& ref : refs) {
                ++report.total[cat];
                for (const auto& node : graph->nodes()) {
                    if (iou(node.bbox, ref.bbox) > iou_threshold) {
                        ++report.matched[cat];
                        break;
                    }
                }
            }
        };
        for (std::size_t c = 0; c < 3; ++c) count(record.inference_objects[c], c);
        count(record.combined_refs(), 3);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Evaluation harness.
// ---------------------------------------------------------------------------

enum class OpSeqSource : std::uint8_t { Gold, Processed, PredictedFile };

inline const char* to_string(OpSeqSource s) {
    switch (s) {
        case OpSeqSource::Gold: return "gold";
        case OpSeqSource::Processed: return "processed";
        case OpSeqSource::PredictedFile: return "predicted";
    }
    return "?";
}

inline OpSeqSource opseq_source_from_string(std::string_view s) {
    if (s == "gold") return OpSeqSource::Gold;
    if (s == "processed") return OpSeqSource::Processed;
    if (s == "predicted" || s == "file") return OpSeqSource::PredictedFile;
    throw ConfigError("unknown op-seq source: " + std::string(s));
}

struct EvalOptions {
    OpSeqSource source = OpSeqSource::Gold;
    GraphRecipe recipe;
    VerifyThreshold tau{0.5, 0.0, ""};
    double iou_match = 0.5;
    int parallelism = 1;
};

struct EvalOutput {
    EvalResult result;
    GroundingReport grounding;
    CoverageReport coverage;
};

namespace detail {

inline void eval_one(const Dataset& data, const EvalOptions& options,
                     const std::vector<SceneGraph>& built,
                     const std::unordered_map<std::string, std::size_t>& built_by_image,
                     const QuestionRecord& record, QuestionEval& out) {
    out.question_id = record.question_id;
    out.gold = record.gold_answer;
    out.type = record.type;

    auto built_it = built_by_image.find(record.image_id);
    if (built_it == built_by_image.end()) {
        out.failure = FailureKind::Other;
        out.failure_detail = "no scene graph for image " + record.image_id;
        return;
    }
    const SceneGraph& graph = built[built_it->second];

    OpSeq seq;
    try {
        switch (options.source) {
            case OpSeqSource::Gold:
                seq = record.parse_gold(data.registry);
                break;
            case OpSeqSource::Processed: {
                TokenCodec codec(data.registry, data.inventory);
                auto rt = process_roundtrip(record.parse_gold(data.registry),
                                            record.question_words, codec);
                out.lossy_roundtrip = rt.lossy();
                seq = std::move(rt.processed);
                break;
            }
            case OpSeqSource::PredictedFile: {
                auto it = data.predicted_opseqs.find(record.question_id);
                if (it == data.predicted_opseqs.end()) {
                    out.failure = FailureKind::MissingPrediction;
                    out.failure_detail = "no predicted op-seq for " + record.question_id;
                    return;
                }
                std::string text;
                for (const auto& line : it->second) text += line + "\n";
                seq = parse_opseq(text, data.registry, record.question_id);
                break;
            }
        }
    } catch (const UnknownOperation& e) {
        out.failure = FailureKind::UnknownOperation;
        out.failure_detail = e.what();
        return;
    } catch (const ParseError& e) {
        out.failure = FailureKind::ParseFailure;
        out.failure_detail = e.what();
        return;
    } catch (const DetokenizeError& e) {
        out.failure = FailureKind::DetokenizeFailure;
        out.failure_detail = e.what();
        return;
    } catch (const Error& e) {
        out.failure = FailureKind::Other;
        out.failure_detail = e.what();
        return;
    }

    auto outcome =
        execute_question(seq, graph, options.tau, data.vocab, data.registry, nullptr);
    out.failure = outcome.failure;
    out.failure_detail = outcome.detail;
    if (outcome.answer) {
        out.predicted = outcome.answer->value;
        out.correct = score_answer(outcome.answer, record);
        if (!outcome.answer->paths.empty()) {
            auto attention = path_attention(outcome.answer->paths);
            out.grounding = grounding_score(attention, record, graph, options.iou_match);
        }
    }
}

} // namespace detail

// Builds one graph per referenced image according to the recipe, executes
// every question, and aggregates accuracy, grounding and coverage. Question
// evaluation is pure, so it parallelizes over a configurable worker count
// without affecting the result.
inline EvalOutput run_evaluation(const Dataset& data, const EvalOptions& options) {
    EvalOutput out;

    std::vector<SceneGraph> built;
    std::unordered_map<std::string, std::size_t> built_by_image;
    for (const auto& g : data.graphs) {
        built.push_back(
            build_graph(options.recipe, g, data.detections_for(g.image_id()), data.vocab,
                        options.iou_match));
        built_by_image.emplace(g.image_id(), built.size() - 1);
    }

    out.result.per_question.resize(data.questions.size());
    const int workers = std::max(1, options.parallelism);
    if (workers == 1) {
        for (std::size_t i = 0; i < data.questions.size(); ++i)
            detail::eval_one(data, options, built, built_by_image, data.questions[i],
                             out.result.per_question[i]);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                while (true) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= data.questions.size()) return;
                    detail::eval_one(data, options, built, built_by_image, data.questions[i],
                                     out.result.per_question[i]);
                }
            });
        for (auto& t : pool) t.join();
    }

    for (const auto& q : out.result.per_question)
        for (std::size_t c = 0; c < 4; ++c)
            if (q.grounding[c]) {
                out.grounding.average[c] += *q.grounding[c];
                ++out.grounding.counted[c];
            }
    for (std::size_t c = 0; c < 4; ++c)
        if (out.grounding.counted[c] > 0)
            out.grounding.average[c] /= static_cast<double>(out.grounding.counted[c]);

    out.coverage = detection_coverage(
        data.questions,
        [&](const std::string& image_id) -> const SceneGraph* {
            auto it = built_by_image.find(image_id);
            return it == built_by_image.end() ? nullptr : &built[it->second];
        },
        options.iou_match);
    return out;
}

// ---------------------------------------------------------------------------
// Ablation matrix over (op-seq source, graph recipe) rows.
// ---------------------------------------------------------------------------

struct AblationRow {
    std::string name;
    OpSeqSource source = OpSeqSource::Gold;
    GraphRecipe recipe;
};

struct AblationResult {
    AblationRow row;
    EvalAggregates aggregates;
    GroundingReport grounding;
    CoverageReport coverage;
};

// The reference 10-row matrix: every combination the ablation study reports,
// from fully predicted inputs up to the all-oracle upper bound.
inline std::vector<AblationRow> default_ablation_rows() {
    const GraphRecipe full_pred{LayerSource::Predicted, LayerSource::Predicted,
                                LayerSource::Predicted};
    const GraphRecipe obj_attr{LayerSource::Predicted, LayerSource::Predicted,
                               LayerSource::Oracle};
    const GraphRecipe obj_only{LayerSource::Predicted, LayerSource::Oracle, LayerSource::Oracle};
    const GraphRecipe oracle{};
    std::vector<AblationRow> rows;
    auto add = [&rows](OpSeqSource s, GraphRecipe r) {
        rows.push_back({std::string(to_string(s)) + "/" + r.describe(), s, r});
    };
    add(OpSeqSource::PredictedFile, full_pred);
    add(OpSeqSource::Processed, full_pred);
    add(OpSeqSource::Gold, full_pred);
    add(OpSeqSource::PredictedFile, obj_attr);
    add(OpSeqSource::Gold, obj_attr);
    add(OpSeqSource::PredictedFile, obj_only);
    add(OpSeqSource::Gold, obj_only);
    add(OpSeqSource::PredictedFile, oracle);
    add(OpSeqSource::Processed, oracle);
    add(OpSeqSource::Gold, oracle);
    return rows;
}

inline std::vector<AblationResult> ablation_matrix(const Dataset& data,
                                                   const std::vector<AblationRow>& rows,
                                                   const EvalOptions& base) {
    std::vector<AblationResult> results;
    for (const auto& row : rows) {
        EvalOptions options = base;
        options.source = row.source;
        options.recipe = row.recipe;
        if (row.source == OpSeqSource::PredictedFile && data.predicted_opseqs.empty())
            throw ConfigError("ablation row '" + row.name +
                              "' needs a predicted op-seq file, none configured");
        auto output = run_evaluation(data, options);
        results.push_back({row, output.result.aggregate(), output.grounding, output.coverage});
    }
    return results;
}

} // namespace ath

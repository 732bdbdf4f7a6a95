#pragma once

#include "ath/config.hpp"
#include "ath/execute.hpp"
#include "ath/gqa_convert.hpp"
#include "ath/ingest.hpp"
#include "ath/metrics.hpp"
#include "ath/synthetic.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>

namespace ath {

// Exit codes: 0 success, 1 evaluation completed with failures recorded,
// 2 configuration or ingest error. Command mains catch Error and map it to 2.

namespace detail {

inline std::string fmt(double value, int precision = 2) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", precision, value);
    return buf;
}

inline nlohmann::ordered_json grounding_json(const GroundingReport& g) {
    nlohmann::ordered_json j;
    for (std::size_t c = 0; c < 4; ++c)
        j[kRefCategoryNames[c]] = {{"average", g.average[c]}, {"questions", g.counted[c]}};
    return j;
}

inline nlohmann::ordered_json coverage_json(const CoverageReport& c) {
    nlohmann::ordered_json j;
    for (std::size_t i = 0; i < 4; ++i)
        j[kRefCategoryNames[i]] = {{"matched", c.matched[i]},
                                   {"total", c.total[i]},
                                   {"percent", c.percent(i)}};
    return j;
}

inline nlohmann::ordered_json eval_report_json(const RunConfig& config, const EvalOutput& output) {
    const auto agg = output.result.aggregate();
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["opseq_source"] = to_string(config.opseq_source);
    j["recipe"] = {{"objects", to_string(config.recipe.objects)},
                   {"attributes", to_string(config.recipe.attributes)},
                   {"relationships", to_string(config.recipe.relationships)}};
    j["tau"] = config.threshold().value;
    j["accuracy"] = {{"overall", agg.overall_accuracy()},
                     {"binary", agg.binary_accuracy()},
                     {"open", agg.open_accuracy()},
                     {"total", agg.total},
                     {"correct", agg.correct},
                     {"binary_total", agg.binary_total},
                     {"binary_correct", agg.binary_correct},
                     {"open_total", agg.open_total},
                     {"open_correct", agg.open_correct}};
    nlohmann::ordered_json failures;
    for (const auto& [kind, count] : agg.failure_counts) failures[kind] = count;
    j["failures"] = std::move(failures);
    j["lossy_roundtrips"] = agg.lossy_roundtrips;
    j["grounding"] = grounding_json(output.grounding);
    j["coverage"] = coverage_json(output.coverage);
    auto per_question = nlohmann::ordered_json::array();
    for (const auto& q : output.result.per_question) {
        nlohmann::ordered_json jq;
        jq["question_id"] = q.question_id;
        jq["predicted"] = q.predicted;
        jq["gold"] = q.gold;
        jq["correct"] = q.correct;
        jq["type"] = q.type == QuestionRecord::Type::Binary ? "binary" : "open";
        if (q.failure) jq["failure"] = to_string(*q.failure);
        if (q.lossy_roundtrip) jq["lossy_roundtrip"] = true;
        nlohmann::ordered_json gr;
        for (std::size_t c = 0; c < 4; ++c)
            if (q.grounding[c]) gr[kRefCategoryNames[c]] = *q.grounding[c];
        if (!gr.empty()) jq["grounding"] = std::move(gr);
        per_question.push_back(std::move(jq));
    }
    j["per_question"] = std::move(per_question);
    return j;
}

inline std::string eval_report_table(const EvalOutput& output) {
    const auto agg = output.result.aggregate();
    std::ostringstream out;
    out << "accuracy  overall " << fmt(agg.overall_accuracy()) << "  binary "
        << fmt(agg.binary_accuracy()) << " (" << agg.binary_correct << "/" << agg.binary_total
        << ")  open " << fmt(agg.open_accuracy()) << " (" << agg.open_correct << "/"
        << agg.open_total << ")\n";
    out << "grounding ";
    for (std::size_t c = 0; c < 4; ++c)
        out << kRefCategoryNames[c] << " " << fmt(output.grounding.average[c]) << " ("
            << output.grounding.counted[c] << " questions)  ";
    out << "\ncoverage  ";
    for (std::size_t c = 0; c < 4; ++c)
        out << kRefCategoryNames[c] << " " << fmt(output.coverage.percent(c)) << " ("
            << output.coverage.matched[c] << "/" << output.coverage.total[c] << ")  ";
    out << "\n";
    if (agg.lossy_roundtrips > 0)
        out << "lossy op-seq round-trips: " << agg.lossy_roundtrips << "\n";
    if (!agg.failure_counts.empty()) {
        out << "failures  ";
        for (const auto& [kind, count] : agg.failure_counts) out << kind << " " << count << "  ";
        out << "\n";
    }
    return out.str();
}

inline std::string ablation_table(const std::vector<AblationResult>& results) {
    std::ostringstream out;
    out << std::left << std::setw(26) << "row" << std::setw(11) << "opseq" << std::setw(22)
        << "graph" << std::right << std::setw(8) << "binary" << std::setw(8) << "open"
        << std::setw(11) << "grounding" << std::setw(10) << "accuracy" << "\n";
    for (const auto& r : results) {
        out << std::left << std::setw(26) << r.row.name << std::setw(11)
            << to_string(r.row.source) << std::setw(22) << r.row.recipe.describe() << std::right
            << std::setw(8) << fmt(r.aggregates.binary_accuracy()) << std::setw(8)
            << fmt(r.aggregates.open_accuracy()) << std::setw(11)
            << fmt(r.grounding.average[3]) << std::setw(10)
            << fmt(r.aggregates.overall_accuracy()) << "\n";
    }
    return out.str();
}

inline void write_text_file(const std::string& text, const std::string& path) {
    if (path.empty()) return;
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << text;
}

inline void write_json_report(const nlohmann::ordered_json& j, const std::string& path) {
    if (path.empty()) return;
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    out << j.dump(2) << '\n';
}

} // namespace detail

// ---------------------------------------------------------------------------
// answer: step-by-step trace for one question.
// ---------------------------------------------------------------------------

inline int cmd_answer(const RunConfig& config, const std::string& question_id, std::ostream& out,
                      std::ostream& err) {
    Dataset data = config.load_dataset();
    const QuestionRecord* record = nullptr;
    for (const auto& q : data.questions)
        if (q.question_id == question_id) record = &q;
    if (record == nullptr) {
        err << "question not found: " << question_id << "\n";
        return 2;
    }
    const SceneGraph* oracle = data.graph_for(record->image_id);
    if (oracle == nullptr) {
        err << "no scene graph for image " << record->image_id << "\n";
        return 2;
    }
    SceneGraph graph = build_graph(config.recipe, *oracle, data.detections_for(record->image_id),
                                   data.vocab, config.iou_match);

    OpSeq seq;
    switch (config.opseq_source) {
        case OpSeqSource::Gold:
            seq = record->parse_gold(data.registry);
            break;
        case OpSeqSource::Processed: {
            TokenCodec codec(data.registry, data.inventory);
            auto rt = process_roundtrip(record->parse_gold(data.registry), record->question_words,
                                        codec);
            for (const auto& issue : rt.issues)
                out << "processing: " << to_string(issue.kind) << " '" << issue.word << "' (op "
                    << issue.op_index << ")\n";
            seq = std::move(rt.processed);
            break;
        }
        case OpSeqSource::PredictedFile: {
            auto it = data.predicted_opseqs.find(question_id);
            if (it == data.predicted_opseqs.end()) {
                err << "no predicted op-seq for " << question_id << "\n";
                return 2;
            }
            std::string text;
            for (const auto& line : it->second) text += line + "\n";
            seq = parse_opseq(text, data.registry, question_id);
            break;
        }
    }

    out << "question " << record->question_id << ": " << detail::join(record->question_words, " ")
        << "\n";
    out << "op-seq:\n";
    for (const auto& op : seq.ops) out << "  " << serialize_operation(op) << "\n";

    Trace trace;
    auto outcome = execute_question(seq, graph, config.threshold(), data.vocab, data.registry,
                                    &trace);
    for (const auto& note : trace.notes) out << "note: " << note << "\n";
    for (std::size_t b = 0; b < trace.branches.size(); ++b) {
        const auto& branch = trace.branches[b];
        out << "branch " << (b + 1) << ":\n";
        for (const auto& step : branch.steps) {
            out << "  " << step.op_text << " | top:";
            for (const auto& [id, p] : step.top_emissions)
                out << " " << id << "=" << detail::fmt(p, 4);
            if (!step.chosen.empty()) out << " | chosen " << step.chosen;
            out << "\n";
        }
        out << "  " << branch.outcome;
        if (branch.geometric_mean)
            out << " | geometric mean " << detail::fmt(*branch.geometric_mean, 6);
        out << "\n";
    }
    if (!trace.attention.empty()) {
        out << "attention:";
        for (const auto& [id, w] : trace.attention) out << " " << id << "=" << detail::fmt(w, 4);
        out << "\n";
    }
    if (outcome.answer) {
        out << "answer: " << outcome.answer->value << "\n";
        out << "gold: " << record->gold_answer << "\n";
        return 0;
    }
    out << "answer failure: " << to_string(*outcome.failure) << " (" << outcome.detail << ")\n";
    out << "gold: " << record->gold_answer << "\n";
    return 1;
}

// ---------------------------------------------------------------------------
// eval / ablate / calibrate / trace-grounding / gen-synthetic / convert.
// ---------------------------------------------------------------------------

inline int cmd_eval(const RunConfig& config, std::ostream& out, std::ostream& err) {
    (void)err;
    Dataset data = config.load_dataset();
    auto output = run_evaluation(data, config.eval_options());
    const auto table = detail::eval_report_table(output);
    out << table;
    detail::write_json_report(detail::eval_report_json(config, output), config.report_json);
    detail::write_text_file(table, config.report_table);
    std::size_t failures = 0;
    for (const auto& [kind, count] : output.result.aggregate().failure_counts) failures += count;
    return failures == 0 ? 0 : 1;
}

inline int cmd_ablate(const RunConfig& config, std::ostream& out, std::ostream& err) {
    (void)err;
    Dataset data = config.load_dataset();
    const auto rows =
        config.ablation_rows.empty() ? default_ablation_rows() : config.ablation_rows;
    auto results = ablation_matrix(data, rows, config.eval_options());
    const auto table = detail::ablation_table(results);
    out << table;

    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : results) {
        nlohmann::ordered_json row;
        row["name"] = r.row.name;
        row["opseq_source"] = to_string(r.row.source);
        row["recipe"] = {{"objects", to_string(r.row.recipe.objects)},
                         {"attributes", to_string(r.row.recipe.attributes)},
                         {"relationships", to_string(r.row.recipe.relationships)}};
        row["binary"] = r.aggregates.binary_accuracy();
        row["open"] = r.aggregates.open_accuracy();
        row["accuracy"] = r.aggregates.overall_accuracy();
        row["grounding"] = detail::grounding_json(r.grounding);
        row["coverage"] = detail::coverage_json(r.coverage);
        arr.push_back(std::move(row));
    }
    j["rows"] = std::move(arr);
    detail::write_json_report(j, config.report_json);
    detail::write_text_file(table, config.report_table);
    return 0;
}

// Collects (geometric-mean decision score, gold yes/no) pairs for binary
// threshold questions and fits tau by F1 sweep.
inline int cmd_calibrate(const RunConfig& config, const std::string& tau_out, std::ostream& out,
                         std::ostream& err) {
    (void)err;
    Dataset data = config.load_dataset();
    EvalOptions options = config.eval_options();

    std::vector<SceneGraph> built;
    std::unordered_map<std::string, const SceneGraph*> built_by_image;
    built.reserve(data.graphs.size());
    for (const auto& g : data.graphs) {
        built.push_back(build_graph(options.recipe, g, data.detections_for(g.image_id()),
                                    data.vocab, options.iou_match));
        built_by_image.emplace(g.image_id(), &built.back());
    }

    std::vector<std::pair<double, bool>> dev;
    for (const auto& record : data.questions) {
        if (record.type != QuestionRecord::Type::Binary) continue;
        const std::string gold = detail::lower(record.gold_answer);
        if (gold != "yes" && gold != "no") continue;
        auto it = built_by_image.find(record.image_id);
        if (it == built_by_image.end()) continue;
        OpSeq seq;
        try {
            seq = record.parse_gold(data.registry);
        } catch (const Error&) {
            continue;
        }
        auto outcome = execute_question(seq, *it->second, options.tau, data.vocab, data.registry);
        double score = 0.0;
        if (outcome.answer && outcome.answer->decision_score)
            score = *outcome.answer->decision_score;
        else if (outcome.answer)
            continue; // comparison-style binary answer, not threshold-driven
        dev.emplace_back(score, gold == "yes");
    }

    auto threshold = calibrate_threshold(dev, config.paths.questions);
    out << "tau " << detail::fmt(threshold.value, 6) << "  f1 " << detail::fmt(threshold.f1, 6)
        << "  points " << dev.size() << "\n";
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["tau"] = threshold.value;
    j["f1"] = threshold.f1;
    j["dev_set_id"] = threshold.dev_set_id;
    j["points"] = dev.size();
    detail::write_json_report(j, tau_out.empty() ? "tau.json" : tau_out);
    return 0;
}

inline int cmd_trace_grounding(const RunConfig& config, std::ostream& out, std::ostream& err) {
    (void)err;
    Dataset data = config.load_dataset();
    auto output = run_evaluation(data, config.eval_options());
    for (const auto& q : output.result.per_question) {
        out << q.question_id;
        for (std::size_t c = 0; c < 4; ++c) {
            out << "  " << kRefCategoryNames[c] << "=";
            if (q.grounding[c]) out << detail::fmt(*q.grounding[c]);
            else out << "-";
        }
        out << "\n";
    }
    out << "average";
    for (std::size_t c = 0; c < 4; ++c)
        out << "  " << kRefCategoryNames[c] << "=" << detail::fmt(output.grounding.average[c]);
    out << "\n";
    return 0;
}

inline int cmd_gen_synthetic(const SyntheticParams& params, const std::filesystem::path& out_dir,
                             std::ostream& out, std::ostream& err) {
    (void)err;
    auto generated = generate_synthetic(params);
    write_synthetic(generated, out_dir);
    out << "generated " << generated.graphs.size() << " graphs, " << generated.questions.size()
        << " questions (seed " << params.seed << ", noise " << detail::fmt(params.noise) << ") in "
        << out_dir.string() << "\n";
    return 0;
}

inline int cmd_convert(const ConvertOptions& options, std::ostream& out, std::ostream& err) {
    (void)err;
    auto stats = convert_gqa(options);
    out << "converted " << stats.graphs << " graphs, " << stats.questions << " questions, "
        << stats.operations << " operations";
    if (stats.skipped_annotations > 0)
        out << " (" << stats.skipped_annotations << " annotations skipped, see convert.log)";
    out << "\n";
    return 0;
}

} // namespace ath

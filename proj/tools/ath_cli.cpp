// ath: answer compositional questions over probabilistic scene graphs and
// evaluate the whole pipeline (accuracy, grounding, coverage, ablations).

#include "ath/commands.hpp"
#include "ath/config.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <string>

namespace {

struct CommonFlags {
    std::string config_path;
    std::string opseq_source;
    std::string recipe_objects, recipe_attributes, recipe_relationships;
    double tau = -1.0;
    int parallelism = 0;
    std::string report_json, report_table;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "declarative run configuration (json)")
        ->required();
    cmd->add_option("--opseq-source", flags.opseq_source, "gold | processed | predicted");
    cmd->add_option("--objects", flags.recipe_objects, "object layer: oracle | predicted");
    cmd->add_option("--attributes", flags.recipe_attributes, "attribute layer: oracle | predicted");
    cmd->add_option("--relationships", flags.recipe_relationships,
                    "relationship layer: oracle | predicted");
    cmd->add_option("--tau", flags.tau, "verify/exist decision threshold");
    cmd->add_option("--parallelism", flags.parallelism, "question-level worker count");
    cmd->add_option("--report-json", flags.report_json, "machine-readable report path");
    cmd->add_option("--report-table", flags.report_table, "text table report path");
}

ath::RunConfig load_config(const CommonFlags& flags) {
    ath::RunConfig config = ath::RunConfig::load(flags.config_path);
    if (!flags.opseq_source.empty())
        config.opseq_source = ath::opseq_source_from_string(flags.opseq_source);
    if (!flags.recipe_objects.empty())
        config.recipe.objects = ath::layer_source_from_string(flags.recipe_objects);
    if (!flags.recipe_attributes.empty())
        config.recipe.attributes = ath::layer_source_from_string(flags.recipe_attributes);
    if (!flags.recipe_relationships.empty())
        config.recipe.relationships = ath::layer_source_from_string(flags.recipe_relationships);
    if (flags.tau >= 0.0) config.tau = flags.tau;
    if (flags.parallelism > 0) config.parallelism = flags.parallelism;
    if (!flags.report_json.empty()) config.report_json = flags.report_json;
    if (!flags.report_table.empty()) config.report_table = flags.report_table;
    config.validate();
    return config;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ath: treasure-hunt inference over probabilistic scene graphs"};
    app.require_subcommand(1);

    CommonFlags answer_flags;
    std::string question_id;
    auto* answer = app.add_subcommand("answer", "trace one question step by step");
    add_common(answer, answer_flags);
    answer->add_option("--question-id", question_id, "question to answer")->required();

    CommonFlags eval_flags;
    auto* eval = app.add_subcommand("eval", "run the full evaluation");
    add_common(eval, eval_flags);

    CommonFlags ablate_flags;
    auto* ablate = app.add_subcommand("ablate", "oracle/predicted ablation matrix");
    add_common(ablate, ablate_flags);

    CommonFlags calibrate_flags;
    std::string tau_out;
    auto* calibrate = app.add_subcommand("calibrate", "fit the decision threshold on a dev set");
    add_common(calibrate, calibrate_flags);
    calibrate->add_option("--tau-out", tau_out, "output threshold file (default tau.json)");

    CommonFlags trace_flags;
    auto* trace = app.add_subcommand("trace-grounding", "per-question grounding scores");
    add_common(trace, trace_flags);

    ath::SyntheticParams syn;
    std::string syn_out;
    auto* gen = app.add_subcommand("gen-synthetic", "generate a planted-truth dataset");
    gen->add_option("--out", syn_out, "output directory")->required();
    gen->add_option("--seed", syn.seed, "generator seed");
    gen->add_option("--graphs", syn.graph_count, "number of scene graphs");
    gen->add_option("--questions-per-graph", syn.questions_per_graph, "questions per graph");
    gen->add_option("--noise", syn.noise, "predicted-layer noise in [0,1]");
    gen->add_option("--min-nodes", syn.min_nodes, "minimum objects per graph");
    gen->add_option("--max-nodes", syn.max_nodes, "maximum objects per graph");

    ath::ConvertOptions conv;
    auto* convert = app.add_subcommand("convert", "normalize raw GQA-format json");
    convert->add_option("--questions", conv.raw_questions, "raw questions json")->required();
    convert->add_option("--graphs", conv.raw_graphs, "raw scene graphs json")->required();
    convert->add_option("--category-map", conv.category_map,
                        "attribute category map json (optional)");
    convert->add_option("--out", conv.out_dir, "output directory")->required();
    convert->add_option("--class-budget", conv.class_budget, "total token class budget");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (answer->parsed())
            return ath::cmd_answer(load_config(answer_flags), question_id, std::cout, std::cerr);
        if (eval->parsed()) return ath::cmd_eval(load_config(eval_flags), std::cout, std::cerr);
        if (ablate->parsed())
            return ath::cmd_ablate(load_config(ablate_flags), std::cout, std::cerr);
        if (calibrate->parsed())
            return ath::cmd_calibrate(load_config(calibrate_flags), tau_out, std::cout, std::cerr);
        if (trace->parsed())
            return ath::cmd_trace_grounding(load_config(trace_flags), std::cout, std::cerr);
        if (gen->parsed()) return ath::cmd_gen_synthetic(syn, syn_out, std::cout, std::cerr);
        if (convert->parsed()) return ath::cmd_convert(conv, std::cout, std::cerr);
    } catch (const ath::CalibrationError& e) {
        std::cerr << "calibration error: " << e.what() << "\n";
        return 2;
    } catch (const ath::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ath::IngestError& e) {
        std::cerr << "ingest error: " << e.what() << "\n";
        return 2;
    } catch (const ath::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}

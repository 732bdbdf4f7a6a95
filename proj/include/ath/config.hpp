#pragma once

#include "ath/errors.hpp"
#include "ath/ingest.hpp"
#include "ath/metrics.hpp"
#include "ath/synthetic.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ath {

// Run configuration: one declarative file, every paper constant visible and
// overridable (IoU match 0.5, pair expansion 15%, object cap 100, tau).
struct RunConfig {
    struct Paths {
        std::string vocab;
        std::string registry;  // optional: standard registry derived from the vocabulary
        std::string inventory; // optional: functional tokens + category names + "name"
        std::string graphs;
        std::string questions;
        std::string detections; // optional unless a recipe needs predictions
        std::string opseqs;     // optional predicted op-seq file
        std::string tau_file;   // optional calibrated threshold
    } paths;

    GraphRecipe recipe;
    OpSeqSource opseq_source = OpSeqSource::Gold;
    double tau = 0.5;
    double iou_match = 0.5;
    double pair_expansion = 0.15;
    std::size_t object_cap = 100;
    int parallelism = 1;
    std::uint64_t seed = 1;
    std::string report_json;
    std::string report_table;
    std::vector<AblationRow> ablation_rows; // empty: the default 10-row matrix

    static GraphRecipe recipe_from_json(const nlohmann::json& j) {
        GraphRecipe r;
        r.objects = layer_source_from_string(j.value("objects", "oracle"));
        r.attributes = layer_source_from_string(j.value("attributes", "oracle"));
        r.relationships = layer_source_from_string(j.value("relationships", "oracle"));
        return r;
    }

    static RunConfig load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("config: cannot open " + path.string());
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("config: " + path.string() + ": " + e.what());
        }
        try {
            RunConfig c;
            const auto paths = j.value("paths", nlohmann::json::object());
            c.paths.vocab = paths.value("vocab", "");
            c.paths.registry = paths.value("registry", "");
            c.paths.inventory = paths.value("inventory", "");
            c.paths.graphs = paths.value("graphs", "");
            c.paths.questions = paths.value("questions", "");
            c.paths.detections = paths.value("detections", "");
            c.paths.opseqs = paths.value("opseqs", "");
            c.paths.tau_file = paths.value("tau_file", "");
            if (j.contains("recipe")) c.recipe = recipe_from_json(j.at("recipe"));
            c.opseq_source = opseq_source_from_string(j.value("opseq_source", "gold"));
            c.tau = j.value("tau", 0.5);
            const auto th = j.value("thresholds", nlohmann::json::object());
            c.iou_match = th.value("iou_match", 0.5);
            c.pair_expansion = th.value("pair_expansion", 0.15);
            c.object_cap = th.value("object_cap", static_cast<std::size_t>(100));
            c.parallelism = j.value("parallelism", 1);
            c.seed = j.value("seed", static_cast<std::uint64_t>(1));
            const auto out = j.value("output", nlohmann::json::object());
            c.report_json = out.value("report_json", "");
            c.report_table = out.value("report_table", "");
            for (const auto& jr : j.value("ablation_rows", nlohmann::json::array())) {
                AblationRow row;
                row.source = opseq_source_from_string(jr.value("opseq_source", "gold"));
                row.recipe = recipe_from_json(jr.value("recipe", nlohmann::json::object()));
                row.name = jr.value("name", std::string(to_string(row.source)) + "/" +
                                                row.recipe.describe());
                c.ablation_rows.push_back(std::move(row));
            }
            c.validate();
            return c;
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("config: " + path.string() + ": " + e.what());
        }
    }

    void validate() const {
        if (tau < 0.0 || tau > 1.0) throw ConfigError("tau must lie in [0,1]");
        if (iou_match < 0.0 || iou_match >= 1.0) throw ConfigError("iou_match must lie in [0,1)");
        if (pair_expansion < 0.0) throw ConfigError("pair_expansion must be non-negative");
        if (parallelism < 1) throw ConfigError("parallelism must be at least 1");
        const bool needs_detections = recipe.objects == LayerSource::Predicted ||
                                      recipe.attributes == LayerSource::Predicted ||
                                      recipe.relationships == LayerSource::Predicted;
        if (needs_detections && paths.detections.empty())
            throw ConfigError("recipe uses predicted layers but paths.detections is missing");
        if (opseq_source == OpSeqSource::PredictedFile && paths.opseqs.empty())
            throw ConfigError("opseq_source is 'predicted' but paths.opseqs is missing");
    }

    VerifyThreshold threshold() const {
        VerifyThreshold t{tau, 0.0, "config"};
        if (!paths.tau_file.empty()) {
            auto j = detail::read_json_file(paths.tau_file, "tau file");
            try {
                t.value = j.at("tau").get<double>();
                t.f1 = j.value("f1", 0.0);
                t.dev_set_id = j.value("dev_set_id", "");
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError("tau file: " + paths.tau_file + ": " + e.what());
            }
        }
        return t;
    }

    Dataset load_dataset() const {
        if (paths.vocab.empty()) throw ConfigError("paths.vocab is required");
        if (paths.graphs.empty()) throw ConfigError("paths.graphs is required");
        if (paths.questions.empty()) throw ConfigError("paths.questions is required");
        Dataset data;
        data.vocab = Vocabulary::load(paths.vocab);
        data.registry = paths.registry.empty() ? OperationRegistry::standard(data.vocab)
                                               : OperationRegistry::load(paths.registry);
        data.inventory = paths.inventory.empty() ? detail::synthetic_inventory(data.vocab)
                                                 : ClassInventory::load(paths.inventory);
        data.graphs = load_scene_graph_annotations(paths.graphs, data.vocab);
        data.questions = load_questions(paths.questions);
        if (!paths.detections.empty())
            data.detections = load_detections(paths.detections, data.vocab, object_cap);
        if (!paths.opseqs.empty()) data.predicted_opseqs = load_predicted_opseqs(paths.opseqs);
        data.index();
        return data;
    }

    EvalOptions eval_options() const {
        EvalOptions o;
        o.source = opseq_source;
        o.recipe = recipe;
        o.tau = threshold();
        o.iou_match = iou_match;
        o.parallelism = parallelism;
        return o;
    }
};

} // namespace ath

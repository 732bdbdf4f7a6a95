#pragma once

#include "ath/errors.hpp"
#include "ath/ingest.hpp"
#include "ath/registry.hpp"
#include "ath/tokenize.hpp"
#include "ath/vocab.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace ath {

// Converts raw GQA-format question and scene-graph JSON into the normalized
// schemas this system consumes. The raw corpus also yields the derived
// configuration: the vocabulary, the operation registry (scanned full
// operation strings) and the token class inventory (functional tokens plus
// the most frequent argument words that cannot be copied from questions).
//
// Attribute categories are not part of the raw scene-graph files; supply a
// category map ({"color": ["red", ...]}) to reproduce the full category
// structure, otherwise all attributes land in one "attribute" category.
struct ConvertOptions {
    std::filesystem::path raw_questions;
    std::filesystem::path raw_graphs;
    std::filesystem::path category_map; // optional
    std::filesystem::path out_dir;
    std::size_t class_budget = 193; // total token classes incl. pointers and empty
    std::uint32_t pointer_budget = 20;
};

struct ConvertStats {
    std::size_t graphs = 0;
    std::size_t questions = 0;
    std::size_t operations = 0;
    std::size_t skipped_annotations = 0;
    std::vector<std::string> log;
};

namespace detail {

// Words are split on whitespace; trailing punctuation becomes its own token
// so "table?" still matches the argument "table".
inline std::vector<std::string> question_tokens(const std::string& text) {
    std::vector<std::string> words;
    for (const auto& raw : split_words(text)) {
        std::string w = raw;
        std::string tail;
        while (!w.empty() && (w.back() == '?' || w.back() == '.' || w.back() == ',')) {
            tail = w.back();
            w.pop_back();
        }
        if (!w.empty()) words.push_back(w);
        if (!tail.empty()) words.push_back(tail);
    }
    return words;
}

// Strips a trailing space-separated "(...)" object-id group, e.g.
// "cup (123456)" -> "cup". Functional forms like "not(red)" have no space
// before the parenthesis and stay intact.
inline std::string strip_id_group(const std::string& arg) {
    std::string t = trim(arg);
    if (t.size() < 3 || t.back() != ')') return t;
    auto open = t.rfind('(');
    if (open == std::string::npos || open == 0) return t;
    if (t[open - 1] != ' ') return t;
    return trim(t.substr(0, open - 1));
}

// The raw side marker names the role of the new object; internally the
// marker names the role of the current node, so s and o swap.
inline std::string flip_side_marker(const std::string& arg) {
    auto comma = arg.rfind(',');
    if (comma == std::string::npos) return arg;
    std::string tail = arg.substr(comma + 1);
    if (tail == "s") return arg.substr(0, comma + 1) + "o";
    if (tail == "o") return arg.substr(0, comma + 1) + "s";
    return arg;
}

} // namespace detail

inline ConvertStats convert_gqa(const ConvertOptions& options) {
    ConvertStats stats;
    auto raw_graphs = detail::read_json_file(options.raw_graphs, "raw scene graphs");
    auto raw_questions = detail::read_json_file(options.raw_questions, "raw questions");

    // ---- vocabulary scan -------------------------------------------------
    std::set<std::string> object_names, attribute_names, relationship_names;
    for (const auto& [image_id, jg] : raw_graphs.items()) {
        for (const auto& [oid, jo] : jg.value("objects", nlohmann::json::object()).items()) {
            object_names.insert(jo.at("name").get<std::string>());
            for (const auto& ja : jo.value("attributes", nlohmann::json::array()))
                attribute_names.insert(ja.get<std::string>());
            for (const auto& jr : jo.value("relations", nlohmann::json::array()))
                relationship_names.insert(jr.at("name").get<std::string>());
        }
    }

    std::vector<Vocabulary::AttributeCategory> categories;
    if (!options.category_map.empty() && std::filesystem::exists(options.category_map)) {
        auto jm = detail::read_json_file(options.category_map, "category map");
        std::set<std::string> assigned;
        for (const auto& [cat, members] : jm.items()) {
            Vocabulary::AttributeCategory c{cat, {}};
            for (const auto& m : members) {
                const std::string name = m.get<std::string>();
                if (attribute_names.count(name) && assigned.insert(name).second)
                    c.members.push_back(name);
            }
            if (!c.members.empty()) categories.push_back(std::move(c));
        }
        Vocabulary::AttributeCategory rest{"other", {}};
        for (const auto& a : attribute_names)
            if (!assigned.count(a)) rest.members.push_back(a);
        if (!rest.members.empty()) categories.push_back(std::move(rest));
    } else {
        categories.push_back({"attribute", {attribute_names.begin(), attribute_names.end()}});
        stats.log.push_back("no category map supplied: all attributes in one category");
    }

    Vocabulary vocab({object_names.begin(), object_names.end()}, std::move(categories),
                     {relationship_names.begin(), relationship_names.end()});

    // ---- scene graphs ----------------------------------------------------
    nlohmann::ordered_json graphs_out;
    graphs_out["schema_version"] = 1;
    auto graphs_arr = nlohmann::ordered_json::array();
    std::map<std::string, std::map<std::string, BoundingBox>> boxes_by_image;
    for (const auto& [image_id, jg] : raw_graphs.items()) {
        nlohmann::ordered_json out;
        out["image_id"] = image_id;
        out["width"] = jg.at("width").get<double>();
        out["height"] = jg.at("height").get<double>();
        auto objects = nlohmann::ordered_json::array();
        // Raw objects arrive keyed by id; emit them in sorted-id order.
        for (const auto& [oid, jo] : jg.value("objects", nlohmann::json::object()).items()) {
            nlohmann::ordered_json obj;
            obj["id"] = oid;
            obj["name"] = jo.at("name").get<std::string>();
            const double x = jo.at("x").get<double>();
            const double y = jo.at("y").get<double>();
            const double w = jo.at("w").get<double>();
            const double h = jo.at("h").get<double>();
            if (w <= 0.0 || h <= 0.0) {
                stats.log.push_back("skipping degenerate box on " + image_id + "/" + oid);
                continue;
            }
            obj["bbox"] = nlohmann::ordered_json::array({x, y, x + w, y + h});
            boxes_by_image[image_id][oid] = {x, y, x + w, y + h};
            obj["attributes"] = jo.value("attributes", nlohmann::json::array());
            auto relations = nlohmann::ordered_json::array();
            for (const auto& jr : jo.value("relations", nlohmann::json::array()))
                relations.push_back({{"target", jr.at("object").get<std::string>()},
                                     {"name", jr.at("name").get<std::string>()}});
            obj["relations"] = std::move(relations);
            objects.push_back(std::move(obj));
        }
        out["objects"] = std::move(objects);
        graphs_arr.push_back(std::move(out));
        ++stats.graphs;
    }
    graphs_out["graphs"] = std::move(graphs_arr);

    // ---- questions, registry scan, argument-word frequencies --------------
    std::set<std::string> op_strings;
    std::map<std::string, std::size_t> uncopyable_words;

    nlohmann::ordered_json questions_out;
    questions_out["schema_version"] = 1;
    auto questions_arr = nlohmann::ordered_json::array();
    for (const auto& [qid, jq] : raw_questions.items()) {
        nlohmann::ordered_json out;
        const std::string image_id = jq.at("imageId").get<std::string>();
        out["question_id"] = qid;
        out["image_id"] = image_id;
        const auto words = detail::question_tokens(jq.at("question").get<std::string>());
        out["question"] = detail::join(words, " ");
        const std::string answer = jq.at("answer").get<std::string>();
        out["answer"] = answer;
        out["full_answer"] = jq.value("fullAnswer", "");
        const std::string structural =
            jq.value("types", nlohmann::json::object()).value("structural", "");
        const bool binary = answer == "yes" || answer == "no" || structural == "choose";
        out["type"] = binary ? "binary" : "open";

        std::set<std::string> lowered_words;
        for (const auto& w : words) lowered_words.insert(detail::lower(w));

        auto opseq = nlohmann::ordered_json::array();
        for (const auto& js : jq.value("semantic", nlohmann::json::array())) {
            const std::string op = js.at("operation").get<std::string>();
            op_strings.insert(op);
            std::string arg = detail::strip_id_group(js.value("argument", ""));
            if (op.rfind("relate", 0) == 0 || op == "verify rel")
                arg = detail::flip_side_marker(arg);
            std::string line = op + ":";
            if (!arg.empty()) line += " " + arg;
            std::string deps;
            for (const auto& jd : js.value("dependencies", nlohmann::json::array())) {
                if (!deps.empty()) deps += ",";
                deps += std::to_string(jd.get<std::size_t>());
            }
            if (!deps.empty()) line += " [" + deps + "]";
            opseq.push_back(line);
            ++stats.operations;

            for (const auto& lexeme : detail::lex_argument(arg)) {
                if (lexeme.empty()) continue;
                if (!lowered_words.count(detail::lower(lexeme))) ++uncopyable_words[lexeme];
            }
        }
        out["opseq"] = std::move(opseq);

        nlohmann::ordered_json refs;
        const std::array<std::pair<const char*, const char*>, 3> keys{
            {{"question", "question"}, {"answer", "answer"}, {"fullAnswer", "full_answer"}}};
        const auto annotations = jq.value("annotations", nlohmann::json::object());
        const auto& image_boxes = boxes_by_image[image_id];
        for (const auto& [raw_key, out_key] : keys) {
            auto list = nlohmann::ordered_json::array();
            for (const auto& [span, value] : annotations.value(raw_key, nlohmann::json::object()).items()) {
                std::vector<std::string> ids;
                if (value.is_array())
                    for (const auto& v : value) ids.push_back(v.get<std::string>());
                else
                    ids.push_back(value.get<std::string>());
                for (const auto& oid : ids) {
                    auto it = image_boxes.find(oid);
                    if (it == image_boxes.end()) {
                        ++stats.skipped_annotations;
                        stats.log.push_back("annotation " + qid + "/" + raw_key +
                                            " references unknown object " + oid);
                        continue;
                    }
                    list.push_back({{"id", oid},
                                    {"bbox", detail::bbox_to_json(it->second)}});
                }
            }
            refs[out_key] = std::move(list);
        }
        out["inference_objects"] = std::move(refs);
        questions_arr.push_back(std::move(out));
        ++stats.questions;
    }
    questions_out["questions"] = std::move(questions_arr);

    // ---- registry: the scanned full operation strings ---------------------
    std::vector<RegistryEntry> entries;
    for (const auto& op : op_strings) {
        RegistryEntry e;
        e.full = op;
        auto sp = op.find(' ');
        e.kind = op.substr(0, sp);
        e.qualifier = sp == std::string::npos ? "" : op.substr(sp + 1);
        e.semantics = derive_semantics(e.kind, e.qualifier);
        e.min_args = 0; // corpus arguments are irregular; arity stays permissive
        e.max_args = -1;
        entries.push_back(std::move(e));
    }
    OperationRegistry registry{entries};

    // ---- class inventory: functional tokens + frequent uncopyable words ---
    std::vector<std::string> functional{",", "_", "|", "not(", ")", "s", "o", "?"};
    std::vector<std::pair<std::size_t, std::string>> ranked;
    for (const auto& [word, count] : uncopyable_words) {
        if (std::find(functional.begin(), functional.end(), word) != functional.end()) continue;
        ranked.emplace_back(count, word);
    }
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    const std::size_t used = 1 + options.pointer_budget + registry.size() + functional.size();
    const std::size_t word_budget = options.class_budget > used ? options.class_budget - used : 0;
    std::vector<std::string> words;
    for (std::size_t i = 0; i < ranked.size() && i < word_budget; ++i)
        words.push_back(ranked[i].second);
    ClassInventory inventory(options.pointer_budget, std::move(functional), std::move(words));

    // ---- write everything --------------------------------------------------
    std::filesystem::create_directories(options.out_dir);
    vocab.save(options.out_dir / "vocab.json");
    registry.save(options.out_dir / "registry.txt");
    inventory.save(options.out_dir / "inventory.txt");
    detail::write_json_file(graphs_out, options.out_dir / "graphs.json", "graphs");
    detail::write_json_file(questions_out, options.out_dir / "questions.json", "questions");

    nlohmann::ordered_json config;
    config["schema_version"] = 1;
    config["paths"] = {{"vocab", (options.out_dir / "vocab.json").string()},
                       {"registry", (options.out_dir / "registry.txt").string()},
                       {"inventory", (options.out_dir / "inventory.txt").string()},
                       {"graphs", (options.out_dir / "graphs.json").string()},
                       {"questions", (options.out_dir / "questions.json").string()}};
    config["recipe"] = {{"objects", "oracle"}, {"attributes", "oracle"}, {"relationships", "oracle"}};
    config["opseq_source"] = "gold";
    config["tau"] = 0.5;
    detail::write_json_file(config, options.out_dir / "config.json", "config");

    if (!stats.log.empty()) {
        std::ofstream log(options.out_dir / "convert.log");
        for (const auto& line : stats.log) log << line << '\n';
    }

    // Validate our own output round-trips through the normal loaders.
    auto check_vocab = Vocabulary::load(options.out_dir / "vocab.json");
    load_scene_graph_annotations(options.out_dir / "graphs.json", check_vocab);
    load_questions(options.out_dir / "questions.json");
    return stats;
}

} // namespace ath

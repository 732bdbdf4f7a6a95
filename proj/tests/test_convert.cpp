#include "ath/gqa_convert.hpp"

#include "ath/config.hpp"
#include "ath/metrics.hpp"
#include "helpers.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <fstream>

using namespace ath;

namespace {

const char* kRawGraphs = R"json({
  "2407890": {
    "width": 640, "height": 480,
    "objects": {
      "1025435": {"name": "cup", "x": 10, "y": 20, "w": 50, "h": 60,
                  "attributes": ["red", "small"],
                  "relations": [{"object": "1025436", "name": "on"}]},
      "1025436": {"name": "table", "x": 0, "y": 60, "w": 400, "h": 300,
                  "attributes": ["wooden"], "relations": []}
    }
  }
})json";

const char* kRawQuestions = R"json({
  "201307251": {
    "imageId": "2407890",
    "question": "What is the red cup on?",
    "answer": "table",
    "fullAnswer": "The cup is on the table.",
    "types": {"structural": "query", "semantic": "rel", "detailed": "relO"},
    "semantic": [
      {"operation": "select", "argument": "cup (1025435)", "dependencies": []},
      {"operation": "filter color", "argument": "red", "dependencies": [0]},
      {"operation": "relate", "argument": "_,on,o (1025436)", "dependencies": [1]},
      {"operation": "query", "argument": "name", "dependencies": [2]}
    ],
    "annotations": {
      "question": {"4": "1025435"},
      "answer": {"0": "1025436"},
      "fullAnswer": {"1": "1025435", "6": "1025436"}
    }
  },
  "201307252": {
    "imageId": "2407890",
    "question": "Is there a cup?",
    "answer": "yes",
    "fullAnswer": "Yes, there is a cup.",
    "types": {"structural": "verify", "semantic": "obj", "detailed": "existThat"},
    "semantic": [
      {"operation": "select", "argument": "cup (1025435)", "dependencies": []},
      {"operation": "exist", "argument": "?", "dependencies": [0]}
    ],
    "annotations": {"question": {"3": "1025435"}, "answer": {}, "fullAnswer": {"4": "1025435"}}
  }
})json";

} // namespace

TEST_CASE("raw GQA files convert into the normalized schemas") {
    auto dir = test::scratch_dir("convert");
    {
        std::ofstream g(dir / "raw_graphs.json");
        g << kRawGraphs;
        std::ofstream q(dir / "raw_questions.json");
        q << kRawQuestions;
    }
    ConvertOptions options;
    options.raw_questions = dir / "raw_questions.json";
    options.raw_graphs = dir / "raw_graphs.json";
    options.out_dir = dir / "out";
    auto stats = convert_gqa(options);
    CHECK(stats.graphs == 1);
    CHECK(stats.questions == 2);
    CHECK(stats.operations == 6);

    auto vocab = Vocabulary::load(options.out_dir / "vocab.json");
    CHECK(vocab.object_index("cup"));
    CHECK(vocab.object_index("table"));
    CHECK(vocab.attribute_home("red"));
    CHECK(vocab.relationship_index("on"));

    auto registry = OperationRegistry::load(options.out_dir / "registry.txt");
    CHECK(registry.find("select"));
    CHECK(registry.find("filter color"));
    CHECK(registry.find("relate"));

    auto graphs = load_scene_graph_annotations(options.out_dir / "graphs.json", vocab);
    REQUIRE(graphs.size() == 1);
    CHECK(graphs[0].node_count() == 2);

    auto questions = load_questions(options.out_dir / "questions.json");
    REQUIRE(questions.size() == 2);
    const auto* rel_q = &questions[0];
    if (rel_q->question_id != "201307251") rel_q = &questions[1];
    CHECK(rel_q->type == QuestionRecord::Type::Open);
    // Object-id groups stripped, side marker flipped to the current-node view.
    CHECK(rel_q->opseq_lines[0] == "select: cup");
    CHECK(rel_q->opseq_lines[2] == "relate: _,on,s [1]");
    // Trailing '?' became its own token so arguments still match words.
    CHECK(rel_q->question_words.back() == "?");
    REQUIRE(rel_q->inference_objects[0].size() == 1);
    CHECK(rel_q->inference_objects[0][0].id == "1025435");
    REQUIRE(rel_q->inference_objects[2].size() == 2);
}

TEST_CASE("converted output executes end to end") {
    auto dir = test::scratch_dir("convert_exec");
    {
        std::ofstream g(dir / "raw_graphs.json");
        g << kRawGraphs;
        std::ofstream q(dir / "raw_questions.json");
        q << kRawQuestions;
    }
    ConvertOptions options;
    options.raw_questions = dir / "raw_questions.json";
    options.raw_graphs = dir / "raw_graphs.json";
    options.out_dir = dir / "out";
    convert_gqa(options);

    RunConfig config = RunConfig::load(options.out_dir / "config.json");
    Dataset data = config.load_dataset();
    auto output = run_evaluation(data, config.eval_options());
    auto agg = output.result.aggregate();
    CHECK(agg.total == 2);
    CHECK(agg.overall_accuracy() == 100.0); // both crafted questions resolve
    CHECK(output.grounding.counted[3] == 2);
}

TEST_CASE("category map splits attributes into categories") {
    auto dir = test::scratch_dir("convert_catmap");
    {
        std::ofstream g(dir / "raw_graphs.json");
        g << kRawGraphs;
        std::ofstream q(dir / "raw_questions.json");
        q << kRawQuestions;
        std::ofstream m(dir / "categories.json");
        m << R"json({"color": ["red", "blue"], "size": ["small", "large"]})json";
    }
    ConvertOptions options;
    options.raw_questions = dir / "raw_questions.json";
    options.raw_graphs = dir / "raw_graphs.json";
    options.category_map = dir / "categories.json";
    options.out_dir = dir / "out";
    convert_gqa(options);

    auto vocab = Vocabulary::load(options.out_dir / "vocab.json");
    REQUIRE(vocab.category_index("color"));
    REQUIRE(vocab.category_index("size"));
    REQUIRE(vocab.category_index("other")); // "wooden" had no declared category
    CHECK(vocab.attribute_home("red")->first == *vocab.category_index("color"));
    CHECK(vocab.attribute_home("wooden")->first == *vocab.category_index("other"));
}

#include "ath/ingest.hpp"

#include "helpers.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <fstream>

using namespace ath;

namespace {

struct Fixture {
    Vocabulary vocab = test::make_vocab();

    void write(const std::filesystem::path& path, const std::string& text) const {
        std::ofstream out(path);
        out << text;
    }
};

const char* kGraphsJson = R"({
  "schema_version": 1,
  "graphs": [
    {"image_id": "img0", "width": 100, "height": 100,
     "objects": [
       {"id": "o0", "name": "cup", "bbox": [0,0,10,10],
        "attributes": ["red", "wood"],
        "relations": [{"target": "o1", "name": "on"}]},
       {"id": "o1", "name": "table", "bbox": [0,8,60,60], "attributes": ["white"]}
     ]}
  ]
})";

} // namespace

TEST_CASE("oracle graphs load as one-hot distributions") {
    Fixture f;
    auto dir = test::scratch_dir("ingest_graphs");
    f.write(dir / "graphs.json", kGraphsJson);

    auto graphs = load_scene_graph_annotations(dir / "graphs.json", f.vocab);
    REQUIRE(graphs.size() == 1);
    const auto& g = graphs[0];
    REQUIRE(g.node_count() == 2);
    CHECK(class_prob(g.node(0).class_dist, "cup", f.vocab) == 1.0);
    CHECK(g.node(0).attr_dists.at(0).prob_at(*f.vocab.member_index(0, "red")) == 1.0);
    CHECK(g.node(0).attr_dists.at(1).prob_at(*f.vocab.member_index(1, "wood")) == 1.0);
    REQUIRE(g.edges().size() == 1);
    CHECK(class_prob(g.edge(0).rel_dist, "on", f.vocab) == 1.0);
    CHECK(g.provenance().objects == LayerSource::Oracle);
}

TEST_CASE("multiple attributes in one category become uniform") {
    Fixture f;
    auto dir = test::scratch_dir("ingest_multi");
    f.write(dir / "graphs.json", R"({
      "schema_version": 1,
      "graphs": [{"image_id": "img0", "width": 100, "height": 100,
        "objects": [{"id": "o0", "name": "cup", "bbox": [0,0,10,10],
                     "attributes": ["red", "white"]}]}]
    })");
    auto graphs = load_scene_graph_annotations(dir / "graphs.json", f.vocab);
    const auto& d = graphs[0].node(0).attr_dists.at(0);
    CHECK(d.prob_at(*f.vocab.member_index(0, "red")) == 0.5);
    CHECK(d.prob_at(*f.vocab.member_index(0, "white")) == 0.5);
}

TEST_CASE("ingest errors carry context") {
    Fixture f;
    auto dir = test::scratch_dir("ingest_errors");
    f.write(dir / "dangling.json", R"({
      "schema_version": 1,
      "graphs": [{"image_id": "img0", "width": 100, "height": 100,
        "objects": [{"id": "o0", "name": "cup", "bbox": [0,0,10,10],
                     "relations": [{"target": "o9", "name": "on"}]}]}]
    })");
    CHECK_THROWS_AS(load_scene_graph_annotations(dir / "dangling.json", f.vocab), IngestError);

    f.write(dir / "unknown.json", R"({
      "schema_version": 1,
      "graphs": [{"image_id": "img0", "width": 100, "height": 100,
        "objects": [{"id": "o0", "name": "zeppelin", "bbox": [0,0,10,10]}]}]
    })");
    CHECK_THROWS_AS(load_scene_graph_annotations(dir / "unknown.json", f.vocab), IngestError);

    CHECK_THROWS_AS(load_scene_graph_annotations(dir / "missing.json", f.vocab), IngestError);
}

TEST_CASE("scene graph save/load round-trip is exact") {
    Fixture f;
    auto dir = test::scratch_dir("ingest_roundtrip");
    f.write(dir / "graphs.json", kGraphsJson);
    auto graphs = load_scene_graph_annotations(dir / "graphs.json", f.vocab);
    save_scene_graph_annotations(graphs, f.vocab, dir / "copy.json");
    auto reloaded = load_scene_graph_annotations(dir / "copy.json", f.vocab);
    REQUIRE(reloaded.size() == graphs.size());
    CHECK(reloaded[0] == graphs[0]);
}

TEST_CASE("question records round-trip") {
    QuestionRecord r;
    r.question_id = "q0";
    r.image_id = "img0";
    r.question_words = {"what", "is", "the", "cup", "on"};
    r.gold_answer = "table";
    r.gold_full_answer = "the cup is on the table";
    r.opseq_lines = {"select: cup", "relate: _,on,s [0]", "query: name [1]"};
    r.type = QuestionRecord::Type::Open;
    r.inference_objects[0].push_back({"o0", {0, 0, 10, 10}});
    r.inference_objects[1].push_back({"o1", {0, 8, 60, 60}});
    r.inference_objects[2].push_back({"o0", {0, 0, 10, 10}});
    r.inference_objects[2].push_back({"o1", {0, 8, 60, 60}});

    auto dir = test::scratch_dir("ingest_questions");
    save_questions(std::vector<QuestionRecord>{r}, dir / "questions.json");
    auto loaded = load_questions(dir / "questions.json");
    REQUIRE(loaded.size() == 1);
    CHECK(loaded[0] == r);
    CHECK(loaded[0].combined_refs().size() == 2); // deduplicated by id
}

TEST_CASE("detection records round-trip and enforce the object cap") {
    Fixture f;
    DetectionRecord rec;
    rec.image_id = "img0";
    rec.width = 100;
    rec.height = 100;
    DetectedObject det;
    det.id = "d0";
    det.bbox = {1, 1, 11, 11};
    det.class_dist = CategoricalDist(VocabSlice::objects(),
                                     {{0, 0.625}, {1, 0.125}}, true, 0.25);
    det.attr_dists[0] = CategoricalDist(VocabSlice::attributes(0),
                                        {{0, 0.7}, {1, 0.1}, {2, 0.1}, {3, 0.1}});
    rec.objects.push_back(det);
    DetectedObject det2 = det;
    det2.id = "d1";
    det2.bbox = {2, 2, 30, 30};
    rec.objects.push_back(det2);
    rec.relations.push_back(
        {"d0", "d1", CategoricalDist(VocabSlice::relationships(), {{0, 0.9}, {2, 0.1}})});

    auto dir = test::scratch_dir("ingest_detections");
    save_detections(std::vector<DetectionRecord>{rec}, f.vocab, dir / "detections.json");
    auto loaded = load_detections(dir / "detections.json", f.vocab, 100);
    REQUIRE(loaded.size() == 1);
    CHECK(loaded[0] == rec);

    CHECK_THROWS_AS(load_detections(dir / "detections.json", f.vocab, 1), IngestError);
}

TEST_CASE("candidate pairs expand 15 percent per side") {
    std::vector<ObjectNode> nodes(2);
    const auto vocab = test::make_vocab();
    nodes[0].id = "a";
    nodes[0].class_dist = test::object_one_hot(vocab, "cup");
    nodes[1].id = "b";
    nodes[1].class_dist = test::object_one_hot(vocab, "table");

    // 10-wide boxes with a 2-pixel gap: expansions of 1.5 per side close it.
    nodes[0].bbox = {0, 0, 10, 10};
    nodes[1].bbox = {12, 0, 22, 10};
    auto pairs = candidate_pairs(nodes, 0.15);
    REQUIRE(pairs.size() == 2); // both orderings
    CHECK(pairs[0] == std::pair<std::uint32_t, std::uint32_t>{0, 1});
    CHECK(pairs[1] == std::pair<std::uint32_t, std::uint32_t>{1, 0});

    // Gap larger than the combined expansions: excluded.
    nodes[1].bbox = {14, 0, 24, 10};
    CHECK(candidate_pairs(nodes, 0.15).empty());

    // Superset monotonicity in the expansion.
    nodes[1].bbox = {12, 0, 22, 10};
    auto small = candidate_pairs(nodes, 0.05);
    auto large = candidate_pairs(nodes, 0.30);
    for (auto p : small) CHECK(std::find(large.begin(), large.end(), p) != large.end());
}

TEST_CASE("greedy IoU matching is injective and prefers higher overlap") {
    std::vector<BoundingBox> annotations{{0, 0, 10, 10}};
    std::vector<BoundingBox> detections{
        {0, 0, 10, 8},  // IoU 0.8
        {0, 0, 10, 6},  // IoU 0.6
        {50, 50, 60, 60}};
    auto match = greedy_iou_match(detections, annotations, 0.5);
    REQUIRE(match[0]);
    CHECK(*match[0] == 0);
    CHECK_FALSE(match[1]); // annotation already consumed by the better detection
    CHECK_FALSE(match[2]);

    std::vector<BoundingBox> low{{0, 0, 10, 4}}; // IoU 0.4: below threshold
    CHECK_FALSE(greedy_iou_match(low, annotations, 0.5)[0]);
}

TEST_CASE("build_graph recipes") {
    Fixture f;
    auto dir = test::scratch_dir("ingest_build");
    f.write(dir / "graphs.json", kGraphsJson);
    auto oracle = load_scene_graph_annotations(dir / "graphs.json", f.vocab)[0];

    DetectionRecord det;
    det.image_id = "img0";
    det.width = 100;
    det.height = 100;
    DetectedObject d0; // matches the cup at IoU 0.8
    d0.id = "d0";
    d0.bbox = {0, 0, 10, 8};
    d0.class_dist = CategoricalDist(VocabSlice::objects(),
                                    {{*f.vocab.object_index("cup"), 0.9},
                                     {*f.vocab.object_index("plate"), 0.1}});
    d0.attr_dists[0] = CategoricalDist(VocabSlice::attributes(0),
                                       {{*f.vocab.member_index(0, "blue"), 1.0}});
    DetectedObject d1; // matches the table
    d1.id = "d1";
    d1.bbox = {0, 9, 60, 61};
    d1.class_dist = CategoricalDist(VocabSlice::objects(), {{*f.vocab.object_index("table"), 1.0}});
    DetectedObject d2; // false positive, matches nothing
    d2.id = "d2";
    d2.bbox = {80, 80, 95, 95};
    d2.class_dist = CategoricalDist(VocabSlice::objects(), {{*f.vocab.object_index("dog"), 1.0}});
    det.objects = {d0, d1, d2};
    det.relations.push_back({"d0", "d1",
                             CategoricalDist(VocabSlice::relationships(),
                                             {{*f.vocab.relationship_index("under"), 1.0}})});

    SECTION("all-oracle recipe returns the annotation graph") {
        auto g = build_graph(GraphRecipe{}, oracle, &det, f.vocab, 0.5);
        CHECK(g == oracle);
    }

    SECTION("predicted objects inherit oracle attributes and relations when matched") {
        GraphRecipe recipe{LayerSource::Predicted, LayerSource::Oracle, LayerSource::Oracle};
        auto g = build_graph(recipe, oracle, &det, f.vocab, 0.5);
        REQUIRE(g.node_count() == 3);
        // d0 inherited the cup's oracle attributes.
        CHECK(g.node(0).attr_dists.at(0).prob_at(*f.vocab.member_index(0, "red")) == 1.0);
        // unmatched false positive keeps an empty oracle layer
        CHECK(g.node(2).attr_dists.empty());
        // oracle edge transplanted onto the matched detections
        REQUIRE(g.edges().size() == 1);
        CHECK(g.edges()[0].src == "d0");
        CHECK(g.edges()[0].dst == "d1");
        CHECK(class_prob(g.edges()[0].rel_dist, "on", f.vocab) == 1.0);
        CHECK(g.provenance().objects == LayerSource::Predicted);
        CHECK(g.provenance().attributes == LayerSource::Oracle);
    }

    SECTION("fully predicted recipe keeps detector outputs") {
        GraphRecipe recipe{LayerSource::Predicted, LayerSource::Predicted, LayerSource::Predicted};
        auto g = build_graph(recipe, oracle, &det, f.vocab, 0.5);
        CHECK(g.node(0).attr_dists.at(0).prob_at(*f.vocab.member_index(0, "blue")) == 1.0);
        REQUIRE(g.edges().size() == 1);
        CHECK(class_prob(g.edges()[0].rel_dist, "under", f.vocab) == 1.0);
    }

    SECTION("detections below the IoU threshold inherit nothing") {
        DetectionRecord far = det;
        far.objects[0].bbox = {30, 30, 40, 40}; // no overlap with the cup
        far.relations.clear();
        GraphRecipe recipe{LayerSource::Predicted, LayerSource::Oracle, LayerSource::Oracle};
        auto g = build_graph(recipe, oracle, &far, f.vocab, 0.5);
        CHECK(g.node(0).attr_dists.empty());
    }

    SECTION("missing detections for a predicted recipe is an ingest error") {
        GraphRecipe recipe{LayerSource::Predicted, LayerSource::Oracle, LayerSource::Oracle};
        CHECK_THROWS_AS(build_graph(recipe, oracle, nullptr, f.vocab, 0.5), IngestError);
    }
}

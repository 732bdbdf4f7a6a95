#include "ath/metrics.hpp"

#include "ath/synthetic.hpp"
#include "helpers.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace ath;

namespace {

Answer make_answer(const std::string& value) {
    Answer a;
    a.value = value;
    return a;
}

QuestionRecord make_record(const std::string& gold) {
    QuestionRecord r;
    r.question_id = "q";
    r.gold_answer = gold;
    return r;
}

} // namespace

TEST_CASE("answer scoring is case-insensitive exact match") {
    CHECK(score_answer(make_answer("table"), make_record("table")));
    CHECK(score_answer(make_answer("Table"), make_record("table")));
    CHECK_FALSE(score_answer(make_answer("chair"), make_record("table")));
    CHECK_FALSE(score_answer(std::nullopt, make_record("table"))); // failures score incorrect
}

TEST_CASE("grounding score sums matched attention per category") {
    const auto vocab = test::make_vocab();
    std::vector<ObjectNode> nodes(2);
    nodes[0].id = "a";
    nodes[0].bbox = {0, 0, 10, 10};
    nodes[0].class_dist = test::object_one_hot(vocab, "cup");
    nodes[1].id = "b";
    nodes[1].bbox = {50, 50, 60, 60};
    nodes[1].class_dist = test::object_one_hot(vocab, "table");
    SceneGraph graph("img", 100, 100, nodes, {});

    QuestionRecord record;
    record.inference_objects[0].push_back({"a", {0, 0, 10, 10}}); // Q matches node 0

    std::map<std::uint32_t, double> attention{{0, 0.5}, {1, 0.5}};

    auto scores = grounding_score(attention, record, graph);
    REQUIRE(scores[0]);
    CHECK(*scores[0] == Catch::Approx(50.0)); // only objA matches a Q object
    CHECK_FALSE(scores[1]);                   // no A annotations: excluded, not zero
    REQUIRE(scores[3]);
    CHECK(*scores[3] == Catch::Approx(50.0));

    // Attention entirely on matched objects scores 100.
    std::map<std::uint32_t, double> focused{{0, 1.0}};
    auto perfect = grounding_score(focused, record, graph);
    CHECK(*perfect[0] == Catch::Approx(100.0));

    // Attention entirely on unmatched objects scores 0.
    std::map<std::uint32_t, double> astray{{1, 1.0}};
    auto zero = grounding_score(astray, record, graph);
    CHECK(*zero[0] == Catch::Approx(0.0));
}

TEST_CASE("grounding is invariant to zero-attention objects and monotone in the threshold") {
    const auto vocab = test::make_vocab();
    std::vector<ObjectNode> nodes(2);
    nodes[0].id = "a";
    nodes[0].bbox = {0, 0, 10, 10};
    nodes[0].class_dist = test::object_one_hot(vocab, "cup");
    nodes[1].id = "b";
    nodes[1].bbox = {0, 0, 10, 6}; // IoU 0.6 with the annotation
    nodes[1].class_dist = test::object_one_hot(vocab, "table");
    SceneGraph graph("img", 100, 100, nodes, {});

    QuestionRecord record;
    record.inference_objects[0].push_back({"", {0, 0, 10, 10}});

    std::map<std::uint32_t, double> attention{{1, 1.0}};
    std::map<std::uint32_t, double> with_zero{{0, 0.0}, {1, 1.0}};
    CHECK(*grounding_score(attention, record, graph, 0.5)[0] ==
          *grounding_score(with_zero, record, graph, 0.5)[0]);

    // Lowering the IoU threshold can only grow the matched set.
    const double strict = *grounding_score(attention, record, graph, 0.7)[0];
    const double loose = *grounding_score(attention, record, graph, 0.5)[0];
    CHECK(strict == Catch::Approx(0.0));
    CHECK(loose == Catch::Approx(100.0));
    CHECK(loose >= strict);
}

TEST_CASE("detection coverage counts matched inference objects") {
    const auto vocab = test::make_vocab();
    std::vector<ObjectNode> nodes(1);
    nodes[0].id = "a";
    nodes[0].bbox = {0, 0, 10, 10};
    nodes[0].class_dist = test::object_one_hot(vocab, "cup");
    SceneGraph graph("img", 100, 100, nodes, {});

    QuestionRecord covered;
    covered.image_id = "img";
    covered.inference_objects[0].push_back({"", {0, 0, 10, 10}});
    QuestionRecord missed;
    missed.image_id = "img";
    missed.inference_objects[0].push_back({"", {50, 50, 60, 60}});

    auto lookup = [&](const std::string&) { return &graph; };
    auto all = detection_coverage({covered}, lookup);
    CHECK(all.percent(0) == Catch::Approx(100.0));
    auto none = detection_coverage({missed}, lookup);
    CHECK(none.percent(0) == Catch::Approx(0.0));
    auto half = detection_coverage({covered, missed}, lookup);
    CHECK(half.percent(0) == Catch::Approx(50.0));
    CHECK(half.matched[3] == 1);
    CHECK(half.total[3] == 2);
}

TEST_CASE("aggregates recompute exactly from per-question flags") {
    EvalResult result;
    auto add = [&](bool correct, QuestionRecord::Type type,
                   std::optional<FailureKind> failure = std::nullopt) {
        QuestionEval q;
        q.correct = correct;
        q.type = type;
        q.failure = failure;
        result.per_question.push_back(q);
    };
    add(true, QuestionRecord::Type::Binary);
    add(false, QuestionRecord::Type::Binary, FailureKind::NoViablePath);
    add(true, QuestionRecord::Type::Open);
    add(true, QuestionRecord::Type::Open);
    add(false, QuestionRecord::Type::Open, FailureKind::UnsupportedOperation);

    auto agg = result.aggregate();
    CHECK(agg.total == 5);
    CHECK(agg.correct == 3);
    CHECK(agg.binary_total == 2);
    CHECK(agg.binary_correct == 1);
    CHECK(agg.open_total == 3);
    CHECK(agg.open_correct == 2);
    CHECK(agg.correct == agg.binary_correct + agg.open_correct);
    CHECK(agg.total == agg.binary_total + agg.open_total);
    CHECK(agg.overall_accuracy() == Catch::Approx(60.0));
    CHECK(agg.failure_counts.at("NoViablePath") == 1);
    CHECK(agg.failure_counts.at("UnsupportedOperation") == 1);
}

TEST_CASE("clean synthetic evaluation reaches 100 on the all-gold recipe") {
    SyntheticParams params;
    params.seed = 5;
    params.graph_count = 12;
    params.questions_per_graph = 3;
    params.noise = 0.0;
    auto data = dataset_from_synthetic(generate_synthetic(params));

    EvalOptions options;
    auto output = run_evaluation(data, options);
    auto agg = output.result.aggregate();
    CHECK(agg.total == 36);
    CHECK(agg.overall_accuracy() == 100.0);
    CHECK(agg.failure_counts.empty());
    CHECK(output.grounding.average[3] == Catch::Approx(100.0));
    CHECK(output.coverage.percent(3) == Catch::Approx(100.0));

    // Evaluation is pure per question: worker count cannot change results.
    options.parallelism = 4;
    auto parallel = run_evaluation(data, options);
    REQUIRE(parallel.result.per_question.size() == output.result.per_question.size());
    for (std::size_t i = 0; i < parallel.result.per_question.size(); ++i) {
        CHECK(parallel.result.per_question[i].correct == output.result.per_question[i].correct);
        CHECK(parallel.result.per_question[i].predicted == output.result.per_question[i].predicted);
    }
}

TEST_CASE("processed-gold op-seqs never beat gold on the same graphs") {
    SyntheticParams params;
    params.seed = 11;
    params.graph_count = 25;
    params.questions_per_graph = 3;
    params.noise = 0.3;
    auto data = dataset_from_synthetic(generate_synthetic(params));

    EvalOptions gold;
    EvalOptions processed;
    processed.source = OpSeqSource::Processed;
    const double gold_acc = run_evaluation(data, gold).result.aggregate().overall_accuracy();
    const double processed_acc =
        run_evaluation(data, processed).result.aggregate().overall_accuracy();
    CHECK(processed_acc <= gold_acc);
}

TEST_CASE("ablation matrix produces one deterministic row per recipe") {
    SyntheticParams params;
    params.seed = 3;
    params.graph_count = 8;
    params.questions_per_graph = 2;
    params.noise = 0.25;
    auto data = dataset_from_synthetic(generate_synthetic(params));

    auto rows = default_ablation_rows();
    REQUIRE(rows.size() == 10);
    EvalOptions base;
    auto results = ablation_matrix(data, rows, base);
    REQUIRE(results.size() == 10);
    CHECK(results.back().row.name == "gold/oracle");
    CHECK(results.back().aggregates.overall_accuracy() == 100.0);

    auto again = ablation_matrix(data, rows, base);
    for (std::size_t i = 0; i < results.size(); ++i) {
        CHECK(results[i].aggregates.overall_accuracy() ==
              again[i].aggregates.overall_accuracy());
        CHECK(results[i].grounding.average[3] == again[i].grounding.average[3]);
    }
}

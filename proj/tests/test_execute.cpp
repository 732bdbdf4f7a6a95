#include "ath/execute.hpp"

#include "helpers.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace ath;

namespace {

struct Fixture {
    Vocabulary vocab = test::make_vocab();
    OperationRegistry registry = OperationRegistry::standard(vocab);
    VerifyThreshold tau{0.5, 0.0, ""};

    // One red wooden cup on a table, one blue cup on a plate, a stray lamp.
    SceneGraph planted() const {
        auto node = [&](std::string id, const std::string& cls, BoundingBox box,
                        const std::string& color, const std::string& material) {
            ObjectNode n;
            n.id = std::move(id);
            n.bbox = box;
            n.class_dist = test::object_one_hot(vocab, cls);
            n.attr_dists[0] = CategoricalDist::one_hot(VocabSlice::attributes(0),
                                                       *vocab.member_index(0, color));
            n.attr_dists[1] = CategoricalDist::one_hot(VocabSlice::attributes(1),
                                                       *vocab.member_index(1, material));
            return n;
        };
        auto rel = [&](const std::string& src, const std::string& dst, const std::string& name) {
            return RelationEdge{src, dst,
                                CategoricalDist::one_hot(VocabSlice::relationships(),
                                                         *vocab.relationship_index(name))};
        };
        std::vector<ObjectNode> nodes{
            node("o0", "cup", {0, 0, 10, 10}, "red", "wood"),
            node("o1", "table", {0, 8, 60, 60}, "white", "wood"),
            node("o2", "cup", {70, 0, 80, 10}, "blue", "glass"),
            node("o3", "plate", {65, 8, 90, 20}, "white", "metal"),
            node("o4", "lamp", {90, 90, 99, 99}, "green", "metal"),
        };
        std::vector<RelationEdge> edges{rel("o0", "o1", "on"), rel("o2", "o3", "on")};
        return SceneGraph("img", 100, 100, std::move(nodes), std::move(edges));
    }

    OpSeq seq(const std::string& text) const { return parse_opseq(text, registry); }
};

} // namespace

TEST_CASE("query answers come straight from the graph") {
    Fixture f;
    auto g = f.planted();

    auto a = execute(f.seq("select: cup\nfilter color: red [0]\nrelate: _,on,s [1]\nquery: name [2]"),
                     g, f.tau, f.vocab, f.registry);
    CHECK(a.kind == Answer::Kind::Open);
    CHECK(a.value == "table");
    REQUIRE(a.paths.size() == 1);
    CHECK(a.paths[0].nodes == std::vector<std::uint32_t>{0, 0, 1});

    a = execute(f.seq("select: cup\nfilter color: blue [0]\nrelate: _,on,s [1]\nquery: name [2]"),
                g, f.tau, f.vocab, f.registry);
    CHECK(a.value == "plate");

    a = execute(f.seq("select: cup\nfilter color: red [0]\nquery: material [1]"), g, f.tau, f.vocab,
                f.registry);
    CHECK(a.value == "wood");
}

TEST_CASE("exist and verify threshold the geometric mean") {
    Fixture f;
    auto g = f.planted();

    auto yes = execute(f.seq("select: lamp\nexist: ? [0]"), g, f.tau, f.vocab, f.registry);
    CHECK(yes.kind == Answer::Kind::Binary);
    CHECK(yes.value == "yes");
    REQUIRE(yes.decision_score);
    CHECK(*yes.decision_score == Catch::Approx(1.0));

    auto no = execute(f.seq("select: dog\nexist: ? [0]"), g, f.tau, f.vocab, f.registry);
    CHECK(no.value == "no");
    CHECK(*no.decision_score == 0.0);

    auto verify = execute(f.seq("select: cup\nfilter color: red [0]\nverify material: wood [1]"), g,
                          f.tau, f.vocab, f.registry);
    CHECK(verify.value == "yes");

    auto verify_no = execute(f.seq("select: lamp\nverify color: red [0]"), g, f.tau, f.vocab,
                             f.registry);
    CHECK(verify_no.value == "no");
}

TEST_CASE("logical combiners work over branch verdicts") {
    Fixture f;
    auto g = f.planted();

    auto both = execute(
        f.seq("select: cup\nexist: ? [0]\nselect: lamp\nexist: ? [2]\nand: [1,3]"), g, f.tau,
        f.vocab, f.registry);
    CHECK(both.kind == Answer::Kind::Binary);
    CHECK(both.value == "yes");
    CHECK(both.paths.size() == 2);

    auto mixed = execute(
        f.seq("select: cup\nexist: ? [0]\nselect: dog\nexist: ? [2]\nand: [1,3]"), g, f.tau,
        f.vocab, f.registry);
    CHECK(mixed.value == "no");

    auto either = execute(
        f.seq("select: cup\nexist: ? [0]\nselect: dog\nexist: ? [2]\nor: [1,3]"), g, f.tau,
        f.vocab, f.registry);
    CHECK(either.value == "yes");
    REQUIRE(either.paths.size() == 1); // the dog branch found no path
}

TEST_CASE("choose picks the higher-probability candidate") {
    Fixture f;
    auto g = f.planted();

    auto a = execute(f.seq("select: cup\nfilter color: red [0]\nchoose material: wood|metal [1]"),
                     g, f.tau, f.vocab, f.registry);
    CHECK(a.kind == Answer::Kind::Open);
    CHECK(a.value == "wood");

    a = execute(f.seq("select: lamp\nchoose color: red|green [0]"), g, f.tau, f.vocab, f.registry);
    CHECK(a.value == "green");
}

TEST_CASE("same and different compare the two final nodes") {
    Fixture f;
    auto g = f.planted();

    auto same = execute(f.seq("select: table\nselect: lamp\nsame material: [0,1]"), g, f.tau,
                        f.vocab, f.registry);
    CHECK(same.value == "no"); // wood vs metal

    auto diff = execute(f.seq("select: table\nselect: lamp\ndifferent material: [0,1]"), g, f.tau,
                        f.vocab, f.registry);
    CHECK(diff.value == "yes");

    auto same_color = execute(f.seq("select: table\nselect: plate\nsame color: [0,1]"), g, f.tau,
                              f.vocab, f.registry);
    CHECK(same_color.value == "yes"); // both white
}

TEST_CASE("common names the shared attribute category") {
    Fixture f;
    auto g = f.planted();
    auto a = execute(f.seq("select: cup\nfilter color: red [0]\nselect: table\ncommon: [1,2]"), g,
                     f.tau, f.vocab, f.registry);
    CHECK(a.kind == Answer::Kind::Open);
    CHECK(a.value == "material"); // both wood; colors differ
}

TEST_CASE("open questions with no viable path fail, binary map to no") {
    Fixture f;
    auto g = f.planted();

    auto outcome = execute_question(f.seq("select: dog\nquery: name [0]"), g, f.tau, f.vocab,
                                    f.registry);
    CHECK_FALSE(outcome.answer);
    REQUIRE(outcome.failure);
    CHECK(*outcome.failure == FailureKind::NoViablePath);

    outcome = execute_question(f.seq("select: dog\nexist: ? [0]"), g, f.tau, f.vocab, f.registry);
    REQUIRE(outcome.answer);
    CHECK(outcome.answer->value == "no");
}

TEST_CASE("unmapped and structurally invalid sequences are classified failures") {
    Fixture f;
    auto g = f.planted();

    // Disabled registry entry.
    auto entries = f.registry.entries();
    for (auto& e : entries)
        if (e.full == "common") e.enabled = false;
    OperationRegistry crippled(entries);
    auto outcome = execute_question(
        f.seq("select: cup\nselect: table\ncommon: [0,1]"), g, f.tau, f.vocab, crippled);
    REQUIRE(outcome.failure);
    CHECK(*outcome.failure == FailureKind::UnsupportedOperation);

    // No answer-producing final operation.
    outcome = execute_question(f.seq("select: cup\nfilter color: red [0]"), g, f.tau, f.vocab,
                               f.registry);
    REQUIRE(outcome.failure);
    CHECK(*outcome.failure == FailureKind::UnsupportedStructure);

    // Unknown vocabulary term inside an argument.
    outcome = execute_question(f.seq("select: cup\nverify color: purple [0]"), g, f.tau, f.vocab,
                               f.registry);
    REQUIRE(outcome.failure);
    CHECK(*outcome.failure == FailureKind::UnknownVocabularyTerm);
}

TEST_CASE("trace records steps, attention and notes") {
    Fixture f;
    auto g = f.planted();
    Trace trace;
    auto a = execute(f.seq("select: cup\nfilter color: red [0]\nrelate: _,on,s [1]\nquery: name [2]"),
                     g, f.tau, f.vocab, f.registry, &trace);
    CHECK(trace.answer == "table");
    REQUIRE(trace.branches.size() == 1);
    REQUIRE(trace.branches[0].steps.size() == 3);
    CHECK(trace.branches[0].steps[0].chosen == "o0");
    CHECK(trace.branches[0].steps[2].chosen == "o1");
    CHECK(trace.attention.at("o0") == Catch::Approx(2.0 / 3.0));
    CHECK(trace.attention.at("o1") == Catch::Approx(1.0 / 3.0));

    // Missing side marker gets noted.
    Trace noted;
    execute(f.seq("select: cup\nfilter color: red [0]\nrelate: _,on [1]\nquery: name [2]"), g,
            f.tau, f.vocab, f.registry, &noted);
    REQUIRE_FALSE(noted.notes.empty());
}

TEST_CASE("answer provenance: open answers are graph vocabulary content") {
    Fixture f;
    auto g = f.planted();
    auto a = execute(f.seq("select: cup\nfilter color: red [0]\nrelate: _,on,s [1]\nquery: name [2]"),
                     g, f.tau, f.vocab, f.registry);
    REQUIRE(a.paths.size() == 1);
    const auto& final_node = g.node(a.paths[0].nodes.back());
    CHECK(top_class(final_node.class_dist, f.vocab).first == a.value);
}

#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "temprompt/evaluator.hpp"
#include "test_support.hpp"

using namespace temprompt;

namespace {

const RelationSchema matres = builtin_schema("matres");

std::vector<std::string> read_lines(const std::filesystem::path &p) {
    std::ifstream in(p);
    std::vector<std::string> lines;
    for (std::string line; std::getline(in, line);) lines.push_back(line);
    return lines;
}

}  // namespace

TEST(Metrics, HandConfusionGivesOneHalf) {
    // A, A, B, C against A, B, B, B.
    const std::size_t gold[] = {0, 0, 1, 2};
    const std::size_t pred[] = {0, 1, 1, 1};
    auto r = compute_metrics(matres, gold, pred, MetricMode::strict_micro);
    EXPECT_DOUBLE_EQ(r.precision, 0.5);
    EXPECT_DOUBLE_EQ(r.recall, 0.5);
    EXPECT_DOUBLE_EQ(r.f1, 0.5);
    EXPECT_EQ(r.confusion.counts[0][1], 1u);
    EXPECT_EQ(r.confusion.counts[2][1], 1u);
    EXPECT_EQ(r.confusion.total(), 4u);
    EXPECT_DOUBLE_EQ(*r.per_label_f1.at("BEFORE"), 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(*r.per_label_f1.at("AFTER"), 0.5);
    EXPECT_DOUBLE_EQ(*r.per_label_f1.at("EQUAL"), 0.0);
    EXPECT_FALSE(r.per_label_f1.at("VAGUE").has_value());
}

TEST(Metrics, StrictMicroPrecisionRecallF1AreEqual) {
    Rng rng(8);
    for (int trial = 0; trial < 200; ++trial) {
        const auto n = 1 + rng.index(40);
        std::vector<std::size_t> gold(n), pred(n);
        for (std::size_t i = 0; i < n; ++i) {
            gold[i] = rng.index(4);
            pred[i] = rng.index(4);
        }
        auto r = compute_metrics(matres, gold, pred, MetricMode::strict_micro);
        EXPECT_EQ(r.precision, r.recall);
        EXPECT_EQ(r.precision, r.f1);
        std::size_t tp = 0;
        for (std::size_t l = 0; l < 4; ++l) tp += r.confusion.counts[l][l];
        EXPECT_DOUBLE_EQ(r.f1, static_cast<double>(tp) / static_cast<double>(n));
    }
}

TEST(Metrics, VagueExcludedDropsVagueFromDenominators) {
    // VAGUE = 3. Two of three non-VAGUE golds recovered; one prediction abstains as VAGUE.
    const std::size_t gold[] = {0, 1, 2, 3, 3};
    const std::size_t pred[] = {0, 1, 3, 3, 0};
    auto r = compute_metrics(matres, gold, pred, MetricMode::vague_excluded);
    EXPECT_DOUBLE_EQ(r.precision, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(r.recall, 2.0 / 3.0);
    EXPECT_DOUBLE_EQ(r.f1, 2.0 / 3.0);
    auto strict = compute_metrics(matres, gold, pred, MetricMode::strict_micro);
    EXPECT_DOUBLE_EQ(strict.f1, 3.0 / 5.0);
}

TEST(Metrics, PerfectPredictionsGiveOne) {
    const std::size_t gold[] = {0, 1, 1, 0};
    auto r = compute_metrics(matres, gold, gold, MetricMode::strict_micro);
    EXPECT_EQ(r.f1, 1.0);
    EXPECT_EQ(*r.per_label_f1.at("BEFORE"), 1.0);
    EXPECT_FALSE(r.per_label_f1.at("EQUAL").has_value());
}

TEST(Metrics, LengthMismatchRejected) {
    const std::size_t gold[] = {0, 1};
    const std::size_t pred[] = {0};
    EXPECT_THROW((void)compute_metrics(matres, gold, pred, MetricMode::strict_micro), Error);
}

TEST(Metrics, ReportJsonShape) {
    const std::size_t gold[] = {0, 1};
    auto r = compute_metrics(matres, gold, gold, MetricMode::strict_micro);
    auto j = to_json(r);
    EXPECT_EQ(j["mode"], "strict_micro");
    EXPECT_TRUE(j["per_label_f1"]["VAGUE"].is_null());
    EXPECT_TRUE(j.contains("buckets"));
    EXPECT_EQ(parse_metric_mode("strict"), MetricMode::strict_micro);
    EXPECT_THROW((void)parse_metric_mode("macro"), Error);
}

TEST(Buckets, PartitionOnRandomCorpora) {
    Rng rng(12);
    for (int trial = 0; trial < 1000; ++trial) {
        auto train_set = synthetic_corpus({1 + rng.index(12), rng.next(), "tr"});
        auto test = synthetic_corpus({1 + rng.index(30), rng.next(), "te", Split::test});
        auto part = bucket_split(test, train_set);
        std::vector<int> hits(test.size(), 0);
        for (const auto *b : {&part.both_unseen, &part.one_unseen, &part.both_seen}) for (auto i : *b) ++hits[i];
        for (int h : hits) ASSERT_EQ(h, 1);
    }
}

TEST(Buckets, DefinitionsByTriggerSurfaceForm) {
    auto mk = [](const std::string &id, const std::string &a, const std::string &b) {
        EventPairInstance inst;
        inst.instance_id = id;
        inst.tokens = {a, "then", b};
        inst.trigger1 = {0, 1};
        inst.trigger2 = {2, 3};
        inst.label = "BEFORE";
        return inst;
    };
    Corpus train_set{"matres", Split::train, {mk("t", "Opened", "paid")}};
    Corpus test{"matres", Split::test, {mk("a", "left", "moved"), mk("b", "opened", "moved"), mk("c", "paid", "OPENED")}};
    auto part = bucket_split(test, train_set);
    EXPECT_EQ(part.both_unseen, (std::vector<std::size_t>{0}));
    EXPECT_EQ(part.one_unseen, (std::vector<std::size_t>{1}));
    EXPECT_EQ(part.both_seen, (std::vector<std::size_t>{2}));
    const std::size_t gold[] = {0, 0, 0};
    const std::size_t pred[] = {0, 1, 0};
    auto rep = bucket_report(part, gold, pred);
    EXPECT_EQ(rep.one_unseen.count, 1u);
    EXPECT_EQ(rep.one_unseen.f1, 0.0);
    EXPECT_EQ(rep.both_seen.f1, 1.0);
}

TEST(Evaluate, UsesArgmaxOverVerbalizedTokens) {
    auto model = fixtures::synthetic_model(matres);
    fixtures::set_fixed_logits(model, {{"before", 0.5}, {"after", 3.0}, {"simultaneously", 0.0}, {"vaguely", 0.0}});
    auto bound = bind_to_backend(matres, model);
    auto corpus = synthetic_corpus({30, 4});
    auto pred = predict_labels(model, fixtures::prompt5(), corpus, bound);
    for (auto p : pred) EXPECT_EQ(p, 1u);
    auto r = evaluate(model, fixtures::prompt5(), corpus, bound, MetricMode::strict_micro);
    EXPECT_DOUBLE_EQ(r.f1, static_cast<double>(label_counts(corpus, matres)[1]) / 30.0);
}

TEST(Export, OneRowPerInstanceWithHiddenVector) {
    auto model = fixtures::synthetic_model(matres);
    auto corpus = synthetic_corpus({7, 5});
    auto path = fixtures::temp_dir("export") / "reprs.tsv";
    EXPECT_EQ(export_representations(model, fixtures::prompt5(), corpus, matres, path.string()), 7u);
    auto lines = read_lines(path);
    ASSERT_EQ(lines.size(), 8u);
    EXPECT_EQ(lines[0].rfind("instance_id\tlabel\th0\t", 0), 0u);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        std::istringstream row(lines[i]);
        std::string id, label;
        row >> id >> label;
        EXPECT_EQ(id, corpus.instances[i - 1].instance_id);
        EXPECT_EQ(label, corpus.instances[i - 1].label);
        std::size_t dims = 0;
        for (double x; row >> x;) ++dims;
        EXPECT_EQ(dims, model.hidden_dim());
    }
}

TEST(Graph, AllOrderedPairsAndConsistentInCanonicalMode) {
    auto model = fixtures::synthetic_model(matres);
    auto bound = bind_to_backend(matres, model);
    GraphInput g{"g", {"crew", "opened", "then", "paid", "and", "moved", "."}, {{"e1", {1, 2}}, {"e2", {3, 4}}, {"e3", {5, 6}}}};
    auto out = predict_graph(model, fixtures::prompt5(), g, bound);
    EXPECT_EQ(out.edges.size(), 6u);
    std::set<std::pair<std::string, std::string>> pairs;
    for (const auto &e : out.edges) pairs.insert({e.from, e.to});
    EXPECT_EQ(pairs.size(), 6u);
    EXPECT_TRUE(out.notes.empty());
    EXPECT_TRUE(find_inconsistencies(out.edges, matres).empty());
}

TEST(Graph, FixedLogitsExposeAsQueriedInconsistency) {
    // Every query answers BEFORE; asking both directions literally contradicts itself.
    auto model = fixtures::synthetic_model(matres);
    fixtures::set_fixed_logits(model, {{"before", 4.0}});
    auto bound = bind_to_backend(matres, model);
    GraphInput g{"pcb", fixtures::selection_creation_instance().tokens, {{"sel", {1, 2}}, {"cre", {4, 5}}}};
    auto literal = predict_graph(model, fixtures::prompt5(), g, bound, PairOrdering::as_queried);
    ASSERT_EQ(literal.edges.size(), 2u);
    EXPECT_EQ(literal.edges[0].relation, "BEFORE");
    EXPECT_EQ(literal.edges[1].relation, "BEFORE");
    ASSERT_EQ(literal.notes.size(), 1u);
    EXPECT_NE(literal.notes[0].find("expected AFTER"), std::string::npos);

    auto canonical = predict_graph(model, fixtures::prompt5(), g, bound);
    EXPECT_EQ(canonical.edges[1].relation, "AFTER");
    EXPECT_TRUE(canonical.notes.empty());
}

TEST(Graph, FewerThanTwoEventsRejected) {
    auto model = fixtures::synthetic_model(matres);
    auto bound = bind_to_backend(matres, model);
    GraphInput g{"g", {"crew", "opened"}, {{"e1", {1, 2}}}};
    EXPECT_THROW((void)predict_graph(model, fixtures::prompt5(), g, bound), Error);
}

TEST(Graph, InputJsonParsing) {
    auto g = graph_input_from_json(nlohmann::json::parse(
        R"({"id": "x", "tokens": ["a", "b", "c"], "events": [{"id": "e1", "span": [0, 1]}, {"id": "e2", "span": [2, 3]}]})"));
    EXPECT_EQ(g.events.size(), 2u);
    EXPECT_EQ(g.events[1].span, (Span{2, 3}));
    EXPECT_THROW((void)graph_input_from_json(nlohmann::json::parse(R"({"tokens": []})")), LoadError);
}

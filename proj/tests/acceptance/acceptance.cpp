// Acceptance gate: one PASS / FAIL / SKIP line per criterion. Exit status is nonzero when
// any criterion fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "temprompt/evaluator.hpp"
#include "temprompt/mock_backend.hpp"
#include "temprompt/objectives.hpp"
#include "temprompt/synthetic.hpp"
#include "temprompt/template_search.hpp"
#include "temprompt/templates.hpp"
#include "temprompt/trainer.hpp"

using namespace temprompt;
namespace fs = std::filesystem;

namespace {

enum class Status { pass, fail, skip };

struct Outcome {
    Status status;
    std::string detail;
};

Outcome pass(std::string d) { return {Status::pass, std::move(d)}; }
Outcome fail(std::string d) { return {Status::fail, std::move(d)}; }
Outcome skip(std::string d) { return {Status::skip, std::move(d)}; }

std::string fmt(double x, int digits = 6) {
    std::ostringstream s;
    s.precision(digits);
    s << x;
    return s.str();
}

const RelationSchema &matres() {
    static const RelationSchema s = builtin_schema("matres");
    return s;
}

Template prompt5() { return parse_manual_template("{sentence} Event {event1} happened {mask} to {event2} ."); }

MockMaskedLM synthetic_model(MockModelConfig config = {}) {
    Vocabulary v;
    v.add_all(synthetic_vocabulary());
    v.add_all(template_vocabulary({prompt5()}, matres()));
    for (const auto &p : default_phrase_table()) v.add_all(split_words(p));
    return MockMaskedLM(v, config);
}

// Independent softmax in long double.
std::vector<double> reference_softmax(const std::vector<double> &z) {
    long double m = *std::max_element(z.begin(), z.end()), s = 0;
    for (double x : z) s += std::exp(static_cast<long double>(x) - m);
    std::vector<double> p;
    for (double x : z) p.push_back(static_cast<double>(std::exp(static_cast<long double>(x) - m) / s));
    return p;
}

// ---------------------------------------------------------------------------

Outcome permutation_completeness() {
    std::array<Slot, 4> p{Slot::sentence, Slot::trigger1, Slot::trigger2, Slot::label};
    std::sort(p.begin(), p.end());
    std::set<std::array<Slot, 4>> brute;
    do {
        if (std::find(p.begin(), p.end(), Slot::trigger1) < std::find(p.begin(), p.end(), Slot::trigger2)) brute.insert(p);
    } while (std::next_permutation(p.begin(), p.end()));
    const auto scaffolds = enumerate_scaffolds();
    std::set<std::array<Slot, 4>> got;
    for (const auto &s : scaffolds) got.insert(s.order);
    if (scaffolds.size() != 12 || got.size() != 12 || got != brute) {
        return fail(std::to_string(scaffolds.size()) + " scaffolds, " + std::to_string(got.size()) + " distinct");
    }
    return pass("12 distinct scaffolds equal the brute-force enumeration");
}

Outcome relation_distribution_oracle() {
    auto model = synthetic_model();
    const std::vector<std::pair<std::string, double>> fixed{
        {"before", 2.0}, {"after", 1.0}, {"simultaneously", 0.0}, {"vaguely", -1.0}};
    auto params = model.parameters();
    const auto d = model.hidden_dim(), v = model.vocab_size();
    const auto out_off = model.config().feature_buckets * d, bias_off = out_off + v * d;
    std::fill(params.begin() + static_cast<long>(out_off), params.end(), 0.0);
    for (const auto &[w, z] : fixed) params[bias_off + static_cast<std::size_t>(*model.vocabulary().find(w))] = z;
    auto bound = bind_to_backend(matres(), model);
    auto inst = synthetic_corpus({1, 1}).instances[0];
    auto dist = relation_distribution(model, instantiate(model, prompt5(), inst, matres(), MaskMode::rel_cls), bound);
    auto expected = reference_softmax({2.0, 1.0, 0.0, -1.0});
    double worst = 0.0;
    for (std::size_t i = 0; i < 4; ++i) worst = std::max(worst, std::abs(dist[i] - expected[i]));
    const double total = std::accumulate(dist.begin(), dist.end(), 0.0);
    if (worst > 1e-9 || std::abs(total - 1.0) > 1e-9) return fail("max error " + fmt(worst) + ", sum " + fmt(total, 17));
    return pass("max error " + fmt(worst) + ", |sum-1| " + fmt(std::abs(total - 1.0)));
}

Outcome tre_ter_oracles() {
    std::vector<std::string> bad;
    {
        const std::vector<std::vector<double>> d{{0.25, 0.25, 0.25, 0.25}};
        const std::size_t g[] = {2};
        if (std::abs(loss_tre(d, g).mean - std::log(4.0)) > 1e-9) bad.push_back("tre uniform-4");
    }
    {
        const std::vector<std::vector<double>> d{{0.0, 1.0}};
        const std::size_t g[] = {1};
        if (loss_tre(d, g).mean != 0.0) bad.push_back("tre certain");
    }
    {
        const std::vector<std::vector<double>> d{reference_softmax({2.0, 1.0, 0.0, -1.0})};
        const std::size_t g[] = {0};
        if (std::abs(loss_tre(d, g).mean - 0.4401896985611953) > 1e-9) bad.push_back("tre softmax(2,1,0,-1)");
    }
    const TokenId g0[] = {0};
    if (loss_ter({{5.0}}, g0, {{-2.0}}, g0).value != 0.0) bad.push_back("ter certain");
    const std::vector<std::vector<double>> flat{std::vector<double>(7, 0.0)};
    if (std::abs(loss_ter(flat, g0, flat, g0).value - std::log(7.0)) > 1e-9) bad.push_back("ter uniform");
    if (std::abs(loss_ter({{0.0, 0.0}}, g0, {{0.0, 0.0, 0.0, 0.0}}, g0).value - 1.0397207708399179) > 1e-9) {
        bad.push_back("ter asymmetric");
    }
    if (!bad.empty()) {
        std::string s;
        for (const auto &b : bad) s += b + " ";
        return fail("mismatch: " + s);
    }
    return pass("tre: ln4, 0, 0.44019; ter: 0, ln V, 1.03972 within 1e-9");
}

Outcome contrastive_oracles() {
    const std::vector<std::vector<double>> same(4, std::vector<double>{0.3, -1.2, 0.7});
    const std::size_t l4[] = {0, 0, 1, 1};
    const double a = loss_con(same, l4, 0.2).value;
    const std::vector<std::vector<double>> h3{{1.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
    const std::size_t l3[] = {0, 0, 1};
    const double b = loss_con(h3, l3, 0.2).value;
    const std::size_t unique[] = {0, 1, 2};
    const double c = loss_con(h3, unique, 0.2).value;
    if (std::abs(a - 4.0 * std::log(3.0)) > 1e-9) return fail("identical-vector case " + fmt(a, 12));
    if (std::abs(b - 0.01343) > 1e-6) return fail("3-sample case " + fmt(b, 12));
    if (c != 0.0) return fail("all-unique labels gave " + fmt(c));
    Rng rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        const auto n = 2 + rng.index(10), d = 1 + rng.index(5);
        std::vector<std::vector<double>> h(n, std::vector<double>(d));
        std::vector<std::size_t> labels(n), relabeled(n);
        const std::size_t perm[] = {3, 1, 0, 2};
        for (std::size_t i = 0; i < n; ++i) {
            labels[i] = rng.index(4);
            relabeled[i] = perm[labels[i]];
            for (auto &x : h[i]) x = normal_from_hash(rng.next());
        }
        if (std::abs(loss_con(h, labels, 0.2).value - loss_con(h, relabeled, 0.2).value) > 1e-9) {
            return fail("label permutation changed the loss");
        }
    }
    return pass("4 ln 3, " + fmt(b, 7) + ", 0, permutation invariant over 200 batches");
}

Outcome total_composition() {
    Rng rng(5);
    for (int i = 0; i < 100; ++i) {
        LossWeights w{3.0 * unit_from_hash(rng.next()), 3.0 * unit_from_hash(rng.next()), 0.2};
        const double tre = 10.0 * unit_from_hash(rng.next());
        const double ter = 10.0 * unit_from_hash(rng.next());
        const double con = 10.0 * unit_from_hash(rng.next());
        if (loss_total(tre, ter, con, w) - (tre + w.alpha * ter + w.beta * con) != 0.0) {
            return fail("nonzero residual on triple " + std::to_string(i));
        }
    }
    return pass("residual exactly 0 on 100 random triples");
}

Outcome gradient_check() {
    auto model = synthetic_model();
    auto bound = bind_to_backend(matres(), model);
    auto batch = synthetic_corpus({4, 3}).instances;
    TrainConfig config;  // TER + contrastive, default weights
    model.zero_grad();
    (void)batch_objective(model, prompt5(), bound, batch, config, 9, true);
    std::vector<double> grad(model.gradients().begin(), model.gradients().end());
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < grad.size(); ++i) {
        if (std::abs(grad[i]) > 1e-8) active.push_back(i);
    }
    if (active.size() < 10) return fail("fewer than 10 parameters with gradient");
    Rng rng(7);
    auto params = model.parameters();
    double worst = 0.0;
    for (int k = 0; k < 10; ++k) {
        const auto i = active[rng.index(active.size())];
        const double h = 1e-5, saved = params[i];
        params[i] = saved + h;
        const double up = batch_objective(model, prompt5(), bound, batch, config, 9, false).l_total;
        params[i] = saved - h;
        const double down = batch_objective(model, prompt5(), bound, batch, config, 9, false).l_total;
        params[i] = saved;
        const double numeric = (up - down) / (2 * h);
        worst = std::max(worst, std::abs(numeric - grad[i]) / std::max({std::abs(numeric), std::abs(grad[i]), 1e-12}));
    }
    if (worst > 1e-4) return fail("max relative error " + fmt(worst));
    return pass("max relative error " + fmt(worst, 3) + " over 10 parameters");
}

Outcome end_to_end_learning() {
    auto model = synthetic_model();
    auto bound = bind_to_backend(matres(), model);
    const auto train_set = synthetic_corpus({80, 1, "tr"});
    const auto dev_set = synthetic_corpus({40, 2, "dv", Split::dev});
    const auto tmpl = prompt5();
    (void)train(model, tmpl, train_set, dev_set, bound, TrainConfig{});
    const double train_f1 = evaluate(model, tmpl, train_set, bound, MetricMode::strict_micro).f1;
    const double dev_f1 = evaluate(model, tmpl, dev_set, bound, MetricMode::strict_micro).f1;
    const auto d = "train F1 " + fmt(train_f1, 4) + ", dev F1 " + fmt(dev_f1, 4);
    return train_f1 >= 0.9 && dev_f1 >= 0.8 ? pass(d) : fail(d);
}

Outcome ablation_wiring() {
    auto model = synthetic_model();
    auto bound = bind_to_backend(matres(), model);
    const auto train_set = synthetic_corpus({80, 1, "tr"});
    const auto dev_set = synthetic_corpus({40, 2, "dv", Split::dev});
    const auto tmpl = prompt5();
    TrainConfig config;
    config.aux_mode = AuxMode::off;
    config.contrastive = false;
    auto history = train(model, tmpl, train_set, dev_set, bound, config).second;
    for (const auto &s : history.steps) {
        if (s.l_total != s.l_tre) return fail("step " + std::to_string(s.step) + ": l_total != l_tre");
    }

    // RAND: masked token never inside a trigger slot or the label slot.
    auto fresh = synthetic_model();
    const auto corpus = synthetic_corpus({50, 8});
    std::size_t checked = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        for (const auto &inst : corpus.instances) {
            auto rendered = render(tmpl, inst.tokens, inst.trigger1, inst.trigger2, matres().word_for(inst.label));
            auto enc = fresh.encode(rendered.words);
            std::set<std::size_t> forbidden;
            for (const Span slot : {rendered.trigger1_slot, rendered.trigger2_slot, rendered.label_slot}) {
                for (auto w = slot.start; w < slot.end; ++w) {
                    for (auto t = enc.word_spans[w].start; t < enc.word_spans[w].end; ++t) forbidden.insert(t);
                }
            }
            auto p = instantiate(fresh, tmpl, inst, matres(), MaskMode::rand, seed);
            if (p.mask_indices.size() != 1 || forbidden.count(p.mask_indices[0])) {
                return fail("RAND masked a protected position for " + inst.instance_id);
            }
            ++checked;
        }
    }
    return pass(std::to_string(history.steps.size()) + " ablated steps with l_total = l_tre; " +
                std::to_string(checked) + " RAND instantiations avoid slots");
}

Outcome template_pipeline_determinism() {
    const auto dir = fs::temp_directory_path() / "temprompt_acceptance_pool";
    fs::remove_all(dir);
    fs::create_directories(dir);
    std::vector<std::string> files;
    std::vector<Template> last;
    for (int run = 0; run < 2; ++run) {
        auto model = synthetic_model();
        auto bound = bind_to_backend(matres(), model);
        auto [small_train, small_dev] = sample_fewshot(synthetic_corpus({120, 6}), 8, 13);
        MockInfiller infiller;
        auto pool = generate_candidates(enumerate_scaffolds(), small_train, matres(), infiller, 3);
        TrainConfig config;
        config.epochs = 3;
        pool = score_templates(std::move(pool), small_train, small_dev, model, bound, config);
        auto top = select_topk(pool, 5);
        std::set<std::string> chosen;
        for (const auto &t : top) chosen.insert(render_pattern(t));
        std::vector<PoolEntry> entries;
        for (const auto &t : pool) entries.push_back({t, chosen.count(render_pattern(t)) > 0});
        const auto path = dir / ("pool" + std::to_string(run) + ".jsonl");
        save_pool(path.string(), entries);
        std::ifstream in(path);
        std::stringstream buf;
        buf << in.rdbuf();
        files.push_back(buf.str());
        last = pool;
    }
    if (files[0].empty() || files[0] != files[1]) return fail("pool files differ between runs");

    // Reference ordering: dev F1 desc, joint score desc, pool order.
    std::vector<std::size_t> idx(last.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (*last[a].dev_f1 != *last[b].dev_f1) return *last[a].dev_f1 > *last[b].dev_f1;
        if (last[a].joint_score != last[b].joint_score) return last[a].joint_score > last[b].joint_score;
        return a < b;
    });
    auto top = select_topk(last, last.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (render_pattern(top[i]) != render_pattern(last[idx[i]])) return fail("select_topk order differs at " + std::to_string(i));
    }
    return pass("identical pool files (" + std::to_string(last.size()) + " candidates); ordering matches reference sort");
}

Outcome metrics() {
    const std::size_t gold[] = {0, 0, 1, 2};
    const std::size_t pred[] = {0, 1, 1, 1};
    auto hand = compute_metrics(matres(), gold, pred, MetricMode::strict_micro);
    if (hand.precision != 0.5 || hand.recall != 0.5 || hand.f1 != 0.5) return fail("hand confusion gave " + fmt(hand.f1));
    Rng rng(10);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto n = 1 + rng.index(50);
        std::vector<std::size_t> g(n), p(n);
        for (std::size_t i = 0; i < n; ++i) {
            g[i] = rng.index(4);
            p[i] = rng.index(4);
        }
        auto r = compute_metrics(matres(), g, p, MetricMode::strict_micro);
        if (r.precision != r.recall || r.recall != r.f1) return fail("strict P/R/F1 differ on run " + std::to_string(trial));

        auto train_set = synthetic_corpus({1 + rng.index(15), rng.next(), "tr"});
        auto test = synthetic_corpus({1 + rng.index(40), rng.next(), "te", Split::test});
        auto part = bucket_split(test, train_set);
        std::vector<int> hits(test.size(), 0);
        for (const auto *b : {&part.both_unseen, &part.one_unseen, &part.both_seen}) {
            for (auto i : *b) ++hits.at(i);
        }
        if (std::any_of(hits.begin(), hits.end(), [](int h) { return h != 1; })) {
            return fail("bucket_split is not a partition on corpus " + std::to_string(trial));
        }
    }
    return pass("hand confusion 0.5; P=R=F1 on 1000 runs; buckets partition 1000 corpora");
}

Outcome data_loaders() {
    const char *root = std::getenv("TEMPROMPT_DATA_DIR");
    if (!root || !*root) {
        return skip("official MATRES / TB-Dense splits not present (set TEMPROMPT_DATA_DIR to a directory with "
                    "matres/ and tbdense/ {train,dev,test}.jsonl)");
    }
    struct Expected {
        const char *schema;
        std::array<std::size_t, 3> counts;
    };
    const Expected expected[] = {{"matres", {10888, 1852, 840}}, {"tbdense", {4032, 629, 1427}}};
    std::string detail;
    bool ok = true;
    for (const auto &e : expected) {
        const auto schema = builtin_schema(e.schema);
        const Split splits[] = {Split::train, Split::dev, Split::test};
        for (std::size_t i = 0; i < 3; ++i) {
            const auto path = fs::path(root) / e.schema / (to_string(splits[i]) + ".jsonl");
            if (!fs::exists(path)) return skip(path.string() + " missing");
            const auto n = load_corpus(path.string(), schema, splits[i]).size();
            ok = ok && n == e.counts[i];
            detail += std::string(e.schema) + "/" + to_string(splits[i]) + "=" + std::to_string(n) + " ";
        }
    }
    return ok ? pass(detail) : fail(detail + "(expected matres 10888/1852/840, tbdense 4032/629/1427)");
}

Outcome real_model_smoke() {
    return skip("requires a real masked-LM backend on an accelerator; this build ships only the mock backend");
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char *name;
        std::function<Outcome()> check;
        double budget_seconds;
    };
    const std::vector<Criterion> criteria{
        {1, "permutation completeness", permutation_completeness, 1},
        {2, "relation distribution oracle", relation_distribution_oracle, 1},
        {3, "classification and TER loss oracles", tre_ter_oracles, 1},
        {4, "contrastive loss oracles", contrastive_oracles, 1},
        {5, "total loss composition", total_composition, 1},
        {6, "gradient check", gradient_check, 10},
        {7, "end-to-end learning", end_to_end_learning, 60},
        {8, "ablation wiring", ablation_wiring, 60},
        {9, "template pipeline determinism", template_pipeline_determinism, 30},
        {10, "metrics", metrics, 10},
        {11, "data loaders", data_loaders, 600},
        {12, "real-model smoke", real_model_smoke, 1800},
    };
    int failures = 0;
    for (const auto &c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.check();
        } catch (const std::exception &e) {
            o = fail(std::string("exception: ") + e.what());
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (o.status == Status::pass && seconds > c.budget_seconds) {
            o = fail(o.detail + "; over time budget " + fmt(c.budget_seconds) + " s");
        }
        const char *tag = o.status == Status::pass ? "PASS" : o.status == Status::fail ? "FAIL" : "SKIP";
        failures += o.status == Status::fail;
        std::cout << "criterion " << c.id << " [" << tag << "] " << c.name << ": " << o.detail << " (" << fmt(seconds, 3)
                  << " s)\n";
    }
    return failures == 0 ? 0 : 1;
}

#include <gtest/gtest.h>

#include <chrono>
#include <cmath>

#include "temprompt/trainer.hpp"
#include "test_support.hpp"

using namespace temprompt;

namespace {

const RelationSchema matres = builtin_schema("matres");

struct Fixture {
    MockMaskedLM model = fixtures::synthetic_model(matres);
    BoundVerbalizer bound = bind_to_backend(matres, model);
    Template tmpl = fixtures::prompt5();
    Corpus train_set = synthetic_corpus({80, 1, "tr"});
    Corpus dev_set = synthetic_corpus({40, 2, "dv", Split::dev});
};

}  // namespace

TEST(Schedule, LinearDecayToZero) {
    EXPECT_DOUBLE_EQ(linear_schedule(0.1, 0, 50), 0.1);
    EXPECT_DOUBLE_EQ(linear_schedule(0.1, 25, 50), 0.05);
    EXPECT_DOUBLE_EQ(linear_schedule(0.1, 50, 50), 0.0);
    for (std::size_t t = 1; t < 50; ++t) {
        const double d1 = linear_schedule(0.1, t - 1, 50) - linear_schedule(0.1, t, 50);
        EXPECT_NEAR(d1, 0.1 / 50, 1e-15);
    }
}

TEST(TrainConfig, Defaults) {
    TrainConfig c;
    EXPECT_EQ(c.batch_size, 16u);
    EXPECT_EQ(c.epochs, 10u);
    EXPECT_EQ(c.learning_rate, 5e-5);
    EXPECT_EQ(c.weight_decay, 0.01);
    EXPECT_EQ(c.aux_mode, AuxMode::ter);
    EXPECT_TRUE(c.contrastive);
}

TEST(TrainConfig, ContrastiveNeedsTwoPerBatch) {
    TrainConfig c;
    c.batch_size = 1;
    EXPECT_THROW(c.validate(), ValidationError);
    c.contrastive = false;
    EXPECT_NO_THROW(c.validate());
}

TEST(TrainConfig, JsonRoundTrip) {
    TrainConfig c;
    c.aux_mode = AuxMode::rand;
    c.weights.alpha = 1.1;
    c.dev_metric = MetricMode::vague_excluded;
    EXPECT_EQ(to_json(train_config_from_json(to_json(c))), to_json(c));
    EXPECT_THROW((void)train_config_from_json(nlohmann::json{{"aux_mode", "both"}}), Error);
}

TEST(Trainer, SeparableCorpusIsLearned) {
    Fixture f;
    const auto t0 = std::chrono::steady_clock::now();
    auto [ckpt, history] = train(f.model, f.tmpl, f.train_set, f.dev_set, f.bound, TrainConfig{});
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto train_f1 = evaluate(f.model, f.tmpl, f.train_set, f.bound, MetricMode::strict_micro).f1;
    const auto dev_f1 = evaluate(f.model, f.tmpl, f.dev_set, f.bound, MetricMode::strict_micro).f1;
    EXPECT_GE(train_f1, 0.9);
    EXPECT_GE(dev_f1, 0.8);
    EXPECT_EQ(dev_f1, ckpt.dev_metrics.f1);
    EXPECT_LT(seconds, 60.0);
    EXPECT_EQ(history.steps.size(), 50u);
    EXPECT_EQ(history.epochs.size(), 10u);
    EXPECT_EQ(ckpt.snapshot_id, parameter_snapshot_id(f.model.parameters()));
}

TEST(Trainer, AblatedObjectiveLogsOnlyClassificationLoss) {
    Fixture f;
    TrainConfig c;
    c.aux_mode = AuxMode::off;
    c.contrastive = false;
    c.epochs = 3;
    auto history = train(f.model, f.tmpl, f.train_set, f.dev_set, f.bound, c).second;
    ASSERT_FALSE(history.steps.empty());
    for (const auto &s : history.steps) {
        EXPECT_EQ(s.l_total, s.l_tre);
        EXPECT_EQ(s.l_ter, 0.0);
        EXPECT_EQ(s.l_con, 0.0);
    }
}

TEST(Trainer, ContrastiveToggleLeavesFirstClassificationLossUnchanged) {
    Fixture a, b;
    TrainConfig on, off;
    on.epochs = off.epochs = 1;
    off.contrastive = false;
    auto ha = train(a.model, a.tmpl, a.train_set, a.dev_set, a.bound, on).second;
    auto hb = train(b.model, b.tmpl, b.train_set, b.dev_set, b.bound, off).second;
    EXPECT_EQ(ha.steps[0].l_tre, hb.steps[0].l_tre);
    EXPECT_GT(ha.steps[0].l_con, 0.0);
    EXPECT_EQ(hb.steps[0].l_con, 0.0);
}

TEST(Trainer, EpochLossDecreasesEarly) {
    Fixture f;
    TrainConfig c;
    c.epochs = 3;
    auto history = train(f.model, f.tmpl, f.train_set, f.dev_set, f.bound, c).second;
    ASSERT_EQ(history.epochs.size(), 3u);
    EXPECT_GE(history.epochs[0].mean_l_tre, history.epochs[1].mean_l_tre);
    EXPECT_GE(history.epochs[1].mean_l_tre, history.epochs[2].mean_l_tre);
}

TEST(Trainer, SameSeedIsBitIdentical) {
    Fixture a, b;
    TrainConfig c;
    c.epochs = 2;
    auto ra = train(a.model, a.tmpl, a.train_set, a.dev_set, a.bound, c);
    auto rb = train(b.model, b.tmpl, b.train_set, b.dev_set, b.bound, c);
    EXPECT_EQ(ra.first.parameters, rb.first.parameters);
    ASSERT_EQ(ra.second.steps.size(), rb.second.steps.size());
    for (std::size_t i = 0; i < ra.second.steps.size(); ++i) {
        EXPECT_EQ(ra.second.steps[i].l_total, rb.second.steps[i].l_total);
    }
    Fixture d;
    c.seed = 43;
    auto rd = train(d.model, d.tmpl, d.train_set, d.dev_set, d.bound, c);
    EXPECT_NE(ra.first.parameters, rd.first.parameters);
}

TEST(Trainer, BestEpochIsRestored) {
    Fixture f;
    TrainConfig c;
    c.epochs = 4;
    auto [ckpt, history] = train(f.model, f.tmpl, f.train_set, f.dev_set, f.bound, c);
    double best = -1.0;
    std::size_t best_epoch = 0;
    for (const auto &e : history.epochs) {
        if (e.dev_f1 > best) {
            best = e.dev_f1;
            best_epoch = e.epoch;
        }
    }
    EXPECT_EQ(ckpt.epoch, best_epoch);
    EXPECT_EQ(ckpt.parameters, f.model.snapshot());
}

TEST(Trainer, GradientStepReducesLoss) {
    Fixture f;
    TrainConfig c;
    auto batch = std::vector<EventPairInstance>(f.train_set.instances.begin(), f.train_set.instances.begin() + 16);
    f.model.zero_grad();
    const double before = batch_objective(f.model, f.tmpl, f.bound, batch, c, 3, true).l_total;
    auto params = f.model.parameters();
    auto grads = f.model.gradients();
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= 1e-2 * grads[i];
    const double after = batch_objective(f.model, f.tmpl, f.bound, batch, c, 3, false).l_total;
    EXPECT_LT(after, before);
}

TEST(Trainer, NonFiniteLossRaisesDivergence) {
    Fixture f;
    TrainConfig c;
    c.epochs = 1;
    const auto before_id = static_cast<std::size_t>(*f.model.vocabulary().find("before"));
    f.model.parameters()[f.model.parameters().size() - f.model.vocab_size() + before_id] = std::nan("");
    try {
        (void)train(f.model, f.tmpl, f.train_set, f.dev_set, f.bound, c);
        FAIL() << "expected DivergenceError";
    } catch (const DivergenceError &e) {
        EXPECT_EQ(e.last_finite_step(), -1);
    }
}

TEST(Trainer, DivergenceReportsLastFiniteStep) {
    Fixture f;
    TrainConfig c;
    c.learning_rate = 1e300;
    try {
        (void)train(f.model, f.tmpl, f.train_set, f.dev_set, f.bound, c);
        FAIL() << "expected DivergenceError";
    } catch (const DivergenceError &e) {
        EXPECT_GE(e.last_finite_step(), 0);
    }
}

TEST(Trainer, EmptyTrainingSetRejected) {
    Fixture f;
    EXPECT_THROW((void)train(f.model, f.tmpl, Corpus{}, f.dev_set, f.bound, TrainConfig{}), Error);
}

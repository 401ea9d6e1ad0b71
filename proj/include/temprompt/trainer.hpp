#pragma once

// Multi-task prompt fine-tuning: classification loss, auxiliary masked-trigger loss and
// supervised contrastive loss, optimized with AdamW under a linear learning-rate decay.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "temprompt/backend.hpp"
#include "temprompt/corpus.hpp"
#include "temprompt/evaluator.hpp"
#include "temprompt/objectives.hpp"
#include "temprompt/random.hpp"
#include "temprompt/templates.hpp"

namespace temprompt {

enum class AuxMode { ter, rand, off };

inline std::string to_string(AuxMode m) {
    switch (m) {
    case AuxMode::ter: return "ter";
    case AuxMode::rand: return "rand";
    case AuxMode::off: return "off";
    }
    return "";
}

inline AuxMode parse_aux_mode(const std::string &text) {
    if (text == "ter") return AuxMode::ter;
    if (text == "rand") return AuxMode::rand;
    if (text == "off") return AuxMode::off;
    throw Error("unknown auxiliary mode '" + text + "' (expected ter, rand or off)");
}

struct TrainConfig {
    std::size_t batch_size = 16;
    std::size_t epochs = 10;
    double learning_rate = 5e-5;
    double weight_decay = 0.01;
    LossWeights weights{};
    std::uint64_t seed = 42;
    AuxMode aux_mode = AuxMode::ter;
    bool contrastive = true;
    bool normalize_contrastive = false;
    bool shuffle = true;
    MetricMode dev_metric = MetricMode::strict_micro;

    void validate() const {
        weights.validate();
        if (batch_size < 1) throw ValidationError("batch_size must be at least 1");
        if (contrastive && batch_size < 2) {
            throw ValidationError("contrastive loss needs batch_size >= 2");
        }
        if (epochs < 1) throw ValidationError("epochs must be at least 1");
        if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
        if (weight_decay < 0.0) throw ValidationError("weight_decay must be non-negative");
    }
};

inline nlohmann::json to_json(const TrainConfig &c) {
    return {{"batch_size", c.batch_size},
            {"epochs", c.epochs},
            {"learning_rate", c.learning_rate},
            {"weight_decay", c.weight_decay},
            {"alpha", c.weights.alpha},
            {"beta", c.weights.beta},
            {"tau", c.weights.tau},
            {"seed", c.seed},
            {"aux_mode", to_string(c.aux_mode)},
            {"contrastive", c.contrastive},
            {"normalize_contrastive", c.normalize_contrastive},
            {"shuffle", c.shuffle},
            {"dev_metric", to_string(c.dev_metric)}};
}

inline TrainConfig train_config_from_json(const nlohmann::json &j) {
    TrainConfig c;
    try {
        c.batch_size = j.value("batch_size", c.batch_size);
        c.epochs = j.value("epochs", c.epochs);
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.weight_decay = j.value("weight_decay", c.weight_decay);
        c.weights.alpha = j.value("alpha", c.weights.alpha);
        c.weights.beta = j.value("beta", c.weights.beta);
        c.weights.tau = j.value("tau", c.weights.tau);
        c.seed = j.value("seed", c.seed);
        c.aux_mode = parse_aux_mode(j.value("aux_mode", to_string(c.aux_mode)));
        c.contrastive = j.value("contrastive", c.contrastive);
        c.normalize_contrastive = j.value("normalize_contrastive", c.normalize_contrastive);
        c.shuffle = j.value("shuffle", c.shuffle);
        c.dev_metric = parse_metric_mode(j.value("dev_metric", to_string(c.dev_metric)));
    } catch (const nlohmann::json::exception &e) {
        throw LoadError(std::string("invalid train config: ") + e.what());
    }
    return c;
}

/// Learning rate at `step` (0-based) of `total_steps`, decaying linearly towards zero.
inline double linear_schedule(double base_lr, std::size_t step, std::size_t total_steps) {
    if (total_steps == 0) return base_lr;
    return base_lr * static_cast<double>(total_steps - std::min(step, total_steps)) /
           static_cast<double>(total_steps);
}

/// Adam with decoupled weight decay.
class AdamW {
  public:
    explicit AdamW(std::size_t n, double weight_decay = 0.01, double beta1 = 0.9, double beta2 = 0.999,
                   double eps = 1e-8)
        : m_(n, 0.0), v_(n, 0.0), weight_decay_(weight_decay), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(std::span<double> params, std::span<const double> grads, double lr) {
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double g = grads[i];
            m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
            v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
            const double m_hat = m_[i] / c1;
            const double v_hat = v_[i] / c2;
            params[i] -= lr * (m_hat / (std::sqrt(v_hat) + eps_) + weight_decay_ * params[i]);
        }
    }

  private:
    std::vector<double> m_;
    std::vector<double> v_;
    double weight_decay_;
    double beta1_;
    double beta2_;
    double eps_;
    std::size_t t_ = 0;
};

namespace detail {

inline std::vector<double> scatter_row(std::size_t vocab, const BoundVerbalizer &verbalizer,
                                       const std::vector<double> &d_answer) {
    std::vector<double> row(vocab, 0.0);
    for (std::size_t r = 0; r < verbalizer.size(); ++r) {
        row[static_cast<std::size_t>(verbalizer.token_ids()[r])] = d_answer[r];
    }
    return row;
}

inline void scale_rows(std::vector<std::vector<double>> &rows, double s) {
    for (auto &row : rows) for (auto &x : row) x *= s;
}

}  // namespace detail

/// Auxiliary prompt pair for one instance under the configured mode.
inline std::pair<PromptInstance, PromptInstance> auxiliary_prompts(const MaskedLanguageModel &model,
                                                                   const Template &tmpl,
                                                                   const EventPairInstance &inst,
                                                                   const RelationSchema &schema, AuxMode mode,
                                                                   std::uint64_t seed) {
    if (mode == AuxMode::rand) {
        return {instantiate(model, tmpl, inst, schema, MaskMode::rand, hash_combine(seed, 1)),
                instantiate(model, tmpl, inst, schema, MaskMode::rand, hash_combine(seed, 2))};
    }
    return {instantiate(model, tmpl, inst, schema, MaskMode::ter_e1),
            instantiate(model, tmpl, inst, schema, MaskMode::ter_e2)};
}

/// Total loss of one batch at the current parameters. When `accumulate` is set, adds
/// d(l_total)/d(params) into the model's gradient buffer (callers zero it first).
inline BatchLossReport batch_objective(MaskedLanguageModel &model, const Template &tmpl,
                                       const BoundVerbalizer &verbalizer,
                                       const std::vector<EventPairInstance> &instances, const TrainConfig &config,
                                       std::uint64_t step_seed, bool accumulate) {
    const auto &schema = verbalizer.schema();
    const auto n = instances.size();
    BatchLossReport report;
    if (n == 0) return report;

    std::vector<PromptInstance> cls;
    std::vector<std::vector<double>> hidden;
    std::vector<std::size_t> gold;
    cls.reserve(n);
    for (const auto &inst : instances) {
        cls.push_back(instantiate(model, tmpl, inst, schema, MaskMode::rel_cls));
        auto out = model.forward(cls.back().ids, cls.back().mask_indices);
        report.distributions.push_back(relation_distribution(out.logits.front(), verbalizer));
        hidden.push_back(std::move(out.hidden.front()));
        gold.push_back(schema.index_of(inst.label));
    }
    const auto tre = loss_tre(report.distributions, gold);
    report.l_tre = tre.mean;
    report.l_tre_sum = tre.sum;
    report.floored = tre.floored;

    std::vector<std::pair<PromptInstance, PromptInstance>> aux;
    std::vector<MaskedTokenLoss> ter;
    if (config.aux_mode != AuxMode::off) {
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            aux.push_back(auxiliary_prompts(model, tmpl, instances[i], schema, config.aux_mode,
                                            hash_combine(step_seed, i)));
            ter.push_back(loss_ter(model, aux.back().first, aux.back().second));
            sum += ter.back().value;
            report.floored = report.floored || ter.back().floored;
        }
        report.l_ter = sum / static_cast<double>(n);
    }

    std::optional<ContrastiveLoss> con;
    if (config.contrastive) {
        con = loss_con(hidden, gold, config.weights.tau, config.normalize_contrastive);
        report.l_con = con->value;
    }
    report.l_total = loss_total(report.l_tre, report.l_ter, report.l_con, config.weights);

    if (accumulate) {
        const auto vocab = model.vocab_size();
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<std::vector<double>> d_logits{detail::scatter_row(vocab, verbalizer, tre.d_answer_logits[i])};
            std::vector<std::vector<double>> d_hidden;
            if (con) {
                d_hidden.push_back(con->d_hidden[i]);
                detail::scale_rows(d_hidden, config.weights.beta);
            }
            model.backward(cls[i].ids, cls[i].mask_indices, d_logits, d_hidden);
        }
        if (!ter.empty() && config.weights.alpha != 0.0) {
            const double s = config.weights.alpha / static_cast<double>(n);
            for (std::size_t i = 0; i < n; ++i) {
                detail::scale_rows(ter[i].d_logits1, s);
                detail::scale_rows(ter[i].d_logits2, s);
                model.backward(aux[i].first.ids, aux[i].first.mask_indices, ter[i].d_logits1, {});
                model.backward(aux[i].second.ids, aux[i].second.mask_indices, ter[i].d_logits2, {});
            }
        }
    }
    return report;
}

struct StepRecord {
    std::size_t step = 0;
    std::size_t epoch = 0;
    double learning_rate = 0.0;
    double l_tre = 0.0;
    double l_ter = 0.0;
    double l_con = 0.0;
    double l_total = 0.0;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double mean_l_tre = 0.0;
    double dev_f1 = 0.0;
};

struct TrainHistory {
    std::vector<StepRecord> steps;
    std::vector<EpochRecord> epochs;
};

inline nlohmann::json to_json(const StepRecord &s) {
    return {{"step", s.step}, {"l_tre", s.l_tre}, {"l_ter", s.l_ter}, {"l_con", s.l_con}, {"l_total", s.l_total}};
}

struct Checkpoint {
    std::vector<double> parameters;
    std::string snapshot_id;
    std::size_t epoch = 0;
    MetricsReport dev_metrics;
    std::string config_hash;
};

/// Content hash of a parameter vector (16 hex digits).
inline std::string parameter_snapshot_id(std::span<const double> params) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    h = fnv1a(std::string_view(reinterpret_cast<const char *>(params.data()), params.size() * sizeof(double)), h);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Fine-tunes `model` in place. On return the model holds the best-dev-epoch parameters
/// (ties keep the earlier epoch), which are also stored in the checkpoint.
inline std::pair<Checkpoint, TrainHistory> train(MaskedLanguageModel &model, const Template &tmpl,
                                                 const Corpus &train_set, const Corpus &dev_set,
                                                 const BoundVerbalizer &verbalizer, const TrainConfig &config,
                                                 const std::string &config_hash = {}) {
    config.validate();
    if (train_set.empty()) throw Error("training corpus is empty");
    const auto per_epoch = (train_set.size() + config.batch_size - 1) / config.batch_size;
    const auto total_steps = per_epoch * config.epochs;
    const double base_lr = config.learning_rate * model.learning_rate_scale();
    AdamW optimizer(model.parameters().size(), config.weight_decay);

    TrainHistory history;
    Checkpoint best;
    best.config_hash = config_hash;
    double best_f1 = -1.0;
    std::size_t step = 0;
    long last_finite = -1;
    const auto data_seed = derive_seed(config.seed, "batches");
    const auto aux_seed = derive_seed(config.seed, "aux");
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        auto batches = make_batches(train_set, config.batch_size, hash_combine(data_seed, epoch), config.shuffle);
        double tre_sum = 0.0;
        for (const auto &batch : batches) {
            model.zero_grad();
            auto report = batch_objective(model, tmpl, verbalizer, batch.instances, config,
                                          hash_combine(aux_seed, step), true);
            if (!std::isfinite(report.l_total)) {
                throw DivergenceError("non-finite loss at step " + std::to_string(step), last_finite);
            }
            const double lr = linear_schedule(base_lr, step, total_steps);
            optimizer.step(model.parameters(), model.gradients(), lr);
            history.steps.push_back(
                {step, epoch, lr, report.l_tre, report.l_ter, report.l_con, report.l_total});
            tre_sum += report.l_tre * static_cast<double>(batch.instances.size());
            last_finite = static_cast<long>(step);
            ++step;
        }
        auto dev = evaluate(model, tmpl, dev_set, verbalizer, config.dev_metric);
        history.epochs.push_back({epoch, tre_sum / static_cast<double>(train_set.size()), dev.f1});
        if (dev.f1 > best_f1) {
            best_f1 = dev.f1;
            best.parameters = model.snapshot();
            best.epoch = epoch;
            best.dev_metrics = std::move(dev);
        }
    }
    model.restore(best.parameters);
    best.snapshot_id = parameter_snapshot_id(best.parameters);
    return {std::move(best), std::move(history)};
}

}  // namespace temprompt

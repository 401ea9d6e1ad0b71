#pragma once

// Training objectives: relation classification, temporal event reasoning (masked trigger
// prediction), supervised contrastive loss over mask hidden vectors, and their weighted sum.
// Each loss returns its value together with the gradient with respect to its inputs.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "temprompt/backend.hpp"
#include "temprompt/errors.hpp"
#include "temprompt/templates.hpp"
#include "temprompt/verbalizer.hpp"

namespace temprompt {

/// Probabilities below this are clamped before taking the log.
inline constexpr double probability_floor = 1e-12;

struct LossWeights {
    double alpha = 1.0;
    double beta = 0.5;
    double tau = 0.2;

    void validate() const {
        if (!(tau > 0.0)) throw ValidationError("temperature tau must be positive");
        if (alpha < 0.0 || beta < 0.0) throw ValidationError("loss weights alpha and beta must be non-negative");
    }
};

/// Numerically stable softmax.
inline std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> p(logits.size());
    if (logits.empty()) return p;
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) sum += (p[i] = std::exp(logits[i] - m));
    for (auto &x : p) x /= sum;
    return p;
}

inline double log_sum_exp(std::span<const double> values) {
    const double m = *std::max_element(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) sum += std::exp(v - m);
    return m + std::log(sum);
}

/// Logits of the answer words only, in schema label order.
inline std::vector<double> answer_logits(std::span<const double> vocab_logits, const BoundVerbalizer &verbalizer) {
    std::vector<double> out;
    out.reserve(verbalizer.size());
    for (auto id : verbalizer.token_ids()) out.push_back(vocab_logits[static_cast<std::size_t>(id)]);
    return out;
}

/// Distribution over labels: softmax restricted to the answer-word logits.
inline std::vector<double> relation_distribution(std::span<const double> vocab_logits,
                                                 const BoundVerbalizer &verbalizer) {
    return softmax(answer_logits(vocab_logits, verbalizer));
}

inline std::vector<double> relation_distribution(const MaskedLanguageModel &model, const PromptInstance &prompt,
                                                 const BoundVerbalizer &verbalizer) {
    if (prompt.mode != MaskMode::rel_cls || prompt.mask_indices.size() != 1) {
        throw Error("relation_distribution needs a REL_CLS prompt with a single mask");
    }
    auto out = model.forward(prompt.ids, prompt.mask_indices);
    return relation_distribution(out.logits.front(), verbalizer);
}

struct ClassificationLoss {
    double mean = 0.0;
    double sum = 0.0;
    bool floored = false;
    /// d(mean)/d(answer logits), one row per instance.
    std::vector<std::vector<double>> d_answer_logits;
};

/// Cross-entropy against one-hot gold labels, averaged over instances.
inline ClassificationLoss loss_tre(const std::vector<std::vector<double>> &distributions,
                                   std::span<const std::size_t> gold) {
    if (distributions.size() != gold.size()) throw Error("loss_tre: distributions and gold labels differ in count");
    ClassificationLoss out;
    if (gold.empty()) return out;
    const double n = static_cast<double>(gold.size());
    for (std::size_t i = 0; i < gold.size(); ++i) {
        const auto &p = distributions[i];
        double pg = p.at(gold[i]);
        if (pg < probability_floor) {
            pg = probability_floor;
            out.floored = true;
        }
        out.sum += -std::log(pg);
        std::vector<double> d(p.size());
        for (std::size_t r = 0; r < p.size(); ++r) d[r] = (p[r] - (r == gold[i] ? 1.0 : 0.0)) / n;
        out.d_answer_logits.push_back(std::move(d));
    }
    out.mean = out.sum / n;
    return out;
}

struct MaskedTokenLoss {
    double value = 0.0;
    bool floored = false;
    std::vector<std::vector<double>> d_logits1;
    std::vector<std::vector<double>> d_logits2;
};

namespace detail {

/// Mean over mask positions of full-vocabulary cross-entropy; gradient scaled by `scale`.
inline double masked_token_ce(const std::vector<std::vector<double>> &logits, std::span<const TokenId> gold,
                              double scale, std::vector<std::vector<double>> &d_logits, bool &floored) {
    if (logits.size() != gold.size() || logits.empty()) {
        throw Error("masked-token loss needs one logits row per gold token");
    }
    const double n = static_cast<double>(gold.size());
    double total = 0.0;
    for (std::size_t j = 0; j < gold.size(); ++j) {
        auto p = softmax(logits[j]);
        const auto g = static_cast<std::size_t>(gold[j]);
        double pg = p.at(g);
        if (pg < probability_floor) {
            pg = probability_floor;
            floored = true;
        }
        total += -std::log(pg);
        for (std::size_t v = 0; v < p.size(); ++v) p[v] = scale * (p[v] - (v == g ? 1.0 : 0.0)) / n;
        d_logits.push_back(std::move(p));
    }
    return total / n;
}

}  // namespace detail

/// One half of the summed masked-token cross-entropies of the two auxiliary prompts.
/// Multi-token masks average over their positions.
inline MaskedTokenLoss loss_ter(const std::vector<std::vector<double>> &logits1, std::span<const TokenId> gold1,
                                const std::vector<std::vector<double>> &logits2, std::span<const TokenId> gold2) {
    MaskedTokenLoss out;
    const double a = detail::masked_token_ce(logits1, gold1, 0.5, out.d_logits1, out.floored);
    const double b = detail::masked_token_ce(logits2, gold2, 0.5, out.d_logits2, out.floored);
    out.value = 0.5 * (a + b);
    return out;
}

inline MaskedTokenLoss loss_ter(const MaskedLanguageModel &model, const PromptInstance &prompt1,
                                const PromptInstance &prompt2) {
    auto f1 = model.forward(prompt1.ids, prompt1.mask_indices);
    auto f2 = model.forward(prompt2.ids, prompt2.mask_indices);
    return loss_ter(f1.logits, prompt1.gold, f2.logits, prompt2.gold);
}

struct ContrastiveLoss {
    double value = 0.0;
    std::vector<std::vector<double>> d_hidden;
};

/// Supervised contrastive loss over one batch. For every anchor with at least one other
/// same-label sample, averages -log softmax over the batch without the anchor, then sums
/// over anchors. Batches of fewer than two vectors contribute zero.
inline ContrastiveLoss loss_con(const std::vector<std::vector<double>> &hidden, std::span<const std::size_t> labels,
                                double tau, bool normalize = false) {
    if (!(tau > 0.0)) throw ValidationError("temperature tau must be positive");
    if (hidden.size() != labels.size()) throw Error("loss_con: vectors and labels differ in count");
    const auto n = hidden.size();
    ContrastiveLoss out;
    out.d_hidden.assign(n, {});
    if (n == 0) return out;
    const auto d = hidden.front().size();
    for (const auto &h : hidden) {
        if (h.size() != d) {
            throw ValidationError("loss_con: vector dimension mismatch (" + std::to_string(h.size()) + " vs " +
                                  std::to_string(d) + ")");
        }
    }
    for (auto &g : out.d_hidden) g.assign(d, 0.0);
    if (n < 2) return out;

    std::vector<std::vector<double>> u = hidden;
    std::vector<double> norms(n, 1.0);
    if (normalize) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (double x : u[i]) s += x * x;
            norms[i] = std::max(std::sqrt(s), 1e-12);
            for (auto &x : u[i]) x /= norms[i];
        }
    }
    std::vector<std::vector<double>> sim(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < d; ++k) dot += u[i][k] * u[j][k];
            sim[i][j] = sim[j][i] = dot / tau;
        }
    }
    std::vector<std::vector<double>> d_u(n, std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t positives = 0;
        for (std::size_t j = 0; j < n; ++j) positives += (j != i && labels[j] == labels[i]);
        if (positives == 0) continue;
        std::vector<double> others;
        std::vector<std::size_t> index;
        for (std::size_t k = 0; k < n; ++k) {
            if (k == i) continue;
            others.push_back(sim[i][k]);
            index.push_back(k);
        }
        const double lse = log_sum_exp(others);
        const double inv_pos = 1.0 / static_cast<double>(positives);
        double anchor_loss = 0.0;
        for (std::size_t m = 0; m < index.size(); ++m) {
            const auto k = index[m];
            const bool pos = labels[k] == labels[i];
            if (pos) anchor_loss += -(sim[i][k] - lse);
            const double c = std::exp(others[m] - lse) - (pos ? inv_pos : 0.0);
            for (std::size_t t = 0; t < d; ++t) {
                d_u[i][t] += c * u[k][t] / tau;
                d_u[k][t] += c * u[i][t] / tau;
            }
        }
        out.value += anchor_loss * inv_pos;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!normalize) {
            out.d_hidden[i] = std::move(d_u[i]);
            continue;
        }
        // d/dh of h/|h| is (I - u u^T)/|h|.
        double proj = 0.0;
        for (std::size_t t = 0; t < d; ++t) proj += u[i][t] * d_u[i][t];
        for (std::size_t t = 0; t < d; ++t) out.d_hidden[i][t] = (d_u[i][t] - proj * u[i][t]) / norms[i];
    }
    return out;
}

inline double loss_total(double l_tre, double l_ter, double l_con, const LossWeights &w) {
    return l_tre + w.alpha * l_ter + w.beta * l_con;
}

struct BatchLossReport {
    double l_tre = 0.0;
    double l_tre_sum = 0.0;
    double l_ter = 0.0;
    double l_con = 0.0;
    double l_total = 0.0;
    bool floored = false;
    std::vector<std::vector<double>> distributions;
};

}  // namespace temprompt

#pragma once

// Few-shot scoring of candidate templates: each template fine-tunes the backend from the
// same initial parameters on a small train sample (classification loss only) and is
// scored by micro-F1 on a small dev sample.

#include <vector>

#include "temprompt/backend.hpp"
#include "temprompt/corpus.hpp"
#include "temprompt/evaluator.hpp"
#include "temprompt/templates.hpp"
#include "temprompt/trainer.hpp"

namespace temprompt {

inline std::vector<Template> score_templates(std::vector<Template> pool, const Corpus &small_train,
                                             const Corpus &small_dev, MaskedLanguageModel &model,
                                             const BoundVerbalizer &verbalizer, TrainConfig config) {
    config.aux_mode = AuxMode::off;
    config.contrastive = false;
    const auto initial = model.snapshot();
    for (auto &t : pool) {
        model.restore(initial);
        auto [checkpoint, history] = train(model, t, small_train, small_dev, verbalizer, config);
        t.dev_f1 = checkpoint.dev_metrics.f1;
    }
    model.restore(initial);
    return pool;
}

}  // namespace temprompt

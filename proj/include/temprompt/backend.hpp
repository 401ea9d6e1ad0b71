#pragma once

// Model-backend interfaces: a trainable masked LM and a span infiller.

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "temprompt/corpus.hpp"
#include "temprompt/errors.hpp"
#include "temprompt/verbalizer.hpp"

namespace temprompt {

/// Token ids for a word sequence plus, per input word, the [begin, end) token range it
/// produced. A word can produce zero tokens (e.g. an empty string).
struct Encoding {
    std::vector<TokenId> ids;
    std::vector<Span> word_spans;
};

/// Per-query-position outputs of one forward pass.
struct ForwardOutput {
    std::vector<std::vector<double>> logits;  // one row of vocab_size() per position
    std::vector<std::vector<double>> hidden;  // one vector of hidden_dim() per position
};

/// A masked language model with a flat trainable parameter vector.
///
/// forward() is pure given the parameters. backward() recomputes the forward pass at the
/// same positions and accumulates d(loss)/d(params) into gradients(), given the upstream
/// gradients with respect to each position's logits row and hidden vector. Either
/// upstream list may be empty (treated as zeros).
class MaskedLanguageModel {
  public:
    virtual ~MaskedLanguageModel() = default;

    [[nodiscard]] virtual Encoding encode(std::span<const std::string> words) const = 0;
    [[nodiscard]] virtual TokenId mask_id() const = 0;
    /// Id produced for out-of-vocabulary input, if the tokenizer has one.
    [[nodiscard]] virtual std::optional<TokenId> unknown_id() const = 0;
    [[nodiscard]] virtual std::size_t vocab_size() const = 0;
    [[nodiscard]] virtual std::size_t hidden_dim() const = 0;
    [[nodiscard]] virtual std::size_t max_length() const = 0;
    [[nodiscard]] virtual std::string token_text(TokenId id) const = 0;

    [[nodiscard]] virtual ForwardOutput forward(std::span<const TokenId> ids,
                                                std::span<const std::size_t> positions) const = 0;
    virtual void backward(std::span<const TokenId> ids, std::span<const std::size_t> positions,
                          const std::vector<std::vector<double>> &d_logits,
                          const std::vector<std::vector<double>> &d_hidden) = 0;

    [[nodiscard]] virtual std::span<double> parameters() = 0;
    [[nodiscard]] virtual std::span<const double> parameters() const = 0;
    [[nodiscard]] virtual std::span<double> gradients() = 0;
    virtual void zero_grad() = 0;

    /// Multiplier applied to configured learning rates; lets a tiny model share
    /// hyperparameter files written for a large pretrained encoder.
    [[nodiscard]] virtual double learning_rate_scale() const { return 1.0; }

    [[nodiscard]] std::vector<double> snapshot() const {
        auto p = parameters();
        return {p.begin(), p.end()};
    }

    void restore(std::span<const double> values) {
        auto p = parameters();
        if (values.size() != p.size()) {
            throw Error("parameter snapshot size mismatch: got " + std::to_string(values.size()) +
                        ", expected " + std::to_string(p.size()));
        }
        std::copy(values.begin(), values.end(), p.begin());
    }
};

/// Name of the i-th blank sentinel inside an infill query.
inline std::string blank_sentinel(std::size_t i) {
    return "<extra_id_" + std::to_string(i) + ">";
}

/// A word sequence containing blank sentinels 0..k-1 in order.
struct InfillQuery {
    std::vector<std::string> words;

    [[nodiscard]] std::size_t blank_count() const {
        std::size_t n = 0;
        while (std::find(words.begin(), words.end(), blank_sentinel(n)) != words.end()) ++n;
        return n;
    }
};

struct InfillCandidate {
    std::vector<std::string> fills;  // one string per blank, may be empty
    double log_prob = 0.0;           // summed over the queries decoded jointly
};

/// Sequence-to-sequence span infiller.
///
/// infill() decodes fills shared by every query (all queries must have the same blank
/// count), maximizing the log-probability summed across queries. The result is sorted by
/// descending log_prob and holds at most beam_width entries.
class SpanInfiller {
  public:
    virtual ~SpanInfiller() = default;

    [[nodiscard]] virtual std::vector<InfillCandidate> infill(std::span<const InfillQuery> queries,
                                                              std::size_t beam_width,
                                                              std::size_t max_fill_tokens) const = 0;
    [[nodiscard]] virtual double score(std::span<const InfillQuery> queries,
                                       const std::vector<std::string> &fills) const = 0;
};

/// Tokens with the given word spans replaced by mask tokens, one per subword.
struct MaskedEncoding {
    std::vector<TokenId> ids;
    std::vector<std::size_t> mask_indices;  // ascending
    std::vector<TokenId> original_ids;      // token replaced at each mask index
    std::vector<Span> word_spans;
};

/// Encodes `words` and masks every token produced by the words inside `spans`
/// (word-index intervals). Throws AlignmentError for a span that yields no tokens.
inline MaskedEncoding mask_positions(const MaskedLanguageModel &model,
                                     std::span<const std::string> words,
                                     std::span<const Span> spans) {
    auto enc = model.encode(words);
    MaskedEncoding out;
    out.ids = enc.ids;
    out.word_spans = enc.word_spans;
    std::vector<bool> masked(enc.ids.size(), false);
    for (const auto &span : spans) {
        if (span.end > words.size() || span.start > span.end) {
            throw AlignmentError("mask span [" + std::to_string(span.start) + ", " +
                                 std::to_string(span.end) + ") out of range");
        }
        const std::size_t begin = span.start < span.end ? enc.word_spans[span.start].start : 0;
        const std::size_t end = span.start < span.end ? enc.word_spans[span.end - 1].end : 0;
        if (begin >= end) {
            throw AlignmentError("mask span [" + std::to_string(span.start) + ", " +
                                 std::to_string(span.end) + ") maps to zero subword tokens");
        }
        for (std::size_t t = begin; t < end; ++t) masked[t] = true;
    }
    for (std::size_t t = 0; t < masked.size(); ++t) {
        if (masked[t]) {
            out.mask_indices.push_back(t);
            out.original_ids.push_back(out.ids[t]);
            out.ids[t] = model.mask_id();
        }
    }
    return out;
}

/// Hidden vector at a mask position.
inline std::vector<double> hidden_at_mask(const MaskedLanguageModel &model,
                                          std::span<const TokenId> ids, std::size_t mask_index) {
    if (mask_index >= ids.size() || ids[mask_index] != model.mask_id()) {
        throw Error("position " + std::to_string(mask_index) + " is not a mask token");
    }
    const std::size_t positions[] = {mask_index};
    return model.forward(ids, positions).hidden.front();
}

/// Binds every answer word of `schema` to a single vocabulary token of `model`.
inline BoundVerbalizer bind_to_backend(const RelationSchema &schema,
                                       const MaskedLanguageModel &model) {
    validate_schema(schema);
    std::vector<TokenId> ids;
    for (const auto &label : schema.labels) {
        const auto &word = schema.word_for(label);
        const std::string words[] = {word};
        auto enc = model.encode(words);
        if (enc.ids.size() != 1) {
            throw BindingError("answer word '" + word + "' for label '" + label + "' encodes to " +
                               std::to_string(enc.ids.size()) + " tokens, expected 1");
        }
        if (model.unknown_id() && enc.ids.front() == *model.unknown_id()) {
            throw BindingError("answer word '" + word + "' for label '" + label +
                               "' is not in the backend vocabulary");
        }
        if (std::find(ids.begin(), ids.end(), enc.ids.front()) != ids.end()) {
            throw BindingError("answer word '" + word + "' for label '" + label +
                               "' shares a token with another label");
        }
        ids.push_back(enc.ids.front());
    }
    return BoundVerbalizer(schema, std::move(ids));
}

}  // namespace temprompt

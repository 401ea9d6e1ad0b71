#pragma once

// Relation label sets and the label -> answer-word mapping read at the mask.

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "temprompt/errors.hpp"

namespace temprompt {

using Label = std::string;

/// Ordered label set plus verbalizer and inverse map for one dataset.
struct RelationSchema {
    std::string schema_id;
    std::vector<Label> labels;
    std::map<Label, std::string> verbalizer;
    std::map<Label, Label> inverse_map;

    [[nodiscard]] bool has_label(const Label &label) const {
        return std::find(labels.begin(), labels.end(), label) != labels.end();
    }

    /// Position of `label` in `labels`; throws SchemaMismatchError if absent.
    [[nodiscard]] std::size_t index_of(const Label &label) const {
        auto it = std::find(labels.begin(), labels.end(), label);
        if (it == labels.end()) {
            throw SchemaMismatchError("label '" + label + "' is not defined by schema '" +
                                      schema_id + "'");
        }
        return static_cast<std::size_t>(it - labels.begin());
    }

    [[nodiscard]] const std::string &word_for(const Label &label) const {
        auto it = verbalizer.find(label);
        if (it == verbalizer.end()) {
            throw SchemaMismatchError("no answer word for label '" + label + "'");
        }
        return it->second;
    }

    [[nodiscard]] const Label &inverse(const Label &label) const {
        auto it = inverse_map.find(label);
        if (it == inverse_map.end()) {
            throw SchemaMismatchError("no inverse for label '" + label + "'");
        }
        return it->second;
    }
};

/// Checks the schema invariants: every label verbalized, verbalizer injective,
/// inverse map an involution over the label set.
inline void validate_schema(const RelationSchema &schema) {
    if (schema.labels.empty()) {
        throw ValidationError("schema '" + schema.schema_id + "' has no labels");
    }
    std::set<Label> seen_labels;
    std::map<std::string, Label> seen_words;
    for (const auto &label : schema.labels) {
        if (!seen_labels.insert(label).second) {
            throw ValidationError("duplicate label '" + label + "' in schema '" + schema.schema_id + "'");
        }
        const auto &word = schema.word_for(label);
        if (word.empty()) {
            throw ValidationError("empty answer word for label '" + label + "'");
        }
        auto [it, inserted] = seen_words.emplace(word, label);
        if (!inserted) {
            throw ValidationError("verbalizer is not injective: labels '" + it->second + "' and '" +
                                  label + "' both map to '" + word + "'");
        }
    }
    for (const auto &label : schema.labels) {
        const auto &inv = schema.inverse(label);
        if (!schema.has_label(inv)) {
            throw ValidationError("inverse of '" + label + "' is '" + inv + "', not a schema label");
        }
        if (schema.inverse(inv) != label) {
            throw ValidationError("inverse map is not an involution at '" + label + "'");
        }
    }
}

/// Built-in schemas. Known ids: "matres", "tbdense".
inline RelationSchema builtin_schema(const std::string &dataset_id) {
    RelationSchema schema;
    schema.schema_id = dataset_id;
    if (dataset_id == "matres") {
        schema.labels = {"BEFORE", "AFTER", "EQUAL", "VAGUE"};
        schema.verbalizer = {{"BEFORE", "before"},
                             {"AFTER", "after"},
                             {"EQUAL", "simultaneously"},
                             {"VAGUE", "vaguely"}};
        schema.inverse_map = {
            {"BEFORE", "AFTER"}, {"AFTER", "BEFORE"}, {"EQUAL", "EQUAL"}, {"VAGUE", "VAGUE"}};
    } else if (dataset_id == "tbdense") {
        schema.labels = {"BEFORE", "AFTER", "SIMULTANEOUS", "INCLUDES", "INCLUDED IN", "VAGUE"};
        schema.verbalizer = {{"BEFORE", "before"},         {"AFTER", "after"},
                             {"SIMULTANEOUS", "simultaneously"}, {"INCLUDES", "around"},
                             {"INCLUDED IN", "during"},    {"VAGUE", "vaguely"}};
        schema.inverse_map = {{"BEFORE", "AFTER"},
                              {"AFTER", "BEFORE"},
                              {"SIMULTANEOUS", "SIMULTANEOUS"},
                              {"INCLUDES", "INCLUDED IN"},
                              {"INCLUDED IN", "INCLUDES"},
                              {"VAGUE", "VAGUE"}};
    } else {
        throw Error("unknown dataset id '" + dataset_id + "' (known: matres, tbdense)");
    }
    validate_schema(schema);
    return schema;
}

/// Replaces answer words from a {"LABEL": "word"} map and re-validates.
inline RelationSchema with_overrides(RelationSchema schema, const nlohmann::json &overrides) {
    if (!overrides.is_object()) {
        throw LoadError("verbalizer override must be a JSON object of LABEL -> word");
    }
    for (const auto &[label, word] : overrides.items()) {
        if (!schema.has_label(label)) {
            throw SchemaMismatchError("verbalizer override names unknown label '" + label + "'");
        }
        if (!word.is_string()) {
            throw LoadError("verbalizer override for '" + label + "' is not a string");
        }
        schema.verbalizer[label] = word.get<std::string>();
    }
    validate_schema(schema);
    return schema;
}

using TokenId = int;

/// A schema bound to one backend vocabulary: one token id per label, pairwise distinct.
class BoundVerbalizer {
  public:
    BoundVerbalizer(RelationSchema schema, std::vector<TokenId> token_ids)
        : schema_(std::move(schema)), token_ids_(std::move(token_ids)) {}

    [[nodiscard]] const RelationSchema &schema() const noexcept { return schema_; }
    [[nodiscard]] const std::vector<TokenId> &token_ids() const noexcept { return token_ids_; }
    [[nodiscard]] std::size_t size() const noexcept { return token_ids_.size(); }

    [[nodiscard]] TokenId token_for(const Label &label) const {
        return token_ids_[schema_.index_of(label)];
    }

    /// Inverse of token_for; nullopt when the token is not an answer word.
    [[nodiscard]] std::optional<Label> label_for(TokenId token) const {
        auto it = std::find(token_ids_.begin(), token_ids_.end(), token);
        if (it == token_ids_.end()) {
            return std::nullopt;
        }
        return schema_.labels[static_cast<std::size_t>(it - token_ids_.begin())];
    }

  private:
    RelationSchema schema_;
    std::vector<TokenId> token_ids_;
};

}  // namespace temprompt

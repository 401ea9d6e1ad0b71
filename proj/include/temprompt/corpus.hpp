#pragma once

// Event-pair datasets: canonical JSONL I/O, validation, few-shot sampling and batching.

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "temprompt/errors.hpp"
#include "temprompt/random.hpp"
#include "temprompt/verbalizer.hpp"

namespace temprompt {

/// Half-open token interval [start, end).
struct Span {
    std::size_t start = 0;
    std::size_t end = 0;

    [[nodiscard]] std::size_t size() const noexcept { return end - start; }
    friend bool operator==(const Span &, const Span &) = default;
};

struct EventPairInstance {
    std::string instance_id;
    std::string doc_id;
    std::vector<std::string> tokens;
    Span trigger1;
    Span trigger2;
    Label label;

    friend bool operator==(const EventPairInstance &, const EventPairInstance &) = default;
};

enum class Split { train, dev, test };

inline std::string to_string(Split split) {
    switch (split) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
    }
    return "train";
}

inline Split parse_split(const std::string &text) {
    if (text == "train") return Split::train;
    if (text == "dev") return Split::dev;
    if (text == "test") return Split::test;
    throw Error("unknown split '" + text + "' (expected train, dev or test)");
}

struct Corpus {
    std::string schema_id;
    Split split = Split::train;
    std::vector<EventPairInstance> instances;

    [[nodiscard]] std::size_t size() const noexcept { return instances.size(); }
    [[nodiscard]] bool empty() const noexcept { return instances.empty(); }
    friend bool operator==(const Corpus &, const Corpus &) = default;
};

struct Batch {
    std::vector<EventPairInstance> instances;
    std::size_t batch_index = 0;
};

/// Throws ValidationError (or SchemaMismatchError for the label) naming the instance.
inline void validate_instance(const EventPairInstance &inst, const RelationSchema &schema) {
    const auto n = inst.tokens.size();
    auto check_span = [&](const Span &s, const char *name) {
        if (!(s.start < s.end && s.end <= n)) {
            throw ValidationError("instance '" + inst.instance_id + "': " + name + " [" +
                                  std::to_string(s.start) + ", " + std::to_string(s.end) +
                                  ") out of range for " + std::to_string(n) + " tokens");
        }
    };
    check_span(inst.trigger1, "trigger1");
    check_span(inst.trigger2, "trigger2");
    if (!(inst.trigger1.start < inst.trigger2.start)) {
        throw ValidationError("instance '" + inst.instance_id + "': trigger1 must start before trigger2");
    }
    if (inst.trigger1.end > inst.trigger2.start) {
        throw ValidationError("instance '" + inst.instance_id + "': trigger spans overlap");
    }
    if (!schema.has_label(inst.label)) {
        throw SchemaMismatchError("instance '" + inst.instance_id + "': label '" + inst.label +
                                  "' is not in schema '" + schema.schema_id + "'");
    }
}

inline void validate_corpus(const Corpus &corpus, const RelationSchema &schema) {
    std::set<std::string> ids;
    for (const auto &inst : corpus.instances) {
        validate_instance(inst, schema);
        if (!ids.insert(inst.instance_id).second) {
            throw ValidationError("duplicate instance_id '" + inst.instance_id + "'");
        }
    }
}

namespace detail {

inline Span span_from_json(const nlohmann::json &j, const char *field, std::size_t line) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number_integer() || !j[1].is_number_integer() ||
        j[0].get<long long>() < 0 || j[1].get<long long>() < 0) {
        throw LoadError("line " + std::to_string(line) + ": field '" + field +
                        "' must be [start, end] with non-negative integers");
    }
    return Span{j[0].get<std::size_t>(), j[1].get<std::size_t>()};
}

template <typename T>
T required(const nlohmann::json &obj, const char *field, std::size_t line) {
    auto it = obj.find(field);
    if (it == obj.end()) {
        throw LoadError("line " + std::to_string(line) + ": missing field '" + field + "'");
    }
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception &) {
        throw LoadError("line " + std::to_string(line) + ": field '" + field + "' has the wrong type");
    }
}

}  // namespace detail

/// Parses one canonical JSONL record. `line` is used in error messages only.
inline EventPairInstance parse_instance(const std::string &text, std::size_t line) {
    nlohmann::json obj;
    try {
        obj = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error &e) {
        throw LoadError("line " + std::to_string(line) + ": invalid JSON (" + e.what() + ")");
    }
    if (!obj.is_object()) {
        throw LoadError("line " + std::to_string(line) + ": record is not a JSON object");
    }
    EventPairInstance inst;
    inst.instance_id = detail::required<std::string>(obj, "instance_id", line);
    inst.doc_id = detail::required<std::string>(obj, "doc_id", line);
    inst.tokens = detail::required<std::vector<std::string>>(obj, "tokens", line);
    for (const char *field : {"trigger1", "trigger2"}) {
        if (!obj.contains(field)) {
            throw LoadError("line " + std::to_string(line) + ": missing field '" + field + "'");
        }
    }
    inst.trigger1 = detail::span_from_json(obj["trigger1"], "trigger1", line);
    inst.trigger2 = detail::span_from_json(obj["trigger2"], "trigger2", line);
    inst.label = detail::required<std::string>(obj, "label", line);
    return inst;
}

inline nlohmann::json to_json(const EventPairInstance &inst) {
    nlohmann::json j;
    j["instance_id"] = inst.instance_id;
    j["doc_id"] = inst.doc_id;
    j["tokens"] = inst.tokens;
    j["trigger1"] = {inst.trigger1.start, inst.trigger1.end};
    j["trigger2"] = {inst.trigger2.start, inst.trigger2.end};
    j["label"] = inst.label;
    return j;
}

/// Reads a canonical JSONL stream. Blank lines are skipped; record order is preserved.
inline Corpus read_corpus(std::istream &in, const RelationSchema &schema, Split split) {
    Corpus corpus{schema.schema_id, split, {}};
    std::string text;
    std::size_t line = 0;
    std::set<std::string> ids;
    while (std::getline(in, text)) {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        auto inst = parse_instance(text, line);
        validate_instance(inst, schema);
        if (!ids.insert(inst.instance_id).second) {
            throw ValidationError("line " + std::to_string(line) + ": duplicate instance_id '" +
                                  inst.instance_id + "'");
        }
        corpus.instances.push_back(std::move(inst));
    }
    return corpus;
}

inline Corpus load_corpus(const std::string &path, const RelationSchema &schema, Split split) {
    std::ifstream in(path);
    if (!in) {
        throw LoadError("cannot open corpus file '" + path + "'");
    }
    return read_corpus(in, schema, split);
}

inline void write_corpus(std::ostream &out, const Corpus &corpus) {
    for (const auto &inst : corpus.instances) {
        out << to_json(inst).dump() << '\n';
    }
}

inline void save_corpus(const std::string &path, const Corpus &corpus) {
    std::ofstream out(path);
    if (!out) {
        throw Error("cannot write corpus file '" + path + "'");
    }
    write_corpus(out, corpus);
}

/// Samples disjoint small train/dev corpora with at most `per_label` instances per label each.
/// Within each label the instances are shuffled under `seed`; the first `per_label` go to
/// train and the next `per_label` to dev. Outputs keep the input's relative order.
inline std::pair<Corpus, Corpus> sample_fewshot(const Corpus &corpus, std::size_t per_label,
                                                std::uint64_t seed) {
    if (corpus.empty()) {
        throw Error("cannot sample a few-shot split from an empty corpus");
    }
    if (per_label < 1) {
        throw Error("per_label must be at least 1");
    }
    std::map<Label, std::vector<std::size_t>> by_label;
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        by_label[corpus.instances[i].label].push_back(i);
    }
    std::vector<bool> to_train(corpus.size(), false);
    std::vector<bool> to_dev(corpus.size(), false);
    for (auto &[label, indices] : by_label) {
        Rng rng(hash_combine(seed, fnv1a(label)));
        rng.shuffle(indices);
        for (std::size_t k = 0; k < indices.size() && k < 2 * per_label; ++k) {
            (k < per_label ? to_train : to_dev)[indices[k]] = true;
        }
    }
    Corpus train{corpus.schema_id, Split::train, {}};
    Corpus dev{corpus.schema_id, Split::dev, {}};
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        if (to_train[i]) train.instances.push_back(corpus.instances[i]);
        if (to_dev[i]) dev.instances.push_back(corpus.instances[i]);
    }
    return {std::move(train), std::move(dev)};
}

/// Splits the corpus into consecutive batches of `batch_size` (last may be smaller).
inline std::vector<Batch> make_batches(const Corpus &corpus, std::size_t batch_size,
                                       std::uint64_t seed, bool shuffle) {
    if (batch_size < 1) {
        throw Error("batch_size must be at least 1");
    }
    std::vector<std::size_t> order(corpus.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    if (shuffle) {
        Rng rng(seed);
        rng.shuffle(order);
    }
    std::vector<Batch> out;
    for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
        Batch batch;
        batch.batch_index = out.size();
        for (std::size_t k = begin; k < order.size() && k < begin + batch_size; ++k) {
            batch.instances.push_back(corpus.instances[order[k]]);
        }
        out.push_back(std::move(batch));
    }
    return out;
}

/// Count of instances per label, in schema order.
inline std::vector<std::size_t> label_counts(const Corpus &corpus, const RelationSchema &schema) {
    std::vector<std::size_t> counts(schema.labels.size(), 0);
    for (const auto &inst : corpus.instances) {
        ++counts[schema.index_of(inst.label)];
    }
    return counts;
}

/// Surface form of a trigger span (tokens joined by a single space).
inline std::string span_text(const std::vector<std::string> &tokens, Span span) {
    std::string out;
    for (std::size_t i = span.start; i < span.end; ++i) {
        if (i > span.start) out += ' ';
        out += tokens[i];
    }
    return out;
}

}  // namespace temprompt

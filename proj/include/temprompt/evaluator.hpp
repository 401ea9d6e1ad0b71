#pragma once

// Metrics and analyses over a trained backend: micro P/R/F1, per-label F1, few-shot
// buckets, representation export and all-pairs temporal graph prediction.

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "temprompt/backend.hpp"
#include "temprompt/corpus.hpp"
#include "temprompt/objectives.hpp"
#include "temprompt/templates.hpp"

namespace temprompt {

enum class MetricMode { strict_micro, vague_excluded };

inline std::string to_string(MetricMode m) {
    return m == MetricMode::strict_micro ? "strict_micro" : "vague_excluded";
}

inline MetricMode parse_metric_mode(const std::string &text) {
    if (text == "strict_micro" || text == "strict") return MetricMode::strict_micro;
    if (text == "vague_excluded") return MetricMode::vague_excluded;
    throw Error("unknown metric mode '" + text + "' (expected strict_micro or vague_excluded)");
}

/// counts[gold][pred] over the schema's label order.
struct ConfusionMatrix {
    std::vector<Label> labels;
    std::vector<std::vector<std::size_t>> counts;

    explicit ConfusionMatrix(std::vector<Label> l = {})
        : labels(std::move(l)), counts(labels.size(), std::vector<std::size_t>(labels.size(), 0)) {}

    void add(std::size_t gold, std::size_t pred) { ++counts.at(gold).at(pred); }

    [[nodiscard]] std::size_t total() const {
        std::size_t n = 0;
        for (const auto &row : counts) for (auto c : row) n += c;
        return n;
    }
};

/// One-vs-rest F1 per label; nullopt for a label with no gold and no predicted instances.
inline std::map<Label, std::optional<double>> per_label_f1(const ConfusionMatrix &confusion) {
    std::map<Label, std::optional<double>> out;
    const auto n = confusion.labels.size();
    for (std::size_t l = 0; l < n; ++l) {
        std::size_t tp = confusion.counts[l][l], gold = 0, pred = 0;
        for (std::size_t k = 0; k < n; ++k) {
            gold += confusion.counts[l][k];
            pred += confusion.counts[k][l];
        }
        if (gold == 0 && pred == 0) {
            out[confusion.labels[l]] = std::nullopt;
        } else {
            out[confusion.labels[l]] = 2.0 * static_cast<double>(tp) / static_cast<double>(gold + pred);
        }
    }
    return out;
}

struct BucketReport {
    struct Bucket {
        std::size_t count = 0;
        double f1 = 0.0;
    };
    Bucket both_unseen;
    Bucket one_unseen;
    Bucket both_seen;
};

struct MetricsReport {
    MetricMode mode = MetricMode::strict_micro;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::map<Label, std::optional<double>> per_label_f1;
    ConfusionMatrix confusion;
    std::optional<BucketReport> buckets;
};

namespace detail {

inline double f1_of(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace detail

/// Metrics from parallel gold/predicted label indices.
///
/// strict_micro: every instance counts, so P = R = F1 = accuracy.
/// vague_excluded: gold-VAGUE instances leave the recall denominator and VAGUE predictions
/// leave the precision denominator (abstentions). Without a VAGUE label it equals strict.
inline MetricsReport compute_metrics(const RelationSchema &schema, std::span<const std::size_t> gold,
                                     std::span<const std::size_t> pred, MetricMode mode) {
    if (gold.size() != pred.size()) throw Error("gold and predicted label counts differ");
    MetricsReport r;
    r.mode = mode;
    r.confusion = ConfusionMatrix(schema.labels);
    for (std::size_t i = 0; i < gold.size(); ++i) r.confusion.add(gold[i], pred[i]);
    r.per_label_f1 = per_label_f1(r.confusion);

    std::optional<std::size_t> vague;
    if (mode == MetricMode::vague_excluded && schema.has_label("VAGUE")) vague = schema.index_of("VAGUE");
    std::size_t correct = 0, pred_den = 0, gold_den = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        const bool gold_counts = !vague || gold[i] != *vague;
        const bool pred_counts = !vague || pred[i] != *vague;
        gold_den += gold_counts;
        pred_den += pred_counts;
        correct += (gold[i] == pred[i] && pred_counts);
    }
    r.precision = pred_den ? static_cast<double>(correct) / static_cast<double>(pred_den) : 0.0;
    r.recall = gold_den ? static_cast<double>(correct) / static_cast<double>(gold_den) : 0.0;
    r.f1 = mode == MetricMode::strict_micro ? r.precision : detail::f1_of(r.precision, r.recall);
    return r;
}

/// Argmax label index per instance (first label wins ties).
inline std::vector<std::size_t> predict_labels(const MaskedLanguageModel &model, const Template &tmpl,
                                               const Corpus &corpus, const BoundVerbalizer &verbalizer) {
    std::vector<std::size_t> out;
    out.reserve(corpus.size());
    for (const auto &inst : corpus.instances) {
        auto prompt = classification_prompt(model, tmpl, inst.tokens, inst.trigger1, inst.trigger2,
                                            verbalizer.schema(), inst.instance_id);
        auto dist = relation_distribution(model.forward(prompt.ids, prompt.mask_indices).logits.front(), verbalizer);
        out.push_back(static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin()));
    }
    return out;
}

inline std::vector<std::size_t> gold_labels(const Corpus &corpus, const RelationSchema &schema) {
    std::vector<std::size_t> out;
    out.reserve(corpus.size());
    for (const auto &inst : corpus.instances) out.push_back(schema.index_of(inst.label));
    return out;
}

inline MetricsReport evaluate(const MaskedLanguageModel &model, const Template &tmpl, const Corpus &corpus,
                              const BoundVerbalizer &verbalizer, MetricMode mode = MetricMode::strict_micro) {
    const auto pred = predict_labels(model, tmpl, corpus, verbalizer);
    return compute_metrics(verbalizer.schema(), gold_labels(corpus, verbalizer.schema()), pred, mode);
}

// ---------------------------------------------------------------------------
// Few-shot buckets
// ---------------------------------------------------------------------------

enum class Bucket { both_unseen, one_unseen, both_seen };

/// Test-instance indices per bucket. Event identity is the lowercased trigger surface form.
struct BucketPartition {
    std::vector<std::size_t> both_unseen;
    std::vector<std::size_t> one_unseen;
    std::vector<std::size_t> both_seen;
};

inline std::string event_key(const EventPairInstance &inst, Span span) {
    std::string s = span_text(inst.tokens, span);
    for (auto &c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

inline BucketPartition bucket_split(const Corpus &test, const Corpus &train) {
    std::set<std::string> seen;
    for (const auto &inst : train.instances) {
        seen.insert(event_key(inst, inst.trigger1));
        seen.insert(event_key(inst, inst.trigger2));
    }
    BucketPartition out;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const auto &inst = test.instances[i];
        const int hits = static_cast<int>(seen.count(event_key(inst, inst.trigger1))) +
                         static_cast<int>(seen.count(event_key(inst, inst.trigger2)));
        (hits == 0 ? out.both_unseen : hits == 1 ? out.one_unseen : out.both_seen).push_back(i);
    }
    return out;
}

/// Strict-micro F1 inside each bucket.
inline BucketReport bucket_report(const BucketPartition &part, std::span<const std::size_t> gold,
                                  std::span<const std::size_t> pred) {
    auto fill = [&](const std::vector<std::size_t> &idx) {
        BucketReport::Bucket b;
        b.count = idx.size();
        std::size_t correct = 0;
        for (auto i : idx) correct += gold[i] == pred[i];
        b.f1 = idx.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(idx.size());
        return b;
    };
    return {fill(part.both_unseen), fill(part.one_unseen), fill(part.both_seen)};
}

inline nlohmann::json to_json(const MetricsReport &r) {
    nlohmann::json j;
    j["mode"] = to_string(r.mode);
    j["precision"] = r.precision;
    j["recall"] = r.recall;
    j["f1"] = r.f1;
    nlohmann::json per_label = nlohmann::json::object();
    for (const auto &[label, f1] : r.per_label_f1) per_label[label] = f1 ? nlohmann::json(*f1) : nlohmann::json(nullptr);
    j["per_label_f1"] = per_label;
    j["confusion"] = {{"labels", r.confusion.labels}, {"counts", r.confusion.counts}};
    if (r.buckets) {
        auto b = [](const BucketReport::Bucket &x) { return nlohmann::json{{"count", x.count}, {"f1", x.f1}}; };
        j["buckets"] = {{"BothUnseen", b(r.buckets->both_unseen)},
                        {"OneUnseen", b(r.buckets->one_unseen)},
                        {"BothSeen", b(r.buckets->both_seen)}};
    } else {
        j["buckets"] = nlohmann::json::object();
    }
    return j;
}

// ---------------------------------------------------------------------------
// Representation export
// ---------------------------------------------------------------------------

/// Writes a header line then one TSV row per instance: instance_id, gold label, and the
/// classification-mask hidden vector. Returns the number of data rows.
inline std::size_t export_representations(const MaskedLanguageModel &model, const Template &tmpl,
                                          const Corpus &corpus, const RelationSchema &schema,
                                          const std::string &path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write representations to '" + path + "'");
    out << "instance_id\tlabel";
    for (std::size_t k = 0; k < model.hidden_dim(); ++k) out << "\th" << k;
    out << '\n';
    out.precision(17);
    for (const auto &inst : corpus.instances) {
        auto prompt = classification_prompt(model, tmpl, inst.tokens, inst.trigger1, inst.trigger2, schema,
                                            inst.instance_id);
        auto h = hidden_at_mask(model, prompt.ids, prompt.mask_indices.front());
        out << inst.instance_id << '\t' << inst.label;
        for (double x : h) out << '\t' << x;
        out << '\n';
    }
    if (!out) throw Error("failed while writing '" + path + "'");
    return corpus.size();
}

// ---------------------------------------------------------------------------
// All-pairs temporal graph
// ---------------------------------------------------------------------------

struct EventMention {
    std::string id;
    Span span;
};

struct GraphInput {
    std::string input_id;
    std::vector<std::string> tokens;
    std::vector<EventMention> events;
};

struct TemporalEdge {
    std::string from;
    std::string to;
    Label relation;
};

struct GraphPrediction {
    std::string input_id;
    std::vector<TemporalEdge> edges;
    std::vector<std::string> notes;
};

/// How a query (ei, ej) is shown to the model when ej precedes ei in the text.
enum class PairOrdering {
    /// Swap into text order, predict, report the inverse label.
    canonical,
    /// Put ei in the first trigger slot as asked, even if it occurs later.
    as_queried,
};

/// Notes for every unordered pair whose two directed relations are not mutual inverses.
inline std::vector<std::string> find_inconsistencies(const std::vector<TemporalEdge> &edges,
                                                     const RelationSchema &schema) {
    std::map<std::pair<std::string, std::string>, Label> rel;
    for (const auto &e : edges) rel[{e.from, e.to}] = e.relation;
    std::vector<std::string> notes;
    for (const auto &e : edges) {
        if (!(e.from < e.to)) continue;
        auto back = rel.find({e.to, e.from});
        if (back == rel.end()) continue;
        if (schema.inverse(e.relation) != back->second) {
            notes.push_back("r(" + e.from + "," + e.to + ")=" + e.relation + " but r(" + e.to + "," + e.from +
                            ")=" + back->second + "; expected " + schema.inverse(e.relation));
        }
    }
    return notes;
}

inline GraphPrediction predict_graph(const MaskedLanguageModel &model, const Template &tmpl, const GraphInput &input,
                                     const BoundVerbalizer &verbalizer,
                                     PairOrdering ordering = PairOrdering::canonical) {
    const auto &schema = verbalizer.schema();
    if (input.events.size() < 2) {
        throw Error("graph prediction needs at least two events, got " + std::to_string(input.events.size()));
    }
    for (const auto &ev : input.events) {
        if (!(ev.span.start < ev.span.end && ev.span.end <= input.tokens.size())) {
            throw ValidationError("event '" + ev.id + "' span out of range");
        }
    }
    GraphPrediction out;
    out.input_id = input.input_id;
    for (std::size_t i = 0; i < input.events.size(); ++i) {
        for (std::size_t j = 0; j < input.events.size(); ++j) {
            if (i == j) continue;
            const auto &a = input.events[i];
            const auto &b = input.events[j];
            const bool reversed = ordering == PairOrdering::canonical && b.span.start < a.span.start;
            const Span first = reversed ? b.span : a.span;
            const Span second = reversed ? a.span : b.span;
            auto prompt = classification_prompt(model, tmpl, input.tokens, first, second, schema,
                                                input.input_id + ":" + a.id + "-" + b.id);
            auto dist = relation_distribution(model.forward(prompt.ids, prompt.mask_indices).logits.front(),
                                              verbalizer);
            const auto best = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
            const auto &label = schema.labels[best];
            out.edges.push_back({a.id, b.id, reversed ? schema.inverse(label) : label});
        }
    }
    out.notes = find_inconsistencies(out.edges, schema);
    return out;
}

/// Reads {"id"?, "tokens": [...], "events": [{"id": str, "span": [s, e]}, ...]}.
inline GraphInput graph_input_from_json(const nlohmann::json &j) {
    try {
        GraphInput g;
        g.input_id = j.value("id", std::string{});
        g.tokens = j.at("tokens").get<std::vector<std::string>>();
        for (const auto &e : j.at("events")) {
            auto span = e.at("span").get<std::vector<std::size_t>>();
            if (span.size() != 2) throw LoadError("event span must be [start, end]");
            g.events.push_back({e.at("id").get<std::string>(), Span{span[0], span[1]}});
        }
        return g;
    } catch (const nlohmann::json::exception &e) {
        throw LoadError(std::string("malformed graph input: ") + e.what());
    }
}

inline nlohmann::json to_json(const GraphPrediction &g) {
    nlohmann::json edges = nlohmann::json::array();
    for (const auto &e : g.edges) edges.push_back({{"from", e.from}, {"to", e.to}, {"relation", e.relation}});
    return {{"id", g.input_id}, {"edges", edges}, {"notes", g.notes}};
}

}  // namespace temprompt

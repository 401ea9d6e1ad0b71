#pragma once

// Cloze template scaffolds, candidate generation by span infilling, top-K selection and
// instantiation of templates into masked prompts.

#include <algorithm>
#include <array>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "temprompt/backend.hpp"
#include "temprompt/corpus.hpp"
#include "temprompt/mock_backend.hpp"
#include "temprompt/random.hpp"
#include "temprompt/verbalizer.hpp"

namespace temprompt {

/// Content slots of a template.
enum class Slot { sentence, trigger1, trigger2, label };

inline constexpr std::size_t filler_count = 5;

/// One of the 12 orderings of {sentence, trigger1, trigger2, label} that keep trigger1
/// before trigger2. Fillers X Y Z M N sit before, between and after the content slots.
struct TemplateScaffold {
    int permutation_id = 0;  // 1..12
    std::array<Slot, 4> order{};

    friend bool operator==(const TemplateScaffold &, const TemplateScaffold &) = default;
};

/// The 12 scaffolds, numbered in the canonical order.
inline std::vector<TemplateScaffold> enumerate_scaffolds() {
    using enum Slot;
    static constexpr std::array<std::array<Slot, 4>, 12> orders{{
        {sentence, label, trigger1, trigger2},
        {label, sentence, trigger1, trigger2},
        {sentence, trigger1, label, trigger2},
        {label, trigger1, sentence, trigger2},
        {trigger1, sentence, label, trigger2},
        {trigger1, label, sentence, trigger2},
        {trigger1, trigger2, label, sentence},
        {trigger1, trigger2, sentence, label},
        {trigger1, sentence, trigger2, label},
        {trigger1, label, trigger2, sentence},
        {sentence, trigger1, trigger2, label},
        {label, trigger1, trigger2, sentence},
    }};
    std::vector<TemplateScaffold> out;
    for (std::size_t i = 0; i < orders.size(); ++i) {
        out.push_back(TemplateScaffold{static_cast<int>(i + 1), orders[i]});
    }
    return out;
}

inline const TemplateScaffold &scaffold_by_id(int permutation_id) {
    static const auto all = enumerate_scaffolds();
    if (permutation_id < 1 || permutation_id > static_cast<int>(all.size())) {
        throw Error("permutation_id must be in 1..12, got " + std::to_string(permutation_id));
    }
    return all[static_cast<std::size_t>(permutation_id - 1)];
}

enum class TemplateSource { generated, manual };

struct Template {
    TemplateScaffold scaffold;
    std::array<std::string, filler_count> fillers;
    TemplateSource source = TemplateSource::generated;
    double joint_score = 0.0;
    std::optional<double> dev_f1;
};

inline const char *placeholder(Slot slot) {
    switch (slot) {
    case Slot::sentence: return "{sentence}";
    case Slot::trigger1: return "{event1}";
    case Slot::trigger2: return "{event2}";
    case Slot::label: return "{mask}";
    }
    return "";
}

/// Human-readable pattern, e.g. "{sentence} Event {event1} happened {mask} to {event2} .".
/// Whitespace-normalized, so it doubles as the dedup key.
inline std::string render_pattern(const Template &t) {
    std::vector<std::string> words;
    auto push_filler = [&](const std::string &f) {
        for (auto &w : split_words(f)) words.push_back(std::move(w));
    };
    for (std::size_t i = 0; i < 4; ++i) {
        push_filler(t.fillers[i]);
        words.emplace_back(placeholder(t.scaffold.order[i]));
    }
    push_filler(t.fillers[4]);
    std::string out;
    for (const auto &w : words) {
        if (!out.empty()) out += ' ';
        out += w;
    }
    return out;
}

/// Parses a manual template written with the placeholders {sentence}, {event1}, {event2}
/// and {mask}, each exactly once, {event1} before {event2}.
inline Template parse_manual_template(const std::string &text) {
    struct Found {
        std::size_t pos;
        Slot slot;
    };
    std::vector<Found> found;
    for (Slot s : {Slot::sentence, Slot::trigger1, Slot::trigger2, Slot::label}) {
        const std::string ph = placeholder(s);
        auto pos = text.find(ph);
        if (pos == std::string::npos || text.find(ph, pos + 1) != std::string::npos) {
            throw Error("manual template must contain " + ph + " exactly once");
        }
        found.push_back({pos, s});
    }
    std::sort(found.begin(), found.end(), [](const Found &a, const Found &b) { return a.pos < b.pos; });
    std::array<Slot, 4> order{};
    for (std::size_t i = 0; i < 4; ++i) order[i] = found[i].slot;
    auto all = enumerate_scaffolds();
    auto it = std::find_if(all.begin(), all.end(), [&](const TemplateScaffold &s) { return s.order == order; });
    if (it == all.end()) {
        throw Error("manual template must place {event1} before {event2}");
    }
    Template t;
    t.scaffold = *it;
    t.source = TemplateSource::manual;
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        t.fillers[i] = text.substr(cursor, found[i].pos - cursor);
        cursor = found[i].pos + std::string(placeholder(found[i].slot)).size();
    }
    t.fillers[4] = text.substr(cursor);
    for (auto &f : t.fillers) {
        std::string norm;
        for (const auto &w : split_words(f)) {
            if (!norm.empty()) norm += ' ';
            norm += w;
        }
        f = norm;
    }
    return t;
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

inline const std::string open_quote = "\xE2\x80\x98";   // U+2018
inline const std::string close_quote = "\xE2\x80\x99";  // U+2019

enum class WordRole { filler, sentence, sentence_trigger, quote, trigger1_slot, trigger2_slot, label_slot, blank };

/// A template rendered against one instance, at word level.
struct RenderedPrompt {
    std::vector<std::string> words;
    std::vector<WordRole> roles;
    Span trigger1_slot;
    Span trigger2_slot;
    Span label_slot;
};

namespace detail {

inline void append(RenderedPrompt &r, const std::string &word, WordRole role) {
    r.words.push_back(word);
    r.roles.push_back(role);
}

inline void append_filler(RenderedPrompt &r, const std::string &text) {
    for (const auto &w : split_words(text)) append(r, w, WordRole::filler);
}

inline Span append_trigger(RenderedPrompt &r, const std::vector<std::string> &tokens, Span span,
                           WordRole role) {
    append(r, open_quote, WordRole::quote);
    const auto begin = r.words.size();
    for (auto i = span.start; i < span.end; ++i) append(r, tokens[i], role);
    const auto end = r.words.size();
    append(r, close_quote, WordRole::quote);
    return Span{begin, end};
}

inline void append_sentence(RenderedPrompt &r, const std::vector<std::string> &tokens, Span t1, Span t2) {
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const bool trig = (i >= t1.start && i < t1.end) || (i >= t2.start && i < t2.end);
        append(r, tokens[i], trig ? WordRole::sentence_trigger : WordRole::sentence);
    }
}

}  // namespace detail

/// Renders the content slots of `scaffold` for one instance, with `filler(i)` producing
/// the text placed in filler position i.
template <typename FillerFn>
RenderedPrompt render_scaffold(const TemplateScaffold &scaffold, const std::vector<std::string> &tokens,
                               Span trigger1, Span trigger2, const std::string &label_word,
                               FillerFn &&filler) {
    RenderedPrompt r;
    for (std::size_t i = 0; i < 4; ++i) {
        filler(r, i);
        switch (scaffold.order[i]) {
        case Slot::sentence: detail::append_sentence(r, tokens, trigger1, trigger2); break;
        case Slot::trigger1:
            r.trigger1_slot = detail::append_trigger(r, tokens, trigger1, WordRole::trigger1_slot);
            break;
        case Slot::trigger2:
            r.trigger2_slot = detail::append_trigger(r, tokens, trigger2, WordRole::trigger2_slot);
            break;
        case Slot::label: {
            const auto begin = r.words.size();
            detail::append(r, label_word, WordRole::label_slot);
            r.label_slot = Span{begin, begin + 1};
            break;
        }
        }
    }
    filler(r, 4);
    return r;
}

inline RenderedPrompt render(const Template &t, const std::vector<std::string> &tokens, Span trigger1,
                             Span trigger2, const std::string &label_word) {
    return render_scaffold(t.scaffold, tokens, trigger1, trigger2, label_word,
                           [&](RenderedPrompt &r, std::size_t i) { detail::append_filler(r, t.fillers[i]); });
}

/// Generation query: fillers replaced by blank sentinels, label slot holding the gold
/// label's answer word.
inline InfillQuery build_infill_query(const TemplateScaffold &scaffold, const EventPairInstance &inst,
                                      const RelationSchema &schema) {
    auto r = render_scaffold(scaffold, inst.tokens, inst.trigger1, inst.trigger2, schema.word_for(inst.label),
                             [](RenderedPrompt &rp, std::size_t i) {
                                 detail::append(rp, blank_sentinel(i), WordRole::blank);
                             });
    return InfillQuery{std::move(r.words)};
}

// ---------------------------------------------------------------------------
// Prompt instances
// ---------------------------------------------------------------------------

enum class MaskMode { rel_cls, ter_e1, ter_e2, rand };

inline std::string to_string(MaskMode m) {
    switch (m) {
    case MaskMode::rel_cls: return "REL_CLS";
    case MaskMode::ter_e1: return "TER_E1";
    case MaskMode::ter_e2: return "TER_E2";
    case MaskMode::rand: return "RAND";
    }
    return "";
}

struct PromptInstance {
    std::vector<TokenId> ids;
    std::vector<std::size_t> mask_indices;
    MaskMode mode = MaskMode::rel_cls;
    std::vector<TokenId> gold;  // aligned with mask_indices
    std::string instance_id;
};

namespace detail {

inline void check_length(const MaskedLanguageModel &model, const PromptInstance &p) {
    if (p.ids.size() > model.max_length()) {
        throw TruncationError("instance '" + p.instance_id + "': prompt has " + std::to_string(p.ids.size()) +
                              " tokens, backend maximum is " + std::to_string(model.max_length()));
    }
}

inline PromptInstance masked_prompt(const MaskedLanguageModel &model, const RenderedPrompt &r, Span span,
                                    MaskMode mode, const std::string &instance_id) {
    const Span spans[] = {span};
    auto enc = mask_positions(model, r.words, spans);
    PromptInstance p{std::move(enc.ids), std::move(enc.mask_indices), mode, std::move(enc.original_ids), instance_id};
    check_length(model, p);
    return p;
}

}  // namespace detail

/// Classification prompt for a pair whose label is unknown. `gold` is left empty.
inline PromptInstance classification_prompt(const MaskedLanguageModel &model, const Template &t,
                                             const std::vector<std::string> &tokens, Span trigger1, Span trigger2,
                                             const RelationSchema &schema, const std::string &instance_id) {
    auto r = render(t, tokens, trigger1, trigger2, schema.word_for(schema.labels.front()));
    auto p = detail::masked_prompt(model, r, r.label_slot, MaskMode::rel_cls, instance_id);
    if (p.mask_indices.size() != 1) {
        throw BindingError("label slot encodes to " + std::to_string(p.mask_indices.size()) + " tokens");
    }
    p.gold.clear();
    return p;
}

/// Token positions RAND mode may mask: everything outside the trigger slots, the
/// sentence's own trigger tokens and the label slot.
inline std::vector<std::size_t> rand_eligible_positions(const RenderedPrompt &r, const std::vector<Span> &word_spans) {
    std::vector<std::size_t> out;
    for (std::size_t w = 0; w < r.words.size(); ++w) {
        switch (r.roles[w]) {
        case WordRole::trigger1_slot:
        case WordRole::trigger2_slot:
        case WordRole::sentence_trigger:
        case WordRole::label_slot:
        case WordRole::blank: continue;
        default: break;
        }
        for (auto t = word_spans[w].start; t < word_spans[w].end; ++t) out.push_back(t);
    }
    return out;
}

/// Turns (template, instance) into a masked prompt for the given mode.
inline PromptInstance instantiate(const MaskedLanguageModel &model, const Template &t, const EventPairInstance &inst,
                                  const RelationSchema &schema, MaskMode mode, std::uint64_t seed = 0) {
    auto r = render(t, inst.tokens, inst.trigger1, inst.trigger2, schema.word_for(inst.label));
    switch (mode) {
    case MaskMode::rel_cls: {
        auto p = detail::masked_prompt(model, r, r.label_slot, mode, inst.instance_id);
        if (p.mask_indices.size() != 1) {
            throw BindingError("label word '" + schema.word_for(inst.label) + "' does not encode to one token");
        }
        return p;
    }
    case MaskMode::ter_e1: return detail::masked_prompt(model, r, r.trigger1_slot, mode, inst.instance_id);
    case MaskMode::ter_e2: return detail::masked_prompt(model, r, r.trigger2_slot, mode, inst.instance_id);
    case MaskMode::rand: {
        auto enc = model.encode(r.words);
        auto eligible = rand_eligible_positions(r, enc.word_spans);
        if (eligible.empty()) {
            throw Error("instance '" + inst.instance_id + "': no token eligible for random masking");
        }
        Rng rng(hash_combine(seed, fnv1a(inst.instance_id)));
        const auto pos = eligible[rng.index(eligible.size())];
        PromptInstance p;
        p.ids = std::move(enc.ids);
        p.gold = {p.ids[pos]};
        p.ids[pos] = model.mask_id();
        p.mask_indices = {pos};
        p.mode = mode;
        p.instance_id = inst.instance_id;
        detail::check_length(model, p);
        return p;
    }
    }
    throw Error("unknown mask mode");
}

// ---------------------------------------------------------------------------
// Candidate generation and selection
// ---------------------------------------------------------------------------

/// Drops templates whose rendered pattern repeats an earlier one; a duplicate with a
/// higher joint score replaces the survivor's score and fillers in place.
inline std::vector<Template> dedup_pool(std::vector<Template> pool) {
    std::vector<Template> out;
    std::map<std::string, std::size_t> seen;
    for (auto &t : pool) {
        auto key = render_pattern(t);
        auto it = seen.find(key);
        if (it == seen.end()) {
            seen.emplace(std::move(key), out.size());
            out.push_back(std::move(t));
        } else if (t.joint_score > out[it->second].joint_score) {
            out[it->second] = std::move(t);
        }
    }
    return out;
}

/// Decodes up to beam_width filler tuples per scaffold by maximizing the fill
/// log-probability summed over `small_train`, then deduplicates the pool.
inline std::vector<Template> generate_candidates(const std::vector<TemplateScaffold> &scaffolds,
                                                 const Corpus &small_train, const RelationSchema &schema,
                                                 const SpanInfiller &infiller, std::size_t beam_width,
                                                 std::size_t max_fill_tokens = 12) {
    if (beam_width < 1) throw Error("beam_width must be at least 1");
    if (small_train.empty()) throw Error("template generation needs a non-empty training sample");
    std::vector<Template> pool;
    for (const auto &scaffold : scaffolds) {
        std::vector<InfillQuery> queries;
        queries.reserve(small_train.size());
        for (const auto &inst : small_train.instances) queries.push_back(build_infill_query(scaffold, inst, schema));
        std::vector<InfillCandidate> candidates;
        try {
            candidates = infiller.infill(queries, beam_width, max_fill_tokens);
        } catch (const std::exception &e) {
            throw Error("infilling failed for scaffold " + std::to_string(scaffold.permutation_id) + ": " + e.what());
        }
        for (auto &c : candidates) {
            if (c.fills.size() != filler_count) {
                throw Error("infiller returned " + std::to_string(c.fills.size()) + " fills for scaffold " +
                            std::to_string(scaffold.permutation_id));
            }
            Template t;
            t.scaffold = scaffold;
            std::copy(c.fills.begin(), c.fills.end(), t.fillers.begin());
            t.source = TemplateSource::generated;
            t.joint_score = c.log_prob;
            pool.push_back(std::move(t));
        }
    }
    return dedup_pool(std::move(pool));
}

/// Joint fill log-probability of an existing template (e.g. a manual one) over `small_train`.
inline double joint_score(const Template &t, const Corpus &small_train, const RelationSchema &schema,
                          const SpanInfiller &infiller) {
    std::vector<InfillQuery> queries;
    for (const auto &inst : small_train.instances) queries.push_back(build_infill_query(t.scaffold, inst, schema));
    return infiller.score(queries, {t.fillers.begin(), t.fillers.end()});
}

/// min(k, pool size) templates by descending dev F1; ties by descending joint score,
/// then pool order.
inline std::vector<Template> select_topk(const std::vector<Template> &pool, std::size_t k = 5) {
    std::vector<std::size_t> order(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (!pool[i].dev_f1) {
            throw Error("template " + std::to_string(i) + " (" + render_pattern(pool[i]) + ") has no dev F1");
        }
        order[i] = i;
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (*pool[a].dev_f1 != *pool[b].dev_f1) return *pool[a].dev_f1 > *pool[b].dev_f1;
        return pool[a].joint_score > pool[b].joint_score;
    });
    order.resize(std::min(k, order.size()));
    std::vector<Template> out;
    for (auto i : order) out.push_back(pool[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Pool file (JSONL)
// ---------------------------------------------------------------------------

inline nlohmann::json to_json(const Template &t) {
    nlohmann::json j;
    j["permutation_id"] = t.scaffold.permutation_id;
    j["fillers"] = std::vector<std::string>(t.fillers.begin(), t.fillers.end());
    j["source"] = t.source == TemplateSource::manual ? "manual" : "generated";
    j["joint_score"] = t.joint_score;
    j["dev_f1"] = t.dev_f1 ? nlohmann::json(*t.dev_f1) : nlohmann::json(nullptr);
    j["pattern"] = render_pattern(t);
    return j;
}

inline Template template_from_json(const nlohmann::json &j) {
    try {
        Template t;
        t.scaffold = scaffold_by_id(j.at("permutation_id").get<int>());
        auto fillers = j.at("fillers").get<std::vector<std::string>>();
        if (fillers.size() != filler_count) throw LoadError("template needs exactly 5 fillers");
        std::copy(fillers.begin(), fillers.end(), t.fillers.begin());
        const auto source = j.at("source").get<std::string>();
        if (source != "manual" && source != "generated") throw LoadError("unknown template source '" + source + "'");
        t.source = source == "manual" ? TemplateSource::manual : TemplateSource::generated;
        t.joint_score = j.at("joint_score").get<double>();
        if (!j.at("dev_f1").is_null()) t.dev_f1 = j.at("dev_f1").get<double>();
        return t;
    } catch (const nlohmann::json::exception &e) {
        throw LoadError(std::string("malformed template record: ") + e.what());
    }
}

struct PoolEntry {
    Template tmpl;
    bool selected = false;
};

inline void save_pool(const std::string &path, const std::vector<PoolEntry> &entries,
                      const std::string &config_hash = {}) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write template pool '" + path + "'");
    for (const auto &e : entries) {
        auto j = to_json(e.tmpl);
        j["selected"] = e.selected;
        if (!config_hash.empty()) j["config_hash"] = config_hash;
        out << j.dump() << '\n';
    }
}

inline std::vector<PoolEntry> load_pool(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open template pool '" + path + "'");
    std::vector<PoolEntry> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error &e) {
            throw LoadError("template pool line " + std::to_string(n) + ": invalid JSON");
        }
        out.push_back({template_from_json(j), j.value("selected", false)});
    }
    return out;
}

/// All words a template family can introduce: fillers, quotes and answer words.
inline std::vector<std::string> template_vocabulary(const std::vector<Template> &templates, const RelationSchema &schema) {
    std::vector<std::string> out{open_quote, close_quote};
    for (const auto &t : templates) {
        for (const auto &f : t.fillers) {
            for (auto &w : split_words(f)) out.push_back(std::move(w));
        }
    }
    for (const auto &label : schema.labels) out.push_back(schema.word_for(label));
    return out;
}

}  // namespace temprompt

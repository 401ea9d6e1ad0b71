#pragma once

// Synthetic event-pair corpora for desk-scale runs. The label of a pair is a function of
// the two triggers' alphabetical order: BEFORE when trigger1 sorts first, AFTER otherwise.

#include <cstdint>
#include <string>
#include <vector>

#include "temprompt/corpus.hpp"
#include "temprompt/random.hpp"

namespace temprompt {

inline const std::vector<std::string> &synthetic_triggers() {
    static const std::vector<std::string> words{
        "arrived", "bought",  "called",  "decided", "elected", "fired",   "gathered", "hired",
        "invited", "joined",  "killed",  "landed",  "moved",   "noticed", "opened",   "paid"};
    return words;
}

struct SyntheticOptions {
    std::size_t pairs = 80;
    std::uint64_t seed = 1;
    std::string id_prefix = "syn";
    Split split = Split::train;
};

/// A corpus under the "matres" schema id using only BEFORE and AFTER.
inline Corpus synthetic_corpus(const SyntheticOptions &opt) {
    static const std::vector<std::string> subjects{"the", "a", "our", "their"};
    static const std::vector<std::string> nouns{"team", "council", "company", "crew", "family", "board"};
    static const std::vector<std::string> objects{"report", "plan", "deal", "house", "guests", "staff"};
    const auto &triggers = synthetic_triggers();
    Rng rng(opt.seed);
    Corpus corpus{"matres", opt.split, {}};
    for (std::size_t i = 0; i < opt.pairs; ++i) {
        std::size_t a = rng.index(triggers.size());
        std::size_t b = rng.index(triggers.size() - 1);
        if (b >= a) ++b;
        EventPairInstance inst;
        inst.instance_id = opt.id_prefix + "-" + std::to_string(i);
        inst.doc_id = opt.id_prefix + "-doc" + std::to_string(i / 10);
        // "<det> <noun> <t1> the <obj> and then <t2> the <obj> ."
        inst.tokens = {subjects[rng.index(subjects.size())], nouns[rng.index(nouns.size())], triggers[a], "the",
                       objects[rng.index(objects.size())], "and", "then", triggers[b], "the",
                       objects[rng.index(objects.size())], "."};
        inst.trigger1 = Span{2, 3};
        inst.trigger2 = Span{7, 8};
        inst.label = triggers[a] < triggers[b] ? "BEFORE" : "AFTER";
        corpus.instances.push_back(std::move(inst));
    }
    return corpus;
}

/// Every word a synthetic corpus can contain.
inline std::vector<std::string> synthetic_vocabulary() {
    std::vector<std::string> out{"the", "a", "our", "their", "team", "council", "company", "crew", "family",
                                 "board", "report", "plan", "deal", "house", "guests", "staff", "and", "then", "."};
    for (const auto &t : synthetic_triggers()) out.push_back(t);
    return out;
}

}  // namespace temprompt

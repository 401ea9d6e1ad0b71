// Writes the synthetic separable corpus (label fixed by trigger lexical order) as JSONL.

#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "temprompt/corpus.hpp"
#include "temprompt/synthetic.hpp"

int main(int argc, char **argv) {
    CLI::App app{"Synthetic event-pair corpus"};
    temprompt::SyntheticOptions opt;
    std::string split = "train";
    std::string out;
    app.add_option("--pairs", opt.pairs, "Number of pairs");
    app.add_option("--seed", opt.seed, "Seed");
    app.add_option("--prefix", opt.id_prefix, "Instance id prefix");
    app.add_option("--split", split, "train, dev or test");
    app.add_option("--out", out, "Output file (stdout when omitted)");
    CLI11_PARSE(app, argc, argv);
    try {
        opt.split = temprompt::parse_split(split);
        auto corpus = temprompt::synthetic_corpus(opt);
        if (out.empty()) {
            temprompt::write_corpus(std::cout, corpus);
        } else {
            temprompt::save_corpus(out, corpus);
        }
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}

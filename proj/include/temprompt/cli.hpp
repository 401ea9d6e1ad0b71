#pragma once

// Command-line workflows: generate-templates, train, eval, predict, export-reprs.
// Exit codes: 0 success, 2 usage or configuration, 3 missing artifact, 4 divergence.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "temprompt/config.hpp"
#include "temprompt/corpus.hpp"
#include "temprompt/evaluator.hpp"
#include "temprompt/mock_backend.hpp"
#include "temprompt/template_search.hpp"
#include "temprompt/templates.hpp"
#include "temprompt/trainer.hpp"

namespace temprompt::cli {

namespace fs = std::filesystem;

enum ExitCode : int { exit_ok = 0, exit_usage = 2, exit_missing = 3, exit_divergence = 4 };

inline constexpr const char *run_root_env = "TEMPROMPT_RUN_ROOT";

class UsageError : public Error {
  public:
    using Error::Error;
};

class MissingArtifactError : public Error {
  public:
    using Error::Error;
};

struct Options {
    std::string command;
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string backend = "mock";
    std::string out;
    bool force = false;
    std::vector<std::string> sets;
    std::vector<std::string> sweeps;
    std::string aux;
    std::string contrastive;
    std::optional<std::size_t> beam_width;
    std::vector<std::string> manual_templates;
    std::size_t template_index = 0;
    std::string checkpoint;
    std::string split;
    std::string mode;
    std::string input;
    std::string pair_order = "canonical";
};

// ---------------------------------------------------------------------------
// Configuration assembly
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json::json_pointer config_pointer(const std::string &key) {
    static const std::map<std::string, std::string> aliases{
        {"tau", "train.tau"},       {"alpha", "train.alpha"},   {"beta", "train.beta"},
        {"lr", "train.learning_rate"}, {"learning_rate", "train.learning_rate"},
        {"batch_size", "train.batch_size"}, {"epochs", "train.epochs"}};
    const auto it = aliases.find(key);
    const auto &path = it == aliases.end() ? key : it->second;
    nlohmann::json::json_pointer ptr;
    std::stringstream parts(path);
    for (std::string part; std::getline(parts, part, '.');) {
        if (part.empty()) throw UsageError("malformed config key '" + key + "'");
        ptr /= part;
    }
    return ptr;
}

inline nlohmann::json parse_value(const std::string &text) {
    auto v = nlohmann::json::parse(text, nullptr, false);
    return v.is_discarded() ? nlohmann::json(text) : v;
}

inline std::pair<std::string, std::string> split_assignment(const std::string &text, const char *flag) {
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw UsageError(std::string(flag) + " expects key=value, got '" + text + "'");
    }
    return {text.substr(0, eq), text.substr(eq + 1)};
}

inline RunConfig with_value(const RunConfig &c, const std::string &key, const nlohmann::json &value) {
    auto j = to_json(c);
    j[config_pointer(key)] = value;
    return run_config_from_json(j);
}

inline bool parse_switch(const std::string &text, const char *flag) {
    if (text == "on" || text == "true" || text == "1") return true;
    if (text == "off" || text == "false" || text == "0") return false;
    throw UsageError(std::string(flag) + " expects on or off, got '" + text + "'");
}

inline std::string json_text(const nlohmann::json &j) { return j.dump(2) + "\n"; }

inline void write_text(const fs::path &path, const std::string &text) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << text;
    if (!out) throw Error("failed while writing '" + path.string() + "'");
}

inline nlohmann::json read_json(const fs::path &path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifactError("cannot open '" + path.string() + "'");
    auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw LoadError("'" + path.string() + "' is not valid JSON");
    return j;
}

}  // namespace detail

/// Config file, then --set overrides, then dedicated flags, then the root seed.
inline RunConfig assemble_config(const Options &o) {
    RunConfig c;
    if (!o.config_path.empty()) {
        if (!fs::exists(o.config_path)) throw UsageError("config file '" + o.config_path + "' does not exist");
        c = load_run_config(o.config_path);
    }
    for (const auto &s : o.sets) {
        auto [k, v] = detail::split_assignment(s, "--set");
        c = detail::with_value(c, k, detail::parse_value(v));
    }
    c.backend = o.backend;
    if (!o.aux.empty()) c.train.aux_mode = parse_aux_mode(o.aux);
    if (!o.contrastive.empty()) c.train.contrastive = detail::parse_switch(o.contrastive, "--contrastive");
    if (o.beam_width) c.search.beam_width = *o.beam_width;
    for (const auto &m : o.manual_templates) c.search.manual_templates.push_back(m);
    if (!o.mode.empty()) c.eval_mode = parse_metric_mode(o.mode);
    apply_root_seed(c, o.seed.value_or(c.seed));
    if (c.backend != "mock") {
        throw UsageError("backend '" + c.backend +
                         "' is not available in this build; external masked-LM adapters implement "
                         "MaskedLanguageModel and SpanInfiller (use --backend mock)");
    }
    c.train.validate();
    return c;
}

inline fs::path run_root(const Options &o, const RunConfig &c) {
    if (!o.out.empty()) return o.out;
    if (const char *env = std::getenv(run_root_env); env && *env) return env;
    if (!c.runs_root.empty()) return c.runs_root;
    return "runs";
}

inline fs::path run_directory(const Options &o, const RunConfig &c) {
    return run_root(o, c) / (config_hash(c) + "-" + std::to_string(c.seed));
}

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

inline Corpus require_corpus(const std::string &path, const char *name, const RelationSchema &schema, Split split) {
    if (path.empty()) throw UsageError(std::string("no ") + name + " data path configured (data." + name + ")");
    if (!fs::exists(path)) throw UsageError(std::string(name) + " data path '" + path + "' does not exist");
    return load_corpus(path, schema, split);
}

inline std::optional<Corpus> optional_corpus(const std::string &path, const RelationSchema &schema, Split split) {
    if (path.empty()) return std::nullopt;
    if (!fs::exists(path)) throw UsageError("data path '" + path + "' does not exist");
    return load_corpus(path, schema, split);
}

/// Mock vocabulary over every word the run can show the model.
inline Vocabulary build_vocabulary(const std::vector<const Corpus *> &corpora, const std::vector<Template> &templates,
                                   const RelationSchema &schema) {
    Vocabulary v;
    for (const auto *c : corpora) {
        for (const auto &inst : c->instances) v.add_all(inst.tokens);
    }
    v.add_all(template_vocabulary(templates, schema));
    for (const auto &p : default_phrase_table()) v.add_all(split_words(p));
    return v;
}

inline void refuse_overwrite(const fs::path &artifact, const Options &o) {
    if (fs::exists(artifact) && !o.force) {
        throw UsageError("'" + artifact.string() +
                         "' already exists for this configuration hash; pass --force to overwrite");
    }
}

/// Selected templates of a pool ordered best first.
inline std::vector<Template> selected_templates(const std::vector<PoolEntry> &pool) {
    std::vector<Template> chosen;
    for (const auto &e : pool) {
        if (e.selected && e.tmpl.dev_f1) chosen.push_back(e.tmpl);
    }
    return select_topk(chosen, chosen.size());
}

inline Template resolve_template(const Options &o, const RunConfig &c, const fs::path &run_dir) {
    if (!o.manual_templates.empty()) return parse_manual_template(o.manual_templates.front());
    fs::path pool_path = c.templates_path;
    if (pool_path.empty()) pool_path = run_dir / "templates.jsonl";
    if (!fs::exists(pool_path)) {
        throw MissingArtifactError("no template: pass --manual-template, set \"templates\" in the config, or run "
                                   "generate-templates first (looked for '" + pool_path.string() + "')");
    }
    auto chosen = selected_templates(load_pool(pool_path.string()));
    if (chosen.empty()) throw MissingArtifactError("template pool '" + pool_path.string() + "' has no selected templates");
    if (o.template_index >= chosen.size()) {
        throw UsageError("--template-index " + std::to_string(o.template_index) + " out of range (pool has " +
                         std::to_string(chosen.size()) + " selected)");
    }
    return chosen[o.template_index];
}

struct LoadedRun {
    fs::path run_dir;
    RunConfig config;
    std::string config_hash;
    Template tmpl;
    MockMaskedLM model;
};

inline LoadedRun load_run(const Options &o) {
    if (o.checkpoint.empty()) throw UsageError("--checkpoint is required");
    fs::path dir = o.checkpoint;
    if (!fs::exists(dir)) throw MissingArtifactError("checkpoint '" + dir.string() + "' does not exist");
    if (!fs::exists(dir / "run.json") && fs::exists(dir.parent_path() / "run.json")) dir = dir.parent_path();
    if (!fs::exists(dir / "run.json")) throw MissingArtifactError("no run.json in checkpoint '" + dir.string() + "'");
    if (!fs::exists(dir / "checkpoint" / "params.bin")) {
        throw MissingArtifactError("checkpoint parameters missing under '" + dir.string() + "'");
    }
    if (o.backend != "mock") throw UsageError("backend '" + o.backend + "' is not available in this build");
    const auto meta = detail::read_json(dir / "run.json");
    try {
        auto config = run_config_from_json(meta.at("config"));
        if (!o.mode.empty()) config.eval_mode = parse_metric_mode(o.mode);
        return {dir, config, meta.at("config_hash").get<std::string>(), template_from_json(meta.at("template")),
                MockMaskedLM::load(dir / "checkpoint")};
    } catch (const nlohmann::json::exception &e) {
        throw LoadError("malformed run.json in '" + dir.string() + "': " + e.what());
    }
}

inline nlohmann::json metrics_artifact(const MetricsReport &r, const std::string &hash, const std::string &split) {
    auto j = to_json(r);
    j["config_hash"] = hash;
    j["split"] = split;
    return j;
}

inline MetricsReport evaluate_with_buckets(const MaskedLanguageModel &model, const Template &tmpl, const Corpus &corpus,
                                           const BoundVerbalizer &bound, MetricMode mode, const Corpus *train_set) {
    const auto pred = predict_labels(model, tmpl, corpus, bound);
    const auto gold = gold_labels(corpus, bound.schema());
    auto report = compute_metrics(bound.schema(), gold, pred, mode);
    if (train_set) report.buckets = bucket_report(bucket_split(corpus, *train_set), gold, pred);
    return report;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline int cmd_generate_templates(const Options &o, std::ostream &out) {
    const auto c = assemble_config(o);
    const auto schema = c.schema();
    const auto hash = config_hash(c);
    const auto train_set = require_corpus(c.train_path, "train", schema, Split::train);
    const auto run_dir = run_directory(o, c);
    const auto pool_path = run_dir / "templates.jsonl";
    refuse_overwrite(pool_path, o);

    auto [small_train, small_dev] = sample_fewshot(train_set, c.search.per_label, derive_seed(c.seed, "fewshot"));
    MockInfillerConfig infiller_config;
    infiller_config.seed = derive_seed(c.seed, "infiller");
    MockInfiller infiller(infiller_config);

    auto pool = generate_candidates(enumerate_scaffolds(), small_train, schema, infiller, c.search.beam_width,
                                    c.search.max_fill_tokens);
    for (const auto &text : c.search.manual_templates) {
        auto t = parse_manual_template(text);
        t.joint_score = joint_score(t, small_train, schema, infiller);
        pool.push_back(std::move(t));
    }
    pool = dedup_pool(std::move(pool));

    MockMaskedLM model(build_vocabulary({&small_train, &small_dev}, pool, schema), c.mock);
    const auto bound = bind_to_backend(schema, model);
    auto search_config = c.train;
    search_config.epochs = c.search.epochs;
    pool = score_templates(std::move(pool), small_train, small_dev, model, bound, search_config);

    std::set<std::string> chosen;
    for (const auto &t : select_topk(pool, c.search.top_k)) chosen.insert(render_pattern(t));
    std::vector<PoolEntry> entries;
    for (auto &t : pool) {
        const bool selected = chosen.count(render_pattern(t)) > 0;
        entries.push_back({std::move(t), selected});
    }
    fs::create_directories(run_dir);
    save_pool(pool_path.string(), entries, hash);

    nlohmann::json summary{{"command", "generate-templates"},
                           {"config_hash", hash},
                           {"pool", pool_path.string()},
                           {"candidates", entries.size()},
                           {"selected", nlohmann::json::array()}};
    for (const auto &t : selected_templates(entries)) {
        summary["selected"].push_back({{"pattern", render_pattern(t)}, {"dev_f1", *t.dev_f1}});
    }
    out << summary.dump() << '\n';
    return exit_ok;
}

inline nlohmann::json train_one(const Options &o, const RunConfig &c, std::ostream &out) {
    const auto schema = c.schema();
    const auto hash = config_hash(c);
    const auto train_set = require_corpus(c.train_path, "train", schema, Split::train);
    const auto dev_set = require_corpus(c.dev_path, "dev", schema, Split::dev);
    const auto test_set = optional_corpus(c.test_path, schema, Split::test);
    const auto run_dir = run_directory(o, c);
    refuse_overwrite(run_dir / "run.json", o);
    const auto tmpl = resolve_template(o, c, run_dir);

    std::vector<const Corpus *> corpora{&train_set, &dev_set};
    if (test_set) corpora.push_back(&*test_set);
    MockMaskedLM model(build_vocabulary(corpora, {tmpl}, schema), c.mock);
    const auto bound = bind_to_backend(schema, model);

    auto [checkpoint, history] = train(model, tmpl, train_set, dev_set, bound, c.train, hash);

    fs::create_directories(run_dir);
    model.save(run_dir / "checkpoint");
    std::string lines;
    for (const auto &s : history.steps) lines += to_json(s).dump() + "\n";
    detail::write_text(run_dir / "history.jsonl", lines);
    detail::write_text(run_dir / "metrics_dev.json",
                       detail::json_text(metrics_artifact(checkpoint.dev_metrics, hash, "dev")));

    nlohmann::json summary{{"command", "train"},
                           {"config_hash", hash},
                           {"run_dir", run_dir.string()},
                           {"best_epoch", checkpoint.epoch},
                           {"dev_f1", checkpoint.dev_metrics.f1}};
    if (test_set) {
        auto test_report = evaluate_with_buckets(model, tmpl, *test_set, bound, c.eval_mode, &train_set);
        detail::write_text(run_dir / "metrics_test.json",
                           detail::json_text(metrics_artifact(test_report, hash, "test")));
        summary["test_f1"] = test_report.f1;
    }
    nlohmann::json epochs = nlohmann::json::array();
    for (const auto &e : history.epochs) {
        epochs.push_back({{"epoch", e.epoch}, {"mean_l_tre", e.mean_l_tre}, {"dev_f1", e.dev_f1}});
    }
    nlohmann::json meta{{"config", to_json(c)},
                        {"config_hash", hash},
                        {"seed", c.seed},
                        {"template", to_json(tmpl)},
                        {"best_epoch", checkpoint.epoch},
                        {"snapshot_id", checkpoint.snapshot_id},
                        {"epochs", epochs}};
    detail::write_text(run_dir / "run.json", detail::json_text(meta));
    out << summary.dump() << '\n';
    return summary;
}

inline int cmd_train(const Options &o, std::ostream &out) {
    const auto base = assemble_config(o);
    if (o.sweeps.empty()) {
        train_one(o, base, out);
        return exit_ok;
    }
    if (o.sweeps.size() > 1) throw UsageError("--sweep takes one parameter per invocation");
    const auto [key, list] = detail::split_assignment(o.sweeps.front(), "--sweep");
    std::vector<std::string> values;
    std::stringstream parts(list);
    for (std::string v; std::getline(parts, v, ',');) {
        if (!v.empty()) values.push_back(v);
    }
    if (values.empty()) throw UsageError("--sweep " + key + " has no values");

    nlohmann::json runs = nlohmann::json::array();
    for (const auto &v : values) {
        auto c = detail::with_value(base, key, detail::parse_value(v));
        apply_root_seed(c, base.seed);
        c.train.validate();
        auto summary = train_one(o, c, out);
        summary["value"] = detail::parse_value(v);
        runs.push_back(std::move(summary));
    }
    const auto report_path =
        run_root(o, base) / ("sweep-" + key + "-" + config_hash(base) + "-" + std::to_string(base.seed) + ".json");
    nlohmann::json report{{"parameter", key}, {"base_config_hash", config_hash(base)}, {"runs", runs}};
    fs::create_directories(report_path.parent_path());
    detail::write_text(report_path, detail::json_text(report));
    out << nlohmann::json{{"command", "sweep"}, {"report", report_path.string()}}.dump() << '\n';
    return exit_ok;
}

inline fs::path artifact_dir(const Options &o, const LoadedRun &run) {
    fs::path dir = o.out.empty() ? run.run_dir : fs::path(o.out);
    fs::create_directories(dir);
    return dir;
}

inline int cmd_eval(const Options &o, std::ostream &out) {
    auto run = load_run(o);
    const auto schema = run.config.schema();
    const auto split = parse_split(o.split.empty() ? "test" : o.split);
    const auto &path = split == Split::train ? run.config.train_path
                       : split == Split::dev ? run.config.dev_path
                                             : run.config.test_path;
    const auto corpus = require_corpus(path, to_string(split).c_str(), schema, split);
    const auto train_set = optional_corpus(split == Split::train ? std::string{} : run.config.train_path, schema,
                                           Split::train);
    const auto bound = bind_to_backend(schema, run.model);
    auto report = evaluate_with_buckets(run.model, run.tmpl, corpus, bound, run.config.eval_mode,
                                        train_set ? &*train_set : nullptr);
    const auto j = metrics_artifact(report, run.config_hash, to_string(split));
    const auto path_out =
        artifact_dir(o, run) / ("eval_" + to_string(split) + "_" + to_string(run.config.eval_mode) + ".json");
    detail::write_text(path_out, detail::json_text(j));
    out << j.dump() << '\n';
    return exit_ok;
}

inline std::vector<GraphInput> read_graph_inputs(const std::string &path) {
    if (path.empty()) throw UsageError("--input is required");
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open input '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    std::vector<GraphInput> inputs;
    auto whole = nlohmann::json::parse(buf.str(), nullptr, false);
    if (!whole.is_discarded()) {
        if (whole.is_array()) {
            for (const auto &j : whole) inputs.push_back(graph_input_from_json(j));
        } else {
            inputs.push_back(graph_input_from_json(whole));
        }
        return inputs;
    }
    std::istringstream lines(buf.str());
    std::size_t n = 0;
    for (std::string line; std::getline(lines, line);) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded()) throw LoadError("input line " + std::to_string(n) + ": invalid JSON");
        inputs.push_back(graph_input_from_json(j));
    }
    return inputs;
}

inline int cmd_predict(const Options &o, std::ostream &out) {
    auto run = load_run(o);
    const auto inputs = read_graph_inputs(o.input);
    PairOrdering ordering;
    if (o.pair_order == "canonical") ordering = PairOrdering::canonical;
    else if (o.pair_order == "as_queried") ordering = PairOrdering::as_queried;
    else throw UsageError("--pair-order expects canonical or as_queried");
    const auto bound = bind_to_backend(run.config.schema(), run.model);
    std::string lines;
    for (const auto &g : inputs) {
        auto j = to_json(predict_graph(run.model, run.tmpl, g, bound, ordering));
        j["config_hash"] = run.config_hash;
        lines += j.dump() + "\n";
    }
    if (!o.out.empty()) detail::write_text(artifact_dir(o, run) / "predictions.jsonl", lines);
    out << lines;
    return exit_ok;
}

inline int cmd_export_reprs(const Options &o, std::ostream &out) {
    auto run = load_run(o);
    const auto schema = run.config.schema();
    const auto split = parse_split(o.split.empty() ? "dev" : o.split);
    const auto &path = split == Split::train ? run.config.train_path
                       : split == Split::dev ? run.config.dev_path
                                             : run.config.test_path;
    const auto corpus = require_corpus(path, to_string(split).c_str(), schema, split);
    const auto dir = artifact_dir(o, run);
    const auto tsv = dir / ("reprs_" + to_string(split) + ".tsv");
    const auto rows = export_representations(run.model, run.tmpl, corpus, schema, tsv.string());
    nlohmann::json meta{{"config_hash", run.config_hash}, {"split", to_string(split)}, {"rows", rows},
                        {"hidden_dim", run.model.hidden_dim()}, {"file", tsv.filename().string()}};
    detail::write_text(dir / ("reprs_" + to_string(split) + ".meta.json"), detail::json_text(meta));
    out << nlohmann::json{{"command", "export-reprs"}, {"file", tsv.string()}, {"rows", rows}}.dump() << '\n';
    return exit_ok;
}

// ---------------------------------------------------------------------------
// Entry point
// ---------------------------------------------------------------------------

inline void add_global_flags(CLI::App &app, Options &o) {
    app.add_option("--config", o.config_path, "Run configuration (JSON or key = value lines)");
    app.add_option("--seed", o.seed, "Root seed");
    app.add_option("--backend", o.backend, "Model backend")->check(CLI::IsMember({"mock", "external"}));
    app.add_option("--out", o.out, "Output directory (run root for generate-templates and train)");
    app.add_flag("--force", o.force, "Overwrite artifacts of an identical configuration");
    app.add_option("--set", o.sets, "Override a config value, e.g. train.epochs=3");
}

inline int run(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
    Options o;
    CLI::App app{"Prompt-based temporal relation extraction"};
    app.require_subcommand(1);
    add_global_flags(app, o);

    auto *gen = app.add_subcommand("generate-templates", "Generate, score and select cloze templates");
    gen->add_option("--beam-width", o.beam_width, "Infilling beam width")->check(CLI::PositiveNumber);
    gen->add_option("--manual-template", o.manual_templates, "Extra template scored with the generated ones");

    auto *tr = app.add_subcommand("train", "Fine-tune with the multi-task objective");
    tr->add_option("--aux", o.aux, "Auxiliary objective")->check(CLI::IsMember({"ter", "rand", "off"}));
    tr->add_option("--contrastive", o.contrastive, "Contrastive loss (on or off)");
    tr->add_option("--sweep", o.sweeps, "One run per value, e.g. tau=0.05,0.1,0.2,0.4");
    tr->add_option("--manual-template", o.manual_templates, "Train with this template instead of a pool");
    tr->add_option("--template-index", o.template_index, "Rank of the pool template to train with");
    tr->add_option("--mode", o.mode, "Test metric mode");

    auto *ev = app.add_subcommand("eval", "Evaluate a checkpoint");
    ev->add_option("--checkpoint", o.checkpoint, "Run directory")->required();
    ev->add_option("--split", o.split, "train, dev or test (default test)");
    ev->add_option("--mode", o.mode, "strict_micro or vague_excluded");

    auto *pr = app.add_subcommand("predict", "All-pairs temporal graph for raw inputs");
    pr->add_option("--checkpoint", o.checkpoint, "Run directory")->required();
    pr->add_option("--input", o.input, "JSON or JSONL graph inputs")->required();
    pr->add_option("--pair-order", o.pair_order, "canonical or as_queried");

    auto *ex = app.add_subcommand("export-reprs", "Export classification-mask representations");
    ex->add_option("--checkpoint", o.checkpoint, "Run directory")->required();
    ex->add_option("--split", o.split, "train, dev or test (default dev)");

    for (auto *sub : {gen, tr, ev, pr, ex}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &) {
        out << app.help();
        return exit_ok;
    } catch (const CLI::CallForAllHelp &) {
        out << app.help("", CLI::AppFormatMode::All);
        return exit_ok;
    } catch (const CLI::ParseError &e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    }
    o.command = app.get_subcommands().front()->get_name();

    try {
        if (o.command == "generate-templates") return cmd_generate_templates(o, out);
        if (o.command == "train") return cmd_train(o, out);
        if (o.command == "eval") return cmd_eval(o, out);
        if (o.command == "predict") return cmd_predict(o, out);
        return cmd_export_reprs(o, out);
    } catch (const DivergenceError &e) {
        err << "error: training diverged: " << e.what() << " (last finite step " << e.last_finite_step() << ")\n";
        return exit_divergence;
    } catch (const MissingArtifactError &e) {
        err << "error: " << e.what() << '\n';
        return exit_missing;
    } catch (const Error &e) {
        err << "error: " << e.what() << '\n';
        return exit_usage;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace temprompt::cli

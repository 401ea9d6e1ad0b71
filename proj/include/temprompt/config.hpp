#pragma once

// Run configuration: paths, backend selection, schema, training and search settings.
// Files are JSON objects or "dotted.key = value" lines.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "temprompt/errors.hpp"
#include "temprompt/evaluator.hpp"
#include "temprompt/mock_backend.hpp"
#include "temprompt/random.hpp"
#include "temprompt/trainer.hpp"
#include "temprompt/verbalizer.hpp"

namespace temprompt {

struct SearchConfig {
    std::size_t beam_width = 200;
    std::size_t top_k = 5;
    std::size_t per_label = 16;
    std::size_t epochs = 10;
    std::size_t max_fill_tokens = 12;
    std::vector<std::string> manual_templates;
};

struct RunConfig {
    std::string schema_id = "matres";
    nlohmann::json verbalizer_overrides = nlohmann::json::object();
    std::string train_path;
    std::string dev_path;
    std::string test_path;
    std::string templates_path;
    std::string runs_root;
    std::string backend = "mock";
    MetricMode eval_mode = MetricMode::strict_micro;
    std::uint64_t seed = 42;
    TrainConfig train;
    SearchConfig search;
    MockModelConfig mock;

    [[nodiscard]] RelationSchema schema() const {
        auto s = builtin_schema(schema_id);
        return verbalizer_overrides.empty() ? s : with_overrides(s, verbalizer_overrides);
    }
};

inline nlohmann::json to_json(const SearchConfig &s) {
    return {{"beam_width", s.beam_width},
            {"top_k", s.top_k},
            {"per_label", s.per_label},
            {"epochs", s.epochs},
            {"max_fill_tokens", s.max_fill_tokens},
            {"manual_templates", s.manual_templates}};
}

inline nlohmann::json to_json(const RunConfig &c) {
    return {{"schema", c.schema_id},
            {"verbalizer", c.verbalizer_overrides},
            {"data", {{"train", c.train_path}, {"dev", c.dev_path}, {"test", c.test_path}}},
            {"templates", c.templates_path},
            {"runs_root", c.runs_root},
            {"backend", c.backend},
            {"eval_mode", to_string(c.eval_mode)},
            {"seed", c.seed},
            {"train", to_json(c.train)},
            {"search", to_json(c.search)},
            {"mock", to_json(c.mock)}};
}

namespace detail {

inline std::string resolve(const std::string &path, const std::filesystem::path &base) {
    if (path.empty() || std::filesystem::path(path).is_absolute()) return path;
    return std::filesystem::absolute(base / path).lexically_normal().string();
}

}  // namespace detail

/// Relative paths are resolved against `base` (the working directory when empty).
inline RunConfig run_config_from_json(const nlohmann::json &j, const std::filesystem::path &base = {}) {
    if (!j.is_object()) throw LoadError("run config must be an object");
    RunConfig c;
    try {
        c.schema_id = j.value("schema", c.schema_id);
        if (j.contains("verbalizer")) c.verbalizer_overrides = j.at("verbalizer");
        if (j.contains("data")) {
            const auto &d = j.at("data");
            c.train_path = detail::resolve(d.value("train", std::string{}), base);
            c.dev_path = detail::resolve(d.value("dev", std::string{}), base);
            c.test_path = detail::resolve(d.value("test", std::string{}), base);
        }
        c.templates_path = detail::resolve(j.value("templates", std::string{}), base);
        c.runs_root = detail::resolve(j.value("runs_root", std::string{}), base);
        c.backend = j.value("backend", c.backend);
        c.eval_mode = parse_metric_mode(j.value("eval_mode", to_string(c.eval_mode)));
        c.seed = j.value("seed", c.seed);
        if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
        if (j.contains("search")) {
            const auto &s = j.at("search");
            c.search.beam_width = s.value("beam_width", c.search.beam_width);
            c.search.top_k = s.value("top_k", c.search.top_k);
            c.search.per_label = s.value("per_label", c.search.per_label);
            c.search.epochs = s.value("epochs", c.search.epochs);
            c.search.max_fill_tokens = s.value("max_fill_tokens", c.search.max_fill_tokens);
            c.search.manual_templates = s.value("manual_templates", c.search.manual_templates);
        }
        if (j.contains("mock")) c.mock = mock_model_config_from_json(j.at("mock"));
    } catch (const nlohmann::json::exception &e) {
        throw LoadError(std::string("invalid run config: ") + e.what());
    }
    return c;
}

/// Parses "a.b.c = value" lines into a nested object. Values are read as JSON when they
/// parse, otherwise as strings. Blank lines and lines starting with '#' are skipped.
inline nlohmann::json parse_key_values(std::istream &in) {
    nlohmann::json root = nlohmann::json::object();
    std::string line;
    std::size_t n = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string{};
        return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
    };
    while (std::getline(in, line)) {
        ++n;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw LoadError("config line " + std::to_string(n) + ": expected key = value");
        const auto key = trim(line.substr(0, eq));
        const auto text = trim(line.substr(eq + 1));
        if (key.empty()) throw LoadError("config line " + std::to_string(n) + ": empty key");
        auto value = nlohmann::json::parse(text, nullptr, false);
        if (value.is_discarded()) value = text;
        nlohmann::json::json_pointer ptr;
        std::stringstream parts(key);
        for (std::string part; std::getline(parts, part, '.');) ptr /= part;
        root[ptr] = value;
    }
    return root;
}

inline RunConfig load_run_config(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw LoadError("cannot open config '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    const auto text = buf.str();
    const auto first = text.find_first_not_of(" \t\r\n");
    nlohmann::json j;
    if (first != std::string::npos && text[first] == '{') {
        j = nlohmann::json::parse(text, nullptr, false);
        if (j.is_discarded()) throw LoadError("config '" + path + "' is not valid JSON");
    } else {
        std::istringstream lines(text);
        j = parse_key_values(lines);
    }
    return run_config_from_json(j, std::filesystem::path(path).parent_path());
}

/// Identity of a configuration independent of key order, the root seed and the output
/// location (16 hex digits).
inline std::string config_hash(const RunConfig &c) {
    auto j = to_json(c);
    j.erase("seed");
    j.erase("runs_root");
    j["train"].erase("seed");
    j["mock"].erase("seed");
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
    return buf;
}

/// Splits the root seed into the per-component seeds.
inline void apply_root_seed(RunConfig &c, std::uint64_t seed) {
    c.seed = seed;
    c.train.seed = derive_seed(seed, "train");
    c.mock.seed = derive_seed(seed, "model");
}

}  // namespace temprompt

#pragma once

// Deterministic desk-scale backends.
//
// MockMaskedLM is a one-layer hashed-feature model: the hidden vector at position p is
//   h = tanh(c(p) + sum_f E[f])
// where f ranges over hashed (relative offset, token) features of the surrounding window
// and c(p) is a fixed seeded vector keyed by the window contents and p. Vocabulary logits
// are z = O h + b. E, O and b are trainable, so gradient descent can fit small datasets.
//
// MockInfiller fills blank i from a fixed phrase table. Blanks are scored independently,
// so joint decoding is exactly enumerable.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "temprompt/backend.hpp"
#include "temprompt/random.hpp"

namespace temprompt {

inline std::string ascii_lower(std::string s) {
    for (auto &c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

/// Splits on ASCII whitespace.
inline std::vector<std::string> split_words(const std::string &text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    std::string w;
    while (in >> w) out.push_back(w);
    return out;
}

/// Word-level vocabulary with optional "##" continuation pieces.
class Vocabulary {
  public:
    static constexpr TokenId pad = 0;
    static constexpr TokenId unk = 1;
    static constexpr TokenId mask = 2;

    Vocabulary() : words_{"[PAD]", "[UNK]", "[MASK]"} {
        for (TokenId i = 0; i < 3; ++i) index_.emplace(words_[i], i);
    }

    /// Adds a (lowercased) entry if absent and returns its id.
    TokenId add(const std::string &word) {
        auto key = ascii_lower(word);
        auto [it, inserted] = index_.emplace(key, static_cast<TokenId>(words_.size()));
        if (inserted) words_.push_back(key);
        return it->second;
    }

    void add_all(const std::vector<std::string> &words) {
        for (const auto &w : words) add(w);
    }

    [[nodiscard]] std::optional<TokenId> find(const std::string &entry) const {
        auto it = index_.find(entry);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    [[nodiscard]] std::size_t size() const noexcept { return words_.size(); }
    [[nodiscard]] const std::string &text(TokenId id) const { return words_.at(static_cast<std::size_t>(id)); }
    [[nodiscard]] const std::vector<std::string> &entries() const noexcept { return words_; }

    /// Whole-word lookup first, then greedy longest-match word pieces; [UNK] if neither
    /// covers the word. An empty word yields no tokens.
    void tokenize_word(const std::string &word, std::vector<TokenId> &out) const {
        if (word.empty()) return;
        if (word == "[MASK]") {
            out.push_back(mask);
            return;
        }
        const auto lower = ascii_lower(word);
        if (auto id = find(lower)) {
            out.push_back(*id);
            return;
        }
        std::vector<TokenId> pieces;
        std::size_t start = 0;
        while (start < lower.size()) {
            std::optional<TokenId> match;
            std::size_t end = lower.size();
            for (; end > start; --end) {
                auto piece = lower.substr(start, end - start);
                if (start > 0) piece = "##" + piece;
                if ((match = find(piece))) break;
            }
            if (!match) {
                out.push_back(unk);
                return;
            }
            pieces.push_back(*match);
            start = end;
        }
        out.insert(out.end(), pieces.begin(), pieces.end());
    }

  private:
    std::vector<std::string> words_;
    std::unordered_map<std::string, TokenId> index_;
};

struct MockModelConfig {
    std::uint64_t seed = 17;
    std::size_t hidden_dim = 16;
    std::size_t window = 6;
    std::size_t feature_buckets = 4096;
    double init_scale = 0.1;
    double context_scale = 0.1;
    std::size_t max_length = 512;
    double learning_rate_scale = 1000.0;
};

inline nlohmann::json to_json(const MockModelConfig &c) {
    return {{"seed", c.seed},
            {"hidden_dim", c.hidden_dim},
            {"window", c.window},
            {"feature_buckets", c.feature_buckets},
            {"init_scale", c.init_scale},
            {"context_scale", c.context_scale},
            {"max_length", c.max_length},
            {"learning_rate_scale", c.learning_rate_scale}};
}

inline MockModelConfig mock_model_config_from_json(const nlohmann::json &j) {
    MockModelConfig c;
    c.seed = j.value("seed", c.seed);
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.window = j.value("window", c.window);
    c.feature_buckets = j.value("feature_buckets", c.feature_buckets);
    c.init_scale = j.value("init_scale", c.init_scale);
    c.context_scale = j.value("context_scale", c.context_scale);
    c.max_length = j.value("max_length", c.max_length);
    c.learning_rate_scale = j.value("learning_rate_scale", c.learning_rate_scale);
    if (c.hidden_dim == 0 || c.feature_buckets == 0) {
        throw Error("mock backend needs hidden_dim > 0 and feature_buckets > 0");
    }
    return c;
}

class MockMaskedLM final : public MaskedLanguageModel {
  public:
    MockMaskedLM(Vocabulary vocab, MockModelConfig config)
        : vocab_(std::move(vocab)), config_(config) {
        const auto d = config_.hidden_dim;
        features_offset_ = 0;
        output_offset_ = config_.feature_buckets * d;
        bias_offset_ = output_offset_ + vocab_.size() * d;
        params_.assign(bias_offset_ + vocab_.size(), 0.0);
        grads_.assign(params_.size(), 0.0);
        for (std::size_t i = 0; i < bias_offset_; ++i) {
            params_[i] = config_.init_scale * normal_from_hash(hash_values(config_.seed, 0x1417, i));
        }
    }

    [[nodiscard]] const Vocabulary &vocabulary() const noexcept { return vocab_; }
    [[nodiscard]] const MockModelConfig &config() const noexcept { return config_; }

    [[nodiscard]] Encoding encode(std::span<const std::string> words) const override {
        Encoding enc;
        enc.word_spans.reserve(words.size());
        for (const auto &w : words) {
            const auto begin = enc.ids.size();
            vocab_.tokenize_word(w, enc.ids);
            enc.word_spans.push_back(Span{begin, enc.ids.size()});
        }
        return enc;
    }

    [[nodiscard]] TokenId mask_id() const override { return Vocabulary::mask; }
    [[nodiscard]] std::optional<TokenId> unknown_id() const override { return Vocabulary::unk; }
    [[nodiscard]] std::size_t vocab_size() const override { return vocab_.size(); }
    [[nodiscard]] std::size_t hidden_dim() const override { return config_.hidden_dim; }
    [[nodiscard]] std::size_t max_length() const override { return config_.max_length; }
    [[nodiscard]] std::string token_text(TokenId id) const override { return vocab_.text(id); }
    [[nodiscard]] double learning_rate_scale() const override { return config_.learning_rate_scale; }

    [[nodiscard]] ForwardOutput forward(std::span<const TokenId> ids,
                                        std::span<const std::size_t> positions) const override {
        ForwardOutput out;
        out.logits.reserve(positions.size());
        out.hidden.reserve(positions.size());
        for (auto p : positions) {
            auto h = hidden(ids, p);
            out.logits.push_back(logits(h));
            out.hidden.push_back(std::move(h));
        }
        return out;
    }

    void backward(std::span<const TokenId> ids, std::span<const std::size_t> positions,
                  const std::vector<std::vector<double>> &d_logits,
                  const std::vector<std::vector<double>> &d_hidden) override {
        const auto d = config_.hidden_dim;
        const auto vocab = vocab_.size();
        for (std::size_t q = 0; q < positions.size(); ++q) {
            const auto p = positions[q];
            const auto h = hidden(ids, p);
            std::vector<double> dh(d, 0.0);
            if (q < d_hidden.size() && !d_hidden[q].empty()) dh = d_hidden[q];
            if (q < d_logits.size() && !d_logits[q].empty()) {
                const auto &dz = d_logits[q];
                for (std::size_t v = 0; v < vocab; ++v) {
                    if (dz[v] == 0.0) continue;
                    const double *o = &params_[output_offset_ + v * d];
                    double *go = &grads_[output_offset_ + v * d];
                    for (std::size_t k = 0; k < d; ++k) {
                        go[k] += dz[v] * h[k];
                        dh[k] += dz[v] * o[k];
                    }
                    grads_[bias_offset_ + v] += dz[v];
                }
            }
            for (std::size_t k = 0; k < d; ++k) dh[k] *= 1.0 - h[k] * h[k];
            for (auto f : features(ids, p)) {
                double *ge = &grads_[features_offset_ + f * d];
                for (std::size_t k = 0; k < d; ++k) ge[k] += dh[k];
            }
        }
    }

    [[nodiscard]] std::span<double> parameters() override { return params_; }
    [[nodiscard]] std::span<const double> parameters() const override { return params_; }
    [[nodiscard]] std::span<double> gradients() override { return grads_; }
    void zero_grad() override { std::fill(grads_.begin(), grads_.end(), 0.0); }

    /// Writes vocab.txt, mock_config.json and params.bin into `dir`.
    void save(const std::filesystem::path &dir) const {
        std::filesystem::create_directories(dir);
        {
            std::ofstream out(dir / "vocab.txt");
            for (const auto &w : vocab_.entries()) out << w << '\n';
        }
        {
            std::ofstream out(dir / "mock_config.json");
            out << to_json(config_).dump(2) << '\n';
        }
        std::ofstream out(dir / "params.bin", std::ios::binary);
        out.write(reinterpret_cast<const char *>(params_.data()),
                  static_cast<std::streamsize>(params_.size() * sizeof(double)));
        if (!out) throw Error("failed to write parameters to '" + (dir / "params.bin").string() + "'");
    }

    static MockMaskedLM load(const std::filesystem::path &dir) {
        std::ifstream vocab_in(dir / "vocab.txt");
        std::ifstream config_in(dir / "mock_config.json");
        std::ifstream params_in(dir / "params.bin", std::ios::binary);
        if (!vocab_in || !config_in || !params_in) {
            throw LoadError("incomplete mock checkpoint in '" + dir.string() + "'");
        }
        Vocabulary vocab;
        std::string line;
        std::size_t n = 0;
        while (std::getline(vocab_in, line)) {
            if (n++ < 3) continue;  // specials are implicit
            vocab.add(line);
        }
        MockMaskedLM model(std::move(vocab), mock_model_config_from_json(nlohmann::json::parse(config_in)));
        std::vector<double> values(model.params_.size());
        params_in.read(reinterpret_cast<char *>(values.data()),
                       static_cast<std::streamsize>(values.size() * sizeof(double)));
        if (params_in.gcount() != static_cast<std::streamsize>(values.size() * sizeof(double))) {
            throw LoadError("parameter file in '" + dir.string() + "' has the wrong size");
        }
        model.restore(values);
        return model;
    }

  private:
    [[nodiscard]] TokenId token_at(std::span<const TokenId> ids, long q) const {
        if (q < 0 || q >= static_cast<long>(ids.size())) return Vocabulary::pad;
        return ids[static_cast<std::size_t>(q)];
    }

    [[nodiscard]] std::vector<std::size_t> features(std::span<const TokenId> ids, std::size_t p) const {
        std::vector<std::size_t> out;
        const long w = static_cast<long>(config_.window);
        out.reserve(2 * config_.window);
        for (long o = -w; o <= w; ++o) {
            if (o == 0) continue;
            const auto token = token_at(ids, static_cast<long>(p) + o);
            if (token == Vocabulary::pad) continue;
            out.push_back(hash_values(config_.seed, 0xfea7, o + 4096, token) % config_.feature_buckets);
        }
        return out;
    }

    [[nodiscard]] std::vector<double> hidden(std::span<const TokenId> ids, std::size_t p) const {
        if (p >= ids.size()) {
            throw Error("query position " + std::to_string(p) + " beyond sequence of length " +
                        std::to_string(ids.size()));
        }
        const auto d = config_.hidden_dim;
        const long w = static_cast<long>(config_.window);
        std::uint64_t ctx = hash_values(config_.seed, 0xc0de, p);
        for (long o = -w; o <= w; ++o) {
            ctx = hash_combine(ctx, static_cast<std::uint64_t>(token_at(ids, static_cast<long>(p) + o)));
        }
        std::vector<double> a(d);
        for (std::size_t k = 0; k < d; ++k) {
            a[k] = config_.context_scale * normal_from_hash(hash_combine(ctx, k));
        }
        for (auto f : features(ids, p)) {
            const double *e = &params_[features_offset_ + f * d];
            for (std::size_t k = 0; k < d; ++k) a[k] += e[k];
        }
        for (auto &x : a) x = std::tanh(x);
        return a;
    }

    [[nodiscard]] std::vector<double> logits(const std::vector<double> &h) const {
        const auto d = config_.hidden_dim;
        std::vector<double> z(vocab_.size());
        for (std::size_t v = 0; v < z.size(); ++v) {
            const double *o = &params_[output_offset_ + v * d];
            double s = params_[bias_offset_ + v];
            for (std::size_t k = 0; k < d; ++k) s += o[k] * h[k];
            z[v] = s;
        }
        return z;
    }

    Vocabulary vocab_;
    MockModelConfig config_;
    std::size_t features_offset_ = 0;
    std::size_t output_offset_ = 0;
    std::size_t bias_offset_ = 0;
    std::vector<double> params_;
    std::vector<double> grads_;
};

/// Phrases the mock infiller can place in a blank.
inline std::vector<std::string> default_phrase_table() {
    return {"",
            ".",
            "Event",
            "happened",
            "to",
            "The word",
            "the word",
            "The words",
            "and",
            "and the word",
            "is used",
            "are used",
            "in the sentence .",
            "Note that the words",
            "The temporal relation between",
            "is",
            "were",
            "used in the same sentence .",
            "It means",
            "in the article .",
            "happens",
            "event",
            "occurred",
            "relative to"};
}

struct MockInfillerConfig {
    std::uint64_t seed = 29;
    double base_scale = 1.5;
    double context_scale = 0.5;
    /// Log-probability charged per word (plus one) for a fill outside the phrase table.
    double out_of_table_log_prob = -30.0;
};

class MockInfiller final : public SpanInfiller {
  public:
    explicit MockInfiller(MockInfillerConfig config = {},
                          std::vector<std::string> phrases = default_phrase_table())
        : config_(config), phrases_(std::move(phrases)) {
        for (auto &p : phrases_) p = normalize(p);
    }

    [[nodiscard]] const std::vector<std::string> &phrases() const noexcept { return phrases_; }

    /// log p(phrase k | query, blank) over the phrases admissible under max_fill_tokens.
    /// Inadmissible phrases get -infinity.
    [[nodiscard]] std::vector<double> blank_log_probs(const InfillQuery &query, std::size_t blank,
                                                      std::size_t max_fill_tokens) const {
        const auto qhash = query_hash(query);
        std::vector<double> scores(phrases_.size(), -std::numeric_limits<double>::infinity());
        double max_score = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < phrases_.size(); ++k) {
            if (split_words(phrases_[k]).size() > max_fill_tokens) continue;
            scores[k] = config_.base_scale * normal_from_hash(hash_values(config_.seed, blank, k)) +
                        config_.context_scale * normal_from_hash(hash_values(config_.seed, qhash, blank, k));
            max_score = std::max(max_score, scores[k]);
        }
        double sum = 0.0;
        for (double s : scores) {
            if (std::isfinite(s)) sum += std::exp(s - max_score);
        }
        const double log_norm = max_score + std::log(sum);
        for (auto &s : scores) {
            if (std::isfinite(s)) s -= log_norm;
        }
        return scores;
    }

    [[nodiscard]] std::vector<InfillCandidate> infill(std::span<const InfillQuery> queries,
                                                      std::size_t beam_width,
                                                      std::size_t max_fill_tokens) const override {
        if (queries.empty() || beam_width == 0) return {};
        const auto blanks = common_blank_count(queries);
        // summed[b][k] = sum over queries of log p_b(k | query)
        std::vector<std::vector<double>> summed(blanks, std::vector<double>(phrases_.size(), 0.0));
        for (const auto &q : queries) {
            for (std::size_t b = 0; b < blanks; ++b) {
                auto lp = blank_log_probs(q, b, max_fill_tokens);
                for (std::size_t k = 0; k < lp.size(); ++k) summed[b][k] += lp[k];
            }
        }
        struct Beam {
            std::vector<std::size_t> choice;
            double score;
        };
        std::vector<Beam> beams{{{}, 0.0}};
        for (std::size_t b = 0; b < blanks; ++b) {
            std::vector<Beam> next;
            for (const auto &beam : beams) {
                for (std::size_t k = 0; k < phrases_.size(); ++k) {
                    if (!std::isfinite(summed[b][k])) continue;
                    auto choice = beam.choice;
                    choice.push_back(k);
                    next.push_back({std::move(choice), beam.score + summed[b][k]});
                }
            }
            std::stable_sort(next.begin(), next.end(), [](const Beam &x, const Beam &y) {
                if (x.score != y.score) return x.score > y.score;
                return x.choice < y.choice;
            });
            if (next.size() > beam_width) next.resize(beam_width);
            beams = std::move(next);
        }
        std::vector<InfillCandidate> out;
        for (const auto &beam : beams) {
            InfillCandidate c;
            for (auto k : beam.choice) c.fills.push_back(phrases_[k]);
            c.log_prob = beam.score;
            out.push_back(std::move(c));
        }
        return out;
    }

    [[nodiscard]] double score(std::span<const InfillQuery> queries,
                               const std::vector<std::string> &fills) const override {
        double total = 0.0;
        for (const auto &q : queries) {
            if (q.blank_count() != fills.size()) {
                throw Error("fill count " + std::to_string(fills.size()) + " does not match " +
                            std::to_string(q.blank_count()) + " blanks");
            }
            for (std::size_t b = 0; b < fills.size(); ++b) {
                const auto fill = normalize(fills[b]);
                auto it = std::find(phrases_.begin(), phrases_.end(), fill);
                if (it == phrases_.end()) {
                    total += config_.out_of_table_log_prob *
                             static_cast<double>(1 + split_words(fill).size());
                    continue;
                }
                total += blank_log_probs(q, b, std::numeric_limits<std::size_t>::max())
                    [static_cast<std::size_t>(it - phrases_.begin())];
            }
        }
        return total;
    }

  private:
    static std::string normalize(const std::string &text) {
        std::string out;
        for (const auto &w : split_words(text)) {
            if (!out.empty()) out += ' ';
            out += w;
        }
        return out;
    }

    static std::uint64_t query_hash(const InfillQuery &q) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (const auto &w : q.words) {
            h = fnv1a(w, h);
            h = fnv1a("\x1f", h);
        }
        return h;
    }

    static std::size_t common_blank_count(std::span<const InfillQuery> queries) {
        const auto n = queries.front().blank_count();
        for (const auto &q : queries) {
            if (q.blank_count() != n) throw Error("infill queries disagree on blank count");
        }
        return n;
    }

    MockInfillerConfig config_;
    std::vector<std::string> phrases_;
};

}  // namespace temprompt

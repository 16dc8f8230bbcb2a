#include "dcqa/augment.hpp"

#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <thread>
#include <unordered_set>

#include <httplib.h>

#include "dcqa/io_util.hpp"
#include "dcqa/tokenizer.hpp"
#include "dcqa/train.hpp"

namespace dcqa {

namespace {

uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 14695981039346656037ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

using WordTable = std::unordered_map<std::string, std::vector<std::string>>;

// The two directions chain: en->fr followed by fr->en maps each listed word
// to a synonym, not back to itself.
const WordTable& en_to_fr() {
    static const WordTable t = {
        {"big", {"grand"}},      {"large", {"gros"}},
        {"quick", {"rapide"}},   {"fast", {"vite"}},
        {"smart", {"intelligent"}}, {"clever", {"malin"}},
        {"happy", {"heureux"}},  {"glad", {"content"}},
        {"small", {"petit"}},    {"little", {"menu"}},
        {"begin", {"commencer"}}, {"start", {"debuter"}},
    };
    return t;
}

const WordTable& fr_to_en() {
    static const WordTable t = {
        {"grand", {"large", "huge"}}, {"gros", {"big"}},
        {"rapide", {"fast", "speedy"}}, {"vite", {"quick"}},
        {"intelligent", {"clever"}}, {"malin", {"smart"}},
        {"heureux", {"glad"}},       {"content", {"happy"}},
        {"petit", {"little"}},       {"menu", {"small"}},
        {"commencer", {"start"}},    {"debuter", {"begin"}},
    };
    return t;
}

std::string rewrite_words(const std::string& text, const WordTable& table, uint64_t seed) {
    std::string out;
    bool first = true;
    for (const auto& word : split_words(text)) {
        if (!first) out.push_back(' ');
        first = false;
        const std::string lower = to_lower(word);
        auto it = table.find(lower);
        if (it == table.end()) {
            out += word;
            continue;
        }
        const auto& options = it->second;
        std::string repl = options[(seed ^ fnv1a64(lower)) % options.size()];
        if (!word.empty() && std::isupper(static_cast<unsigned char>(word[0])) && !repl.empty()) {
            repl[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(repl[0])));
        }
        out += repl;
    }
    return out;
}

}  // namespace

std::string IdentityTranslator::translate(const std::string& text, const std::string&,
                                          const std::string&) {
    return text;
}

MockTranslator::MockTranslator(uint64_t seed) : seed_(seed) {}

std::string MockTranslator::translate(const std::string& text, const std::string& source_lang,
                                      const std::string& target_lang) {
    if (source_lang == "en") return rewrite_words(text, en_to_fr(), seed_);
    if (target_lang == "en") return rewrite_words(text, fr_to_en(), seed_);
    throw TranslationError("mock translator: unsupported language pair " + source_lang + "->" +
                           target_lang);
}

HttpTranslator::HttpTranslator(const std::string& endpoint, const std::string& cache_path,
                               int max_retries, const char* key_env_var)
    : cache_path_(cache_path), max_retries_(max_retries) {
    const size_t scheme = endpoint.find("://");
    if (scheme == std::string::npos) {
        throw ValidationError("translator: endpoint must look like http://host[:port]/path");
    }
    const size_t slash = endpoint.find('/', scheme + 3);
    host_ = slash == std::string::npos ? endpoint : endpoint.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : endpoint.substr(slash);
    if (const char* key = std::getenv(key_env_var)) api_key_ = key;

    std::ifstream in(cache_path_);
    if (in) {
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError("translator: cache file '" + cache_path_ +
                                  "' is not valid JSON: " + e.what());
        }
        for (const auto& [k, v] : j.items()) cache_[k] = v.get<std::string>();
    }
}

std::string HttpTranslator::translate(const std::string& text, const std::string& source_lang,
                                      const std::string& target_lang) {
    const std::string key = source_lang + "|" + target_lang + "|" + text;
    {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
    }

    const nlohmann::json body{{"q", text}, {"source", source_lang}, {"target", target_lang}};
    std::string last_error;
    for (int attempt = 1; attempt <= max_retries_; ++attempt) {
        if (attempt > 1) {
            std::this_thread::sleep_for(std::chrono::milliseconds(100 * (attempt - 1)));
        }
        httplib::Client client(host_);
        client.set_connection_timeout(5);
        client.set_read_timeout(10);
        httplib::Headers headers;
        if (!api_key_.empty()) headers.emplace("X-Api-Key", api_key_);
        auto res = client.Post(path_, headers, body.dump(), "application/json");
        if (!res) {
            last_error = "connection failed";
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        try {
            const auto j = nlohmann::json::parse(res->body);
            const std::string translated = j.at("translatedText").get<std::string>();
            if (translated.empty()) {
                last_error = "empty translation";
                continue;
            }
            std::lock_guard<std::mutex> lock(mu_);
            cache_[key] = translated;
            nlohmann::json dump = nlohmann::json::object();
            for (const auto& [k, v] : cache_) dump[k] = v;
            write_file_atomic(cache_path_, dump.dump(1) + "\n");
            return translated;
        } catch (const nlohmann::json::exception& e) {
            last_error = std::string("bad response body: ") + e.what();
        }
    }
    throw TranslationError("translator: " + source_lang + "->" + target_lang + " failed after " +
                           std::to_string(max_retries_) + " attempts (" + last_error + ")");
}

std::string backtranslate(const std::string& question, Translator& translator,
                          const std::string& pivot_lang) {
    if (trim(question).empty()) throw ValidationError("backtranslate: empty question");
    const std::string pivot = translator.translate(question, "en", pivot_lang);
    if (trim(pivot).empty()) throw TranslationError("backtranslate: empty pivot translation");
    const std::string back = trim(translator.translate(pivot, pivot_lang, "en"));
    if (back.empty()) throw TranslationError("backtranslate: empty round-trip translation");
    return back;
}

nlohmann::json AugmentManifest::to_json() const {
    nlohmann::json jpairs = nlohmann::json::array();
    for (const auto& [orig, added] : pairs) {
        jpairs.push_back({{"original_id", orig}, {"new_id", added}});
    }
    return nlohmann::json{
        {"fraction", fraction}, {"seed", seed},       {"pivot_lang", pivot_lang},
        {"pairs", jpairs},      {"skipped", skipped},
    };
}

std::pair<SquadDataset, AugmentManifest> augment_dataset(const SquadDataset& ds, double fraction,
                                                         Translator& translator, uint64_t seed,
                                                         const std::string& pivot_lang) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw ValidationError("augment: fraction must lie in (0, 1]");
    }
    const int64_t n = ds.question_count();
    if (n == 0) throw ValidationError("augment: dataset has no questions");
    const auto k = static_cast<int64_t>(std::llround(fraction * static_cast<double>(n)));

    // Sample question indices (document order) without replacement.
    std::vector<int64_t> idx(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
    std::mt19937_64 rng(seed);
    seeded_shuffle(idx, rng);
    std::vector<bool> chosen(static_cast<size_t>(n), false);
    for (int64_t i = 0; i < k; ++i) chosen[static_cast<size_t>(idx[static_cast<size_t>(i)])] = true;

    std::unordered_set<std::string> existing_ids;
    for (const auto& art : ds.articles) {
        for (const auto& par : art.paragraphs) {
            for (const auto& qa : par.qas) existing_ids.insert(qa.id);
        }
    }

    SquadDataset out = ds;
    AugmentManifest manifest;
    manifest.fraction = fraction;
    manifest.seed = seed;
    manifest.pivot_lang = pivot_lang;

    int64_t flat = 0;
    for (auto& art : out.articles) {
        for (auto& par : art.paragraphs) {
            const size_t original_count = par.qas.size();
            for (size_t qi = 0; qi < original_count; ++qi, ++flat) {
                if (!chosen[static_cast<size_t>(flat)]) continue;
                const SquadQA& src = par.qas[qi];
                std::string paraphrase;
                try {
                    paraphrase = backtranslate(src.question, translator, pivot_lang);
                } catch (const TranslationError& e) {
                    std::fprintf(stderr, "augment: skipping '%s': %s\n", src.id.c_str(), e.what());
                    manifest.skipped.push_back(src.id);
                    continue;
                }
                SquadQA copy = src;
                copy.id = src.id + "-bt1";
                if (existing_ids.count(copy.id) > 0) {
                    throw ValidationError("augment: generated id '" + copy.id +
                                          "' collides with an existing question id");
                }
                copy.question = paraphrase;
                manifest.pairs.emplace_back(src.id, copy.id);
                par.qas.push_back(std::move(copy));
            }
        }
    }
    return {std::move(out), std::move(manifest)};
}

}  // namespace dcqa

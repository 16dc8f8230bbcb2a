#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dcqa/squad.hpp"

namespace dcqa {

/// Raised when a translation cannot be produced (after retries, for the
/// remote client). augment_dataset turns it into a skipped example.
class TranslationError : public std::runtime_error {
public:
    explicit TranslationError(const std::string& what) : std::runtime_error(what) {}
};

class Translator {
public:
    virtual ~Translator() = default;
    virtual std::string translate(const std::string& text, const std::string& source_lang,
                                  const std::string& target_lang) = 0;
};

/// Returns its input unchanged; the baseline mock.
class IdentityTranslator : public Translator {
public:
    std::string translate(const std::string& text, const std::string& source_lang,
                          const std::string& target_lang) override;
};

/// Deterministic word-table rewriter. The en->fr and fr->en tables chain so a
/// round trip lands on an English synonym (big -> grand -> large). Words with
/// several listed translations pick one by (seed, word) hash; unknown words
/// pass through. Capitalization of a word's first letter is preserved.
class MockTranslator : public Translator {
public:
    explicit MockTranslator(uint64_t seed);
    std::string translate(const std::string& text, const std::string& source_lang,
                          const std::string& target_lang) override;

private:
    uint64_t seed_;
};

/// POSTs {q, source, target} as JSON and expects {translatedText}. Bounded
/// retries with linear backoff; the api key (if the env var is set) rides an
/// X-Api-Key header; every success lands in an on-disk JSON cache keyed by
/// (source, target, text) so interrupted runs resume without re-billing.
class HttpTranslator : public Translator {
public:
    HttpTranslator(const std::string& endpoint, const std::string& cache_path,
                   int max_retries = 3, const char* key_env_var = "DCQA_TRANSLATE_KEY");
    std::string translate(const std::string& text, const std::string& source_lang,
                          const std::string& target_lang) override;

private:
    std::string host_;  // scheme://host[:port]
    std::string path_;
    std::string cache_path_;
    std::string api_key_;
    int max_retries_;
    std::mutex mu_;
    std::unordered_map<std::string, std::string> cache_;
};

/// EN -> pivot -> EN; trimmed. A paraphrase equal to the original is kept.
std::string backtranslate(const std::string& question, Translator& translator,
                          const std::string& pivot_lang);

struct AugmentManifest {
    double fraction = 0.0;
    uint64_t seed = 0;
    std::string pivot_lang;
    std::vector<std::pair<std::string, std::string>> pairs;  // (original_id, new_id)
    std::vector<std::string> skipped;                        // ids whose translation failed

    nlohmann::json to_json() const;
};

/// Samples round(fraction * N) questions without replacement (seeded), appends
/// a backtranslated copy of each to its own paragraph (same context, answers,
/// and is_impossible; id gets the "-bt1" suffix), and reports the manifest.
/// Original examples are byte-identical in the output.
std::pair<SquadDataset, AugmentManifest> augment_dataset(const SquadDataset& ds, double fraction,
                                                         Translator& translator, uint64_t seed,
                                                         const std::string& pivot_lang = "fr");

}  // namespace dcqa

#include "dcqa/synthetic.hpp"

#include <random>

#include "dcqa/train.hpp"

namespace dcqa {

const std::vector<std::string>& synthetic_vocabulary() {
    // Sentinels first, then filler words (no articles, so answer
    // normalization never rewrites a span). All 28 words hash to distinct
    // token ids at vocab_size 4096.
    static const std::vector<std::string> kWords = {
        "marka",  "markb",  "alpha",   "bravo",  "charlie", "delta",  "echo",
        "foxtrot", "golf",  "hotel",   "india",  "juliett", "kilo",   "lima",
        "mike",   "november", "orbit", "papa",   "quebec",  "romeo",  "sierra",
        "tango",  "uniform", "victor", "whiskey", "xray",   "yankee", "zulu",
    };
    return kWords;
}

SquadDataset make_synthetic_dataset(int64_t n_examples, uint64_t seed,
                                    const std::string& id_prefix) {
    if (n_examples <= 0) throw ValidationError("synthetic: n_examples must be positive");
    const auto& words = synthetic_vocabulary();
    const std::string& open = words[0];
    const std::string& close = words[1];
    const std::vector<std::string> fillers(words.begin() + 2, words.end());
    const std::vector<std::string> questions = {
        "which words sit between marka and markb",
        "what hides inside markers",
        "where does marked span lie",
    };

    std::mt19937_64 rng(seed);
    auto pick_filler = [&] { return fillers[static_cast<size_t>(
        uniform_below(rng, static_cast<int64_t>(fillers.size())))]; };

    SquadDataset ds;
    ds.version = "synthetic-v1";
    SquadArticle article;
    article.title = "sentinel-span";
    for (int64_t i = 0; i < n_examples; ++i) {
        const int64_t n_context = 8 + uniform_below(rng, 7);   // filler tokens: 8..14
        const int64_t span_len = 1 + uniform_below(rng, 3);    // answer tokens: 1..3
        const int64_t insert_at = uniform_below(rng, n_context + 1);

        std::vector<std::string> tokens;
        for (int64_t t = 0; t < n_context; ++t) {
            if (t == insert_at) {
                tokens.push_back(open);
                for (int64_t s = 0; s < span_len; ++s) tokens.push_back(pick_filler());
                tokens.push_back(close);
            }
            tokens.push_back(pick_filler());
        }
        if (insert_at == n_context) {
            tokens.push_back(open);
            for (int64_t s = 0; s < span_len; ++s) tokens.push_back(pick_filler());
            tokens.push_back(close);
        }

        // Join with single spaces, recording where the answer starts.
        std::string context;
        int64_t answer_start = -1;
        std::string answer_text;
        int64_t span_seen = 0;
        bool inside = false;
        for (size_t t = 0; t < tokens.size(); ++t) {
            if (t > 0) context.push_back(' ');
            if (tokens[t] == close) inside = false;
            if (inside) {
                if (span_seen == 0) answer_start = static_cast<int64_t>(context.size());
                if (span_seen > 0) answer_text.push_back(' ');
                answer_text += tokens[t];
                ++span_seen;
            }
            if (tokens[t] == open) inside = true;
            context += tokens[t];
        }

        SquadParagraph par;
        par.context = context;
        SquadQA qa;
        qa.id = id_prefix + std::to_string(i);
        qa.question = questions[static_cast<size_t>(uniform_below(
            rng, static_cast<int64_t>(questions.size())))];
        qa.is_impossible = false;
        qa.answers.push_back({answer_text, answer_start});
        par.qas.push_back(std::move(qa));
        article.paragraphs.push_back(std::move(par));
    }
    ds.articles.push_back(std::move(article));
    return ds;
}

}  // namespace dcqa

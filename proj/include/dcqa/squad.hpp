#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcqa/tensor.hpp"
#include "dcqa/tokenizer.hpp"

namespace dcqa {

struct SquadAnswer {
    std::string text;
    int64_t answer_start = 0;  // character offset into the paragraph context
};

struct SquadQA {
    std::string id;
    std::string question;
    bool is_impossible = false;
    std::vector<SquadAnswer> answers;
};

struct SquadParagraph {
    std::string context;
    std::vector<SquadQA> qas;
};

struct SquadArticle {
    std::string title;
    std::vector<SquadParagraph> paragraphs;
};

struct SquadDataset {
    std::string version;
    std::vector<SquadArticle> articles;

    int64_t question_count() const;
};

/// Parses and invariant-checks a v2-style dataset file. Structural problems
/// (bad JSON, missing fields, duplicate ids, answers on impossible questions)
/// reject the whole file with a location diagnostic.
SquadDataset load_squad(const std::string& path);
SquadDataset squad_from_json(const nlohmann::json& j, const std::string& origin);
nlohmann::json squad_to_json(const SquadDataset& ds);
void save_squad(const SquadDataset& ds, const std::string& path);

/// One question ready for the model: [CLS] question [SEP] context [SEP].
/// No padding — each example carries its own length.
struct TokenizedExample {
    std::string id;
    std::string question;
    std::string context;
    std::vector<int64_t> token_ids;
    Tensor m_query;    // [L] 1 on question tokens
    Tensor m_context;  // [L] 1 on context tokens
    Tensor m_real;     // [L] 1 on every non-pad position (CLS/SEP included)
    int64_t context_begin = 0;  // first context token position
    int64_t context_end = 0;    // one past the last context token position
    bool is_impossible = false;
    int64_t gold_start = 0;  // token index; 0 (the CLS slot) encodes no-answer
    int64_t gold_end = 0;
    std::vector<std::string> gold_texts;       // every reference answer
    std::vector<OffsetToken> context_tokens;   // for span -> text reconstruction

    int64_t length() const { return static_cast<int64_t>(token_ids.size()); }
    /// Original context text covered by tokens [tok_start, tok_end] (sequence
    /// positions, both within the context range).
    std::string span_text(int64_t tok_start, int64_t tok_end) const;
};

struct TokenizeStats {
    int64_t kept = 0;
    int64_t dropped_misaligned = 0;  // answer_start does not match its text
    int64_t dropped_overlong = 0;    // sequence would exceed max_seq_len
};

/// Converts every question to a TokenizedExample. Examples whose gold answer
/// cannot be aligned to token boundaries are dropped (counted), as are
/// examples longer than max_seq_len; the rest of the file still loads.
std::vector<TokenizedExample> tokenize_dataset(const SquadDataset& ds, const Tokenizer& tok,
                                               int64_t max_seq_len, TokenizeStats* stats);

}  // namespace dcqa

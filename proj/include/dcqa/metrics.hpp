#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcqa/squad.hpp"

namespace dcqa {

/// Lowercase, strip punctuation, drop the articles a/an/the, collapse
/// whitespace — applied to both sides before every comparison.
std::string normalize_answer(const std::string& text);

/// Token-multiset F1 (in [0,1]) and exact match (0/1) against the best gold.
/// An empty prediction encodes no-answer; an empty gold list encodes an
/// unanswerable question. Both empty -> (1,1); exactly one empty -> (0,0).
std::pair<double, int> f1_em(const std::string& pred, const std::vector<std::string>& golds);

struct TypeErrors {
    int64_t wrong = 0;
    int64_t total = 0;
};

struct MetricsReport {
    double f1 = 0.0;          // percent scale
    double em = 0.0;
    double has_ans_f1 = 0.0;
    double has_ans_em = 0.0;
    double no_ans_f1 = 0.0;
    double no_ans_em = 0.0;
    int64_t n_has = 0;
    int64_t n_no = 0;
    std::map<std::string, TypeErrors> per_type;

    nlohmann::json to_json() const;
};

/// Macro-averaged metrics over the dataset, split by answerability, plus the
/// question-type error table. predictions must cover every question id
/// exactly once (no-answer serialized as the empty string).
MetricsReport evaluate(const std::map<std::string, std::string>& predictions,
                       const SquadDataset& dataset);

/// First interrogative word anywhere in the question picks the bin; questions
/// matching none fall into "other".
std::string question_type_bin(const std::string& question);

/// Answers + probabilities of one model, keyed by question id.
struct ModelPredictions {
    std::map<std::string, std::string> answers;
    std::map<std::string, double> probabilities;
};

/// Combination rule: if any member predicts no-answer the ensemble answer is
/// no-answer; otherwise the highest-probability member's answer wins, ties
/// broken by lowest model index.
std::map<std::string, std::string> ensemble(const std::vector<ModelPredictions>& models);

}  // namespace dcqa

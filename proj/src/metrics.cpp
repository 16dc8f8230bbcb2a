#include "dcqa/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>
#include <unordered_map>

#include "dcqa/tokenizer.hpp"

namespace dcqa {

std::string normalize_answer(const std::string& text) {
    std::string lowered;
    lowered.reserve(text.size());
    for (unsigned char c : text) {
        if (std::ispunct(c)) continue;
        lowered.push_back(static_cast<char>(std::tolower(c)));
    }
    std::istringstream ss(lowered);
    std::string word, out;
    while (ss >> word) {
        if (word == "a" || word == "an" || word == "the") continue;
        if (!out.empty()) out.push_back(' ');
        out += word;
    }
    return out;
}

std::pair<double, int> f1_em(const std::string& pred, const std::vector<std::string>& golds) {
    const std::string np = normalize_answer(pred);
    if (golds.empty()) {
        // Unanswerable gold: credit only the empty prediction.
        return np.empty() ? std::make_pair(1.0, 1) : std::make_pair(0.0, 0);
    }
    double best_f1 = 0.0;
    int best_em = 0;
    for (const auto& gold : golds) {
        const std::string ng = normalize_answer(gold);
        if (np == ng) best_em = 1;
        if (np.empty() || ng.empty()) {
            best_f1 = std::max(best_f1, np == ng ? 1.0 : 0.0);
            continue;
        }
        const auto pt = split_words(np);
        const auto gt = split_words(ng);
        std::unordered_map<std::string, int64_t> counts;
        for (const auto& t : gt) ++counts[t];
        int64_t overlap = 0;
        for (const auto& t : pt) {
            auto it = counts.find(t);
            if (it != counts.end() && it->second > 0) {
                --it->second;
                ++overlap;
            }
        }
        if (overlap == 0) continue;
        const double precision = static_cast<double>(overlap) / static_cast<double>(pt.size());
        const double recall = static_cast<double>(overlap) / static_cast<double>(gt.size());
        best_f1 = std::max(best_f1, 2.0 * precision * recall / (precision + recall));
    }
    return {best_f1, best_em};
}

std::string question_type_bin(const std::string& question) {
    static const std::set<std::string> kBins = {"what", "which", "when", "where",
                                                "who",  "why",   "how"};
    std::string word;
    for (size_t i = 0; i <= question.size(); ++i) {
        const bool alpha = i < question.size() &&
                           std::isalpha(static_cast<unsigned char>(question[i])) != 0;
        if (alpha) {
            word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(question[i]))));
        } else if (!word.empty()) {
            if (kBins.count(word)) return word;
            word.clear();
        }
    }
    return "other";
}

nlohmann::json MetricsReport::to_json() const {
    nlohmann::json types = nlohmann::json::object();
    for (const auto& [bin, err] : per_type) {
        types[bin] = {{"wrong", err.wrong}, {"total", err.total}};
    }
    return nlohmann::json{
        {"f1", f1},
        {"em", em},
        {"has_ans_f1", has_ans_f1},
        {"has_ans_em", has_ans_em},
        {"no_ans_f1", no_ans_f1},
        {"no_ans_em", no_ans_em},
        {"n_has_ans", n_has},
        {"n_no_ans", n_no},
        {"per_type", types},
    };
}

MetricsReport evaluate(const std::map<std::string, std::string>& predictions,
                       const SquadDataset& dataset) {
    MetricsReport r;
    for (const char* bin : {"what", "which", "when", "where", "who", "why", "how", "other"}) {
        r.per_type[bin] = TypeErrors{};
    }

    double sum_f1 = 0.0, sum_em = 0.0;
    double has_f1 = 0.0, has_em = 0.0, no_f1 = 0.0, no_em = 0.0;
    int64_t seen = 0;
    for (const auto& art : dataset.articles) {
        for (const auto& par : art.paragraphs) {
            for (const auto& qa : par.qas) {
                auto it = predictions.find(qa.id);
                if (it == predictions.end()) {
                    throw ValidationError("evaluate: missing prediction for id '" + qa.id + "'");
                }
                ++seen;
                std::vector<std::string> golds;
                for (const auto& a : qa.answers) golds.push_back(a.text);
                const auto [f1, em] = f1_em(it->second, golds);
                sum_f1 += f1;
                sum_em += em;
                if (qa.is_impossible) {
                    ++r.n_no;
                    no_f1 += f1;
                    no_em += em;
                } else {
                    ++r.n_has;
                    has_f1 += f1;
                    has_em += em;
                }
                auto& bin = r.per_type[question_type_bin(qa.question)];
                ++bin.total;
                if (em == 0) ++bin.wrong;
            }
        }
    }
    if (seen != static_cast<int64_t>(predictions.size())) {
        throw ValidationError("evaluate: " + std::to_string(predictions.size() - seen) +
                              " prediction(s) do not match any dataset id");
    }
    if (seen == 0) throw ValidationError("evaluate: empty dataset");

    r.f1 = 100.0 * sum_f1 / static_cast<double>(seen);
    r.em = 100.0 * sum_em / static_cast<double>(seen);
    if (r.n_has > 0) {
        r.has_ans_f1 = 100.0 * has_f1 / static_cast<double>(r.n_has);
        r.has_ans_em = 100.0 * has_em / static_cast<double>(r.n_has);
    }
    if (r.n_no > 0) {
        r.no_ans_f1 = 100.0 * no_f1 / static_cast<double>(r.n_no);
        r.no_ans_em = 100.0 * no_em / static_cast<double>(r.n_no);
    }
    return r;
}

std::map<std::string, std::string> ensemble(const std::vector<ModelPredictions>& models) {
    if (models.size() < 2) throw ValidationError("ensemble: need at least 2 models");
    const auto& first = models.front().answers;
    for (size_t m = 0; m < models.size(); ++m) {
        const auto& model = models[m];
        if (model.answers.size() != first.size() ||
            model.probabilities.size() != model.answers.size()) {
            throw ValidationError("ensemble: model " + std::to_string(m) +
                                  " covers a different id set");
        }
        for (const auto& [id, text] : model.answers) {
            (void)text;
            if (!first.count(id) || !model.probabilities.count(id)) {
                throw ValidationError("ensemble: model " + std::to_string(m) +
                                      " id coverage mismatch at '" + id + "'");
            }
        }
    }

    std::map<std::string, std::string> out;
    for (const auto& [id, text0] : first) {
        (void)text0;
        bool veto = false;
        size_t best_m = 0;
        double best_p = -1.0;
        for (size_t m = 0; m < models.size(); ++m) {
            const auto& ans = models[m].answers.at(id);
            if (ans.empty()) {
                veto = true;
                break;
            }
            const double p = models[m].probabilities.at(id);
            if (p > best_p) {  // strict: ties keep the lowest model index
                best_p = p;
                best_m = m;
            }
        }
        out[id] = veto ? std::string() : models[best_m].answers.at(id);
    }
    return out;
}

}  // namespace dcqa

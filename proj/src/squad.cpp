#include "dcqa/squad.hpp"

#include <fstream>
#include <unordered_set>

#include "dcqa/io_util.hpp"

namespace dcqa {

namespace {

using nlohmann::json;

const json& need(const json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) {
        throw ValidationError(where + ": missing required field '" + key + "'");
    }
    return *it;
}

std::string need_string(const json& obj, const char* key, const std::string& where) {
    const json& v = need(obj, key, where);
    if (!v.is_string()) throw ValidationError(where + ": field '" + key + "' must be a string");
    return v.get<std::string>();
}

bool is_blank(const std::string& s) {
    for (unsigned char c : s) {
        if (!std::isspace(c)) return false;
    }
    return true;
}

}  // namespace

int64_t SquadDataset::question_count() const {
    int64_t n = 0;
    for (const auto& a : articles) {
        for (const auto& p : a.paragraphs) n += static_cast<int64_t>(p.qas.size());
    }
    return n;
}

SquadDataset squad_from_json(const json& j, const std::string& origin) {
    if (!j.is_object()) throw ValidationError(origin + ": top level must be a JSON object");
    const json& data = need(j, "data", origin);
    if (!data.is_array()) throw ValidationError(origin + ": 'data' must be an array");

    SquadDataset ds;
    if (j.contains("version")) {
        if (!j["version"].is_string()) throw ValidationError(origin + ": 'version' must be a string");
        ds.version = j["version"].get<std::string>();
    }

    std::unordered_set<std::string> seen_ids;
    for (size_t ai = 0; ai < data.size(); ++ai) {
        const std::string awhere = origin + ": data[" + std::to_string(ai) + "]";
        const json& art = data[ai];
        if (!art.is_object()) throw ValidationError(awhere + ": article must be an object");
        SquadArticle article;
        if (art.contains("title")) {
            if (!art["title"].is_string()) throw ValidationError(awhere + ": 'title' must be a string");
            article.title = art["title"].get<std::string>();
        }
        const json& paras = need(art, "paragraphs", awhere);
        if (!paras.is_array()) throw ValidationError(awhere + ": 'paragraphs' must be an array");
        for (size_t pi = 0; pi < paras.size(); ++pi) {
            const std::string pwhere = awhere + ".paragraphs[" + std::to_string(pi) + "]";
            const json& par = paras[pi];
            if (!par.is_object()) throw ValidationError(pwhere + ": paragraph must be an object");
            SquadParagraph paragraph;
            paragraph.context = need_string(par, "context", pwhere);
            if (is_blank(paragraph.context)) {
                throw ValidationError(pwhere + ": context must contain at least one token");
            }
            const json& qas = need(par, "qas", pwhere);
            if (!qas.is_array()) throw ValidationError(pwhere + ": 'qas' must be an array");
            for (size_t qi = 0; qi < qas.size(); ++qi) {
                const std::string qwhere = pwhere + ".qas[" + std::to_string(qi) + "]";
                const json& qa = qas[qi];
                if (!qa.is_object()) throw ValidationError(qwhere + ": qa must be an object");
                SquadQA item;
                item.id = need_string(qa, "id", qwhere);
                if (!seen_ids.insert(item.id).second) {
                    throw ValidationError(qwhere + ": duplicate question id '" + item.id + "'");
                }
                item.question = need_string(qa, "question", qwhere);
                if (is_blank(item.question)) {
                    throw ValidationError(qwhere + ": question must contain at least one token");
                }
                if (qa.contains("is_impossible")) {
                    if (!qa["is_impossible"].is_boolean()) {
                        throw ValidationError(qwhere + ": 'is_impossible' must be a boolean");
                    }
                    item.is_impossible = qa["is_impossible"].get<bool>();
                }
                if (qa.contains("answers")) {
                    const json& answers = qa["answers"];
                    if (!answers.is_array()) {
                        throw ValidationError(qwhere + ": 'answers' must be an array");
                    }
                    for (size_t si = 0; si < answers.size(); ++si) {
                        const std::string swhere = qwhere + ".answers[" + std::to_string(si) + "]";
                        const json& ans = answers[si];
                        if (!ans.is_object()) throw ValidationError(swhere + ": answer must be an object");
                        SquadAnswer sa;
                        sa.text = need_string(ans, "text", swhere);
                        const json& start = need(ans, "answer_start", swhere);
                        if (!start.is_number_integer()) {
                            throw ValidationError(swhere + ": 'answer_start' must be an integer");
                        }
                        sa.answer_start = start.get<int64_t>();
                        if (sa.answer_start < 0 ||
                            sa.answer_start >= static_cast<int64_t>(paragraph.context.size())) {
                            throw ValidationError(swhere + ": answer_start " +
                                                  std::to_string(sa.answer_start) +
                                                  " outside the context");
                        }
                        if (sa.text.empty()) {
                            throw ValidationError(swhere + ": answer text must be non-empty");
                        }
                        item.answers.push_back(std::move(sa));
                    }
                }
                if (item.is_impossible && !item.answers.empty()) {
                    throw ValidationError(qwhere + ": impossible question must have empty answers");
                }
                if (!item.is_impossible && item.answers.empty()) {
                    throw ValidationError(qwhere + ": answerable question must list answers");
                }
                paragraph.qas.push_back(std::move(item));
            }
            article.paragraphs.push_back(std::move(paragraph));
        }
        ds.articles.push_back(std::move(article));
    }
    return ds;
}

SquadDataset load_squad(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("dataset: cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError("dataset: invalid JSON in '" + path + "': " + e.what());
    }
    return squad_from_json(j, path);
}

json squad_to_json(const SquadDataset& ds) {
    json data = json::array();
    for (const auto& a : ds.articles) {
        json paras = json::array();
        for (const auto& p : a.paragraphs) {
            json qas = json::array();
            for (const auto& q : p.qas) {
                json answers = json::array();
                for (const auto& s : q.answers) {
                    answers.push_back({{"text", s.text}, {"answer_start", s.answer_start}});
                }
                qas.push_back({{"id", q.id},
                               {"question", q.question},
                               {"is_impossible", q.is_impossible},
                               {"answers", answers}});
            }
            paras.push_back({{"context", p.context}, {"qas", qas}});
        }
        data.push_back({{"title", a.title}, {"paragraphs", paras}});
    }
    json out{{"data", data}};
    if (!ds.version.empty()) out["version"] = ds.version;
    return out;
}

void save_squad(const SquadDataset& ds, const std::string& path) {
    write_file_atomic(path, squad_to_json(ds).dump(1) + "\n");
}

std::string TokenizedExample::span_text(int64_t tok_start, int64_t tok_end) const {
    if (tok_start < context_begin || tok_end >= context_end || tok_start > tok_end) {
        throw ValidationError("span_text: token span outside the context range");
    }
    const auto& first = context_tokens[static_cast<size_t>(tok_start - context_begin)];
    const auto& last = context_tokens[static_cast<size_t>(tok_end - context_begin)];
    return context.substr(static_cast<size_t>(first.begin),
                          static_cast<size_t>(last.end - first.begin));
}

namespace {

// Maps a character range of the context onto covering token indices.
// Returns false when the range cannot be tied to tokens.
bool char_range_to_tokens(const std::vector<OffsetToken>& toks, int64_t c0, int64_t c1,
                          int64_t* t0, int64_t* t1) {
    if (c0 >= c1) return false;
    int64_t first = -1, last = -1;
    for (size_t i = 0; i < toks.size(); ++i) {
        if (toks[i].begin <= c0 && c0 < toks[i].end) first = static_cast<int64_t>(i);
        if (toks[i].begin < c1 && c1 <= toks[i].end) last = static_cast<int64_t>(i);
    }
    if (first < 0 || last < 0 || first > last) return false;
    *t0 = first;
    *t1 = last;
    return true;
}

}  // namespace

std::vector<TokenizedExample> tokenize_dataset(const SquadDataset& ds, const Tokenizer& tok,
                                               int64_t max_seq_len, TokenizeStats* stats) {
    TokenizeStats local;
    std::vector<TokenizedExample> out;
    for (const auto& art : ds.articles) {
        for (const auto& par : art.paragraphs) {
            const auto ctx_tokens = tokenize_with_offsets(par.context);
            for (const auto& qa : par.qas) {
                const auto q_words = split_words(qa.question);
                const int64_t nq = static_cast<int64_t>(q_words.size());
                const int64_t nc = static_cast<int64_t>(ctx_tokens.size());
                const int64_t L = 1 + nq + 1 + nc + 1;
                if (L > max_seq_len) {
                    ++local.dropped_overlong;
                    continue;
                }

                TokenizedExample ex;
                ex.id = qa.id;
                ex.question = qa.question;
                ex.context = par.context;
                ex.context_tokens = ctx_tokens;
                ex.is_impossible = qa.is_impossible;
                for (const auto& a : qa.answers) ex.gold_texts.push_back(a.text);

                ex.token_ids.reserve(static_cast<size_t>(L));
                ex.token_ids.push_back(Tokenizer::kCls);
                for (const auto& w : q_words) ex.token_ids.push_back(tok.token_id(w));
                ex.token_ids.push_back(Tokenizer::kSep);
                for (const auto& t : ctx_tokens) ex.token_ids.push_back(tok.token_id(t.text));
                ex.token_ids.push_back(Tokenizer::kSep);

                ex.m_query = Tensor::zeros({L});
                ex.m_context = Tensor::zeros({L});
                ex.m_real = Tensor::full({L}, 1.0);
                for (int64_t i = 0; i < nq; ++i) ex.m_query.data[1 + i] = 1.0;
                ex.context_begin = 1 + nq + 1;
                ex.context_end = ex.context_begin + nc;
                for (int64_t i = ex.context_begin; i < ex.context_end; ++i) {
                    ex.m_context.data[i] = 1.0;
                }

                if (qa.is_impossible) {
                    ex.gold_start = 0;
                    ex.gold_end = 0;
                } else {
                    // The first listed answer defines the training span.
                    const auto& gold = qa.answers.front();
                    const int64_t len = static_cast<int64_t>(gold.text.size());
                    if (gold.answer_start + len > static_cast<int64_t>(par.context.size()) ||
                        par.context.compare(static_cast<size_t>(gold.answer_start),
                                            static_cast<size_t>(len), gold.text) != 0) {
                        ++local.dropped_misaligned;
                        continue;
                    }
                    // Trim whitespace the answer may carry at either edge so the
                    // char range lands on tokens.
                    int64_t c0 = gold.answer_start, c1 = gold.answer_start + len;
                    while (c0 < c1 && std::isspace(static_cast<unsigned char>(
                                          par.context[static_cast<size_t>(c0)]))) ++c0;
                    while (c1 > c0 && std::isspace(static_cast<unsigned char>(
                                          par.context[static_cast<size_t>(c1 - 1)]))) --c1;
                    int64_t t0 = 0, t1 = 0;
                    if (!char_range_to_tokens(ctx_tokens, c0, c1, &t0, &t1)) {
                        ++local.dropped_misaligned;
                        continue;
                    }
                    ex.gold_start = ex.context_begin + t0;
                    ex.gold_end = ex.context_begin + t1;
                }
                ++local.kept;
                out.push_back(std::move(ex));
            }
        }
    }
    if (stats) *stats = local;
    return out;
}

}  // namespace dcqa

// Shared builders for the test suites.
#pragma once

#include <random>
#include <string>
#include <vector>

#include "dcqa/coattention.hpp"
#include "dcqa/config.hpp"
#include "dcqa/squad.hpp"
#include "dcqa/tokenizer.hpp"

namespace testutil {

inline std::string fixture_path(const std::string& name) {
    return std::string(DCQA_SOURCE_DIR) + "/fixtures/" + name;
}

inline std::string config_path(const std::string& name) {
    return std::string(DCQA_SOURCE_DIR) + "/configs/" + name;
}

// Small-but-complete config: every component present, dims kept tiny.
inline dcqa::RunConfig tiny_config() {
    dcqa::RunConfig cfg;
    cfg.vocab_size = 64;
    cfg.d_model = 8;
    cfg.n_heads = 2;
    cfg.n_layers = 1;
    cfg.d_ff = 16;
    cfg.max_len = 32;
    cfg.max_seq_len = 32;
    cfg.n_blocks = 2;
    cfg.d_k = 4;
    cfg.skip_mode = "simple";
    cfg.inside_conv = false;
    cfg.lstm_hidden = 4;
    cfg.batch_size = 2;
    cfg.learning_rate = 1e-3;
    cfg.epochs = 1;
    cfg.seed = 3;
    return cfg;
}

// Masks for the layout [CLS] q x nq [SEP] c x nc [SEP].
inline dcqa::SeqMasks make_masks(int64_t nq, int64_t nc) {
    const int64_t L = nq + nc + 3;
    dcqa::SeqMasks m;
    m.query = dcqa::Tensor::zeros({L});
    m.context = dcqa::Tensor::zeros({L});
    m.real = dcqa::Tensor::full({L}, 1.0);
    for (int64_t i = 0; i < nq; ++i) m.query.data[1 + i] = 1.0;
    for (int64_t i = 0; i < nc; ++i) m.context.data[2 + nq + i] = 1.0;
    return m;
}

// A numeric example for forward/loss tests (no surface text, so span_text
// reconstruction is not available on these).
inline dcqa::TokenizedExample make_example(int64_t nq, int64_t nc, uint64_t seed,
                                           int64_t vocab_size = 64) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int64_t> pick(4, vocab_size - 1);
    dcqa::TokenizedExample ex;
    ex.id = "t" + std::to_string(seed);
    ex.token_ids.push_back(dcqa::Tokenizer::kCls);
    for (int64_t i = 0; i < nq; ++i) ex.token_ids.push_back(pick(rng));
    ex.token_ids.push_back(dcqa::Tokenizer::kSep);
    for (int64_t i = 0; i < nc; ++i) ex.token_ids.push_back(pick(rng));
    ex.token_ids.push_back(dcqa::Tokenizer::kSep);

    const dcqa::SeqMasks m = make_masks(nq, nc);
    ex.m_query = m.query;
    ex.m_context = m.context;
    ex.m_real = m.real;
    ex.context_begin = 2 + nq;
    ex.context_end = 2 + nq + nc;
    ex.gold_start = ex.context_begin;
    ex.gold_end = ex.context_begin;
    return ex;
}

}  // namespace testutil

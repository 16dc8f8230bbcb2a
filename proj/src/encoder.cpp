#include "dcqa/encoder.hpp"

#include <cmath>
#include <numeric>

namespace dcqa {

Tensor col_mask(const Tensor& mask) {
    if (mask.rank() != 1) throw ValidationError("mask: expected a 1-D mask");
    Tensor m = mask;
    m.shape = {mask.shape[0], 1};
    return m;
}

TransformerBlock::TransformerBlock(ParamStore& ps, const std::string& prefix, int64_t d_model,
                                   int64_t n_heads, int64_t d_ff)
    : d_model_(d_model), n_heads_(n_heads), d_head_(d_model / n_heads) {
    if (d_model % n_heads != 0) {
        throw ValidationError("transformer block '" + prefix + "': d_model not divisible by n_heads");
    }
    wq_ = ps.uniform(prefix + ".attn.wq", {d_model, d_model}, d_model);
    bq_ = ps.zeros(prefix + ".attn.bq", {d_model});
    wk_ = ps.uniform(prefix + ".attn.wk", {d_model, d_model}, d_model);
    bk_ = ps.zeros(prefix + ".attn.bk", {d_model});
    wv_ = ps.uniform(prefix + ".attn.wv", {d_model, d_model}, d_model);
    bv_ = ps.zeros(prefix + ".attn.bv", {d_model});
    wo_ = ps.uniform(prefix + ".attn.wo", {d_model, d_model}, d_model);
    bo_ = ps.zeros(prefix + ".attn.bo", {d_model});
    ff_w1_ = ps.uniform(prefix + ".ff.w1", {d_model, d_ff}, d_model);
    ff_b1_ = ps.zeros(prefix + ".ff.b1", {d_ff});
    ff_w2_ = ps.uniform(prefix + ".ff.w2", {d_ff, d_model}, d_ff);
    ff_b2_ = ps.zeros(prefix + ".ff.b2", {d_model});
    ln1_g_ = ps.ones(prefix + ".ln1.gamma", {d_model});
    ln1_b_ = ps.zeros(prefix + ".ln1.beta", {d_model});
    ln2_g_ = ps.ones(prefix + ".ln2.gamma", {d_model});
    ln2_b_ = ps.zeros(prefix + ".ln2.beta", {d_model});
}

NodePtr TransformerBlock::apply(NodePtr x, const Tensor& key_mask) const {
    auto q = linear(x, wq_, bq_);
    auto k = linear(x, wk_, bk_);
    auto v = linear(x, wv_, bv_);
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(d_head_));
    std::vector<NodePtr> heads;
    heads.reserve(static_cast<size_t>(n_heads_));
    for (int64_t h = 0; h < n_heads_; ++h) {
        auto qh = slice_cols(q, h * d_head_, (h + 1) * d_head_);
        auto kh = slice_cols(k, h * d_head_, (h + 1) * d_head_);
        auto vh = slice_cols(v, h * d_head_, (h + 1) * d_head_);
        auto scores = scale(matmul(qh, transpose2d(kh)), inv_scale);
        auto probs = masked_softmax(scores, key_mask, 1.0);
        heads.push_back(matmul(probs, vh));
    }
    auto attn = linear(concat(heads, 1), wo_, bo_);
    auto x1 = layer_norm(add(x, attn), ln1_g_, ln1_b_);
    auto ff = linear(gelu(linear(x1, ff_w1_, ff_b1_)), ff_w2_, ff_b2_);
    return layer_norm(add(x1, ff), ln2_g_, ln2_b_);
}

Encoder::Encoder(const RunConfig& cfg, ParamStore& ps)
    : vocab_size_(cfg.vocab_size),
      d_model_(cfg.d_model),
      max_len_(cfg.max_len),
      position_embeddings_(cfg.position_embeddings),
      segment_embeddings_(cfg.segment_embeddings) {
    tok_table_ = ps.uniform("encoder.tok_embed", {vocab_size_, d_model_}, d_model_);
    if (position_embeddings_) {
        pos_table_ = ps.uniform("encoder.pos_embed", {max_len_, d_model_}, d_model_);
    }
    if (segment_embeddings_) {
        seg_table_ = ps.uniform("encoder.seg_embed", {2, d_model_}, d_model_);
    }
    for (int64_t l = 0; l < cfg.n_layers; ++l) {
        blocks_.emplace_back(ps, "encoder.layer" + std::to_string(l), d_model_, cfg.n_heads,
                             cfg.d_ff);
    }
}

NodePtr Encoder::embed(const std::vector<int64_t>& ids,
                       const std::vector<int64_t>* segment_ids) const {
    const int64_t L = static_cast<int64_t>(ids.size());
    if (L == 0) throw ValidationError("encoder: empty token sequence");
    if (L > max_len_) {
        throw ValidationError("encoder: sequence length " + std::to_string(L) +
                              " exceeds max_len " + std::to_string(max_len_));
    }
    auto e = embedding_rows(tok_table_, ids);
    if (position_embeddings_) {
        std::vector<int64_t> positions(static_cast<size_t>(L));
        std::iota(positions.begin(), positions.end(), 0);
        e = add(e, embedding_rows(pos_table_, positions));
    }
    if (segment_embeddings_) {
        std::vector<int64_t> segs(static_cast<size_t>(L), 0);
        if (segment_ids) {
            if (static_cast<int64_t>(segment_ids->size()) != L) {
                throw ValidationError("encoder: segment_ids length mismatch");
            }
            segs = *segment_ids;
            for (int64_t s : segs) {
                if (s != 0 && s != 1) throw ValidationError("encoder: segment ids must be 0/1");
            }
        }
        e = add(e, embedding_rows(seg_table_, segs));
    } else if (segment_ids) {
        throw ValidationError("encoder: segment ids passed but segment_embeddings is off");
    }
    return e;
}

NodePtr Encoder::encode_embedded(NodePtr emb, const Tensor& pad_mask) const {
    if (pad_mask.rank() != 1 || pad_mask.shape[0] != emb->value.shape[0]) {
        throw ValidationError("encoder: pad mask length mismatch");
    }
    bool any_real = false;
    for (double v : pad_mask.data) any_real = any_real || v != 0.0;
    if (!any_real) throw ValidationError("encoder: all-padding sequence");
    auto x = emb;
    for (const auto& b : blocks_) x = b.apply(x, pad_mask);
    return x;
}

NodePtr Encoder::encode(const std::vector<int64_t>& ids, const Tensor& pad_mask,
                        const std::vector<int64_t>* segment_ids) const {
    return encode_embedded(embed(ids, segment_ids), pad_mask);
}

}  // namespace dcqa

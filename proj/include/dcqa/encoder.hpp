#pragma once

#include <vector>

#include "dcqa/config.hpp"
#include "dcqa/params.hpp"
#include "dcqa/tensor.hpp"

namespace dcqa {

/// Reshapes a [L] mask to [L,1] so it broadcasts across feature columns.
Tensor col_mask(const Tensor& mask);

/// Post-norm transformer encoder block: multi-head self-attention with key
/// masking, residual + layer norm, position-wise feed-forward, residual +
/// layer norm. Reused by the encoder, the skip connection, and the output
/// head's per-logit pre-processors.
class TransformerBlock {
public:
    TransformerBlock(ParamStore& ps, const std::string& prefix, int64_t d_model, int64_t n_heads,
                     int64_t d_ff);

    NodePtr apply(NodePtr x, const Tensor& key_mask) const;

private:
    int64_t d_model_;
    int64_t n_heads_;
    int64_t d_head_;
    NodePtr wq_, bq_, wk_, bk_, wv_, bv_, wo_, bo_;
    NodePtr ff_w1_, ff_b1_, ff_w2_, ff_b2_;
    NodePtr ln1_g_, ln1_b_, ln2_g_, ln2_b_;
};

/// Trainable contextual encoder standing in for a pretrained language model:
/// token (+ position, + optional segment) embeddings followed by n_layers
/// transformer blocks over the whole [CLS] query [SEP] context [SEP] sequence.
class Encoder {
public:
    Encoder(const RunConfig& cfg, ParamStore& ps);

    /// Sum of the embedding tables for one id sequence. segment_ids, when the
    /// config enables them, must be 0/1 per position; null means all zeros.
    NodePtr embed(const std::vector<int64_t>& ids,
                  const std::vector<int64_t>* segment_ids = nullptr) const;

    NodePtr encode(const std::vector<int64_t>& ids, const Tensor& pad_mask,
                   const std::vector<int64_t>* segment_ids = nullptr) const;

    /// The block stack only, for callers that already hold embeddings.
    NodePtr encode_embedded(NodePtr emb, const Tensor& pad_mask) const;

private:
    int64_t vocab_size_;
    int64_t d_model_;
    int64_t max_len_;
    bool position_embeddings_;
    bool segment_embeddings_;
    NodePtr tok_table_;
    NodePtr pos_table_;
    NodePtr seg_table_;
    std::vector<TransformerBlock> blocks_;
};

}  // namespace dcqa

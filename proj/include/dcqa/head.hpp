#pragma once

#include <string>

#include "dcqa/config.hpp"
#include "dcqa/encoder.hpp"
#include "dcqa/params.hpp"
#include "dcqa/tensor.hpp"

namespace dcqa {

struct SpanLogits {
    NodePtr start;  // [L], padded positions pushed to a large negative surrogate
    NodePtr end;    // [L]
};

/// Separate start/end prediction: per-logit self-attention pre-processing,
/// a linear start head, and an end head fed by an LSTM over the per-position
/// concatenation of the two pre-processed sequences (or a plain linear layer
/// under the no_lstm ablation).
class OutputHead {
public:
    OutputHead(ParamStore& ps, const RunConfig& cfg);

    std::pair<NodePtr, NodePtr> preprocess(NodePtr s, const Tensor& real_mask) const;
    SpanLogits apply(NodePtr s, const Tensor& real_mask) const;

private:
    NodePtr masked_logits(NodePtr per_pos, const Tensor& real_mask) const;

    bool no_lstm_;
    int64_t d_h_;
    TransformerBlock pre_start_;
    TransformerBlock pre_end_;
    NodePtr start_w_, start_b_;
    NodePtr lstm_wx_, lstm_wh_, lstm_b_;  // LSTM end path
    NodePtr dense_w_, dense_b_;           // no_lstm end path
    NodePtr end_w_, end_b_;
};

/// Decoded span for one example. Indices are sequence positions; the null
/// position 0 (the CLS slot) encodes no-answer.
struct SpanPrediction {
    int64_t start_idx = 0;
    int64_t end_idx = 0;
    double score = 0.0;
    bool is_no_answer = false;
};

/// Best pair (i ≤ j, j − i < max_answer_len, both in the context range) by
/// start[i] + end[j], compared against the null score start[0] + end[0]:
/// no-answer iff null ≥ best + tau. Ties resolve to the first pair in
/// (i, then j) scan order.
SpanPrediction decode_span(const Tensor& start_logits, const Tensor& end_logits,
                           int64_t context_begin, int64_t context_end, int64_t max_answer_len,
                           double tau);

/// softmax(start)[i] · softmax(end)[j] for the predicted pair, both softmaxes
/// taken over real (non-pad) positions.
double answer_probability(const Tensor& start_logits, const Tensor& end_logits,
                          const Tensor& real_mask, const SpanPrediction& pred);

}  // namespace dcqa

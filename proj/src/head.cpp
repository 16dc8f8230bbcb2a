#include "dcqa/head.hpp"

#include <cmath>
#include <limits>

namespace dcqa {

namespace {
// Added to logits at padded positions; large enough that exp() underflows to
// zero yet keeps every downstream value finite.
constexpr double kNegInfSurrogate = -1e9;
}  // namespace

OutputHead::OutputHead(ParamStore& ps, const RunConfig& cfg)
    : no_lstm_(cfg.no_lstm),
      d_h_(cfg.lstm_hidden),
      pre_start_(ps, "head.pre_start", cfg.d_model, cfg.n_heads, cfg.d_ff),
      pre_end_(ps, "head.pre_end", cfg.d_model, cfg.n_heads, cfg.d_ff) {
    const int64_t d = cfg.d_model;
    start_w_ = ps.uniform("head.start.w", {d, 1}, d);
    start_b_ = ps.zeros("head.start.b", {1});
    if (no_lstm_) {
        dense_w_ = ps.uniform("head.end.dense.w", {2 * d, d_h_}, 2 * d);
        dense_b_ = ps.zeros("head.end.dense.b", {d_h_});
    } else {
        lstm_wx_ = ps.uniform("head.end.lstm.wx", {4 * d_h_, 2 * d}, 2 * d);
        lstm_wh_ = ps.uniform("head.end.lstm.wh", {4 * d_h_, d_h_}, d_h_);
        lstm_b_ = ps.zeros("head.end.lstm.b", {4 * d_h_});
    }
    end_w_ = ps.uniform("head.end.w", {d_h_, 1}, d_h_);
    end_b_ = ps.zeros("head.end.b", {1});
}

NodePtr OutputHead::masked_logits(NodePtr per_pos, const Tensor& real_mask) const {
    const int64_t L = per_pos->value.shape[0];
    auto flat = reshape(per_pos, {L});
    Tensor surrogate = Tensor::zeros({L});
    for (int64_t i = 0; i < L; ++i) {
        if (real_mask.data[i] == 0.0) surrogate.data[i] = kNegInfSurrogate;
    }
    return add(flat, wrap(std::move(surrogate)));
}

std::pair<NodePtr, NodePtr> OutputHead::preprocess(NodePtr s, const Tensor& real_mask) const {
    return {pre_start_.apply(s, real_mask), pre_end_.apply(s, real_mask)};
}

SpanLogits OutputHead::apply(NodePtr s, const Tensor& real_mask) const {
    auto [s_start, s_end] = preprocess(s, real_mask);

    SpanLogits out;
    out.start = masked_logits(linear(s_start, start_w_, start_b_), real_mask);

    auto joint = concat({s_start, s_end}, 1);  // [L, 2d]
    NodePtr hidden = no_lstm_ ? linear(joint, dense_w_, dense_b_)
                              : lstm_sequence(joint, lstm_wx_, lstm_wh_, lstm_b_);
    out.end = masked_logits(linear(hidden, end_w_, end_b_), real_mask);
    return out;
}

SpanPrediction decode_span(const Tensor& start_logits, const Tensor& end_logits,
                           int64_t context_begin, int64_t context_end, int64_t max_answer_len,
                           double tau) {
    const int64_t L = start_logits.shape.empty() ? 0 : start_logits.shape[0];
    if (start_logits.rank() != 1 || end_logits.rank() != 1 || end_logits.shape[0] != L) {
        throw ValidationError("decode: start/end logits must be equal-length vectors");
    }
    if (context_begin >= context_end) throw ValidationError("decode: empty context range");
    if (context_begin <= 0 || context_end > L) {
        throw ValidationError("decode: context range outside the sequence");
    }
    if (max_answer_len <= 0) throw ValidationError("decode: max_answer_len must be positive");

    double best = -std::numeric_limits<double>::infinity();
    int64_t best_i = context_begin, best_j = context_begin;
    for (int64_t i = context_begin; i < context_end; ++i) {
        const int64_t j_hi = std::min(context_end - 1, i + max_answer_len - 1);
        for (int64_t j = i; j <= j_hi; ++j) {
            const double s = start_logits.data[i] + end_logits.data[j];
            if (s > best) {
                best = s;
                best_i = i;
                best_j = j;
            }
        }
    }

    const double null_score = start_logits.data[0] + end_logits.data[0];
    SpanPrediction pred;
    if (null_score >= best + tau) {
        pred.start_idx = 0;
        pred.end_idx = 0;
        pred.score = null_score;
        pred.is_no_answer = true;
    } else {
        pred.start_idx = best_i;
        pred.end_idx = best_j;
        pred.score = best;
        pred.is_no_answer = false;
    }
    return pred;
}

double answer_probability(const Tensor& start_logits, const Tensor& end_logits,
                          const Tensor& real_mask, const SpanPrediction& pred) {
    const int64_t L = start_logits.shape[0];
    if (real_mask.rank() != 1 || real_mask.shape[0] != L) {
        throw ValidationError("answer_probability: mask length mismatch");
    }
    auto softmax_at = [&](const Tensor& logits, int64_t idx) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int64_t i = 0; i < L; ++i) {
            if (real_mask.data[i] != 0.0) mx = std::max(mx, logits.data[i]);
        }
        double sum = 0.0;
        for (int64_t i = 0; i < L; ++i) {
            if (real_mask.data[i] != 0.0) sum += std::exp(logits.data[i] - mx);
        }
        return std::exp(logits.data[idx] - mx) / sum;
    };
    if (real_mask.data[pred.start_idx] == 0.0 || real_mask.data[pred.end_idx] == 0.0) {
        throw ValidationError("answer_probability: predicted span at a padded position");
    }
    return softmax_at(start_logits, pred.start_idx) * softmax_at(end_logits, pred.end_idx);
}

}  // namespace dcqa

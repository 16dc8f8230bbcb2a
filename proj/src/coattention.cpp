#include "dcqa/coattention.hpp"

#include <cmath>

namespace dcqa {

void validate_masks(const SeqMasks& masks, int64_t length) {
    const Tensor* all[] = {&masks.query, &masks.context, &masks.real};
    const char* names[] = {"query", "context", "real"};
    for (int i = 0; i < 3; ++i) {
        if (all[i]->rank() != 1 || all[i]->shape[0] != length) {
            throw ValidationError(std::string("masks: ") + names[i] + " mask must be [" +
                                  std::to_string(length) + "]");
        }
        for (double v : all[i]->data) {
            if (v != 0.0 && v != 1.0) {
                throw ValidationError(std::string("masks: ") + names[i] +
                                      " mask entries must be 0 or 1");
            }
        }
    }
    bool any_q = false, any_c = false;
    for (int64_t i = 0; i < length; ++i) {
        const double q = masks.query.data[i], c = masks.context.data[i], r = masks.real.data[i];
        if (q == 1.0 && c == 1.0) {
            throw ValidationError("masks: position " + std::to_string(i) +
                                  " is both query and context");
        }
        if ((q == 1.0 || c == 1.0) && r == 0.0) {
            throw ValidationError("masks: position " + std::to_string(i) +
                                  " marked query/context but is padding");
        }
        any_q = any_q || q == 1.0;
        any_c = any_c || c == 1.0;
    }
    if (!any_q) throw ValidationError("masks: query side is empty");
    if (!any_c) throw ValidationError("masks: context side is empty");
}

std::pair<NodePtr, NodePtr> split_masked(NodePtr e, const SeqMasks& masks) {
    validate_masks(masks, e->value.shape[0]);
    auto e_q = mul(e, wrap(col_mask(masks.query)));
    auto e_c = mul(e, wrap(col_mask(masks.context)));
    return {e_q, e_c};
}

DirectedAttention directed_coattention(NodePtr q_y, NodePtr k_z, NodePtr v_z,
                                       const Tensor& key_mask_z, int64_t d_k) {
    if (d_k <= 0) throw ValidationError("coattention: d_k must be positive");
    bool any_key = false;
    for (double v : key_mask_z.data) any_key = any_key || v != 0.0;
    if (!any_key) throw ValidationError("coattention: empty key mask");
    auto scores = scale(matmul(q_y, transpose2d(k_z)), 1.0 / std::sqrt(static_cast<double>(d_k)));
    auto probs = masked_softmax(scores, key_mask_z, 1.0);
    return {probs, matmul(probs, v_z)};
}

LocalFeatureBranch::LocalFeatureBranch(ParamStore& ps, const std::string& prefix,
                                       const RunConfig& cfg) {
    for (size_t i = 0; i < cfg.local_conv_spec.size(); ++i) {
        const auto& l = cfg.local_conv_spec[i];
        const std::string p = prefix + ".conv" + std::to_string(i);
        layers_.push_back({ps.uniform(p + ".kernels", {l.c_out, l.c_in, l.kernel},
                                      l.c_in * l.kernel),
                           ps.zeros(p + ".bias", {l.c_out})});
    }
}

NodePtr LocalFeatureBranch::apply(NodePtr e) const {
    auto x = e;
    for (size_t i = 0; i < layers_.size(); ++i) {
        if (i > 0) x = relu(x);
        x = conv1d(x, layers_[i].kernels, layers_[i].bias);
    }
    return x;
}

CoattentionBlock::Side CoattentionBlock::make_side(ParamStore& ps, const std::string& prefix,
                                                   const RunConfig& cfg) {
    const int64_t d = cfg.d_model, dk = cfg.d_k, dff = cfg.d_ff;
    Side s;
    s.wq = ps.uniform(prefix + ".wq", {d, dk}, d);
    s.bq = ps.zeros(prefix + ".bq", {dk});
    s.wk = ps.uniform(prefix + ".wk", {d, dk}, d);
    s.bk = ps.zeros(prefix + ".bk", {dk});
    // V keeps d_model width so the attention output can join the residual sum.
    s.wv = ps.uniform(prefix + ".wv", {d, d}, d);
    s.bv = ps.zeros(prefix + ".bv", {d});
    s.ff_w1 = ps.uniform(prefix + ".ff.w1", {d, dff}, d);
    s.ff_b1 = ps.zeros(prefix + ".ff.b1", {dff});
    s.ff_w2 = ps.uniform(prefix + ".ff.w2", {dff, d}, dff);
    s.ff_b2 = ps.zeros(prefix + ".ff.b2", {d});
    s.ln1_g = ps.ones(prefix + ".ln1.gamma", {d});
    s.ln1_b = ps.zeros(prefix + ".ln1.beta", {d});
    s.ln2_g = ps.ones(prefix + ".ln2.gamma", {d});
    s.ln2_b = ps.zeros(prefix + ".ln2.beta", {d});
    return s;
}

CoattentionBlock::CoattentionBlock(ParamStore& ps, const std::string& prefix, const RunConfig& cfg)
    : d_k_(cfg.d_k),
      q_(make_side(ps, prefix + ".qside", cfg)),
      c_(make_side(ps, prefix + ".cside", cfg)) {}

namespace {

NodePtr ff_sublayer(NodePtr x, const NodePtr& w1, const NodePtr& b1, const NodePtr& w2,
                    const NodePtr& b2, const NodePtr& ln_g, const NodePtr& ln_b) {
    auto ff = linear(gelu(linear(x, w1, b1)), w2, b2);
    return layer_norm(add(x, ff), ln_g, ln_b);
}

}  // namespace

CoattentionBlock::Result CoattentionBlock::apply(NodePtr in_q, NodePtr in_c, const SeqMasks& masks,
                                                 NodePtr conv_branch) const {
    // Each stream projects its own Q/K/V (Eq 3-style affine maps, separate
    // parameters per side).
    auto qq = linear(in_q, q_.wq, q_.bq);
    auto kq = linear(in_q, q_.wk, q_.bk);
    auto vq = linear(in_q, q_.wv, q_.bv);
    auto qc = linear(in_c, c_.wq, c_.bq);
    auto kc = linear(in_c, c_.wk, c_.bk);
    auto vc = linear(in_c, c_.wv, c_.bv);

    // C2Q: context-stream queries attend to query-side keys; Q2C: the reverse.
    auto c2q = directed_coattention(qc, kq, vq, masks.query, d_k_);
    auto q2c = directed_coattention(qq, kc, vc, masks.context, d_k_);

    // C2Q joins the query stream's residual, Q2C the context stream's.
    auto xq = add(c2q.out, in_q);
    auto xc = add(q2c.out, in_c);
    if (conv_branch) {
        xq = add(xq, conv_branch);
        xc = add(xc, conv_branch);
    }
    xq = layer_norm(xq, q_.ln1_g, q_.ln1_b);
    xc = layer_norm(xc, c_.ln1_g, c_.ln1_b);

    Result r;
    r.o_q = ff_sublayer(xq, q_.ff_w1, q_.ff_b1, q_.ff_w2, q_.ff_b2, q_.ln2_g, q_.ln2_b);
    r.o_c = ff_sublayer(xc, c_.ff_w1, c_.ff_b1, c_.ff_w2, c_.ff_b2, c_.ln2_g, c_.ln2_b);
    r.a_c2q = c2q.probs;
    r.a_q2c = q2c.probs;
    return r;
}

MergeLayer::MergeLayer(ParamStore& ps, const std::string& prefix, const RunConfig& cfg) {
    const int64_t d = cfg.d_model, mid = cfg.merge_c_mid, k = cfg.merge_kernel;
    k1_ = ps.uniform(prefix + ".conv1.kernels", {mid, 2 * d, k}, 2 * d * k);
    b1_ = ps.zeros(prefix + ".conv1.bias", {mid});
    k2_ = ps.uniform(prefix + ".conv2.kernels", {d, mid, k}, mid * k);
    b2_ = ps.zeros(prefix + ".conv2.bias", {d});
}

NodePtr MergeLayer::apply(NodePtr o_q, NodePtr o_c) const {
    auto cat = concat({o_q, o_c}, 1);
    return conv1d(relu(conv1d(cat, k1_, b1_)), k2_, b2_);
}

SkipCombine::SkipCombine(ParamStore& ps, const std::string& prefix, const RunConfig& cfg)
    : mode_(cfg.skip()) {
    const int64_t d = cfg.d_model;
    switch (mode_) {
        case SkipMode::kNone:
            break;
        case SkipMode::kSimple:
            ln_g_ = ps.ones(prefix + ".ln.gamma", {d});
            ln_b_ = ps.zeros(prefix + ".ln.beta", {d});
            break;
        case SkipMode::kTransformer:
            block_ = std::make_unique<TransformerBlock>(ps, prefix + ".block", d, cfg.n_heads,
                                                        cfg.d_ff);
            ln_g_ = ps.ones(prefix + ".ln.gamma", {d});
            ln_b_ = ps.zeros(prefix + ".ln.beta", {d});
            break;
        case SkipMode::kHighway:
            gate_w_ = ps.uniform(prefix + ".gate.w", {d, d}, d);
            gate_b_ = ps.zeros(prefix + ".gate.b", {d});
            h_w_ = ps.uniform(prefix + ".transform.w", {d, d}, d);
            h_b_ = ps.zeros(prefix + ".transform.b", {d});
            break;
    }
}

NodePtr SkipCombine::apply(NodePtr merged, NodePtr e, const Tensor& real_mask) const {
    switch (mode_) {
        case SkipMode::kNone:
            return merged;
        case SkipMode::kSimple:
            return layer_norm(add(merged, e), ln_g_, ln_b_);
        case SkipMode::kTransformer:
            return layer_norm(add(merged, block_->apply(e, real_mask)), ln_g_, ln_b_);
        case SkipMode::kHighway: {
            auto g = sigmoid(linear(e, gate_w_, gate_b_));
            auto h = relu(linear(e, h_w_, h_b_));
            // g ⊙ H(E) + (1 − g) ⊙ merged
            return add(mul(g, h), mul(affine(g, -1.0, 1.0), merged));
        }
    }
    throw ValidationError("skip: bad mode value");
}

CoattentionStack::CoattentionStack(ParamStore& ps, const RunConfig& cfg)
    : n_blocks_(cfg.n_blocks),
      inside_conv_(cfg.inside_conv),
      share_block_weights_(cfg.share_block_weights) {
    const int64_t distinct = share_block_weights_ ? 1 : n_blocks_;
    for (int64_t i = 0; i < distinct; ++i) {
        blocks_.emplace_back(ps, "coattn.block" + std::to_string(i), cfg);
    }
    if (inside_conv_) {
        conv_ = std::make_unique<LocalFeatureBranch>(ps, "coattn.local", cfg);
    }
    merge_ = std::make_unique<MergeLayer>(ps, "coattn.merge", cfg);
    skip_ = std::make_unique<SkipCombine>(ps, "coattn.skip", cfg);
}

CoattentionStack::Output CoattentionStack::run(NodePtr e, const SeqMasks& masks) const {
    auto [o_q, o_c] = split_masked(e, masks);
    NodePtr conv_branch = inside_conv_ ? conv_->apply(e) : nullptr;

    Output out;
    out.attention.reserve(static_cast<size_t>(n_blocks_));
    for (int64_t i = 0; i < n_blocks_; ++i) {
        const auto& block = blocks_[share_block_weights_ ? 0 : static_cast<size_t>(i)];
        auto r = block.apply(o_q, o_c, masks, conv_branch);
        o_q = r.o_q;
        o_c = r.o_c;
        out.attention.emplace_back(r.a_c2q->value, r.a_q2c->value);
    }
    out.merged = skip_->apply(merge_->apply(o_q, o_c), e, masks.real);
    if (!out.merged->value.all_finite()) {
        throw std::runtime_error("coattention: non-finite values in the merged output");
    }
    return out;
}

}  // namespace dcqa

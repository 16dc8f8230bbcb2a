#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "dcqa/config.hpp"
#include "dcqa/encoder.hpp"
#include "dcqa/params.hpp"
#include "dcqa/tensor.hpp"

namespace dcqa {

/// Per-sequence role masks. query/context are disjoint; real additionally
/// covers the CLS/SEP slots. All are {0,1} vectors of length L.
struct SeqMasks {
    Tensor query;
    Tensor context;
    Tensor real;
};

void validate_masks(const SeqMasks& masks, int64_t length);

/// E_q = E ⊙ m_q and E_c = E ⊙ m_c. Both keep full length L (zeros outside
/// their side) so every residual downstream stays [L, d].
std::pair<NodePtr, NodePtr> split_masked(NodePtr e, const SeqMasks& masks);

struct DirectedAttention {
    NodePtr probs;  // [L, L] row-stochastic over key_mask positions
    NodePtr out;    // [L, d_v]
};

/// softmax(Q_y K_zᵀ / √d_k) V_z with the softmax restricted to the z side's
/// key positions. Naming note: per the architecture's convention, C2Q takes
/// its queries from the CONTEXT stream (y=c) and its keys/values from the
/// query stream (z=q), and vice versa for Q2C — counter-intuitive but kept.
DirectedAttention directed_coattention(NodePtr q_y, NodePtr k_z, NodePtr v_z,
                                       const Tensor& key_mask_z, int64_t d_k);

/// Four conv layers over the encoder embeddings with ReLU between them;
/// the local-feature branch mixed into each block when inside_conv is on.
class LocalFeatureBranch {
public:
    LocalFeatureBranch(ParamStore& ps, const std::string& prefix, const RunConfig& cfg);
    NodePtr apply(NodePtr e) const;

private:
    struct Layer {
        NodePtr kernels, bias;
    };
    std::vector<Layer> layers_;
};

/// One directed-coattention block: both streams project to Q/K/V, attend to
/// the other stream, add the residual (+ optional conv branch), layer norm,
/// then a per-side feed-forward sublayer with its own residual + layer norm.
class CoattentionBlock {
public:
    CoattentionBlock(ParamStore& ps, const std::string& prefix, const RunConfig& cfg);

    struct Result {
        NodePtr o_q, o_c;      // updated streams, [L, d_model]
        NodePtr a_c2q, a_q2c;  // attention probability matrices, [L, L]
    };
    Result apply(NodePtr in_q, NodePtr in_c, const SeqMasks& masks, NodePtr conv_branch) const;

private:
    struct Side {
        NodePtr wq, bq, wk, bk, wv, bv;        // projections (Q/K to d_k, V to d_model)
        NodePtr ff_w1, ff_b1, ff_w2, ff_b2;
        NodePtr ln1_g, ln1_b, ln2_g, ln2_b;
    };
    Side make_side(ParamStore& ps, const std::string& prefix, const RunConfig& cfg);

    int64_t d_k_;
    Side q_;  // query-stream parameters
    Side c_;  // context-stream parameters
};

/// concat(O_q, O_c) -> conv to c_mid -> ReLU -> conv back to d_model.
class MergeLayer {
public:
    MergeLayer(ParamStore& ps, const std::string& prefix, const RunConfig& cfg);
    NodePtr apply(NodePtr o_q, NodePtr o_c) const;

private:
    NodePtr k1_, b1_, k2_, b2_;
};

/// Final combination of the merged stack output with the encoder embeddings.
class SkipCombine {
public:
    SkipCombine(ParamStore& ps, const std::string& prefix, const RunConfig& cfg);
    NodePtr apply(NodePtr merged, NodePtr e, const Tensor& real_mask) const;

private:
    SkipMode mode_;
    NodePtr ln_g_, ln_b_;                      // simple / transformer
    std::unique_ptr<TransformerBlock> block_;  // transformer
    NodePtr gate_w_, gate_b_, h_w_, h_b_;      // highway
};

/// The full stack: n_blocks coattention blocks chained on the split streams,
/// a convolutional merge, and the configured skip connection back to E.
class CoattentionStack {
public:
    CoattentionStack(ParamStore& ps, const RunConfig& cfg);

    struct Output {
        NodePtr merged;  // [L, d_model]
        // (A_c2q, A_q2c) per block, probability matrices copied out of the graph.
        std::vector<std::pair<Tensor, Tensor>> attention;
    };
    Output run(NodePtr e, const SeqMasks& masks) const;

private:
    int64_t n_blocks_;
    bool inside_conv_;
    bool share_block_weights_;
    std::vector<CoattentionBlock> blocks_;
    std::unique_ptr<LocalFeatureBranch> conv_;
    std::unique_ptr<MergeLayer> merge_;
    std::unique_ptr<SkipCombine> skip_;
};

}  // namespace dcqa

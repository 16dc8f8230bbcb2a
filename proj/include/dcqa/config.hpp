#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcqa/common.hpp"

namespace dcqa {

enum class SkipMode { kNone, kSimple, kTransformer, kHighway };

SkipMode skip_mode_from_string(const std::string& s);
std::string skip_mode_to_string(SkipMode m);

/// One conv layer of the local-feature branch: in channels, out channels,
/// kernel size.
struct ConvLayerSpec {
    int64_t c_in = 0;
    int64_t c_out = 0;
    int64_t kernel = 0;
};

/// Every switch a run can flip, as one flat JSON document. Zero means
/// "derive from d_model" where noted; resolve() freezes those defaults so the
/// rest of the code never sees a sentinel.
struct RunConfig {
    // encoder
    int64_t vocab_size = 4096;
    int64_t d_model = 64;
    int64_t n_heads = 4;
    int64_t n_layers = 2;
    int64_t d_ff = 0;        // 0 -> 4 * d_model
    int64_t max_len = 512;
    bool position_embeddings = true;
    bool segment_embeddings = false;

    // coattention stack
    int64_t n_blocks = 7;
    int64_t d_k = 0;         // 0 -> d_model
    std::string skip_mode = "simple";
    bool inside_conv = false;
    int64_t merge_c_mid = 0;  // 0 -> floor(1.5 * d_model)
    int64_t merge_kernel = 3;
    std::vector<ConvLayerSpec> local_conv_spec;  // empty -> (d_model,d_model,3) x4
    bool share_block_weights = false;

    // output head
    bool no_lstm = false;
    int64_t lstm_hidden = 0;  // 0 -> d_model
    double tau = 0.0;
    int64_t max_answer_len = 30;

    // training
    int64_t batch_size = 6;
    int64_t grad_accum_steps = 1;
    double learning_rate = 3e-5;
    int64_t epochs = 2;
    int64_t max_seq_len = 512;
    uint64_t seed = 0;

    /// Fills derived defaults and checks every invariant; throws
    /// ValidationError naming the offending field.
    void resolve();

    SkipMode skip() const { return skip_mode_from_string(skip_mode); }

    nlohmann::json to_json() const;
    static RunConfig from_json(const nlohmann::json& j);
    static RunConfig from_file(const std::string& path);
};

}  // namespace dcqa

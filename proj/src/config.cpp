#include "dcqa/config.hpp"

#include <fstream>

namespace dcqa {

namespace {

void require(bool ok, const std::string& msg) {
    if (!ok) throw ValidationError("config: " + msg);
}

int64_t get_int(const nlohmann::json& v, const std::string& key) {
    if (!v.is_number_integer()) throw ValidationError("config: field '" + key + "' must be an integer");
    return v.get<int64_t>();
}

double get_real(const nlohmann::json& v, const std::string& key) {
    if (!v.is_number()) throw ValidationError("config: field '" + key + "' must be a number");
    return v.get<double>();
}

bool get_bool(const nlohmann::json& v, const std::string& key) {
    if (!v.is_boolean()) throw ValidationError("config: field '" + key + "' must be a boolean");
    return v.get<bool>();
}

std::string get_str(const nlohmann::json& v, const std::string& key) {
    if (!v.is_string()) throw ValidationError("config: field '" + key + "' must be a string");
    return v.get<std::string>();
}

}  // namespace

SkipMode skip_mode_from_string(const std::string& s) {
    if (s == "none") return SkipMode::kNone;
    if (s == "simple") return SkipMode::kSimple;
    if (s == "transformer") return SkipMode::kTransformer;
    if (s == "highway") return SkipMode::kHighway;
    throw ValidationError("config: skip_mode must be one of none|simple|transformer|highway, got '" +
                          s + "'");
}

std::string skip_mode_to_string(SkipMode m) {
    switch (m) {
        case SkipMode::kNone: return "none";
        case SkipMode::kSimple: return "simple";
        case SkipMode::kTransformer: return "transformer";
        case SkipMode::kHighway: return "highway";
    }
    throw ValidationError("config: bad skip mode value");
}

void RunConfig::resolve() {
    require(vocab_size > 4, "vocab_size must exceed the 4 reserved token ids");
    require(d_model > 0, "d_model must be positive");
    require(n_heads > 0, "n_heads must be positive");
    require(d_model % n_heads == 0, "d_model must be divisible by n_heads");
    require(n_layers >= 0, "n_layers must be non-negative");
    if (d_ff == 0) d_ff = 4 * d_model;
    require(d_ff > 0, "d_ff must be positive");
    require(max_len > 0, "max_len must be positive");

    require(n_blocks > 0, "n_blocks must be positive");
    if (d_k == 0) d_k = d_model;
    require(d_k > 0, "d_k must be positive");
    skip_mode_from_string(skip_mode);  // validates the enum
    if (merge_c_mid == 0) merge_c_mid = d_model + d_model / 2;
    require(merge_c_mid > d_model && merge_c_mid < 2 * d_model,
            "merge_c_mid must lie strictly between d_model and 2*d_model");
    require(merge_kernel > 0 && merge_kernel % 2 == 1, "merge_kernel must be odd and positive");
    if (local_conv_spec.empty()) {
        local_conv_spec.assign(4, ConvLayerSpec{d_model, d_model, 3});
    }
    require(local_conv_spec.size() == 4, "local_conv_spec must have exactly 4 layers");
    require(local_conv_spec.front().c_in == d_model,
            "local_conv_spec must start at d_model channels");
    require(local_conv_spec.back().c_out == d_model,
            "local_conv_spec must end at d_model channels");
    for (size_t i = 0; i < local_conv_spec.size(); ++i) {
        const auto& l = local_conv_spec[i];
        require(l.c_in > 0 && l.c_out > 0, "local_conv_spec channels must be positive");
        require(l.kernel > 0 && l.kernel % 2 == 1, "local_conv_spec kernels must be odd");
        if (i > 0) {
            require(local_conv_spec[i - 1].c_out == l.c_in,
                    "local_conv_spec channel chain mismatch at layer " + std::to_string(i));
        }
    }

    if (lstm_hidden == 0) lstm_hidden = d_model;
    require(lstm_hidden > 0, "lstm_hidden must be positive");
    require(max_answer_len > 0, "max_answer_len must be positive");

    require(batch_size > 0, "batch_size must be positive");
    require(grad_accum_steps > 0, "grad_accum_steps must be positive");
    // learning_rate 0 is allowed: it must leave parameters untouched.
    require(learning_rate >= 0.0, "learning_rate must be non-negative");
    require(epochs > 0, "epochs must be positive");
    require(max_seq_len > 0, "max_seq_len must be positive");
    require(max_seq_len <= max_len, "max_seq_len cannot exceed max_len (position table size)");
}

nlohmann::json RunConfig::to_json() const {
    nlohmann::json spec = nlohmann::json::array();
    for (const auto& l : local_conv_spec) {
        spec.push_back(nlohmann::json::array({l.c_in, l.c_out, l.kernel}));
    }
    return nlohmann::json{
        {"vocab_size", vocab_size},
        {"d_model", d_model},
        {"n_heads", n_heads},
        {"n_layers", n_layers},
        {"d_ff", d_ff},
        {"max_len", max_len},
        {"position_embeddings", position_embeddings},
        {"segment_embeddings", segment_embeddings},
        {"n_blocks", n_blocks},
        {"d_k", d_k},
        {"skip_mode", skip_mode},
        {"inside_conv", inside_conv},
        {"merge_c_mid", merge_c_mid},
        {"merge_kernel", merge_kernel},
        {"local_conv_spec", spec},
        {"share_block_weights", share_block_weights},
        {"no_lstm", no_lstm},
        {"lstm_hidden", lstm_hidden},
        {"tau", tau},
        {"max_answer_len", max_answer_len},
        {"batch_size", batch_size},
        {"grad_accum_steps", grad_accum_steps},
        {"learning_rate", learning_rate},
        {"epochs", epochs},
        {"max_seq_len", max_seq_len},
        {"seed", seed},
    };
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ValidationError("config: document must be a JSON object");
    RunConfig c;
    for (const auto& [key, v] : j.items()) {
        if (key == "vocab_size") c.vocab_size = get_int(v, key);
        else if (key == "d_model") c.d_model = get_int(v, key);
        else if (key == "n_heads") c.n_heads = get_int(v, key);
        else if (key == "n_layers") c.n_layers = get_int(v, key);
        else if (key == "d_ff") c.d_ff = get_int(v, key);
        else if (key == "max_len") c.max_len = get_int(v, key);
        else if (key == "position_embeddings") c.position_embeddings = get_bool(v, key);
        else if (key == "segment_embeddings") c.segment_embeddings = get_bool(v, key);
        else if (key == "n_blocks") c.n_blocks = get_int(v, key);
        else if (key == "d_k") c.d_k = get_int(v, key);
        else if (key == "skip_mode") c.skip_mode = get_str(v, key);
        else if (key == "inside_conv") c.inside_conv = get_bool(v, key);
        else if (key == "merge_c_mid") c.merge_c_mid = get_int(v, key);
        else if (key == "merge_kernel") c.merge_kernel = get_int(v, key);
        else if (key == "local_conv_spec") {
            if (!v.is_array()) throw ValidationError("config: local_conv_spec must be an array");
            c.local_conv_spec.clear();
            for (const auto& layer : v) {
                if (!layer.is_array() || layer.size() != 3) {
                    throw ValidationError(
                        "config: each local_conv_spec layer must be [c_in, c_out, kernel]");
                }
                c.local_conv_spec.push_back({get_int(layer[0], key), get_int(layer[1], key),
                                             get_int(layer[2], key)});
            }
        }
        else if (key == "share_block_weights") c.share_block_weights = get_bool(v, key);
        else if (key == "no_lstm") c.no_lstm = get_bool(v, key);
        else if (key == "lstm_hidden") c.lstm_hidden = get_int(v, key);
        else if (key == "tau") c.tau = get_real(v, key);
        else if (key == "max_answer_len") c.max_answer_len = get_int(v, key);
        else if (key == "batch_size") c.batch_size = get_int(v, key);
        else if (key == "grad_accum_steps") c.grad_accum_steps = get_int(v, key);
        else if (key == "learning_rate") c.learning_rate = get_real(v, key);
        else if (key == "epochs") c.epochs = get_int(v, key);
        else if (key == "max_seq_len") c.max_seq_len = get_int(v, key);
        else if (key == "seed") {
            if (!v.is_number_integer() && !v.is_number_unsigned()) {
                throw ValidationError("config: field 'seed' must be an integer");
            }
            c.seed = v.get<uint64_t>();
        }
        else throw ValidationError("config: unknown field '" + key + "'");
    }
    c.resolve();
    return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("config: cannot open '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("config: invalid JSON in '" + path + "': " + e.what());
    }
    return from_json(j);
}

}  // namespace dcqa

#include "dcqa/model.hpp"

#include <cstring>

#include <json.hpp>

#include "dcqa/io_util.hpp"

namespace dcqa {

namespace {

constexpr const char* kCheckpointFormat = "dcqa-checkpoint-v1";

void append_f64_le(std::string& out, double d) {
    uint64_t bits;
    std::memcpy(&bits, &d, sizeof(bits));
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

double read_f64_le(const char* p) {
    uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
        bits |= static_cast<uint64_t>(static_cast<unsigned char>(p[i])) << (8 * i);
    }
    double d;
    std::memcpy(&d, &bits, sizeof(d));
    return d;
}

}  // namespace

QaModel::QaModel(const RunConfig& cfg) : cfg_(cfg) {
    cfg_.resolve();
    params_ = std::make_unique<ParamStore>(cfg_.seed);
    encoder_ = std::make_unique<Encoder>(cfg_, *params_);
    stack_ = std::make_unique<CoattentionStack>(*params_, cfg_);
    head_ = std::make_unique<OutputHead>(*params_, cfg_);
}

SeqMasks QaModel::masks_of(const TokenizedExample& ex) const {
    return SeqMasks{ex.m_query, ex.m_context, ex.m_real};
}

QaModel::Forward QaModel::forward(const TokenizedExample& ex) const {
    if (ex.length() > cfg_.max_seq_len) {
        throw ValidationError("model: example '" + ex.id + "' longer than max_seq_len");
    }
    const SeqMasks masks = masks_of(ex);
    NodePtr e;
    if (cfg_.segment_embeddings) {
        std::vector<int64_t> segs(static_cast<size_t>(ex.length()), 0);
        for (int64_t i = ex.context_begin; i < ex.length(); ++i) segs[static_cast<size_t>(i)] = 1;
        e = encoder_->encode(ex.token_ids, ex.m_real, &segs);
    } else {
        e = encoder_->encode(ex.token_ids, ex.m_real);
    }
    Forward f;
    f.stack = stack_->run(e, masks);
    f.logits = head_->apply(f.stack.merged, ex.m_real);
    return f;
}

NodePtr QaModel::span_loss(const Forward& f, const TokenizedExample& ex) const {
    const int64_t L = ex.length();
    for (int64_t g : {ex.gold_start, ex.gold_end}) {
        if (g < 0 || g >= L) throw ValidationError("loss: gold index outside the sequence");
        if (ex.m_real.data[g] == 0.0) throw ValidationError("loss: gold index at padded position");
    }
    auto s = cross_entropy(f.logits.start, ex.gold_start);
    auto e = cross_entropy(f.logits.end, ex.gold_end);
    return scale(add(s, e), 0.5);
}

QaModel::Prediction QaModel::predict(const TokenizedExample& ex,
                                     std::optional<double> tau_override) const {
    const Forward f = forward(ex);
    const Tensor& start = f.logits.start->value;
    const Tensor& end = f.logits.end->value;
    Prediction p;
    p.span = decode_span(start, end, ex.context_begin, ex.context_end, cfg_.max_answer_len,
                         tau_override.value_or(cfg_.tau));
    p.probability = answer_probability(start, end, ex.m_real, p.span);
    if (!p.span.is_no_answer) p.answer_text = ex.span_text(p.span.start_idx, p.span.end_idx);
    return p;
}

void QaModel::save_checkpoint(const std::string& path) const {
    nlohmann::json manifest = nlohmann::json::array();
    for (const auto& p : params_->all()) {
        manifest.push_back({{"name", p->name}, {"shape", p->value.shape}});
    }
    const nlohmann::json header{
        {"format", kCheckpointFormat},
        {"run_config", cfg_.to_json()},
        {"params", manifest},
    };
    std::string blob = header.dump();
    blob.push_back('\n');
    for (const auto& p : params_->all()) {
        for (double v : p->value.data) append_f64_le(blob, v);
    }
    write_file_atomic(path, blob);
}

QaModel QaModel::load_checkpoint(const std::string& path) {
    const std::string blob = read_file(path);
    const size_t nl = blob.find('\n');
    if (nl == std::string::npos) {
        throw ValidationError("checkpoint '" + path + "': missing header line");
    }
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(blob.substr(0, nl));
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("checkpoint '" + path + "': bad header JSON: " + e.what());
    }
    if (!header.is_object() || header.value("format", "") != kCheckpointFormat) {
        throw ValidationError("checkpoint '" + path + "': unrecognized format tag");
    }
    if (!header.contains("run_config") || !header.contains("params")) {
        throw ValidationError("checkpoint '" + path + "': header missing run_config or params");
    }

    QaModel model(RunConfig::from_json(header["run_config"]));
    const auto& live = model.params_->all();
    const auto& manifest = header["params"];
    if (!manifest.is_array() || manifest.size() != live.size()) {
        throw ValidationError("checkpoint '" + path + "': parameter manifest size mismatch");
    }

    size_t off = nl + 1;
    for (size_t i = 0; i < live.size(); ++i) {
        const auto& entry = manifest[i];
        const std::string name = entry.value("name", "");
        const auto shape = entry.value("shape", std::vector<int64_t>{});
        if (name != live[i]->name || shape != live[i]->value.shape) {
            throw ValidationError("checkpoint '" + path + "': parameter " + std::to_string(i) +
                                  " ('" + name + "') does not match the model built from the " +
                                  "embedded config");
        }
        const size_t bytes = live[i]->value.data.size() * 8;
        if (off + bytes > blob.size()) {
            throw ValidationError("checkpoint '" + path + "': truncated parameter data");
        }
        for (auto& v : live[i]->value.data) {
            v = read_f64_le(blob.data() + off);
            off += 8;
        }
    }
    if (off != blob.size()) {
        throw ValidationError("checkpoint '" + path + "': trailing bytes after parameter data");
    }
    return model;
}

}  // namespace dcqa

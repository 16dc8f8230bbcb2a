#pragma once

#include <memory>
#include <optional>
#include <string>

#include "dcqa/coattention.hpp"
#include "dcqa/config.hpp"
#include "dcqa/encoder.hpp"
#include "dcqa/head.hpp"
#include "dcqa/params.hpp"
#include "dcqa/squad.hpp"

namespace dcqa {

/// The assembled network: encoder -> coattention stack -> output head.
/// Parameter creation order is fixed by the constructor, which is what makes
/// checkpoints and seeded re-construction reproducible.
class QaModel {
public:
    explicit QaModel(const RunConfig& cfg);

    QaModel(const QaModel&) = delete;
    QaModel& operator=(const QaModel&) = delete;
    QaModel(QaModel&&) = default;
    QaModel& operator=(QaModel&&) = default;

    const RunConfig& config() const { return cfg_; }
    ParamStore& params() { return *params_; }
    const ParamStore& params() const { return *params_; }

    struct Forward {
        SpanLogits logits;
        CoattentionStack::Output stack;
    };
    Forward forward(const TokenizedExample& ex) const;

    /// Mean of the start and end cross-entropies against the gold span.
    NodePtr span_loss(const Forward& f, const TokenizedExample& ex) const;

    struct Prediction {
        SpanPrediction span;
        double probability = 0.0;
        std::string answer_text;  // empty means no-answer
    };
    /// tau_override, when given, replaces the config's no-answer threshold
    /// for this decode only.
    Prediction predict(const TokenizedExample& ex,
                       std::optional<double> tau_override = std::nullopt) const;

    /// One JSON header line (format tag, run config, parameter manifest)
    /// followed by every parameter's raw little-endian 64-bit values in
    /// manifest order. Round-trips bit-exactly.
    void save_checkpoint(const std::string& path) const;
    static QaModel load_checkpoint(const std::string& path);

    SeqMasks masks_of(const TokenizedExample& ex) const;

private:
    RunConfig cfg_;
    std::unique_ptr<ParamStore> params_;
    std::unique_ptr<Encoder> encoder_;
    std::unique_ptr<CoattentionStack> stack_;
    std::unique_ptr<OutputHead> head_;
};

}  // namespace dcqa

#include "dcqa/train.hpp"

#include <cmath>

namespace dcqa {

Adam::Adam(const std::vector<NodePtr>& params, double lr, double beta1, double beta2, double eps)
    : params_(params), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& p : params_) {
        m_.emplace_back(p->value.data.size(), 0.0);
        v_.emplace_back(p->value.data.size(), 0.0);
    }
}

void Adam::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (size_t p = 0; p < params_.size(); ++p) {
        auto& value = params_[p]->value.data;
        const auto& grad = params_[p]->grad.data;
        auto& m = m_[p];
        auto& v = v_[p];
        for (size_t i = 0; i < value.size(); ++i) {
            const double g = grad[i];
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
            value[i] -= lr_ * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps_);
        }
    }
}

int64_t uniform_below(std::mt19937_64& rng, int64_t n) {
    // Rejection sampling keeps the draw unbiased and identical everywhere.
    const uint64_t bound = static_cast<uint64_t>(n);
    const uint64_t limit = std::numeric_limits<uint64_t>::max() -
                           std::numeric_limits<uint64_t>::max() % bound;
    uint64_t draw;
    do {
        draw = rng();
    } while (draw >= limit);
    return static_cast<int64_t>(draw % bound);
}

void seeded_shuffle(std::vector<int64_t>& idx, std::mt19937_64& rng) {
    for (int64_t i = static_cast<int64_t>(idx.size()) - 1; i > 0; --i) {
        std::swap(idx[i], idx[uniform_below(rng, i + 1)]);
    }
}

TrainResult train_model(QaModel& model, const std::vector<TokenizedExample>& examples,
                        int64_t max_updates, std::ostream* log) {
    if (examples.empty()) throw ValidationError("train: empty dataset");
    const RunConfig& cfg = model.config();
    const int64_t n = static_cast<int64_t>(examples.size());
    const int64_t effective = cfg.batch_size * cfg.grad_accum_steps;

    Adam opt(model.params().all(), cfg.learning_rate);
    std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
    std::vector<int64_t> order(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;

    TrainResult result;
    model.params().zero_all_grads();
    bool done = false;
    for (int64_t epoch = 0; epoch < cfg.epochs && !done; ++epoch) {
        seeded_shuffle(order, rng);
        int64_t cursor = 0;
        while (cursor < n && !done) {
            // One optimizer update: grad_accum_steps micro-batches, processed
            // in index order, each loss scaled so the gradient matches the
            // mean over the effective batch.
            double update_loss = 0.0;
            int64_t consumed = 0;
            for (int64_t micro = 0; micro < cfg.grad_accum_steps && cursor < n; ++micro) {
                for (int64_t b = 0; b < cfg.batch_size && cursor < n; ++b, ++cursor) {
                    const auto& ex = examples[static_cast<size_t>(order[static_cast<size_t>(cursor)])];
                    auto f = model.forward(ex);
                    auto loss = scale(model.span_loss(f, ex), 1.0 / static_cast<double>(effective));
                    const double value = loss->value.data[0];
                    if (!std::isfinite(value)) {
                        throw std::runtime_error("train: loss diverged (non-finite) at update " +
                                                 std::to_string(result.updates + 1));
                    }
                    update_loss += value;
                    ++consumed;
                    backward(loss);
                }
            }
            // Rescale the logged loss to a per-example mean when the final
            // batch of an epoch comes up short.
            const double mean_loss = update_loss * static_cast<double>(effective) /
                                     static_cast<double>(consumed);
            opt.step();
            model.params().zero_all_grads();
            result.loss_curve.push_back(mean_loss);
            ++result.updates;
            if (log) {
                (*log) << "update " << result.updates << " loss " << mean_loss << "\n";
            }
            if (max_updates > 0 && result.updates >= max_updates) done = true;
        }
    }
    return result;
}

}  // namespace dcqa

#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "dcqa/model.hpp"

namespace dcqa {

/// Adam with bias correction; one slot pair (m, v) per parameter element.
class Adam {
public:
    Adam(const std::vector<NodePtr>& params, double lr, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8);

    /// Applies one update from the gradients currently accumulated on the
    /// parameters. Does not clear them.
    void step();

private:
    std::vector<NodePtr> params_;
    double lr_, beta1_, beta2_, eps_;
    int64_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

/// Deterministic in-place Fisher-Yates driven by rejection-sampled draws, so
/// the permutation stream is identical on every platform.
void seeded_shuffle(std::vector<int64_t>& idx, std::mt19937_64& rng);
int64_t uniform_below(std::mt19937_64& rng, int64_t n);

struct TrainResult {
    std::vector<double> loss_curve;  // average micro-batch loss per optimizer update
    int64_t updates = 0;
};

/// Gradient-accumulating training loop: examples are visited in seeded
/// shuffled order per epoch, micro-batches of batch_size are summed over
/// grad_accum_steps before each Adam step, and a non-finite loss aborts.
/// `max_updates` of 0 means no cap. The per-update loss is streamed to `log`
/// when given.
TrainResult train_model(QaModel& model, const std::vector<TokenizedExample>& examples,
                        int64_t max_updates = 0, std::ostream* log = nullptr);

}  // namespace dcqa

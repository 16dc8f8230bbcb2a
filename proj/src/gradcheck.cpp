#include "dcqa/gradcheck.hpp"

#include <cmath>
#include <random>

#include "dcqa/model.hpp"
#include "dcqa/tensor.hpp"

namespace dcqa {

namespace {

Tensor rand_tensor(std::vector<int64_t> shape, std::mt19937_64& rng, double lo = -1.5,
                   double hi = 1.5) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Tensor t = Tensor::zeros(std::move(shape));
    for (auto& v : t.data) v = dist(rng);
    return t;
}

// Values kept away from zero so kinked activations (relu) see a locally
// smooth function at every probe point.
Tensor rand_tensor_off_zero(std::vector<int64_t> shape, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> mag(0.1, 1.5);
    std::bernoulli_distribution sign(0.5);
    Tensor t = Tensor::zeros(std::move(shape));
    for (auto& v : t.data) v = (sign(rng) ? 1.0 : -1.0) * mag(rng);
    return t;
}

void run_probe(GradCheckReport& rep, const std::string& name,
               const std::function<NodePtr()>& build, const std::vector<NodePtr>& inputs,
               double epsilon) {
    GradCheckEntry e;
    e.name = name;
    e.max_rel_err = grad_check(build, inputs, epsilon);
    for (const auto& in : inputs) e.n_elements += in->value.numel();
    rep.worst = std::max(rep.worst, e.max_rel_err);
    rep.entries.push_back(std::move(e));
}

void primitive_probes(GradCheckReport& rep, std::mt19937_64& rng, double eps) {
    {
        auto a = leaf(rand_tensor({2, 3}, rng), "a");
        auto b = leaf(rand_tensor({3}, rng), "b");
        Tensor w = rand_tensor({2, 3}, rng);
        run_probe(rep, "add", [=] { return weighted_sum(add(a, b), w); }, {a, b}, eps);
    }
    {
        auto a = leaf(rand_tensor({2, 3}, rng), "a");
        auto b = leaf(rand_tensor({2, 1}, rng), "b");
        Tensor w = rand_tensor({2, 3}, rng);
        run_probe(rep, "mul", [=] { return weighted_sum(mul(a, b), w); }, {a, b}, eps);
    }
    {
        auto x = leaf(rand_tensor({2, 4}, rng), "x");
        Tensor w = rand_tensor({2, 4}, rng);
        run_probe(rep, "affine", [=] { return weighted_sum(affine(x, 1.7, -0.3), w); }, {x}, eps);
        run_probe(rep, "scale", [=] { return weighted_sum(scale(x, -2.5), w); }, {x}, eps);
    }
    {
        auto a = leaf(rand_tensor({2, 3}, rng), "a");
        auto b = leaf(rand_tensor({3, 4}, rng), "b");
        Tensor w = rand_tensor({2, 4}, rng);
        run_probe(rep, "matmul", [=] { return weighted_sum(matmul(a, b), w); }, {a, b}, eps);
    }
    {
        auto x = leaf(rand_tensor({2, 5}, rng), "x");
        Tensor w = rand_tensor({5, 2}, rng);
        run_probe(rep, "transpose2d", [=] { return weighted_sum(transpose2d(x), w); }, {x}, eps);
    }
    {
        auto x = leaf(rand_tensor_off_zero({3, 4}, rng), "x");
        Tensor w = rand_tensor({3, 4}, rng);
        run_probe(rep, "relu", [=] { return weighted_sum(relu(x), w); }, {x}, eps);
        run_probe(rep, "gelu", [=] { return weighted_sum(gelu(x), w); }, {x}, eps);
        run_probe(rep, "tanh", [=] { return weighted_sum(tanh_op(x), w); }, {x}, eps);
        run_probe(rep, "sigmoid", [=] { return weighted_sum(sigmoid(x), w); }, {x}, eps);
    }
    {
        auto x = leaf(rand_tensor({2, 4}, rng), "x");
        Tensor mask({4}, {1.0, 0.0, 1.0, 1.0});
        Tensor w = rand_tensor({2, 4}, rng);
        run_probe(
            rep, "masked_softmax",
            [=] { return weighted_sum(masked_softmax(x, mask, std::sqrt(3.0)), w); }, {x}, eps);
    }
    {
        auto x = leaf(rand_tensor({2, 5}, rng), "x");
        auto g = leaf(rand_tensor({5}, rng, 0.5, 1.5), "g");
        auto b = leaf(rand_tensor({5}, rng), "b");
        Tensor w = rand_tensor({2, 5}, rng);
        run_probe(rep, "layer_norm", [=] { return weighted_sum(layer_norm(x, g, b), w); },
                  {x, g, b}, eps);
    }
    {
        auto x = leaf(rand_tensor({5, 3}, rng), "x");
        auto k = leaf(rand_tensor({4, 3, 3}, rng), "k");
        auto b = leaf(rand_tensor({4}, rng), "b");
        Tensor w = rand_tensor({5, 4}, rng);
        run_probe(rep, "conv1d", [=] { return weighted_sum(conv1d(x, k, b), w); }, {x, k, b},
                  eps);
    }
    {
        auto x = leaf(rand_tensor({4, 3}, rng), "x");
        auto wx = leaf(rand_tensor({8, 3}, rng, -0.5, 0.5), "wx");
        auto wh = leaf(rand_tensor({8, 2}, rng, -0.5, 0.5), "wh");
        auto b = leaf(rand_tensor({8}, rng, -0.5, 0.5), "b");
        Tensor w = rand_tensor({4, 2}, rng);
        run_probe(rep, "lstm_sequence",
                  [=] { return weighted_sum(lstm_sequence(x, wx, wh, b), w); }, {x, wx, wh, b},
                  eps);
    }
    {
        auto x = leaf(rand_tensor({3, 4}, rng), "x");
        auto wm = leaf(rand_tensor({4, 2}, rng), "w");
        auto b = leaf(rand_tensor({2}, rng), "b");
        Tensor w = rand_tensor({3, 2}, rng);
        run_probe(rep, "linear", [=] { return weighted_sum(linear(x, wm, b), w); }, {x, wm, b},
                  eps);
    }
    {
        auto a = leaf(rand_tensor({2, 2}, rng), "a");
        auto b = leaf(rand_tensor({2, 3}, rng), "b");
        Tensor w = rand_tensor({2, 5}, rng);
        run_probe(rep, "concat",
                  [=] { return weighted_sum(concat({a, b}, 1), w); }, {a, b}, eps);
    }
    {
        auto x = leaf(rand_tensor({2, 5}, rng), "x");
        Tensor w = rand_tensor({2, 3}, rng);
        run_probe(rep, "slice_cols", [=] { return weighted_sum(slice_cols(x, 1, 4), w); }, {x},
                  eps);
    }
    {
        auto x = leaf(rand_tensor({2, 6}, rng), "x");
        Tensor w = rand_tensor({3, 4}, rng);
        run_probe(rep, "reshape", [=] { return weighted_sum(reshape(x, {3, 4}), w); }, {x}, eps);
    }
    {
        auto table = leaf(rand_tensor({5, 3}, rng), "table");
        std::vector<int64_t> ids{0, 2, 2, 4};
        Tensor w = rand_tensor({4, 3}, rng);
        run_probe(rep, "embedding_rows",
                  [=] { return weighted_sum(embedding_rows(table, ids), w); }, {table}, eps);
    }
    {
        auto logits = leaf(rand_tensor({5}, rng), "logits");
        run_probe(rep, "cross_entropy", [=] { return cross_entropy(logits, 2); }, {logits}, eps);
    }
    {
        auto x = leaf(rand_tensor({3, 3}, rng), "x");
        Tensor w = rand_tensor({3, 3}, rng);
        run_probe(rep, "weighted_sum", [=] { return weighted_sum(x, w); }, {x}, eps);
    }
}

// A hand-built six-token example: [CLS] q [SEP] c c [SEP], gold span on the
// two context tokens.
TokenizedExample tiny_example() {
    TokenizedExample ex;
    ex.id = "gradcheck-0";
    ex.token_ids = {2, 5, 3, 7, 9, 3};
    const int64_t L = ex.length();
    ex.m_query = Tensor::zeros({L});
    ex.m_context = Tensor::zeros({L});
    ex.m_real = Tensor::full({L}, 1.0);
    ex.m_query.data[1] = 1.0;
    ex.context_begin = 3;
    ex.context_end = 5;
    ex.m_context.data[3] = 1.0;
    ex.m_context.data[4] = 1.0;
    ex.gold_start = 3;
    ex.gold_end = 4;
    return ex;
}

void composed_probe(GradCheckReport& rep, uint64_t seed, double eps) {
    RunConfig cfg;
    cfg.vocab_size = 12;
    cfg.d_model = 8;
    cfg.n_heads = 2;
    cfg.n_layers = 1;
    cfg.d_ff = 16;
    cfg.max_len = 8;
    cfg.max_seq_len = 8;
    cfg.n_blocks = 2;
    cfg.d_k = 4;
    cfg.skip_mode = "simple";
    cfg.inside_conv = true;
    cfg.merge_c_mid = 12;
    cfg.lstm_hidden = 4;
    cfg.seed = seed;

    QaModel model(cfg);
    const TokenizedExample ex = tiny_example();
    auto build = [&model, &ex] {
        QaModel::Forward f = model.forward(ex);
        return model.span_loss(f, ex);
    };
    run_probe(rep, "model_span_loss", build, model.params().all(), eps);
}

}  // namespace

GradCheckReport run_grad_checks(uint64_t seed, double epsilon) {
    std::mt19937_64 rng(seed);
    GradCheckReport rep;
    primitive_probes(rep, rng, epsilon);
    composed_probe(rep, seed, epsilon);
    return rep;
}

}  // namespace dcqa

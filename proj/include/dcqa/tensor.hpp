#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "dcqa/common.hpp"

namespace dcqa {

/// Dense row-major tensor of doubles. Plain value type, no views.
struct Tensor {
    std::vector<int64_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<int64_t> shape_in, std::vector<double> data_in);

    static Tensor zeros(std::vector<int64_t> shape);
    static Tensor full(std::vector<int64_t> shape, double v);
    static Tensor scalar(double v);

    int64_t numel() const;
    size_t rank() const { return shape.size(); }
    int64_t dim(size_t i) const { return shape.at(i); }
    double& at(std::initializer_list<int64_t> idx);
    double at(std::initializer_list<int64_t> idx) const;
    bool all_finite() const;
};

std::string shape_str(const std::vector<int64_t>& s);
int64_t shape_numel(const std::vector<int64_t>& s);

class Node;
using NodePtr = std::shared_ptr<Node>;

/// One vertex of the computation graph. Ops allocate a fresh node per call;
/// parameter leaves persist across steps so their grads accumulate until the
/// optimizer clears them.
class Node {
public:
    Tensor value;
    Tensor grad;  // allocated lazily; same shape as value once touched
    std::vector<NodePtr> parents;
    std::function<void(Node&)> backward_fn;
    std::string name;  // non-empty only for parameters

    void ensure_grad();
    void zero_grad();
};

NodePtr wrap(Tensor value);
NodePtr leaf(Tensor value, std::string name);

/// Reverse-topological gradient accumulation from a scalar root.
void backward(const NodePtr& root);

// Elementwise ops broadcast numpy-style (right-aligned).
NodePtr add(NodePtr a, NodePtr b);
NodePtr mul(NodePtr a, NodePtr b);
NodePtr affine(NodePtr x, double mul_by, double add_const);
NodePtr scale(NodePtr x, double c);

NodePtr matmul(NodePtr a, NodePtr b);  // [..,m,k] x [..,k,n], batch dims broadcast
NodePtr transpose2d(NodePtr x);        // swaps the last two axes

NodePtr relu(NodePtr x);
NodePtr gelu(NodePtr x);
NodePtr tanh_op(NodePtr x);
NodePtr sigmoid(NodePtr x);

/// Softmax over the last axis restricted to mask==1 positions; masked
/// positions get exactly zero. Scores are divided by temperature_divisor
/// before exponentiation. Mask broadcasts right-aligned against x.
NodePtr masked_softmax(NodePtr x, Tensor mask, double temperature_divisor);

NodePtr layer_norm(NodePtr x, NodePtr gamma, NodePtr beta, double eps = 1e-5);

/// Same-length 1-D convolution (cross-correlation, zero padding).
/// x: [L, Cin], kernels: [Cout, Cin, K] with K odd, bias: [Cout] -> [L, Cout].
NodePtr conv1d(NodePtr x, NodePtr kernels, NodePtr bias);

/// Left-to-right LSTM over x: [L, Din] -> hidden states [L, H].
/// Gate order in the stacked weights is input, forget, candidate, output.
/// w_input: [4H, Din], w_hidden: [4H, H], bias: [4H]. Initial state is zero.
NodePtr lstm_sequence(NodePtr x, NodePtr w_input, NodePtr w_hidden, NodePtr bias);

NodePtr linear(NodePtr x, NodePtr w, NodePtr b);  // x[..,in] * w[in,out] + b[out]
NodePtr concat(const std::vector<NodePtr>& xs, size_t axis);
NodePtr slice_cols(NodePtr x, int64_t c0, int64_t c1);  // 2-D column range
NodePtr reshape(NodePtr x, std::vector<int64_t> new_shape);
NodePtr embedding_rows(NodePtr table, const std::vector<int64_t>& ids);
NodePtr cross_entropy(NodePtr logits, int64_t target);  // 1-D logits -> scalar
NodePtr weighted_sum(NodePtr x, Tensor weights);         // scalar probe

/// Compares analytic gradients against central finite differences for every
/// element of every input, rebuilding the graph via build_scalar per probe.
/// Returns the worst relative error.
double grad_check(const std::function<NodePtr()>& build_scalar,
                  const std::vector<NodePtr>& inputs, double epsilon);

}  // namespace dcqa

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "dcqa/tensor.hpp"

namespace dcqa {

/// Owns every learned parameter of a model. Creation order is the canonical
/// order: initialization draws, checkpoint records, and optimizer state all
/// follow it, so two models built from the same config and seed are
/// bit-identical.
class ParamStore {
public:
    explicit ParamStore(uint64_t seed);

    /// Weight tensor initialized uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)).
    NodePtr uniform(const std::string& name, std::vector<int64_t> shape, int64_t fan_in);
    NodePtr zeros(const std::string& name, std::vector<int64_t> shape);
    NodePtr ones(const std::string& name, std::vector<int64_t> shape);

    NodePtr get(const std::string& name) const;
    bool has(const std::string& name) const { return by_name_.count(name) != 0; }
    const std::vector<NodePtr>& all() const { return order_; }
    int64_t total_elements() const;
    void zero_all_grads();

private:
    NodePtr insert(const std::string& name, Tensor value);

    std::mt19937_64 rng_;
    std::vector<NodePtr> order_;
    std::unordered_map<std::string, NodePtr> by_name_;
};

}  // namespace dcqa

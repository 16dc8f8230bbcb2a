#include "dcqa/params.hpp"

#include <cmath>

namespace dcqa {

ParamStore::ParamStore(uint64_t seed) : rng_(seed) {}

NodePtr ParamStore::insert(const std::string& name, Tensor value) {
    if (name.empty()) throw ValidationError("param: empty name");
    if (by_name_.count(name)) throw ValidationError("param: duplicate name '" + name + "'");
    auto n = leaf(std::move(value), name);
    n->ensure_grad();
    order_.push_back(n);
    by_name_[name] = n;
    return n;
}

NodePtr ParamStore::uniform(const std::string& name, std::vector<int64_t> shape, int64_t fan_in) {
    if (fan_in <= 0) throw ValidationError("param '" + name + "': fan_in must be positive");
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor t = Tensor::zeros(std::move(shape));
    for (auto& v : t.data) v = dist(rng_);
    return insert(name, std::move(t));
}

NodePtr ParamStore::zeros(const std::string& name, std::vector<int64_t> shape) {
    return insert(name, Tensor::zeros(std::move(shape)));
}

NodePtr ParamStore::ones(const std::string& name, std::vector<int64_t> shape) {
    return insert(name, Tensor::full(std::move(shape), 1.0));
}

NodePtr ParamStore::get(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw ValidationError("param: unknown name '" + name + "'");
    return it->second;
}

int64_t ParamStore::total_elements() const {
    int64_t n = 0;
    for (const auto& p : order_) n += p->value.numel();
    return n;
}

void ParamStore::zero_all_grads() {
    for (const auto& p : order_) p->zero_grad();
}

}  // namespace dcqa

#include "dcqa/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>
#include <utility>

namespace dcqa {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

std::vector<int64_t> row_major_strides(const std::vector<int64_t>& shape) {
    std::vector<int64_t> st(shape.size());
    int64_t acc = 1;
    for (size_t i = shape.size(); i-- > 0;) {
        st[i] = acc;
        acc *= shape[i];
    }
    return st;
}

std::vector<int64_t> broadcast_shape(const std::vector<int64_t>& a,
                                     const std::vector<int64_t>& b,
                                     const char* op) {
    const size_t r = std::max(a.size(), b.size());
    std::vector<int64_t> out(r, 1);
    for (size_t i = 0; i < r; ++i) {
        const int64_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
        const int64_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
        if (da != db && da != 1 && db != 1) {
            throw ValidationError(std::string(op) + ": shapes not broadcastable: " +
                                  shape_str(a) + " vs " + shape_str(b));
        }
        out[i] = std::max(da, db);
    }
    return out;
}

// Strides of `shape` expanded right-aligned to `out_shape`; 0 on broadcast dims.
std::vector<int64_t> broadcast_strides(const std::vector<int64_t>& shape,
                                       const std::vector<int64_t>& out_shape) {
    const auto st = row_major_strides(shape);
    std::vector<int64_t> res(out_shape.size(), 0);
    const size_t off = out_shape.size() - shape.size();
    for (size_t i = 0; i < shape.size(); ++i) {
        res[off + i] = (shape[i] == out_shape[off + i]) ? st[i] : 0;
    }
    return res;
}

int64_t map_flat(int64_t flat, const std::vector<int64_t>& out_shape,
                 const std::vector<int64_t>& bstrides) {
    int64_t off = 0;
    for (size_t i = out_shape.size(); i-- > 0;) {
        off += (flat % out_shape[i]) * bstrides[i];
        flat /= out_shape[i];
    }
    return off;
}

NodePtr make_node(Tensor value, std::vector<NodePtr> parents,
                  std::function<void(Node&)> backward_fn) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->parents = std::move(parents);
    n->backward_fn = std::move(backward_fn);
    return n;
}

void check_same_last_dim(const char* op, const Tensor& x, const Tensor& v) {
    if (v.rank() != 1 || v.shape[0] != x.shape.back()) {
        throw ValidationError(std::string(op) + ": expected vector of size " +
                              std::to_string(x.shape.back()) + ", got " + shape_str(v.shape));
    }
}

}  // namespace

Tensor::Tensor(std::vector<int64_t> shape_in, std::vector<double> data_in)
    : shape(std::move(shape_in)), data(std::move(data_in)) {
    if (shape_numel(shape) != static_cast<int64_t>(data.size())) {
        throw ValidationError("tensor: shape " + shape_str(shape) + " wants " +
                              std::to_string(shape_numel(shape)) + " values, got " +
                              std::to_string(data.size()));
    }
}

Tensor Tensor::zeros(std::vector<int64_t> shape) {
    const int64_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(static_cast<size_t>(n), 0.0));
}

Tensor Tensor::full(std::vector<int64_t> shape, double v) {
    const int64_t n = shape_numel(shape);
    return Tensor(std::move(shape), std::vector<double>(static_cast<size_t>(n), v));
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

int64_t Tensor::numel() const { return static_cast<int64_t>(data.size()); }

double& Tensor::at(std::initializer_list<int64_t> idx) {
    const auto st = row_major_strides(shape);
    int64_t off = 0;
    size_t i = 0;
    for (int64_t d : idx) off += d * st[i++];
    return data[static_cast<size_t>(off)];
}

double Tensor::at(std::initializer_list<int64_t> idx) const {
    return const_cast<Tensor*>(this)->at(idx);
}

bool Tensor::all_finite() const {
    return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

std::string shape_str(const std::vector<int64_t>& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

int64_t shape_numel(const std::vector<int64_t>& s) {
    int64_t n = 1;
    for (int64_t d : s) {
        if (d <= 0) throw ValidationError("tensor: non-positive extent in shape " + shape_str(s));
        n *= d;
    }
    return n;
}

void Node::ensure_grad() {
    if (grad.data.empty()) grad = Tensor::zeros(value.shape);
}

void Node::zero_grad() {
    std::fill(grad.data.begin(), grad.data.end(), 0.0);
}

NodePtr wrap(Tensor value) { return make_node(std::move(value), {}, nullptr); }

NodePtr leaf(Tensor value, std::string name) {
    auto n = wrap(std::move(value));
    n->name = std::move(name);
    return n;
}

void backward(const NodePtr& root) {
    if (!root) throw ValidationError("backward: null root");
    if (root->value.numel() != 1) {
        throw ValidationError("backward: root must be scalar, got " + shape_str(root->value.shape));
    }
    // Iterative post-order DFS over parent edges.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    root->ensure_grad();
    root->grad.data[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn) {
            n->ensure_grad();
            for (auto& p : n->parents) p->ensure_grad();
            n->backward_fn(*n);
        }
    }
}

NodePtr add(NodePtr a, NodePtr b) {
    const auto out_shape = broadcast_shape(a->value.shape, b->value.shape, "add");
    const auto as = broadcast_strides(a->value.shape, out_shape);
    const auto bs = broadcast_strides(b->value.shape, out_shape);
    Tensor out = Tensor::zeros(out_shape);
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) {
        out.data[i] = a->value.data[map_flat(i, out_shape, as)] +
                      b->value.data[map_flat(i, out_shape, bs)];
    }
    return make_node(std::move(out), {a, b}, [out_shape, as, bs](Node& self) {
        auto& ga = self.parents[0]->grad;
        auto& gb = self.parents[1]->grad;
        const int64_t n = self.grad.numel();
        for (int64_t i = 0; i < n; ++i) {
            const double g = self.grad.data[i];
            ga.data[map_flat(i, out_shape, as)] += g;
            gb.data[map_flat(i, out_shape, bs)] += g;
        }
    });
}

NodePtr mul(NodePtr a, NodePtr b) {
    const auto out_shape = broadcast_shape(a->value.shape, b->value.shape, "mul");
    const auto as = broadcast_strides(a->value.shape, out_shape);
    const auto bs = broadcast_strides(b->value.shape, out_shape);
    Tensor out = Tensor::zeros(out_shape);
    const int64_t n = out.numel();
    for (int64_t i = 0; i < n; ++i) {
        out.data[i] = a->value.data[map_flat(i, out_shape, as)] *
                      b->value.data[map_flat(i, out_shape, bs)];
    }
    return make_node(std::move(out), {a, b}, [out_shape, as, bs](Node& self) {
        const auto& av = self.parents[0]->value;
        const auto& bv = self.parents[1]->value;
        auto& ga = self.parents[0]->grad;
        auto& gb = self.parents[1]->grad;
        const int64_t n = self.grad.numel();
        for (int64_t i = 0; i < n; ++i) {
            const double g = self.grad.data[i];
            const int64_t ia = map_flat(i, out_shape, as);
            const int64_t ib = map_flat(i, out_shape, bs);
            ga.data[ia] += g * bv.data[ib];
            gb.data[ib] += g * av.data[ia];
        }
    });
}

NodePtr affine(NodePtr x, double mul_by, double add_const) {
    Tensor out = x->value;
    for (auto& v : out.data) v = mul_by * v + add_const;
    return make_node(std::move(out), {x}, [mul_by](Node& self) {
        auto& gx = self.parents[0]->grad;
        for (size_t i = 0; i < gx.data.size(); ++i) gx.data[i] += mul_by * self.grad.data[i];
    });
}

NodePtr scale(NodePtr x, double c) { return affine(x, c, 0.0); }

NodePtr matmul(NodePtr a, NodePtr b) {
    const auto& ash = a->value.shape;
    const auto& bsh = b->value.shape;
    if (ash.size() < 2 || bsh.size() < 2) {
        throw ValidationError("matmul: operands must have rank >= 2, got " + shape_str(ash) +
                              " and " + shape_str(bsh));
    }
    const int64_t m = ash[ash.size() - 2], k = ash.back();
    const int64_t k2 = bsh[bsh.size() - 2], n = bsh.back();
    if (k != k2) {
        throw ValidationError("matmul: inner extents differ: " + shape_str(ash) + " x " +
                              shape_str(bsh));
    }
    const std::vector<int64_t> abatch(ash.begin(), ash.end() - 2);
    const std::vector<int64_t> bbatch(bsh.begin(), bsh.end() - 2);
    const auto obatch = broadcast_shape(abatch, bbatch, "matmul");
    const auto astr = broadcast_strides(abatch, obatch);
    const auto bstr = broadcast_strides(bbatch, obatch);
    int64_t nbatch = 1;
    for (int64_t d : obatch) nbatch *= d;

    std::vector<int64_t> out_shape = obatch;
    out_shape.push_back(m);
    out_shape.push_back(n);
    Tensor out = Tensor::zeros(out_shape);

    const double* ad = a->value.data.data();
    const double* bd = b->value.data.data();
    for (int64_t ob = 0; ob < nbatch; ++ob) {
        const double* am = ad + map_flat(ob, obatch, astr) * m * k;
        const double* bm = bd + map_flat(ob, obatch, bstr) * k * n;
        double* om = out.data.data() + ob * m * n;
        for (int64_t i = 0; i < m; ++i) {
            for (int64_t kk = 0; kk < k; ++kk) {
                const double av = am[i * k + kk];
                if (av == 0.0) continue;
                const double* brow = bm + kk * n;
                double* orow = om + i * n;
                for (int64_t j = 0; j < n; ++j) orow[j] += av * brow[j];
            }
        }
    }

    return make_node(std::move(out), {a, b},
                     [obatch, astr, bstr, nbatch, m, k, n](Node& self) {
        const double* av = self.parents[0]->value.data.data();
        const double* bv = self.parents[1]->value.data.data();
        double* ga = self.parents[0]->grad.data.data();
        double* gb = self.parents[1]->grad.data.data();
        const double* g = self.grad.data.data();
        for (int64_t ob = 0; ob < nbatch; ++ob) {
            const int64_t aoff = map_flat(ob, obatch, astr) * m * k;
            const int64_t boff = map_flat(ob, obatch, bstr) * k * n;
            const double* gm = g + ob * m * n;
            // dA = dC * B^T ; dB = A^T * dC
            for (int64_t i = 0; i < m; ++i) {
                for (int64_t j = 0; j < n; ++j) {
                    const double gv = gm[i * n + j];
                    if (gv == 0.0) continue;
                    for (int64_t kk = 0; kk < k; ++kk) {
                        ga[aoff + i * k + kk] += gv * bv[boff + kk * n + j];
                        gb[boff + kk * n + j] += gv * av[aoff + i * k + kk];
                    }
                }
            }
        }
    });
}

NodePtr transpose2d(NodePtr x) {
    const auto& sh = x->value.shape;
    if (sh.size() < 2) throw ValidationError("transpose2d: rank must be >= 2");
    std::vector<int64_t> out_shape = sh;
    std::swap(out_shape[out_shape.size() - 1], out_shape[out_shape.size() - 2]);
    const int64_t r = sh[sh.size() - 2], c = sh.back();
    int64_t nbatch = x->value.numel() / (r * c);
    Tensor out = Tensor::zeros(out_shape);
    for (int64_t b = 0; b < nbatch; ++b) {
        const double* src = x->value.data.data() + b * r * c;
        double* dst = out.data.data() + b * r * c;
        for (int64_t i = 0; i < r; ++i)
            for (int64_t j = 0; j < c; ++j) dst[j * r + i] = src[i * c + j];
    }
    return make_node(std::move(out), {x}, [r, c, nbatch](Node& self) {
        double* gx = self.parents[0]->grad.data.data();
        const double* g = self.grad.data.data();
        for (int64_t b = 0; b < nbatch; ++b) {
            for (int64_t i = 0; i < r; ++i)
                for (int64_t j = 0; j < c; ++j)
                    gx[b * r * c + i * c + j] += g[b * r * c + j * r + i];
        }
    });
}

NodePtr relu(NodePtr x) {
    Tensor out = x->value;
    for (auto& v : out.data) v = v > 0.0 ? v : 0.0;
    return make_node(std::move(out), {x}, [](Node& self) {
        const auto& xv = self.parents[0]->value;
        auto& gx = self.parents[0]->grad;
        for (size_t i = 0; i < gx.data.size(); ++i) {
            if (xv.data[i] > 0.0) gx.data[i] += self.grad.data[i];
        }
    });
}

NodePtr gelu(NodePtr x) {
    Tensor out = x->value;
    for (auto& v : out.data) v = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
    return make_node(std::move(out), {x}, [](Node& self) {
        const auto& xv = self.parents[0]->value;
        auto& gx = self.parents[0]->grad;
        for (size_t i = 0; i < gx.data.size(); ++i) {
            const double v = xv.data[i];
            const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
            const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
            gx.data[i] += self.grad.data[i] * (cdf + v * pdf);
        }
    });
}

NodePtr tanh_op(NodePtr x) {
    Tensor out = x->value;
    for (auto& v : out.data) v = std::tanh(v);
    return make_node(std::move(out), {x}, [](Node& self) {
        auto& gx = self.parents[0]->grad;
        for (size_t i = 0; i < gx.data.size(); ++i) {
            const double t = self.value.data[i];
            gx.data[i] += self.grad.data[i] * (1.0 - t * t);
        }
    });
}

NodePtr sigmoid(NodePtr x) {
    Tensor out = x->value;
    for (auto& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
    return make_node(std::move(out), {x}, [](Node& self) {
        auto& gx = self.parents[0]->grad;
        for (size_t i = 0; i < gx.data.size(); ++i) {
            const double s = self.value.data[i];
            gx.data[i] += self.grad.data[i] * s * (1.0 - s);
        }
    });
}

NodePtr masked_softmax(NodePtr x, Tensor mask, double temperature_divisor) {
    if (!(temperature_divisor > 0.0)) {
        throw ValidationError("masked_softmax: temperature divisor must be positive");
    }
    const auto& xsh = x->value.shape;
    if (mask.rank() == 0 || mask.rank() > xsh.size() || mask.shape.back() != xsh.back()) {
        throw ValidationError("masked_softmax: mask " + shape_str(mask.shape) +
                              " does not align with input " + shape_str(xsh));
    }
    for (double v : mask.data) {
        if (v != 0.0 && v != 1.0) throw ValidationError("masked_softmax: mask entries must be 0 or 1");
    }
    const auto mstr = broadcast_strides(mask.shape, xsh);
    const int64_t L = xsh.back();
    const int64_t rows = x->value.numel() / L;
    Tensor out = Tensor::zeros(xsh);
    for (int64_t r = 0; r < rows; ++r) {
        const double* xr = x->value.data.data() + r * L;
        double* orow = out.data.data() + r * L;
        double mx = -std::numeric_limits<double>::infinity();
        int64_t ones = 0;
        for (int64_t j = 0; j < L; ++j) {
            if (mask.data[map_flat(r * L + j, xsh, mstr)] != 0.0) {
                ++ones;
                mx = std::max(mx, xr[j] / temperature_divisor);
            }
        }
        if (ones == 0) throw ValidationError("masked_softmax: all-zero mask row");
        double sum = 0.0;
        for (int64_t j = 0; j < L; ++j) {
            if (mask.data[map_flat(r * L + j, xsh, mstr)] != 0.0) {
                orow[j] = std::exp(xr[j] / temperature_divisor - mx);
                sum += orow[j];
            }
        }
        for (int64_t j = 0; j < L; ++j) orow[j] /= sum;
        for (int64_t j = 0; j < L; ++j) {
            if (mask.data[map_flat(r * L + j, xsh, mstr)] == 0.0) orow[j] = 0.0;
        }
    }
    const double inv_t = 1.0 / temperature_divisor;
    return make_node(std::move(out), {x}, [L, rows, inv_t](Node& self) {
        auto& gx = self.parents[0]->grad;
        for (int64_t r = 0; r < rows; ++r) {
            const double* p = self.value.data.data() + r * L;
            const double* g = self.grad.data.data() + r * L;
            double dot = 0.0;
            for (int64_t j = 0; j < L; ++j) dot += g[j] * p[j];
            for (int64_t j = 0; j < L; ++j) {
                gx.data[r * L + j] += inv_t * p[j] * (g[j] - dot);
            }
        }
    });
}

NodePtr layer_norm(NodePtr x, NodePtr gamma, NodePtr beta, double eps) {
    const auto& xsh = x->value.shape;
    if (xsh.empty()) throw ValidationError("layer_norm: scalar input");
    check_same_last_dim("layer_norm gamma", x->value, gamma->value);
    check_same_last_dim("layer_norm beta", x->value, beta->value);
    const int64_t d = xsh.back();
    const int64_t rows = x->value.numel() / d;
    Tensor out = Tensor::zeros(xsh);
    auto xhat = std::make_shared<std::vector<double>>(x->value.data.size());
    auto inv_sigma = std::make_shared<std::vector<double>>(rows);
    for (int64_t r = 0; r < rows; ++r) {
        const double* xr = x->value.data.data() + r * d;
        double mu = 0.0;
        for (int64_t j = 0; j < d; ++j) mu += xr[j];
        mu /= d;
        double var = 0.0;
        for (int64_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
        var /= d;
        const double is = 1.0 / std::sqrt(var + eps);
        (*inv_sigma)[r] = is;
        for (int64_t j = 0; j < d; ++j) {
            const double xh = (xr[j] - mu) * is;
            (*xhat)[r * d + j] = xh;
            out.data[r * d + j] = gamma->value.data[j] * xh + beta->value.data[j];
        }
    }
    return make_node(std::move(out), {x, gamma, beta}, [d, rows, xhat, inv_sigma](Node& self) {
        auto& gx = self.parents[0]->grad;
        auto& gg = self.parents[1]->grad;
        auto& gb = self.parents[2]->grad;
        const auto& gv = self.parents[1]->value;
        for (int64_t r = 0; r < rows; ++r) {
            const double* g = self.grad.data.data() + r * d;
            const double* xh = xhat->data() + r * d;
            double m1 = 0.0, m2 = 0.0;
            for (int64_t j = 0; j < d; ++j) {
                gb.data[j] += g[j];
                gg.data[j] += g[j] * xh[j];
                const double dxh = g[j] * gv.data[j];
                m1 += dxh;
                m2 += dxh * xh[j];
            }
            m1 /= d;
            m2 /= d;
            const double is = (*inv_sigma)[r];
            for (int64_t j = 0; j < d; ++j) {
                const double dxh = g[j] * gv.data[j];
                gx.data[r * d + j] += is * (dxh - m1 - xh[j] * m2);
            }
        }
    });
}

NodePtr conv1d(NodePtr x, NodePtr kernels, NodePtr bias) {
    const auto& xsh = x->value.shape;
    const auto& ksh = kernels->value.shape;
    if (xsh.size() != 2 || ksh.size() != 3) {
        throw ValidationError("conv1d: expected x [L,Cin] and kernels [Cout,Cin,K], got " +
                              shape_str(xsh) + " and " + shape_str(ksh));
    }
    const int64_t L = xsh[0], cin = xsh[1];
    const int64_t cout = ksh[0], kcin = ksh[1], K = ksh[2];
    if (kcin != cin) {
        throw ValidationError("conv1d: kernel input channels " + std::to_string(kcin) +
                              " do not match input channels " + std::to_string(cin));
    }
    if (K % 2 == 0) throw ValidationError("conv1d: kernel size must be odd, got " + std::to_string(K));
    if (bias->value.rank() != 1 || bias->value.shape[0] != cout) {
        throw ValidationError("conv1d: bias must be [Cout]");
    }
    const int64_t off = K / 2;
    Tensor out = Tensor::zeros({L, cout});
    for (int64_t t = 0; t < L; ++t) {
        for (int64_t co = 0; co < cout; ++co) {
            double acc = bias->value.data[co];
            for (int64_t kk = 0; kk < K; ++kk) {
                const int64_t s = t + kk - off;
                if (s < 0 || s >= L) continue;
                for (int64_t ci = 0; ci < cin; ++ci) {
                    acc += x->value.data[s * cin + ci] *
                           kernels->value.data[(co * cin + ci) * K + kk];
                }
            }
            out.data[t * cout + co] = acc;
        }
    }
    return make_node(std::move(out), {x, kernels, bias}, [L, cin, cout, K, off](Node& self) {
        const auto& xv = self.parents[0]->value;
        const auto& kv = self.parents[1]->value;
        auto& gx = self.parents[0]->grad;
        auto& gk = self.parents[1]->grad;
        auto& gb = self.parents[2]->grad;
        for (int64_t t = 0; t < L; ++t) {
            for (int64_t co = 0; co < cout; ++co) {
                const double g = self.grad.data[t * cout + co];
                if (g == 0.0) continue;
                gb.data[co] += g;
                for (int64_t kk = 0; kk < K; ++kk) {
                    const int64_t s = t + kk - off;
                    if (s < 0 || s >= L) continue;
                    for (int64_t ci = 0; ci < cin; ++ci) {
                        gx.data[s * cin + ci] += g * kv.data[(co * cin + ci) * K + kk];
                        gk.data[(co * cin + ci) * K + kk] += g * xv.data[s * cin + ci];
                    }
                }
            }
        }
    });
}

NodePtr lstm_sequence(NodePtr x, NodePtr w_input, NodePtr w_hidden, NodePtr bias) {
    const auto& xsh = x->value.shape;
    const auto& wxsh = w_input->value.shape;
    const auto& whsh = w_hidden->value.shape;
    if (xsh.size() != 2 || wxsh.size() != 2 || whsh.size() != 2) {
        throw ValidationError("lstm_sequence: expected x [L,Din], w_input [4H,Din], w_hidden [4H,H]");
    }
    const int64_t L = xsh[0], din = xsh[1];
    const int64_t H = whsh[1];
    if (wxsh[0] != 4 * H || whsh[0] != 4 * H || wxsh[1] != din ||
        bias->value.rank() != 1 || bias->value.shape[0] != 4 * H) {
        throw ValidationError("lstm_sequence: inconsistent parameter shapes " + shape_str(wxsh) +
                              " " + shape_str(whsh) + " " + shape_str(bias->value.shape) +
                              " for input " + shape_str(xsh));
    }

    // Saved activations, indexed [t*H + j]: gates i,f,o in (0,1), candidate g in (-1,1).
    struct Saved {
        std::vector<double> gi, gf, gg, go, c, tc;
    };
    auto sv = std::make_shared<Saved>();
    sv->gi.resize(L * H);
    sv->gf.resize(L * H);
    sv->gg.resize(L * H);
    sv->go.resize(L * H);
    sv->c.resize(L * H);
    sv->tc.resize(L * H);

    Tensor out = Tensor::zeros({L, H});
    std::vector<double> a(4 * H);
    for (int64_t t = 0; t < L; ++t) {
        const double* xt = x->value.data.data() + t * din;
        const double* hprev = t > 0 ? out.data.data() + (t - 1) * H : nullptr;
        for (int64_t r = 0; r < 4 * H; ++r) {
            double acc = bias->value.data[r];
            const double* wxr = w_input->value.data.data() + r * din;
            for (int64_t j = 0; j < din; ++j) acc += wxr[j] * xt[j];
            if (hprev) {
                const double* whr = w_hidden->value.data.data() + r * H;
                for (int64_t j = 0; j < H; ++j) acc += whr[j] * hprev[j];
            }
            a[r] = acc;
        }
        for (int64_t j = 0; j < H; ++j) {
            const double i = 1.0 / (1.0 + std::exp(-a[j]));
            const double f = 1.0 / (1.0 + std::exp(-a[H + j]));
            const double g = std::tanh(a[2 * H + j]);
            const double o = 1.0 / (1.0 + std::exp(-a[3 * H + j]));
            const double cprev = t > 0 ? sv->c[(t - 1) * H + j] : 0.0;
            const double c = f * cprev + i * g;
            const double tc = std::tanh(c);
            sv->gi[t * H + j] = i;
            sv->gf[t * H + j] = f;
            sv->gg[t * H + j] = g;
            sv->go[t * H + j] = o;
            sv->c[t * H + j] = c;
            sv->tc[t * H + j] = tc;
            out.data[t * H + j] = o * tc;
        }
    }

    return make_node(std::move(out), {x, w_input, w_hidden, bias},
                     [L, din, H, sv](Node& self) {
        const auto& xv = self.parents[0]->value;
        const auto& wxv = self.parents[1]->value;
        const auto& whv = self.parents[2]->value;
        auto& gx = self.parents[0]->grad;
        auto& gwx = self.parents[1]->grad;
        auto& gwh = self.parents[2]->grad;
        auto& gb = self.parents[3]->grad;

        std::vector<double> dh(H, 0.0), dc(H, 0.0), da(4 * H);
        for (int64_t t = L - 1; t >= 0; --t) {
            for (int64_t j = 0; j < H; ++j) dh[j] += self.grad.data[t * H + j];
            for (int64_t j = 0; j < H; ++j) {
                const double i = sv->gi[t * H + j], f = sv->gf[t * H + j];
                const double g = sv->gg[t * H + j], o = sv->go[t * H + j];
                const double tc = sv->tc[t * H + j];
                const double cprev = t > 0 ? sv->c[(t - 1) * H + j] : 0.0;
                const double d_o = dh[j] * tc;
                const double d_c = dc[j] + dh[j] * o * (1.0 - tc * tc);
                const double d_f = d_c * cprev;
                const double d_i = d_c * g;
                const double d_g = d_c * i;
                da[j] = d_i * i * (1.0 - i);
                da[H + j] = d_f * f * (1.0 - f);
                da[2 * H + j] = d_g * (1.0 - g * g);
                da[3 * H + j] = d_o * o * (1.0 - o);
                dc[j] = d_c * f;
            }
            const double* xt = xv.data.data() + t * din;
            const double* hprev = t > 0 ? self.value.data.data() + (t - 1) * H : nullptr;
            std::fill(dh.begin(), dh.end(), 0.0);
            for (int64_t r = 0; r < 4 * H; ++r) {
                const double d = da[r];
                gb.data[r] += d;
                if (d == 0.0) continue;
                double* gwxr = gwx.data.data() + r * din;
                for (int64_t j = 0; j < din; ++j) {
                    gwxr[j] += d * xt[j];
                    gx.data[t * din + j] += d * wxv.data[r * din + j];
                }
                if (hprev) {
                    double* gwhr = gwh.data.data() + r * H;
                    for (int64_t j = 0; j < H; ++j) {
                        gwhr[j] += d * hprev[j];
                        dh[j] += d * whv.data[r * H + j];
                    }
                }
            }
        }
    });
}

NodePtr linear(NodePtr x, NodePtr w, NodePtr b) { return add(matmul(x, w), b); }

NodePtr concat(const std::vector<NodePtr>& xs, size_t axis) {
    if (xs.empty()) throw ValidationError("concat: no inputs");
    const auto& base = xs[0]->value.shape;
    if (axis >= base.size()) throw ValidationError("concat: axis out of range");
    std::vector<int64_t> out_shape = base;
    out_shape[axis] = 0;
    for (const auto& xp : xs) {
        const auto& sh = xp->value.shape;
        if (sh.size() != base.size()) throw ValidationError("concat: rank mismatch");
        for (size_t i = 0; i < sh.size(); ++i) {
            if (i != axis && sh[i] != base[i]) {
                throw ValidationError("concat: shape mismatch at axis " + std::to_string(i) +
                                      ": " + shape_str(sh) + " vs " + shape_str(base));
            }
        }
        out_shape[axis] += sh[axis];
    }
    int64_t outer = 1, inner = 1;
    for (size_t i = 0; i < axis; ++i) outer *= base[i];
    for (size_t i = axis + 1; i < base.size(); ++i) inner *= base[i];

    Tensor out = Tensor::zeros(out_shape);
    const int64_t out_slab = out_shape[axis] * inner;
    int64_t pos = 0;
    std::vector<int64_t> offsets;
    for (const auto& xp : xs) {
        offsets.push_back(pos);
        const int64_t slab = xp->value.shape[axis] * inner;
        for (int64_t o = 0; o < outer; ++o) {
            std::copy_n(xp->value.data.data() + o * slab, slab,
                        out.data.data() + o * out_slab + pos);
        }
        pos += slab;
    }
    return make_node(std::move(out), xs, [axis, outer, inner, out_slab, offsets](Node& self) {
        for (size_t p = 0; p < self.parents.size(); ++p) {
            auto& gp = self.parents[p]->grad;
            const int64_t slab = self.parents[p]->value.shape[axis] * inner;
            for (int64_t o = 0; o < outer; ++o) {
                const double* src = self.grad.data.data() + o * out_slab + offsets[p];
                double* dst = gp.data.data() + o * slab;
                for (int64_t i = 0; i < slab; ++i) dst[i] += src[i];
            }
        }
    });
}

NodePtr slice_cols(NodePtr x, int64_t c0, int64_t c1) {
    const auto& sh = x->value.shape;
    if (sh.size() != 2) throw ValidationError("slice_cols: expected 2-D input");
    const int64_t L = sh[0], C = sh[1];
    if (c0 < 0 || c1 > C || c0 >= c1) {
        throw ValidationError("slice_cols: bad column range [" + std::to_string(c0) + "," +
                              std::to_string(c1) + ") for width " + std::to_string(C));
    }
    const int64_t w = c1 - c0;
    Tensor out = Tensor::zeros({L, w});
    for (int64_t i = 0; i < L; ++i) {
        std::copy_n(x->value.data.data() + i * C + c0, w, out.data.data() + i * w);
    }
    return make_node(std::move(out), {x}, [L, C, c0, w](Node& self) {
        auto& gx = self.parents[0]->grad;
        for (int64_t i = 0; i < L; ++i) {
            for (int64_t j = 0; j < w; ++j) {
                gx.data[i * C + c0 + j] += self.grad.data[i * w + j];
            }
        }
    });
}

NodePtr reshape(NodePtr x, std::vector<int64_t> new_shape) {
    if (shape_numel(new_shape) != x->value.numel()) {
        throw ValidationError("reshape: element count mismatch: " + shape_str(x->value.shape) +
                              " -> " + shape_str(new_shape));
    }
    Tensor out(std::move(new_shape), x->value.data);
    return make_node(std::move(out), {x}, [](Node& self) {
        auto& gx = self.parents[0]->grad;
        for (size_t i = 0; i < gx.data.size(); ++i) gx.data[i] += self.grad.data[i];
    });
}

NodePtr embedding_rows(NodePtr table, const std::vector<int64_t>& ids) {
    const auto& tsh = table->value.shape;
    if (tsh.size() != 2) throw ValidationError("embedding_rows: table must be 2-D");
    const int64_t V = tsh[0], d = tsh[1];
    for (int64_t id : ids) {
        if (id < 0 || id >= V) {
            throw ValidationError("embedding_rows: id " + std::to_string(id) +
                                  " out of range [0," + std::to_string(V) + ")");
        }
    }
    const int64_t L = static_cast<int64_t>(ids.size());
    if (L == 0) throw ValidationError("embedding_rows: empty id list");
    Tensor out = Tensor::zeros({L, d});
    for (int64_t i = 0; i < L; ++i) {
        std::copy_n(table->value.data.data() + ids[i] * d, d, out.data.data() + i * d);
    }
    return make_node(std::move(out), {table}, [ids, d](Node& self) {
        auto& gt = self.parents[0]->grad;
        for (size_t i = 0; i < ids.size(); ++i) {
            for (int64_t j = 0; j < d; ++j) {
                gt.data[ids[i] * d + j] += self.grad.data[i * d + j];
            }
        }
    });
}

NodePtr cross_entropy(NodePtr logits, int64_t target) {
    const auto& sh = logits->value.shape;
    if (sh.size() != 1) throw ValidationError("cross_entropy: logits must be 1-D");
    const int64_t L = sh[0];
    if (target < 0 || target >= L) {
        throw ValidationError("cross_entropy: target index " + std::to_string(target) +
                              " out of range [0," + std::to_string(L) + ")");
    }
    const double* xd = logits->value.data.data();
    double mx = xd[0];
    for (int64_t j = 1; j < L; ++j) mx = std::max(mx, xd[j]);
    double sum = 0.0;
    for (int64_t j = 0; j < L; ++j) sum += std::exp(xd[j] - mx);
    const double lse = mx + std::log(sum);
    Tensor out = Tensor::scalar(lse - xd[target]);
    return make_node(std::move(out), {logits}, [L, target, lse](Node& self) {
        const auto& xv = self.parents[0]->value;
        auto& gx = self.parents[0]->grad;
        const double g = self.grad.data[0];
        for (int64_t j = 0; j < L; ++j) {
            const double p = std::exp(xv.data[j] - lse);
            gx.data[j] += g * (p - (j == target ? 1.0 : 0.0));
        }
    });
}

NodePtr weighted_sum(NodePtr x, Tensor weights) {
    if (weights.shape != x->value.shape) {
        throw ValidationError("weighted_sum: weight shape " + shape_str(weights.shape) +
                              " must equal input shape " + shape_str(x->value.shape));
    }
    double acc = 0.0;
    for (size_t i = 0; i < weights.data.size(); ++i) acc += weights.data[i] * x->value.data[i];
    auto w = std::make_shared<Tensor>(std::move(weights));
    return make_node(Tensor::scalar(acc), {x}, [w](Node& self) {
        auto& gx = self.parents[0]->grad;
        const double g = self.grad.data[0];
        for (size_t i = 0; i < gx.data.size(); ++i) gx.data[i] += g * w->data[i];
    });
}

double grad_check(const std::function<NodePtr()>& build_scalar,
                  const std::vector<NodePtr>& inputs, double epsilon) {
    if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) {
        throw ValidationError("grad_check: epsilon must lie in [1e-7, 1e-3]");
    }
    for (const auto& in : inputs) {
        in->ensure_grad();
        in->zero_grad();
    }
    auto root = build_scalar();
    if (root->value.numel() != 1) throw ValidationError("grad_check: graph must end in a scalar");
    backward(root);

    std::vector<std::vector<double>> analytic;
    analytic.reserve(inputs.size());
    for (const auto& in : inputs) analytic.push_back(in->grad.data);

    double worst = 0.0;
    for (size_t p = 0; p < inputs.size(); ++p) {
        auto& data = inputs[p]->value.data;
        for (size_t i = 0; i < data.size(); ++i) {
            const double saved = data[i];
            data[i] = saved + epsilon;
            const double fp = build_scalar()->value.data[0];
            data[i] = saved - epsilon;
            const double fm = build_scalar()->value.data[0];
            data[i] = saved;
            const double fd = (fp - fm) / (2.0 * epsilon);
            const double an = analytic[p][i];
            const double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6});
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

}  // namespace dcqa

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <string>
#include <unordered_map>
#include <vector>

#include "voxseek/error.hpp"
#include "voxseek/num/rng.hpp"
#include "voxseek/num/tensor.hpp"

namespace voxseek::num {

using NodeId = int;

enum class OpKind {
    Input,
    Param,
    Conv3d,
    MatVec,
    Add,
    Mul,
    Relu,
    Tanh,
    Sigmoid,
    Softmax,
    Slice,
    GlobalAvgPool,
    Dropout,
    CrossEntropyLogits,
    Sum,
    Scale,
    Pick,
    HalfSquaredDiff,
    DuelingCombine,
};

enum class Activation { Identity, Relu, Tanh, Sigmoid };

struct ForwardOpts {
    bool training = false;
    RngState* rng = nullptr;       // required when training with dropout nodes
    bool reuse_dropout_masks = false; // keep last-drawn masks (gradient checking)
};

/// Reverse-mode autodiff over an append-only operation tape. Nodes are stored
/// in construction order, which is also a valid topological order: an op can
/// only reference nodes that already exist. A graph instance is single-owner;
/// one forward/backward runs at a time.
template <class T>
class GraphT {
public:
    struct Node {
        OpKind op;
        std::array<NodeId, 3> in{-1, -1, -1};
        int nin = 0;
        TensorT<T> val;
        TensorT<T> grad;
        ParameterT<T>* param = nullptr;
        int i0 = 0, i1 = 0; // stride / slice offset+len / pick & target index
        T c0{};             // scale factor / dropout rate / regression target
        TensorT<T> mask;    // dropout mask
        TensorT<T> scratch;  // conv patch matrix, filled on forward
        TensorT<T> scratch2; // conv backward workspace
        std::string label;

        void set_inputs(NodeId a, NodeId b = -1, NodeId c = -1) {
            in = {a, b, c};
            nin = 1 + (b >= 0 ? 1 : 0) + (c >= 0 ? 1 : 0);
        }

        void alloc(std::vector<int> shape) {
            val = TensorT<T>(shape);
            grad = TensorT<T>(std::move(shape));
        }
    };

    // ---- graph construction -------------------------------------------------

    NodeId input(std::vector<int> shape) {
        Node n;
        n.op = OpKind::Input;
        n.val = TensorT<T>(shape);
        n.grad = TensorT<T>(std::move(shape));
        return push(std::move(n));
    }

    /// Bind a parameter as a leaf. Repeated binds of the same parameter return
    /// the same node, so gradients from all uses accumulate in one place.
    NodeId param(ParameterT<T>& p) {
        auto it = param_nodes_.find(&p);
        if (it != param_nodes_.end()) return it->second;
        Node n;
        n.op = OpKind::Param;
        n.param = &p;
        n.grad = TensorT<T>(p.value.shape);
        n.label = p.name;
        NodeId id = push(std::move(n));
        param_nodes_.emplace(&p, id);
        return id;
    }

    /// Cross-correlation of input [C,D,H,W] with filters [F,C,k,k,k], no padding.
    NodeId conv3d(NodeId x, NodeId w, int stride) {
        const auto& xs = shape(x);
        const auto& ws = shape(w);
        if (xs.size() != 4 || ws.size() != 5) throw ShapeError("conv3d expects input [C,D,H,W] and filters [F,C,k,k,k]");
        if (ws[2] != ws[3] || ws[3] != ws[4]) throw ShapeError("conv3d filters must be cubic");
        if (xs[0] != ws[1]) throw ShapeError("conv3d channel mismatch");
        if (stride < 1) throw ShapeError("conv3d stride must be >= 1");
        int k = ws[2];
        if (xs[1] < k || xs[2] < k || xs[3] < k)
            throw ShapeError("conv3d input " + std::to_string(xs[1]) + "x" + std::to_string(xs[2]) + "x" +
                             std::to_string(xs[3]) + " smaller than kernel " + std::to_string(k));
        auto out = [&](int s) { return (s - k) / stride + 1; };
        Node n;
        n.op = OpKind::Conv3d;
        n.set_inputs(x, w);
        n.i0 = stride;
        n.alloc({ws[0], out(xs[1]), out(xs[2]), out(xs[3])});
        n.scratch = TensorT<T>({xs[0] * k * k * k, out(xs[1]) * out(xs[2]) * out(xs[3])});
        return push(std::move(n));
    }

    /// w [m,n] times x flattened to length n.
    NodeId matvec(NodeId w, NodeId x) {
        const auto& ws = shape(w);
        if (ws.size() != 2) throw ShapeError("matvec weight must be 2-D");
        if (numel(x) != ws[1])
            throw ShapeError("matvec size mismatch: weight " + std::to_string(ws[0]) + "x" + std::to_string(ws[1]) +
                             " vs input length " + std::to_string(numel(x)));
        Node n;
        n.op = OpKind::MatVec;
        n.set_inputs(w, x);
        n.alloc({ws[0]});
        return push(std::move(n));
    }

    NodeId add(NodeId a, NodeId b) { return binary(OpKind::Add, a, b); }
    NodeId mul(NodeId a, NodeId b) { return binary(OpKind::Mul, a, b); }

    NodeId relu(NodeId x) { return unary(OpKind::Relu, x); }
    NodeId tanh_(NodeId x) { return unary(OpKind::Tanh, x); }
    NodeId sigmoid(NodeId x) { return unary(OpKind::Sigmoid, x); }

    /// Numerically stabilized softmax over a vector.
    NodeId softmax(NodeId x) {
        if (shape(x).size() != 1) throw ShapeError("softmax expects a vector");
        return unary(OpKind::Softmax, x);
    }

    NodeId slice(NodeId x, int offset, int len) {
        if (offset < 0 || len < 1 || offset + len > numel(x)) throw ShapeError("slice out of range");
        Node n;
        n.op = OpKind::Slice;
        n.set_inputs(x);
        n.i0 = offset;
        n.i1 = len;
        n.alloc({len});
        return push(std::move(n));
    }

    /// [C,D,H,W] -> [C], mean over the spatial cells of each channel.
    NodeId global_avg_pool(NodeId x) {
        const auto& xs = shape(x);
        if (xs.size() != 4) throw ShapeError("global_avg_pool expects [C,D,H,W]");
        Node n;
        n.op = OpKind::GlobalAvgPool;
        n.set_inputs(x);
        n.alloc({xs[0]});
        return push(std::move(n));
    }

    /// Train-time Bernoulli mask with inverted scaling; identity at inference.
    NodeId dropout(NodeId x, T rate) {
        if (rate < T{} || rate >= T{1}) throw ContractError("dropout rate must be in [0,1)");
        Node n;
        n.op = OpKind::Dropout;
        n.set_inputs(x);
        n.c0 = rate;
        n.alloc(shape(x));
        n.mask = TensorT<T>(shape(x));
        return push(std::move(n));
    }

    /// Scalar loss -log softmax(logits)[target]; target set per example.
    NodeId cross_entropy_logits(NodeId logits, int target = 0) {
        if (shape(logits).size() != 1) throw ShapeError("cross_entropy_logits expects a logit vector");
        Node n;
        n.op = OpKind::CrossEntropyLogits;
        n.set_inputs(logits);
        n.i0 = target;
        n.alloc({1});
        return push(std::move(n));
    }

    NodeId sum(NodeId x) {
        Node n;
        n.op = OpKind::Sum;
        n.set_inputs(x);
        n.alloc({1});
        return push(std::move(n));
    }

    NodeId scale(NodeId x, T c) {
        Node n;
        n.op = OpKind::Scale;
        n.set_inputs(x);
        n.c0 = c;
        n.alloc(shape(x));
        return push(std::move(n));
    }

    /// Select one element of a vector as a scalar; index settable per run.
    NodeId pick(NodeId x, int index = 0) {
        if (index < 0 || index >= numel(x)) throw ContractError("pick index out of range");
        Node n;
        n.op = OpKind::Pick;
        n.set_inputs(x);
        n.i0 = index;
        n.alloc({1});
        return push(std::move(n));
    }

    /// Scalar loss 0.5*(x - target)^2 with the target held constant.
    NodeId half_squared_diff(NodeId x, T target = T{}) {
        if (numel(x) != 1) throw ShapeError("half_squared_diff expects a scalar");
        Node n;
        n.op = OpKind::HalfSquaredDiff;
        n.set_inputs(x);
        n.c0 = target;
        n.alloc({1});
        return push(std::move(n));
    }

    /// Q(a) = V + A(a) - mean(A); v is a scalar, a a vector.
    NodeId dueling_combine(NodeId v, NodeId a) {
        if (numel(v) != 1) throw ShapeError("dueling_combine value stream must be scalar");
        Node n;
        n.op = OpKind::DuelingCombine;
        n.set_inputs(v, a);
        n.alloc(shape(a));
        return push(std::move(n));
    }

    // composite: activation(W x + b)
    NodeId dense(NodeId x, ParameterT<T>& W, ParameterT<T>& b, Activation act) {
        NodeId y = add(matvec(param(W), x), param(b));
        switch (act) {
            case Activation::Identity: return y;
            case Activation::Relu: return relu(y);
            case Activation::Tanh: return tanh_(y);
            case Activation::Sigmoid: return sigmoid(y);
        }
        throw ContractError("unknown activation");
    }

    struct LstmOut {
        NodeId h;
        NodeId c;
    };

    /// One LSTM step. wx is [4H,n], wh [4H,H], b [4H]; gate order i,f,g,o.
    LstmOut lstm_step(NodeId x, NodeId h, NodeId c, ParameterT<T>& wx, ParameterT<T>& wh, ParameterT<T>& b) {
        int hdim = numel(h);
        if (wx.value.shape[0] != 4 * hdim || wh.value.shape != std::vector<int>{4 * hdim, hdim} ||
            b.value.shape != std::vector<int>{4 * hdim})
            throw ShapeError("lstm_step parameter shapes do not match hidden size");
        NodeId gates = add(add(matvec(param(wx), x), matvec(param(wh), h)), param(b));
        NodeId gi = sigmoid(slice(gates, 0, hdim));
        NodeId gf = sigmoid(slice(gates, hdim, hdim));
        NodeId gg = tanh_(slice(gates, 2 * hdim, hdim));
        NodeId go = sigmoid(slice(gates, 3 * hdim, hdim));
        NodeId cn = add(mul(gf, c), mul(gi, gg));
        NodeId hn = mul(go, tanh_(cn));
        return {hn, cn};
    }

    // ---- run-time mutation ---------------------------------------------------

    void set_input(NodeId id, const TensorT<T>& t) {
        Node& n = node(id);
        if (n.op != OpKind::Input) throw ContractError("set_input on a non-input node");
        if (n.val.shape != t.shape) throw ShapeError("set_input shape mismatch");
        n.val.v = t.v;
    }

    void set_target(NodeId id, int target) {
        Node& n = node(id);
        if (n.op != OpKind::CrossEntropyLogits) throw ContractError("set_target on a non-loss node");
        if (target < 0 || target >= numel(n.in[0])) throw ContractError("target out of range");
        n.i0 = target;
    }

    void set_pick_index(NodeId id, int index) {
        Node& n = node(id);
        if (n.op != OpKind::Pick) throw ContractError("set_pick_index on a non-pick node");
        if (index < 0 || index >= numel(n.in[0])) throw ContractError("pick index out of range");
        n.i0 = index;
    }

    void set_regression_target(NodeId id, T target) {
        Node& n = node(id);
        if (n.op != OpKind::HalfSquaredDiff) throw ContractError("set_regression_target on wrong node kind");
        n.c0 = target;
    }

    void set_label(NodeId id, std::string label) { node(id).label = std::move(label); }

    // ---- execution -----------------------------------------------------------

    void forward(const ForwardOpts& opts = {}) {
        ++forward_count_;
        for (Node& n : nodes_) eval(n, opts);
    }

    /// Backpropagate from a scalar loss node. Parameter gradients are
    /// accumulated into their ParameterT::grad buffers.
    void backward(NodeId loss) {
        Node& ln = node(loss);
        if (value(loss).numel() != 1) throw ContractError("backward requires a scalar loss node");
        for (Node& n : nodes_) n.grad.fill(T{});
        ln.grad[0] = T{1};
        for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) propagate(nodes_[static_cast<size_t>(i)]);
        for (auto& [p, id] : param_nodes_) {
            const TensorT<T>& g = nodes_[static_cast<size_t>(id)].grad;
            for (int j = 0; j < g.numel(); ++j) p->grad[j] += g[j];
        }
    }

    const TensorT<T>& value(NodeId id) const {
        const Node& n = node(id);
        return n.op == OpKind::Param ? n.param->value : n.val;
    }

    const TensorT<T>& grad(NodeId id) const { return node(id).grad; }

    long forward_count() const { return forward_count_; }
    int size() const { return static_cast<int>(nodes_.size()); }
    OpKind op_kind(NodeId id) const { return node(id).op; }
    const std::array<NodeId, 3>& inputs_of(NodeId id) const { return node(id).in; }
    int input_count(NodeId id) const { return node(id).nin; }

    /// Label of the first node holding a non-finite value, or empty string.
    std::string first_nonfinite() const {
        for (size_t i = 0; i < nodes_.size(); ++i) {
            if (!value(static_cast<NodeId>(i)).all_finite())
                return nodes_[i].label.empty() ? ("node#" + std::to_string(i)) : nodes_[i].label;
        }
        return {};
    }

private:
    std::deque<Node> nodes_;
    std::unordered_map<ParameterT<T>*, NodeId> param_nodes_;
    long forward_count_ = 0;

    NodeId push(Node&& n) {
        nodes_.push_back(std::move(n));
        return static_cast<NodeId>(nodes_.size() - 1);
    }

    Node& node(NodeId id) { return nodes_.at(static_cast<size_t>(id)); }
    const Node& node(NodeId id) const { return nodes_.at(static_cast<size_t>(id)); }

    const std::vector<int>& shape(NodeId id) const { return value(id).shape; }
    int numel(NodeId id) const { return value(id).numel(); }

    NodeId unary(OpKind op, NodeId x) {
        Node n;
        n.op = op;
        n.set_inputs(x);
        n.alloc(shape(x));
        return push(std::move(n));
    }

    NodeId binary(OpKind op, NodeId a, NodeId b) {
        if (shape(a) != shape(b))
            throw ShapeError("elementwise op shape mismatch: " + shape_str(value(a)) + " vs " + shape_str(value(b)));
        Node n;
        n.op = op;
        n.set_inputs(a, b);
        n.alloc(shape(a));
        return push(std::move(n));
    }

    const TensorT<T>& in_val(const Node& n, int i) const { return value(n.in[static_cast<size_t>(i)]); }
    TensorT<T>& in_grad(Node& n, int i) { return node(n.in[static_cast<size_t>(i)]).grad; }

    void eval(Node& n, const ForwardOpts& opts) {
        switch (n.op) {
            case OpKind::Input:
            case OpKind::Param:
                return;
            case OpKind::Conv3d:
                conv3d_forward(in_val(n, 0), in_val(n, 1), n.i0, n.scratch, n.val);
                return;
            case OpKind::MatVec: {
                const TensorT<T>& w = in_val(n, 0);
                const TensorT<T>& x = in_val(n, 1);
                int m = w.shape[0], k = w.shape[1];
                for (int r = 0; r < m; ++r) {
                    T acc{};
                    const T* wr = w.v.data() + static_cast<size_t>(r) * k;
                    const T* xp = x.v.data();
                    for (int j = 0; j < k; ++j) acc += wr[j] * xp[j];
                    n.val[r] = acc;
                }
                return;
            }
            case OpKind::Add: {
                const TensorT<T>& a = in_val(n, 0);
                const TensorT<T>& b = in_val(n, 1);
                for (int i = 0; i < n.val.numel(); ++i) n.val[i] = a[i] + b[i];
                return;
            }
            case OpKind::Mul: {
                const TensorT<T>& a = in_val(n, 0);
                const TensorT<T>& b = in_val(n, 1);
                for (int i = 0; i < n.val.numel(); ++i) n.val[i] = a[i] * b[i];
                return;
            }
            case OpKind::Relu: {
                const TensorT<T>& x = in_val(n, 0);
                for (int i = 0; i < n.val.numel(); ++i) n.val[i] = x[i] > T{} ? x[i] : T{};
                return;
            }
            case OpKind::Tanh: {
                const TensorT<T>& x = in_val(n, 0);
                for (int i = 0; i < n.val.numel(); ++i) n.val[i] = std::tanh(x[i]);
                return;
            }
            case OpKind::Sigmoid: {
                const TensorT<T>& x = in_val(n, 0);
                for (int i = 0; i < n.val.numel(); ++i) n.val[i] = T{1} / (T{1} + std::exp(-x[i]));
                return;
            }
            case OpKind::Softmax: {
                const TensorT<T>& x = in_val(n, 0);
                T mx = x[0];
                for (int i = 1; i < x.numel(); ++i) mx = std::max(mx, x[i]);
                T z{};
                for (int i = 0; i < x.numel(); ++i) {
                    n.val[i] = std::exp(x[i] - mx);
                    z += n.val[i];
                }
                for (int i = 0; i < x.numel(); ++i) n.val[i] /= z;
                return;
            }
            case OpKind::Slice: {
                const TensorT<T>& x = in_val(n, 0);
                for (int i = 0; i < n.i1; ++i) n.val[i] = x[n.i0 + i];
                return;
            }
            case OpKind::GlobalAvgPool: {
                const TensorT<T>& x = in_val(n, 0);
                int c = x.shape[0];
                int spatial = x.numel() / c;
                for (int ch = 0; ch < c; ++ch) {
                    T acc{};
                    const T* xp = x.v.data() + static_cast<size_t>(ch) * spatial;
                    for (int i = 0; i < spatial; ++i) acc += xp[i];
                    n.val[ch] = acc / static_cast<T>(spatial);
                }
                return;
            }
            case OpKind::Dropout: {
                const TensorT<T>& x = in_val(n, 0);
                if (!opts.training) {
                    n.val.v = x.v;
                    n.mask.fill(T{1});
                    return;
                }
                if (!opts.reuse_dropout_masks) {
                    if (!opts.rng) throw ContractError("dropout in training mode requires an RNG");
                    T keep = T{1} - n.c0;
                    for (int i = 0; i < n.mask.numel(); ++i)
                        n.mask[i] = opts.rng->bernoulli(static_cast<double>(n.c0)) ? T{} : T{1} / keep;
                }
                for (int i = 0; i < n.val.numel(); ++i) n.val[i] = x[i] * n.mask[i];
                return;
            }
            case OpKind::CrossEntropyLogits: {
                const TensorT<T>& x = in_val(n, 0);
                T mx = x[0];
                for (int i = 1; i < x.numel(); ++i) mx = std::max(mx, x[i]);
                T z{};
                for (int i = 0; i < x.numel(); ++i) z += std::exp(x[i] - mx);
                n.val[0] = std::log(z) + mx - x[n.i0];
                return;
            }
            case OpKind::Sum: {
                const TensorT<T>& x = in_val(n, 0);
                T acc{};
                for (int i = 0; i < x.numel(); ++i) acc += x[i];
                n.val[0] = acc;
                return;
            }
            case OpKind::Scale: {
                const TensorT<T>& x = in_val(n, 0);
                for (int i = 0; i < n.val.numel(); ++i) n.val[i] = n.c0 * x[i];
                return;
            }
            case OpKind::Pick:
                n.val[0] = in_val(n, 0)[n.i0];
                return;
            case OpKind::HalfSquaredDiff: {
                T d = in_val(n, 0)[0] - n.c0;
                n.val[0] = d * d / T{2};
                return;
            }
            case OpKind::DuelingCombine: {
                const TensorT<T>& v = in_val(n, 0);
                const TensorT<T>& a = in_val(n, 1);
                T mean{};
                for (int i = 0; i < a.numel(); ++i) mean += a[i];
                mean /= static_cast<T>(a.numel());
                for (int i = 0; i < a.numel(); ++i) n.val[i] = v[0] + a[i] - mean;
                return;
            }
        }
        throw ContractError("unhandled op in forward");
    }

    void propagate(Node& n) {
        switch (n.op) {
            case OpKind::Input:
            case OpKind::Param:
                return;
            case OpKind::Conv3d: {
                bool input_is_leaf = node(n.in[0]).op == OpKind::Input;
                conv3d_backward(in_val(n, 0), in_val(n, 1), n.i0, n.scratch, n.scratch2, n.grad,
                                input_is_leaf ? nullptr : &in_grad(n, 0), in_grad(n, 1));
                return;
            }
            case OpKind::MatVec: {
                const TensorT<T>& w = in_val(n, 0);
                const TensorT<T>& x = in_val(n, 1);
                TensorT<T>& gw = in_grad(n, 0);
                TensorT<T>& gx = in_grad(n, 1);
                int m = w.shape[0], k = w.shape[1];
                for (int r = 0; r < m; ++r) {
                    T g = n.grad[r];
                    if (g == T{}) continue;
                    const T* wr = w.v.data() + static_cast<size_t>(r) * k;
                    T* gwr = gw.v.data() + static_cast<size_t>(r) * k;
                    T* gxp = gx.v.data();
                    const T* xp = x.v.data();
                    for (int j = 0; j < k; ++j) {
                        gxp[j] += wr[j] * g;
                        gwr[j] += xp[j] * g;
                    }
                }
                return;
            }
            case OpKind::Add: {
                TensorT<T>& ga = in_grad(n, 0);
                TensorT<T>& gb = in_grad(n, 1);
                for (int i = 0; i < n.grad.numel(); ++i) {
                    ga[i] += n.grad[i];
                    gb[i] += n.grad[i];
                }
                return;
            }
            case OpKind::Mul: {
                const TensorT<T>& a = in_val(n, 0);
                const TensorT<T>& b = in_val(n, 1);
                TensorT<T>& ga = in_grad(n, 0);
                TensorT<T>& gb = in_grad(n, 1);
                for (int i = 0; i < n.grad.numel(); ++i) {
                    ga[i] += b[i] * n.grad[i];
                    gb[i] += a[i] * n.grad[i];
                }
                return;
            }
            case OpKind::Relu: {
                const TensorT<T>& x = in_val(n, 0);
                TensorT<T>& gx = in_grad(n, 0);
                for (int i = 0; i < n.grad.numel(); ++i)
                    if (x[i] > T{}) gx[i] += n.grad[i];
                return;
            }
            case OpKind::Tanh: {
                TensorT<T>& gx = in_grad(n, 0);
                for (int i = 0; i < n.grad.numel(); ++i) gx[i] += (T{1} - n.val[i] * n.val[i]) * n.grad[i];
                return;
            }
            case OpKind::Sigmoid: {
                TensorT<T>& gx = in_grad(n, 0);
                for (int i = 0; i < n.grad.numel(); ++i) gx[i] += n.val[i] * (T{1} - n.val[i]) * n.grad[i];
                return;
            }
            case OpKind::Softmax: {
                TensorT<T>& gx = in_grad(n, 0);
                T dot{};
                for (int i = 0; i < n.grad.numel(); ++i) dot += n.grad[i] * n.val[i];
                for (int i = 0; i < n.grad.numel(); ++i) gx[i] += n.val[i] * (n.grad[i] - dot);
                return;
            }
            case OpKind::Slice: {
                TensorT<T>& gx = in_grad(n, 0);
                for (int i = 0; i < n.i1; ++i) gx[n.i0 + i] += n.grad[i];
                return;
            }
            case OpKind::GlobalAvgPool: {
                TensorT<T>& gx = in_grad(n, 0);
                int c = n.val.numel();
                int spatial = gx.numel() / c;
                for (int ch = 0; ch < c; ++ch) {
                    T g = n.grad[ch] / static_cast<T>(spatial);
                    T* gp = gx.v.data() + static_cast<size_t>(ch) * spatial;
                    for (int i = 0; i < spatial; ++i) gp[i] += g;
                }
                return;
            }
            case OpKind::Dropout: {
                TensorT<T>& gx = in_grad(n, 0);
                for (int i = 0; i < n.grad.numel(); ++i) gx[i] += n.mask[i] * n.grad[i];
                return;
            }
            case OpKind::CrossEntropyLogits: {
                const TensorT<T>& x = in_val(n, 0);
                TensorT<T>& gx = in_grad(n, 0);
                T mx = x[0];
                for (int i = 1; i < x.numel(); ++i) mx = std::max(mx, x[i]);
                T z{};
                for (int i = 0; i < x.numel(); ++i) z += std::exp(x[i] - mx);
                T g = n.grad[0];
                for (int i = 0; i < x.numel(); ++i) {
                    T p = std::exp(x[i] - mx) / z;
                    gx[i] += (p - (i == n.i0 ? T{1} : T{})) * g;
                }
                return;
            }
            case OpKind::Sum: {
                TensorT<T>& gx = in_grad(n, 0);
                for (int i = 0; i < gx.numel(); ++i) gx[i] += n.grad[0];
                return;
            }
            case OpKind::Scale: {
                TensorT<T>& gx = in_grad(n, 0);
                for (int i = 0; i < n.grad.numel(); ++i) gx[i] += n.c0 * n.grad[i];
                return;
            }
            case OpKind::Pick:
                in_grad(n, 0)[n.i0] += n.grad[0];
                return;
            case OpKind::HalfSquaredDiff:
                in_grad(n, 0)[0] += (in_val(n, 0)[0] - n.c0) * n.grad[0];
                return;
            case OpKind::DuelingCombine: {
                TensorT<T>& gv = in_grad(n, 0);
                TensorT<T>& ga = in_grad(n, 1);
                T gsum{};
                for (int i = 0; i < n.grad.numel(); ++i) gsum += n.grad[i];
                gv[0] += gsum;
                T gm = gsum / static_cast<T>(n.grad.numel());
                for (int i = 0; i < n.grad.numel(); ++i) ga[i] += n.grad[i] - gm;
                return;
            }
        }
        throw ContractError("unhandled op in backward");
    }

    // Patch-matrix (im2col) layout: rows index (c,kd,kh,kw) matching the
    // row-major filter layout, columns index output positions. The matrix is
    // rebuilt on every forward and reused by the following backward.
    static void fill_patches(const TensorT<T>& x, int K, int stride, TensorT<T>& patches,
                             const std::vector<int>& out_shape) {
        const int C = x.shape[0], D = x.shape[1], H = x.shape[2], W = x.shape[3];
        (void)D;
        const int OD = out_shape[1], OH = out_shape[2], OW = out_shape[3];
        const int cols = OD * OH * OW;
        T* p = patches.v.data();
        for (int c = 0; c < C; ++c) {
            const T* xc = x.v.data() + static_cast<size_t>(c) * D * H * W;
            for (int kd = 0; kd < K; ++kd)
                for (int kh = 0; kh < K; ++kh)
                    for (int kw = 0; kw < K; ++kw) {
                        T* row = p + (static_cast<size_t>(((c * K + kd) * K + kh) * K + kw)) * cols;
                        for (int od = 0; od < OD; ++od)
                            for (int oh = 0; oh < OH; ++oh) {
                                const T* src = xc + (static_cast<size_t>(od * stride + kd) * H + (oh * stride + kh)) * W + kw;
                                T* dst = row + (static_cast<size_t>(od) * OH + oh) * OW;
                                for (int ow = 0; ow < OW; ++ow) dst[ow] = src[static_cast<size_t>(ow) * stride];
                            }
                    }
        }
    }

    static void conv3d_forward(const TensorT<T>& x, const TensorT<T>& w, int stride, TensorT<T>& patches,
                               TensorT<T>& out) {
        const int K = w.shape[2];
        const int F = w.shape[0];
        fill_patches(x, K, stride, patches, out.shape);
        const int rows = patches.shape[0];
        const int cols = patches.shape[1];
        out.fill(T{});
        for (int f = 0; f < F; ++f) {
            T* of = out.v.data() + static_cast<size_t>(f) * cols;
            const T* wf = w.v.data() + static_cast<size_t>(f) * rows;
            for (int r = 0; r < rows; ++r) {
                T wv = wf[r];
                if (wv == T{}) continue;
                const T* pr = patches.v.data() + static_cast<size_t>(r) * cols;
                for (int c = 0; c < cols; ++c) of[c] += wv * pr[c];
            }
        }
    }

    static void conv3d_backward(const TensorT<T>& x, const TensorT<T>& w, int stride, const TensorT<T>& patches,
                                TensorT<T>& workspace, const TensorT<T>& gout, TensorT<T>* gx, TensorT<T>& gw) {
        const int C = x.shape[0], D = x.shape[1], H = x.shape[2], W = x.shape[3];
        const int F = w.shape[0], K = w.shape[2];
        const int OD = gout.shape[1], OH = gout.shape[2], OW = gout.shape[3];
        const int rows = patches.shape[0];
        const int cols = patches.shape[1];

        // filter gradient: gw[f,r] += <gout[f,:], patches[r,:]>
        for (int f = 0; f < F; ++f) {
            const T* gf = gout.v.data() + static_cast<size_t>(f) * cols;
            T* gwf = gw.v.data() + static_cast<size_t>(f) * rows;
            for (int r = 0; r < rows; ++r) {
                const T* pr = patches.v.data() + static_cast<size_t>(r) * cols;
                T acc{};
                for (int c = 0; c < cols; ++c) acc += gf[c] * pr[c];
                gwf[r] += acc;
            }
        }

        if (!gx) return; // input is a non-trainable leaf; skip its gradient

        // input gradient: gpatch = W^T * gout, scattered back onto the lattice
        if (workspace.v.empty()) workspace = TensorT<T>({rows, cols});
        workspace.fill(T{});
        T* gpatch = workspace.v.data();
        for (int f = 0; f < F; ++f) {
            const T* gf = gout.v.data() + static_cast<size_t>(f) * cols;
            const T* wf = w.v.data() + static_cast<size_t>(f) * rows;
            for (int r = 0; r < rows; ++r) {
                T wv = wf[r];
                if (wv == T{}) continue;
                T* gp = gpatch + static_cast<size_t>(r) * cols;
                for (int c = 0; c < cols; ++c) gp[c] += wv * gf[c];
            }
        }
        for (int c = 0; c < C; ++c) {
            T* gxc = gx->v.data() + static_cast<size_t>(c) * D * H * W;
            for (int kd = 0; kd < K; ++kd)
                for (int kh = 0; kh < K; ++kh)
                    for (int kw = 0; kw < K; ++kw) {
                        const T* row = gpatch + (static_cast<size_t>(((c * K + kd) * K + kh) * K + kw)) * cols;
                        for (int od = 0; od < OD; ++od)
                            for (int oh = 0; oh < OH; ++oh) {
                                T* dst = gxc + (static_cast<size_t>(od * stride + kd) * H + (oh * stride + kh)) * W + kw;
                                const T* src = row + (static_cast<size_t>(od) * OH + oh) * OW;
                                for (int ow = 0; ow < OW; ++ow) dst[static_cast<size_t>(ow) * stride] += src[ow];
                            }
                    }
        }
    }

};

template <class T>
using GraphNode = typename GraphT<T>::Node;

using Graph = GraphT<float>;

} // namespace voxseek::num

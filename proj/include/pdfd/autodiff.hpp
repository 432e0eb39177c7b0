#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "pdfd/ops.hpp"
#include "pdfd/tensor.hpp"

namespace pdfd {

using NodeId = int;

enum class OpKind {
    kInput,       // named tensor bound at evaluation time
    kConstant,    // tensor baked into the record
    kAffine,      // x*w + b
    kAdd,         // elementwise alpha*a + beta*b
    kMul,         // elementwise product
    kRelu,
    kTanh,
    kSigmoid,
    kLog,         // clamped natural log
    kSoftmaxXent, // fused softmax + cross-entropy, mean over rows -> scalar
    kSqNorm,      // sum of squares -> scalar
    kWeightedSum, // sum_i c_i * (sum of entries of arg_i) -> scalar
};

struct Node {
    OpKind kind;
    std::vector<NodeId> args;
    std::vector<int> shape;      // output shape
    std::string name;            // input name or tag; may be empty
    bool trainable = false;      // inputs only: gradient requested
    std::vector<double> coeffs;  // kAdd {alpha, beta}; kWeightedSum per arg
    std::vector<int> labels;     // kSoftmaxXent row labels
    Tensor value;                // kConstant payload
};

/// A computation record: an append-only list of primitive operations whose
/// arguments always point at earlier nodes, so evaluation order is the node
/// order itself. Records are immutable during evaluation; independent
/// evaluations of one record may run concurrently.
class Graph {
public:
    NodeId input(const std::string& name, std::vector<int> shape, bool trainable) {
        if (inputs_.count(name))
            throw ShapeError("graph: duplicate input name '" + name + "'");
        Node n;
        n.kind = OpKind::kInput;
        n.shape = std::move(shape);
        n.name = name;
        n.trainable = trainable;
        inputs_[name] = next_id();
        return push(std::move(n));
    }

    NodeId constant(Tensor v, const std::string& name = "") {
        Node n;
        n.kind = OpKind::kConstant;
        n.shape = v.shape();
        n.name = name;
        n.value = std::move(v);
        return push(std::move(n));
    }

    NodeId affine(NodeId x, NodeId w, NodeId b) {
        const auto& xs = at(x).shape;
        const auto& ws = at(w).shape;
        const auto& bs = at(b).shape;
        if (ws.size() != 2)
            throw ShapeError(where("affine", w) + ": weights must be rank 2");
        const int din = xs.size() == 2 ? xs[1] : (xs.size() == 1 ? xs[0] : -1);
        if (din != ws[0])
            throw ShapeError(where("affine", x) + ": input dim " + std::to_string(din) +
                             " vs weight rows " + std::to_string(ws[0]));
        if (bs.size() != 1 || bs[0] != ws[1])
            throw ShapeError(where("affine", b) + ": bias must be rank 1 of size " +
                             std::to_string(ws[1]));
        Node n;
        n.kind = OpKind::kAffine;
        n.args = {x, w, b};
        n.shape = xs.size() == 2 ? std::vector<int>{xs[0], ws[1]} : std::vector<int>{ws[1]};
        return push(std::move(n));
    }

    NodeId add(NodeId a, NodeId b, double alpha = 1.0, double beta = 1.0) {
        require_same_shape("add", a, b);
        Node n;
        n.kind = OpKind::kAdd;
        n.args = {a, b};
        n.shape = at(a).shape;
        n.coeffs = {alpha, beta};
        return push(std::move(n));
    }

    NodeId mul(NodeId a, NodeId b) {
        require_same_shape("mul", a, b);
        Node n;
        n.kind = OpKind::kMul;
        n.args = {a, b};
        n.shape = at(a).shape;
        return push(std::move(n));
    }

    NodeId relu(NodeId x) { return unary(OpKind::kRelu, x); }
    NodeId tanh(NodeId x) { return unary(OpKind::kTanh, x); }
    NodeId sigmoid(NodeId x) { return unary(OpKind::kSigmoid, x); }
    NodeId log(NodeId x) { return unary(OpKind::kLog, x); }

    NodeId softmax_xent(NodeId logits, std::vector<int> labels) {
        const auto& s = at(logits).shape;
        const int n = s.size() == 2 ? s[0] : 1;
        const int c = s.size() == 2 ? s[1] : (s.empty() ? 1 : s[0]);
        if (static_cast<int>(labels.size()) != n)
            throw ShapeError(where("softmax_xent", logits) + ": " +
                             std::to_string(labels.size()) + " labels for " +
                             std::to_string(n) + " rows");
        for (int l : labels)
            if (l < 0 || l >= c)
                throw ShapeError(where("softmax_xent", logits) + ": label " +
                                 std::to_string(l) + " outside [0," + std::to_string(c) + ")");
        Node node;
        node.kind = OpKind::kSoftmaxXent;
        node.args = {logits};
        node.shape = {};
        node.labels = std::move(labels);
        return push(std::move(node));
    }

    NodeId sqnorm(NodeId x) {
        Node n;
        n.kind = OpKind::kSqNorm;
        n.args = {x};
        n.shape = {};
        return push(std::move(n));
    }

    NodeId weighted_sum(std::vector<NodeId> xs, std::vector<double> coeffs) {
        if (xs.empty() || xs.size() != coeffs.size())
            throw ShapeError("weighted_sum: needs matching non-empty args and coefficients");
        Node n;
        n.kind = OpKind::kWeightedSum;
        n.args = std::move(xs);
        n.shape = {};
        n.coeffs = std::move(coeffs);
        return push(std::move(n));
    }

    /// Tag an interior node so callers can look it up by name later.
    void tag(NodeId id, const std::string& name) {
        at_mut(id).name = name;
        tags_[name] = id;
    }

    NodeId find(const std::string& name) const {
        auto it = tags_.find(name);
        if (it != tags_.end()) return it->second;
        auto in = inputs_.find(name);
        if (in != inputs_.end()) return in->second;
        throw ShapeError("graph: no node named '" + name + "'");
    }

    const Node& at(NodeId id) const { return nodes_[static_cast<std::size_t>(id)]; }
    int node_count() const { return static_cast<int>(nodes_.size()); }
    const std::map<std::string, NodeId>& inputs() const { return inputs_; }

private:
    NodeId unary(OpKind k, NodeId x) {
        Node n;
        n.kind = k;
        n.args = {x};
        n.shape = at(x).shape;
        return push(std::move(n));
    }

    void require_same_shape(const char* op, NodeId a, NodeId b) const {
        if (at(a).shape != at(b).shape)
            throw ShapeError(std::string(op) + " at node " + std::to_string(b) + ": shapes " +
                             Tensor(at(a).shape).shape_str() + " vs " +
                             Tensor(at(b).shape).shape_str());
    }

    std::string where(const char* op, NodeId id) const {
        return std::string(op) + " at node " + std::to_string(id);
    }

    NodeId next_id() const { return static_cast<NodeId>(nodes_.size()); }
    NodeId push(Node n) {
        nodes_.push_back(std::move(n));
        return static_cast<NodeId>(nodes_.size() - 1);
    }
    Node& at_mut(NodeId id) { return nodes_[static_cast<std::size_t>(id)]; }

    std::vector<Node> nodes_;
    std::map<std::string, NodeId> inputs_;
    std::map<std::string, NodeId> tags_;
};

using NamedTensors = std::map<std::string, Tensor>;

/// Values of every node after one forward pass.
class Workspace {
public:
    explicit Workspace(int n) : values_(static_cast<std::size_t>(n)) {}
    const Tensor& value(NodeId id) const { return values_[static_cast<std::size_t>(id)]; }
    Tensor& slot(NodeId id) { return values_[static_cast<std::size_t>(id)]; }

private:
    std::vector<Tensor> values_;
};

/// Evaluate every node of the record in order. Pure: identical inputs give
/// bit-identical outputs, and the inputs are never mutated.
inline Workspace forward_eval(const Graph& g, const NamedTensors& inputs) {
    Workspace ws(g.node_count());
    for (NodeId id = 0; id < g.node_count(); ++id) {
        const Node& n = g.at(id);
        Tensor& out = ws.slot(id);
        switch (n.kind) {
        case OpKind::kInput: {
            auto it = inputs.find(n.name);
            if (it == inputs.end())
                throw ShapeError("forward: input '" + n.name + "' not bound");
            if (it->second.shape() != n.shape)
                throw ShapeError("forward: input '" + n.name + "' has shape " +
                                 it->second.shape_str() + ", declared " +
                                 Tensor(n.shape).shape_str());
            out = it->second;
            break;
        }
        case OpKind::kConstant:
            out = n.value;
            break;
        case OpKind::kAffine:
            out = ops::affine(ws.value(n.args[0]), ws.value(n.args[1]), ws.value(n.args[2]));
            break;
        case OpKind::kAdd:
            out = ops::axpby(n.coeffs[0], ws.value(n.args[0]), n.coeffs[1], ws.value(n.args[1]));
            break;
        case OpKind::kMul:
            out = ops::hadamard(ws.value(n.args[0]), ws.value(n.args[1]));
            break;
        case OpKind::kRelu:
            out = ops::relu(ws.value(n.args[0]));
            break;
        case OpKind::kTanh:
            out = ops::tanh(ws.value(n.args[0]));
            break;
        case OpKind::kSigmoid:
            out = ops::sigmoid(ws.value(n.args[0]));
            break;
        case OpKind::kLog:
            out = ops::clamped_log(ws.value(n.args[0]));
            break;
        case OpKind::kSoftmaxXent:
            out = Tensor::scalar(ops::softmax_xent_mean(ws.value(n.args[0]), n.labels));
            break;
        case OpKind::kSqNorm:
            out = Tensor::scalar(ops::sqnorm(ws.value(n.args[0])));
            break;
        case OpKind::kWeightedSum: {
            double acc = 0.0;
            for (std::size_t i = 0; i < n.args.size(); ++i)
                acc += n.coeffs[i] * ops::sum_all(ws.value(n.args[i]));
            out = Tensor::scalar(acc);
            break;
        }
        }
        if (!out.all_finite())
            throw Error("forward: non-finite value at node " + std::to_string(id) +
                        (n.name.empty() ? "" : " ('" + n.name + "')"));
    }
    return ws;
}

/// Reverse sweep from a scalar seed node. Returns one gradient tensor per
/// trainable input, keyed by input name and shaped like the input.
inline NamedTensors backward(const Graph& g, const Workspace& ws, NodeId seed) {
    if (!(seed >= 0 && seed < g.node_count()))
        throw ShapeError("backward: seed node out of range");
    if (ws.value(seed).size() != 1)
        throw ShapeError("backward: seed node " + std::to_string(seed) + " is not scalar");

    std::vector<Tensor> grad(static_cast<std::size_t>(g.node_count()));
    std::vector<char> live(static_cast<std::size_t>(g.node_count()), 0);
    auto touch = [&](NodeId id) -> Tensor& {
        if (!live[static_cast<std::size_t>(id)]) {
            grad[static_cast<std::size_t>(id)] = Tensor::zeros_like(ws.value(id));
            live[static_cast<std::size_t>(id)] = 1;
        }
        return grad[static_cast<std::size_t>(id)];
    };
    touch(seed)[0] = 1.0;

    for (NodeId id = g.node_count() - 1; id >= 0; --id) {
        if (!live[static_cast<std::size_t>(id)]) continue;
        const Node& n = g.at(id);
        const Tensor& gout = grad[static_cast<std::size_t>(id)];
        switch (n.kind) {
        case OpKind::kInput:
        case OpKind::kConstant:
            break;
        case OpKind::kAffine: {
            const Tensor& x = ws.value(n.args[0]);
            const Tensor& w = ws.value(n.args[1]);
            ops::affine_backward(x, w, gout, touch(n.args[0]), touch(n.args[1]),
                                 touch(n.args[2]));
            break;
        }
        case OpKind::kAdd: {
            Tensor& da = touch(n.args[0]);
            Tensor& db = touch(n.args[1]);
            for (int i = 0; i < gout.size(); ++i) {
                da[i] += n.coeffs[0] * gout[i];
                db[i] += n.coeffs[1] * gout[i];
            }
            break;
        }
        case OpKind::kMul: {
            const Tensor& a = ws.value(n.args[0]);
            const Tensor& b = ws.value(n.args[1]);
            Tensor& da = touch(n.args[0]);
            Tensor& db = touch(n.args[1]);
            for (int i = 0; i < gout.size(); ++i) {
                da[i] += gout[i] * b[i];
                db[i] += gout[i] * a[i];
            }
            break;
        }
        case OpKind::kRelu: {
            const Tensor& x = ws.value(n.args[0]);
            Tensor& dx = touch(n.args[0]);
            for (int i = 0; i < gout.size(); ++i)
                if (x[i] > 0.0) dx[i] += gout[i];
            break;
        }
        case OpKind::kTanh: {
            const Tensor& y = ws.value(id);
            Tensor& dx = touch(n.args[0]);
            for (int i = 0; i < gout.size(); ++i) dx[i] += (1.0 - y[i] * y[i]) * gout[i];
            break;
        }
        case OpKind::kSigmoid: {
            const Tensor& y = ws.value(id);
            Tensor& dx = touch(n.args[0]);
            for (int i = 0; i < gout.size(); ++i) dx[i] += (y[i] * (1.0 - y[i])) * gout[i];
            break;
        }
        case OpKind::kLog: {
            const Tensor& x = ws.value(n.args[0]);
            Tensor& dx = touch(n.args[0]);
            for (int i = 0; i < gout.size(); ++i)
                if (x[i] >= ops::kLogFloor) dx[i] += (1.0 / x[i]) * gout[i];
            break;
        }
        case OpKind::kSoftmaxXent:
            ops::softmax_xent_backward(ws.value(n.args[0]), n.labels, gout[0],
                                       touch(n.args[0]));
            break;
        case OpKind::kSqNorm: {
            const Tensor& x = ws.value(n.args[0]);
            Tensor& dx = touch(n.args[0]);
            for (int i = 0; i < x.size(); ++i) dx[i] += (2.0 * x[i]) * gout[0];
            break;
        }
        case OpKind::kWeightedSum:
            for (std::size_t i = 0; i < n.args.size(); ++i) {
                Tensor& dx = touch(n.args[i]);
                const double c = n.coeffs[i] * gout[0];
                for (int j = 0; j < dx.size(); ++j) dx[j] += c;
            }
            break;
        }
    }

    NamedTensors result;
    for (const auto& [name, id] : g.inputs()) {
        const Node& n = g.at(id);
        if (!n.trainable) continue;
        if (live[static_cast<std::size_t>(id)])
            result[name] = std::move(grad[static_cast<std::size_t>(id)]);
        else
            result[name] = Tensor(n.shape);
    }
    return result;
}

/// Max over trainable-input coordinates of the relative disagreement between
/// analytic gradients and central finite differences with step eps.
inline double gradient_check(const Graph& g, const NamedTensors& inputs, NodeId seed,
                             double eps) {
    if (!(eps > 0.0 && eps <= 1e-3))
        throw Error("gradient_check: eps must lie in (0, 1e-3]");
    Workspace ws = forward_eval(g, inputs);
    if (ws.value(seed).size() != 1)
        throw ShapeError("gradient_check: seed node is not scalar");
    NamedTensors analytic = backward(g, ws, seed);

    NamedTensors probe = inputs;
    double worst = 0.0;
    for (auto& [name, grad] : analytic) {
        Tensor& t = probe.at(name);
        for (int i = 0; i < t.size(); ++i) {
            const double saved = t[i];
            t[i] = saved + eps;
            const double up = forward_eval(g, probe).value(seed)[0];
            t[i] = saved - eps;
            const double dn = forward_eval(g, probe).value(seed)[0];
            t[i] = saved;
            const double numeric = (up - dn) / (2.0 * eps);
            const double a = grad[i];
            const double denom = std::max(1e-12, std::abs(a) + std::abs(numeric));
            worst = std::max(worst, std::abs(a - numeric) / denom);
        }
    }
    return worst;
}

} // namespace pdfd

#pragma once

#include "finflow/core/kernels.hpp"
#include "finflow/core/tensor.hpp"

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace finflow::ad {

class Tape;
class GradStore;

// A value that may be tracked on a tape. node < 0 means constant: ops do not
// record it and no gradient flows into it. The tensor itself is always
// present so forward-only evaluation (tape.recording = false) works with the
// same code paths.
struct DiffVar {
    Tensor val;
    int node = -1;

    bool on_tape() const { return node >= 0; }
    const Shape& shape() const { return val.shape(); }
};

// Non-finite detection is eager on every produced value: op results that are
// not recorded (constant inputs, or recording off) still pass through here.
inline DiffVar constant(Tensor v) {
    if (!kern::ops().all_finite(v.data(), v.size()))
        throw SimError("non-finite value in constant or unrecorded op result");
    return DiffVar{std::move(v), -1};
}
inline DiffVar constant(double v) { return constant(Tensor::scalar(v)); }

using BackFn = std::function<void(const Tensor& g, GradStore& gs)>;

struct Node {
    BackFn back;      // empty for leaves
    const char* op = "";
};

// gradient accumulator keyed by node id; unreached nodes read back as zero
class GradStore {
public:
    explicit GradStore(std::size_t n) : g_(n) {}

    void accum(int node, const Tensor& g) {
        if (node < 0) return;
        Tensor& slot = g_[std::size_t(node)];
        if (!slot.defined()) {
            slot = g;
            return;
        }
        check(slot.size() == g.size(), "gradient shape mismatch during accumulation");
        kern::ops().axpy(1.0, g.data(), slot.raw(), g.size());
    }

    bool has(int node) const { return node >= 0 && g_[std::size_t(node)].defined(); }
    const Tensor& grad(int node) const { return g_[std::size_t(node)]; }
    Tensor grad_or_zero(int node, Shape s) const {
        if (has(node)) return g_[std::size_t(node)];
        return Tensor::zeros(s);
    }

private:
    std::vector<Tensor> g_;
    friend class Tape;
};

// Reverse-mode tape: an append-only list of backward closures in topological
// order (parents recorded before children by construction). Confined to one
// logical thread; hand off whole, never share.
class Tape {
public:
    bool recording = true;

    DiffVar leaf(Tensor v, const char* name = "leaf") {
        check_finite(v, name);
        nodes_.push_back(Node{BackFn{}, name});
        return DiffVar{std::move(v), int(nodes_.size()) - 1};
    }

    // record an op result; `back` may be empty when no parent is on the tape
    DiffVar record(Tensor v, const char* op, BackFn back) {
        check_finite(v, op);
        if (!recording || !back) return DiffVar{std::move(v), -1};
        nodes_.push_back(Node{std::move(back), op});
        return DiffVar{std::move(v), int(nodes_.size()) - 1};
    }

    std::size_t size() const { return nodes_.size(); }
    const char* op_name(int id) const { return nodes_[std::size_t(id)].op; }

    GradStore backward(const DiffVar& seed) {
        check(seed.on_tape(), "backward: seed is not on the tape");
        check(seed.val.size() == 1, "backward: seed must be scalar-valued");
        return backward_multi({{seed.node, Tensor::scalar(1.0)}});
    }

    GradStore backward_multi(const std::vector<std::pair<int, Tensor>>& seeds) {
        check(!consumed_, "backward: tape already consumed");
        consumed_ = true;
        GradStore gs(nodes_.size());
        int top = -1;
        for (const auto& [id, g] : seeds) {
            check(id >= 0 && id < int(nodes_.size()), "backward: seed node out of range");
            gs.accum(id, g);
            top = std::max(top, id);
        }
        for (int id = top; id >= 0; --id) {
            if (!gs.has(id)) continue;
            const Node& n = nodes_[std::size_t(id)];
            if (n.back) n.back(gs.grad(id), gs);
        }
        return gs;
    }

    void clear() {
        nodes_.clear();
        consumed_ = false;
    }

private:
    void check_finite(const Tensor& v, const char* op) {
        if (!kern::ops().all_finite(v.data(), v.size()))
            throw SimError(std::string("non-finite value produced by op '") + op + "'");
    }

    std::vector<Node> nodes_;
    bool consumed_ = false;
};

} // namespace finflow::ad

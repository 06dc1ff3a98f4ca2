#include "finflow/ad/checkpoint.hpp"

#include "finflow/ad/ops.hpp"

#include <string>

namespace finflow::ad {

namespace {

std::vector<DiffVar> as_constants(const std::vector<Tensor>& vals) {
    std::vector<DiffVar> out;
    out.reserve(vals.size());
    for (const auto& v : vals) out.push_back(constant(v));
    return out;
}

std::vector<DiffVar> as_leaves(Tape& t, const std::vector<Tensor>& vals, const char* name) {
    std::vector<DiffVar> out;
    out.reserve(vals.size());
    for (const auto& v : vals) out.push_back(t.leaf(v, name));
    return out;
}

} // namespace

CheckpointedUnroll::CheckpointedUnroll(StepFn fn, std::vector<Tensor> initial_state,
                                       std::vector<Tensor> params, int n_steps, int segment_len)
    : fn_(std::move(fn)),
      initial_state_(std::move(initial_state)),
      params_(std::move(params)),
      n_steps_(n_steps),
      segment_len_(segment_len) {
    check(n_steps_ >= 0, "checkpointed_unroll: negative step count");
    check(segment_len_ >= 1, "checkpointed_unroll: segment length must be >= 1");
}

void CheckpointedUnroll::run_forward() {
    checkpoints_.clear();
    loss_ = 0.0;
    std::vector<Tensor> state = initial_state_;
    Tape scratch;
    scratch.recording = false;
    std::vector<DiffVar> pvars = as_constants(params_);
    for (int t = 0; t < n_steps_; ++t) {
        if (t % segment_len_ == 0) checkpoints_.push_back(state);
        StepResult r;
        try {
            r = fn_(scratch, t, as_constants(state), pvars);
        } catch (const SimError& e) {
            throw SimError(std::string(e.what()) + " (at step " + std::to_string(t) + ")");
        }
        check(r.state.size() == state.size(), "checkpointed_unroll: step changed state arity");
        state.clear();
        for (auto& v : r.state) state.push_back(v.val);
        loss_ += r.loss.val.scalar_value();
    }
    final_state_ = state;
    forward_done_ = true;
}

CheckpointedUnroll::Grads CheckpointedUnroll::backward() {
    check(forward_done_, "checkpointed_unroll: backward before forward");
    Grads out;
    out.d_params.reserve(params_.size());
    for (const auto& p : params_) out.d_params.push_back(Tensor::zeros(p.shape()));
    out.d_initial_state.reserve(initial_state_.size());

    std::vector<Tensor> adj_state(initial_state_.size()); // undefined = zero
    for (int seg = int(checkpoints_.size()) - 1; seg >= 0; --seg) {
        const int t0 = seg * segment_len_;
        const int t1 = std::min(n_steps_, t0 + segment_len_);
        Tape tape;
        std::vector<DiffVar> svars = as_leaves(tape, checkpoints_[std::size_t(seg)], "state");
        std::vector<DiffVar> pvars = as_leaves(tape, params_, "param");
        std::vector<int> state_leaf_ids;
        for (const auto& v : svars) state_leaf_ids.push_back(v.node);
        std::vector<int> param_leaf_ids;
        for (const auto& v : pvars) param_leaf_ids.push_back(v.node);

        DiffVar seg_loss = constant(0.0);
        for (int t = t0; t < t1; ++t) {
            StepResult r;
            try {
                r = fn_(tape, t, svars, pvars);
            } catch (const SimError& e) {
                throw SimError(std::string(e.what()) + " (at step " + std::to_string(t) + ", replay)");
            }
            svars = std::move(r.state);
            seg_loss = add(tape, seg_loss, r.loss);
        }

        std::vector<std::pair<int, Tensor>> seeds;
        if (seg_loss.on_tape()) seeds.push_back({seg_loss.node, Tensor::scalar(1.0)});
        for (std::size_t i = 0; i < svars.size(); ++i)
            if (adj_state[i].defined() && svars[i].on_tape())
                seeds.push_back({svars[i].node, adj_state[i]});

        if (seeds.empty()) {
            // nothing in this segment influences the loss
            for (auto& a : adj_state) a = Tensor();
            continue;
        }
        GradStore gs = tape.backward_multi(seeds);
        for (std::size_t i = 0; i < state_leaf_ids.size(); ++i)
            adj_state[i] = gs.has(state_leaf_ids[i]) ? gs.grad(state_leaf_ids[i]) : Tensor();
        for (std::size_t j = 0; j < param_leaf_ids.size(); ++j)
            if (gs.has(param_leaf_ids[j]))
                kern::ops().axpy(1.0, gs.grad(param_leaf_ids[j]).data(), out.d_params[j].raw(),
                                 out.d_params[j].size());
    }

    for (std::size_t i = 0; i < initial_state_.size(); ++i)
        out.d_initial_state.push_back(adj_state[i].defined()
                                          ? adj_state[i]
                                          : Tensor::zeros(initial_state_[i].shape()));
    return out;
}

} // namespace finflow::ad

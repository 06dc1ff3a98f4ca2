#pragma once

#include "finflow/ad/tape.hpp"

#include <functional>
#include <vector>

namespace finflow::ad {

// One simulation step as a pure function of its inputs: given a tape, the
// step index, state variables and parameter variables, produce the next
// state and a scalar loss increment (constant(0) when a step contributes
// nothing).
struct StepResult {
    std::vector<DiffVar> state;
    DiffVar loss;
};
using StepFn = std::function<StepResult(Tape&, int t, const std::vector<DiffVar>& state,
                                        const std::vector<DiffVar>& params)>;

// Segment-level gradient checkpointing. The forward pass runs with recording
// off and stores one state snapshot per segment; backward re-executes each
// segment on a fresh tape from its checkpoint, seeds it with the adjoint of
// the segment's output state plus the loss, and chains adjoints backwards.
// Peak retained graph therefore covers a single segment.
class CheckpointedUnroll {
public:
    CheckpointedUnroll(StepFn fn, std::vector<Tensor> initial_state, std::vector<Tensor> params,
                       int n_steps, int segment_len);

    void run_forward();

    const std::vector<Tensor>& final_state() const { return final_state_; }
    double loss() const { return loss_; }
    int checkpoint_count() const { return int(checkpoints_.size()); }
    bool forward_done() const { return forward_done_; }

    struct Grads {
        std::vector<Tensor> d_params;
        std::vector<Tensor> d_initial_state;
    };
    Grads backward();

private:
    StepFn fn_;
    std::vector<Tensor> initial_state_;
    std::vector<Tensor> params_;
    int n_steps_;
    int segment_len_;

    std::vector<std::vector<Tensor>> checkpoints_; // state at each segment start
    std::vector<Tensor> final_state_;
    double loss_ = 0.0;
    bool forward_done_ = false;
};

} // namespace finflow::ad

#pragma once

#include <cstddef>
#include <functional>
#include <span>

namespace stt {

// Runs fn(i) for i in [0, count) on an OpenMP thread team. Every work item
// must write only to its own output slot; with that discipline the result is
// bit-identical for any worker count. workers <= 0 uses the OpenMP default.
void par_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn);

// Serial reference for par_for, kept for the equivalence tests and the
// benchmark target.
void seq_for(std::size_t count, const std::function<void(std::size_t)>& fn);

// Order-fixed pairwise summation. Reductions over per-item arrays go through
// this so multi-worker runs agree with single-worker runs.
double pairwise_sum(std::span<const double> values);

}  // namespace stt

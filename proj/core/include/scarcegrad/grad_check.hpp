#pragma once

#include <functional>
#include <vector>

#include "scarcegrad/tape.hpp"

namespace scarcegrad {

// Builds a scalar root on the given tape from leaves created for each input
// tensor (in order). The function must be deterministic in its inputs.
using TapeBuilder = std::function<VarId(Tape&, const std::vector<VarId>&)>;

// Compares reverse-mode gradients against central finite differences over
// every coordinate of every input. Returns the max of
// |AD - FD| / max(1, |FD|). Requires h in (0, 1e-3].
double grad_check(const TapeBuilder& build, const std::vector<Tensor>& point, double h);

// Finite differences of an arbitrary scalar pipeline with respect to a flat
// parameter vector; used by whole-pipeline oracle tests.
std::vector<double> central_fd(const std::function<double(const std::vector<double>&)>& f,
                               const std::vector<double>& at, double h);

}  // namespace scarcegrad

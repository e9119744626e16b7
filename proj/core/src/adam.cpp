#include "slowflow/adam.hpp"

#include <cmath>
#include <string>

#include "slowflow/errors.hpp"

namespace slowflow::ad {

void adam_step(AdamState& state, const std::vector<Matrix*>& params,
               const std::vector<const Matrix*>& grads) {
  if (params.size() != grads.size()) {
    throw ContractViolation("adam_step: " + std::to_string(params.size()) + " params vs " +
                            std::to_string(grads.size()) + " grads");
  }
  if (state.first_moment.empty()) {
    for (const Matrix* p : params) {
      state.first_moment.emplace_back(p->rows(), p->cols());
      state.second_moment.emplace_back(p->rows(), p->cols());
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw ContractViolation("adam_step: parameter block count changed mid-run");
  }

  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& p = *params[i];
    const Matrix& g = *grads[i];
    if (!p.same_shape(g) || !p.same_shape(state.first_moment[i])) {
      throw DimensionError("adam_step: block " + std::to_string(i) + " shape mismatch " +
                           shape_str(p) + " vs " + shape_str(g));
    }
    if (!g.all_finite()) {
      throw NumericalError("adam_step: non-finite gradient in block " + std::to_string(i) +
                           " at step " + std::to_string(state.step));
    }
    Matrix& m = state.first_moment[i];
    Matrix& v = state.second_moment[i];
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = g.data()[k];
      m.data()[k] = state.beta1 * m.data()[k] + (1.0 - state.beta1) * gk;
      v.data()[k] = state.beta2 * v.data()[k] + (1.0 - state.beta2) * gk * gk;
      const double mhat = m.data()[k] / bc1;
      const double vhat = v.data()[k] / bc2;
      p.data()[k] -= state.learning_rate * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

}  // namespace slowflow::ad

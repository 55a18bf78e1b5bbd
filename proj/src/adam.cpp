#include "emgtl/adam.hpp"

#include <cmath>

namespace emgtl {

template <typename Real>
void Adam<Real>::step(std::span<Parameter<Real>* const> params) {
  ++steps_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, double(steps_));
  const double c2 = 1.0 - std::pow(b2, double(steps_));
  for (Parameter<Real>* p : params) {
    if (!p->trainable) continue;
    auto it = moments_.find(p->name);
    if (it == moments_.end()) {
      it = moments_
               .emplace(p->name, Moments{Tensor<Real>(p->value.shape()),
                                         Tensor<Real>(p->value.shape())})
               .first;
    }
    Moments& m = it->second;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad[i];
      const double m1 = b1 * m.first[i] + (1.0 - b1) * g;
      const double m2 = b2 * m.second[i] + (1.0 - b2) * g * g;
      m.first[i] = Real(m1);
      m.second[i] = Real(m2);
      const double update = options_.lr * (m1 / c1) / (std::sqrt(m2 / c2) + options_.epsilon);
      p->value[i] = Real(double(p->value[i]) - update);
    }
    check_finite(p->value, "adam step");
  }
}

template class Adam<float>;
template class Adam<double>;

}  // namespace emgtl

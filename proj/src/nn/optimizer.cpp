// SPDX-License-Identifier: Apache-2.0
#include "hybridct/nn/optimizer.hpp"

#include <cmath>

#include "hybridct/core/error.hpp"

namespace hybridct::nn {

AdamW::AdamW(ParamList params, AdamWCfg cfg) : cfg_(cfg) {
  HYBRIDCT_REQUIRE(cfg.beta1 >= 0 && cfg.beta1 < 1 && cfg.beta2 >= 0 && cfg.beta2 < 1, "Adam betas must be in [0, 1)");
  HYBRIDCT_REQUIRE(cfg.eps > 0, "Adam eps must be > 0");
  HYBRIDCT_REQUIRE(cfg.weight_decay >= 0, "weight_decay must be >= 0");
  for (Parameter* p : params) slots_.push_back({p, Tensor(p->value.shape()), Tensor(p->value.shape()), 0});
}

void AdamW::zero_grad() {
  for (auto& s : slots_) s.param->grad.zero();
}

void AdamW::step(double lr) {
  const double b1 = cfg_.beta1;
  const double b2 = cfg_.beta2;
  for (auto& s : slots_) {
    Parameter& p = *s.param;
    if (!p.trainable) continue;
    ++s.t;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(s.t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(s.t));
    const float decay = static_cast<float>(1.0 - lr * cfg_.weight_decay);
    float* w = p.value.data();
    const float* g = p.grad.data();
    float* m = s.m.data();
    float* v = s.v.data();
    const std::size_t n = p.value.size();
    for (std::size_t i = 0; i < n; ++i) {
      m[i] = static_cast<float>(b1 * m[i] + (1.0 - b1) * g[i]);
      v[i] = static_cast<float>(b2 * v[i] + (1.0 - b2) * g[i] * g[i]);
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      w[i] = static_cast<float>(w[i] * decay - lr * mhat / (std::sqrt(vhat) + cfg_.eps));
    }
  }
}

std::int64_t AdamW::step_count(const std::string& param_name) const {
  for (const auto& s : slots_)
    if (s.param->name == param_name) return s.t;
  throw ValidationError("optimizer has no parameter '" + param_name + "'");
}

std::vector<std::pair<std::string, Tensor>> AdamW::state() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (const auto& s : slots_) {
    out.emplace_back("adam.m." + s.param->name, s.m);
    out.emplace_back("adam.v." + s.param->name, s.v);
    // float32 holds step counts exactly up to 2^24.
    out.emplace_back("adam.t." + s.param->name, Tensor({1}, static_cast<float>(s.t)));
  }
  return out;
}

void AdamW::load_state(const std::map<std::string, Tensor>& tensors) {
  for (auto& s : slots_) {
    const auto m = tensors.find("adam.m." + s.param->name);
    const auto v = tensors.find("adam.v." + s.param->name);
    const auto t = tensors.find("adam.t." + s.param->name);
    if (m == tensors.end() || v == tensors.end() || t == tensors.end()) continue;
    if (m->second.shape() != s.m.shape() || v->second.shape() != s.v.shape())
      throw RuntimeFailure("optimizer state for '" + s.param->name + "' has the wrong shape");
    s.m = m->second;
    s.v = v->second;
    s.t = static_cast<std::int64_t>(t->second[0]);
  }
}

}  // namespace hybridct::nn

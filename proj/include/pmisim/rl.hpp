#pragma once

#include <cmath>
#include <cstdint>
#include <json.hpp>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pmisim/rng.hpp"

namespace pmisim {

using json = nlohmann::json;

struct A2cConfig {
  int n_steps = 5;
  double discount = 0.99;
  double learning_rate = 7e-4;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  double grad_clip = 0.5;
  // RMSprop smoothing, TF-style epsilon inside the square root.
  double rms_alpha = 0.99;
  double rms_eps = 1e-5;

  void validate() const {
    if (!(discount > 0.0 && discount <= 1.0)) {
      throw std::invalid_argument("a2c: discount must be in (0,1]");
    }
    if (n_steps < 1) throw std::invalid_argument("a2c: n_steps must be >= 1");
    if (learning_rate < 0.0 || value_coef < 0.0 || entropy_coef < 0.0 || grad_clip < 0.0) {
      throw std::invalid_argument("a2c: weights must be >= 0");
    }
  }
};

inline double stable_logsumexp(std::span<const double> v) {
  double mx = v[0];
  for (double x : v) mx = std::max(mx, x);
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s);
}

inline std::vector<double> softmax(std::span<const double> logits) {
  const double lse = stable_logsumexp(logits);
  std::vector<double> p(logits.size());
  for (size_t i = 0; i < logits.size(); ++i) p[i] = std::exp(logits[i] - lse);
  return p;
}

inline double log_prob(std::span<const double> logits, int action) {
  return logits[static_cast<size_t>(action)] - stable_logsumexp(logits);
}

inline double entropy(std::span<const double> logits) {
  const std::vector<double> p = softmax(logits);
  double h = 0.0;
  for (double q : p) {
    if (q > 0.0) h -= q * std::log(q);
  }
  return h;
}

/// Inverse-CDF categorical sample.
inline int sample_categorical(std::span<const double> logits, KeyedRng& rng) {
  const std::vector<double> p = softmax(logits);
  const double u = rng.next_unit();
  double acc = 0.0;
  for (size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(p.size()) - 1;
}

inline int argmax(std::span<const double> v) {
  int best = 0;
  for (size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[static_cast<size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

/// Shared-trunk MLP with independent categorical heads and a value head.
///
/// Two tanh hidden layers feed linear logits per head plus a scalar value.
/// Parameters live in one flat vector so the optimizer, clipping, and the
/// finite-difference check can treat the network as a plain R^n point.
class PolicyValueNet {
 public:
  PolicyValueNet(int in_dim, std::vector<int> head_sizes, std::uint64_t seed,
                 std::vector<int> hidden = {64, 64})
      : in_dim_(in_dim), hidden_(std::move(hidden)), heads_(std::move(head_sizes)) {
    if (hidden_.size() != 2) throw std::invalid_argument("net: expected two hidden layers");
    layout();
    init(seed);
  }

  int in_dim() const { return in_dim_; }
  const std::vector<int>& hidden() const { return hidden_; }
  const std::vector<int>& head_sizes() const { return heads_; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  size_t num_params() const { return params_.size(); }

  struct Forward {
    std::vector<double> h1;
    std::vector<double> h2;
    std::vector<std::vector<double>> logits;  // one vector per head
    double value = 0.0;
  };

  Forward forward(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != in_dim_) {
      throw std::invalid_argument("net: input dimension mismatch");
    }
    for (double v : x) {
      if (!std::isfinite(v)) throw std::invalid_argument("net: non-finite input");
    }
    Forward f;
    f.h1 = affine_tanh(x, w1_, b1_, hidden_[0], in_dim_);
    f.h2 = affine_tanh(f.h1, w2_, b2_, hidden_[1], hidden_[0]);
    f.logits.resize(heads_.size());
    for (size_t h = 0; h < heads_.size(); ++h) {
      f.logits[h] = affine(f.h2, head_w_[h], head_b_[h], heads_[h], hidden_[1]);
    }
    f.value = affine(f.h2, vw_, vb_, 1, hidden_[1])[0];
    return f;
  }

  // Named views into the flat vector (offset, rows, cols).
  struct View {
    size_t off;
    int rows;
    int cols;
  };

  json checkpoint() const {
    return json{{"version", 1},
                {"in_dim", in_dim_},
                {"hidden", hidden_},
                {"heads", heads_},
                {"params", params_}};
  }

  static PolicyValueNet load(const json& j) {
    if (j.value("version", 0) != 1) {
      throw std::runtime_error("checkpoint: unsupported version");
    }
    PolicyValueNet net(j.at("in_dim").get<int>(), j.at("heads").get<std::vector<int>>(), 0,
                       j.at("hidden").get<std::vector<int>>());
    const std::vector<double> p = j.at("params").get<std::vector<double>>();
    if (p.size() != net.params_.size()) {
      throw std::runtime_error("checkpoint: parameter count mismatch");
    }
    net.params_ = p;
    return net;
  }

  friend class A2cUpdater;

 private:
  void layout() {
    size_t off = 0;
    const auto reserve = [&off](View& v, int rows, int cols) {
      v = {off, rows, cols};
      off += static_cast<size_t>(rows) * cols;
    };
    reserve(w1_, hidden_[0], in_dim_);
    reserve(b1_, hidden_[0], 1);
    reserve(w2_, hidden_[1], hidden_[0]);
    reserve(b2_, hidden_[1], 1);
    head_w_.resize(heads_.size());
    head_b_.resize(heads_.size());
    for (size_t h = 0; h < heads_.size(); ++h) {
      reserve(head_w_[h], heads_[h], hidden_[1]);
      reserve(head_b_[h], heads_[h], 1);
    }
    reserve(vw_, 1, hidden_[1]);
    reserve(vb_, 1, 1);
    params_.assign(off, 0.0);
  }

  /// Scaled uniform init: gain sqrt(2) on the trunk, 0.01 on policy heads,
  /// 1 on the value head; biases zero.
  void init(std::uint64_t seed) {
    KeyedRng rng(seed, stream::kNetInit);
    const auto fill = [&](const View& v, double gain) {
      const double lim = gain * std::sqrt(6.0 / (v.rows + v.cols));
      for (int i = 0; i < v.rows * v.cols; ++i) {
        params_[v.off + static_cast<size_t>(i)] = rng.next_range(-lim, lim);
      }
    };
    fill(w1_, std::numbers::sqrt2);
    fill(w2_, std::numbers::sqrt2);
    for (size_t h = 0; h < heads_.size(); ++h) fill(head_w_[h], 0.01);
    fill(vw_, 1.0);
  }

  std::vector<double> affine(std::span<const double> x, const View& w, const View& b, int rows,
                             int cols) const {
    std::vector<double> y(static_cast<size_t>(rows));
    for (int r = 0; r < rows; ++r) {
      double acc = params_[b.off + static_cast<size_t>(r)];
      const size_t base = w.off + static_cast<size_t>(r) * cols;
      for (int c = 0; c < cols; ++c) acc += params_[base + static_cast<size_t>(c)] * x[static_cast<size_t>(c)];
      y[static_cast<size_t>(r)] = acc;
    }
    return y;
  }

  std::vector<double> affine_tanh(std::span<const double> x, const View& w, const View& b,
                                  int rows, int cols) const {
    std::vector<double> y = affine(x, w, b, rows, cols);
    for (double& v : y) v = std::tanh(v);
    return y;
  }

  int in_dim_;
  std::vector<int> hidden_;
  std::vector<int> heads_;
  std::vector<double> params_;
  View w1_{}, b1_{}, w2_{}, b2_{}, vw_{}, vb_{};
  std::vector<View> head_w_, head_b_;
};

/// One transition of an on-policy rollout.
struct TrajectoryStep {
  std::vector<double> state;
  std::vector<int> actions;  // one index per head
  double log_prob = 0.0;
  double reward = 0.0;
  double value = 0.0;
  bool done = false;
};

using Trajectory = std::vector<TrajectoryStep>;

/// R_t = sum_{i<n} g^i r_{t+i} + g^n V(s_{t+n}), truncated at episode end.
struct Returns {
  std::vector<double> returns;
  std::vector<double> advantages;
};

inline Returns n_step_returns(const Trajectory& traj, double bootstrap_value,
                              const A2cConfig& cfg) {
  if (traj.empty()) throw std::invalid_argument("n_step_returns: empty trajectory");
  Returns out;
  const size_t n = traj.size();
  out.returns.resize(n);
  out.advantages.resize(n);
  double running = traj.back().done ? 0.0 : bootstrap_value;
  for (size_t i = n; i-- > 0;) {
    if (traj[i].done) running = 0.0;
    running = traj[i].reward + cfg.discount * running;
    out.returns[i] = running;
    out.advantages[i] = running - traj[i].value;
  }
  return out;
}

/// One training sample. The advantage is baked in as constant data (the
/// policy term does not differentiate through the value estimate).
struct UpdateSample {
  std::vector<double> state;
  std::vector<int> actions;
  double ret = 0.0;
  double advantage = 0.0;
};

struct UpdateStats {
  double loss = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double grad_norm = 0.0;
  double applied_norm = 0.0;
  bool skipped = false;
};

/// Entropy-regularized actor-critic update with exact reverse-mode
/// gradients and RMSprop. compute_loss_and_grads is separated from the
/// parameter step so the finite-difference check can call it directly.
class A2cUpdater {
 public:
  A2cUpdater(PolicyValueNet& net, const A2cConfig& cfg) : net_(net), cfg_(cfg) {
    cfg_.validate();
    sq_avg_.assign(net_.num_params(), 0.0);
  }

  /// loss = -mean(A * log pi) + vf * mean((R - V)^2) - ent * mean(H).
  /// Advantages A = R - V are treated as constants in the policy term.
  UpdateStats compute_loss_and_grads(std::span<const UpdateSample> batch,
                                     std::vector<double>& grads) const {
    if (batch.empty()) throw std::invalid_argument("update: empty batch");
    grads.assign(net_.num_params(), 0.0);
    UpdateStats st;
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    for (const UpdateSample& s : batch) {
      const PolicyValueNet::Forward f = net_.forward(s.state);
      const double advantage = s.advantage;

      double joint_logp = 0.0;
      double joint_entropy = 0.0;
      std::vector<double> dh2(static_cast<size_t>(net_.hidden_[1]), 0.0);

      for (size_t h = 0; h < f.logits.size(); ++h) {
        const std::vector<double>& logits = f.logits[h];
        const std::vector<double> p = softmax(logits);
        const int a = s.actions[h];
        joint_logp += log_prob(logits, a);
        double head_entropy = 0.0;
        for (double q : p) {
          if (q > 0.0) head_entropy -= q * std::log(q);
        }
        joint_entropy += head_entropy;

        // d/dlogit_i of the per-sample loss contribution.
        std::vector<double> dlogits(p.size());
        for (size_t i = 0; i < p.size(); ++i) {
          const double indicator = (static_cast<int>(i) == a) ? 1.0 : 0.0;
          const double d_policy = advantage * (p[i] - indicator);
          const double d_entropy =
              (p[i] > 0.0) ? cfg_.entropy_coef * p[i] * (std::log(p[i]) + head_entropy) : 0.0;
          dlogits[i] = inv_n * (d_policy + d_entropy);
        }
        accumulate_linear(grads, net_.head_w_[h], net_.head_b_[h], f.h2, dlogits, dh2);
      }

      // Value head: vf * (R - V)^2.
      const double dvalue = inv_n * 2.0 * cfg_.value_coef * (f.value - s.ret);
      accumulate_linear(grads, net_.vw_, net_.vb_, f.h2, {&dvalue, 1}, dh2);

      // Back through the trunk.
      std::vector<double> dz2(dh2.size());
      for (size_t i = 0; i < dh2.size(); ++i) dz2[i] = dh2[i] * (1.0 - f.h2[i] * f.h2[i]);
      std::vector<double> dh1(static_cast<size_t>(net_.hidden_[0]), 0.0);
      accumulate_linear(grads, net_.w2_, net_.b2_, f.h1, dz2, dh1);
      std::vector<double> dz1(dh1.size());
      for (size_t i = 0; i < dh1.size(); ++i) dz1[i] = dh1[i] * (1.0 - f.h1[i] * f.h1[i]);
      std::vector<double> dx(static_cast<size_t>(net_.in_dim_), 0.0);
      accumulate_linear(grads, net_.w1_, net_.b1_, s.state, dz1, dx);

      st.policy_loss += -advantage * joint_logp;
      st.value_loss += (s.ret - f.value) * (s.ret - f.value);
      st.entropy += joint_entropy;
    }
    st.policy_loss *= inv_n;
    st.value_loss *= inv_n;
    st.entropy *= inv_n;
    st.loss = st.policy_loss + cfg_.value_coef * st.value_loss - cfg_.entropy_coef * st.entropy;
    return st;
  }

  /// Scalar loss only (used by the finite-difference oracle).
  double loss_only(std::span<const UpdateSample> batch) const {
    double policy = 0.0, value = 0.0, ent = 0.0;
    for (const UpdateSample& s : batch) {
      const PolicyValueNet::Forward f = net_.forward(s.state);
      const double advantage = s.advantage;
      double joint_logp = 0.0, joint_entropy = 0.0;
      for (size_t h = 0; h < f.logits.size(); ++h) {
        joint_logp += log_prob(f.logits[h], s.actions[h]);
        joint_entropy += entropy(f.logits[h]);
      }
      policy += -advantage * joint_logp;
      value += (s.ret - f.value) * (s.ret - f.value);
      ent += joint_entropy;
    }
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    return inv_n * policy + cfg_.value_coef * inv_n * value - cfg_.entropy_coef * inv_n * ent;
  }

  UpdateStats update(std::span<const UpdateSample> batch) {
    std::vector<double> grads;
    UpdateStats st = compute_loss_and_grads(batch, grads);
    if (!std::isfinite(st.loss)) {
      st.skipped = true;
      ++skipped_updates_;
      return st;
    }
    double norm_sq = 0.0;
    for (double g : grads) norm_sq += g * g;
    st.grad_norm = std::sqrt(norm_sq);
    const double scale = (st.grad_norm > cfg_.grad_clip && st.grad_norm > 0.0)
                             ? cfg_.grad_clip / st.grad_norm
                             : 1.0;
    st.applied_norm = st.grad_norm * scale;
    std::vector<double>& p = net_.params();
    for (size_t i = 0; i < p.size(); ++i) {
      const double g = grads[i] * scale;
      sq_avg_[i] = cfg_.rms_alpha * sq_avg_[i] + (1.0 - cfg_.rms_alpha) * g * g;
      p[i] -= cfg_.learning_rate * g / std::sqrt(sq_avg_[i] + cfg_.rms_eps);
    }
    return st;
  }

  int skipped_updates() const { return skipped_updates_; }

 private:
  /// y = W x + b with upstream dy: adds dy * x^T to dW, dy to db, and
  /// W^T dy into dx.
  void accumulate_linear(std::vector<double>& grads, const PolicyValueNet::View& w,
                         const PolicyValueNet::View& b, std::span<const double> x,
                         std::span<const double> dy, std::vector<double>& dx) const {
    const int rows = w.rows;
    const int cols = w.cols;
    for (int r = 0; r < rows; ++r) {
      const double d = dy[static_cast<size_t>(r)];
      grads[b.off + static_cast<size_t>(r)] += d;
      const size_t wbase = w.off + static_cast<size_t>(r) * cols;
      for (int c = 0; c < cols; ++c) {
        grads[wbase + static_cast<size_t>(c)] += d * x[static_cast<size_t>(c)];
        dx[static_cast<size_t>(c)] += net_.params()[wbase + static_cast<size_t>(c)] * d;
      }
    }
  }

  PolicyValueNet& net_;
  A2cConfig cfg_;
  std::vector<double> sq_avg_;
  int skipped_updates_ = 0;
};

}  // namespace pmisim

#include "ghostsr/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

#include "ghostsr/ops.hpp"

namespace ghostsr {

template <typename T>
void Adam<T>::update(const std::string& key, std::span<T> param, std::span<const T> grad, double lr) {
  if (param.size() != grad.size()) {
    throw std::invalid_argument("adam: gradient for '" + key + "' has " + std::to_string(grad.size()) +
                                " entries, parameter " + std::to_string(param.size()));
  }
  if (t_ == 0) throw std::logic_error("adam: begin_step() must precede update()");
  Moments& mom = moments_[key];
  if (mom.m.empty()) {
    mom.m.assign(param.size(), T{0});
    mom.v.assign(param.size(), T{0});
  } else if (mom.m.size() != param.size()) {
    throw std::invalid_argument("adam: parameter '" + key + "' changed size");
  }
  ++mom.t;
  const T b1 = static_cast<T>(spec_.beta1);
  const T b2 = static_cast<T>(spec_.beta2);
  const T c1 = static_cast<T>(1.0 - std::pow(spec_.beta1, static_cast<double>(mom.t)));
  const T c2 = static_cast<T>(1.0 - std::pow(spec_.beta2, static_cast<double>(mom.t)));
  const T step = static_cast<T>(lr);
  const T eps = static_cast<T>(spec_.eps);
  for (std::size_t i = 0; i < param.size(); ++i) {
    const T g = grad[i];
    mom.m[i] = b1 * mom.m[i] + (T{1} - b1) * g;
    mom.v[i] = b2 * mom.v[i] + (T{1} - b2) * g * g;
    const T mhat = mom.m[i] / c1;
    const T vhat = mom.v[i] / c2;
    param[i] -= step * mhat / (std::sqrt(vhat) + eps);
  }
}

template class Adam<float>;
template class Adam<double>;

double cosine_lr(std::size_t t, std::size_t total, double lr0) {
  if (total == 0) return lr0;
  const double frac = static_cast<double>(std::min(t, total)) / static_cast<double>(total);
  return 0.5 * lr0 * (1.0 + std::cos(std::numbers::pi * frac));
}

namespace {

Tensor<float>& param_tensor(Network& net, const std::string& key) {
  const auto dot = key.rfind('.');
  LayerParams& p = net.params(key.substr(0, dot));
  const std::string kind = key.substr(dot + 1);
  if (kind == "weight") return p.weight;
  if (kind == "bias" && p.bias) return *p.bias;
  if (kind == "proxy" && p.proxy) return *p.proxy;
  throw std::logic_error("unknown parameter key " + key);
}

std::string divergence_report(const char* what, const Network& net, std::size_t step, double lr, double loss,
                              const std::map<std::string, Var>& params, const Tape<float>& tape,
                              const Gradients<float>* grads) {
  std::ostringstream msg;
  msg << what << " at step " << step << " (lr " << lr << ", loss " << loss << ", model " << net.config().name << ")";
  for (const auto& [key, var] : params) {
    bool bad_value = false;
    bool bad_grad = false;
    double norm = 0.0;
    for (float v : tape.value(var).values()) {
      bad_value = bad_value || !std::isfinite(v);
      norm += static_cast<double>(v) * v;
    }
    if (grads) {
      for (float g : (*grads)[var].values()) bad_grad = bad_grad || !std::isfinite(g);
    }
    if (bad_value || bad_grad || !std::isfinite(norm)) {
      msg << "\n  " << key << ": |w|=" << std::sqrt(norm) << (bad_value ? " non-finite values" : "")
          << (bad_grad ? " non-finite gradient" : "");
    }
  }
  return msg.str();
}

}  // namespace

TrainResult train(Network network, const BatchProvider& batches, const TrainOptions& options) {
  Rng root(options.seed);
  Rng batch_rng = root.fork(1);
  Rng noise_rng = root.fork(2);
  Adam<float> adam(options.adam);
  TrainResult result{std::move(network), {}};
  Network& net = result.network;

  using Clock = std::chrono::steady_clock;
  for (std::size_t step = 0; step < options.steps; ++step) {
    const auto start = Clock::now();
    const double lr = cosine_lr(step, options.steps, options.adam.lr0);
    Batch batch = batches(step, batch_rng);

    Tape<float> tape(true);
    Var x = tape.constant(std::move(batch.lr));
    Var target = tape.constant(std::move(batch.hr));
    ForwardOptions fwd;
    fwd.mode = ShiftMode::Train;
    fwd.noise = options.noise;
    fwd.rng = &noise_rng;
    const ForwardResult out = net.forward(tape, x, fwd);
    if (!(tape.shape(out.output) == tape.shape(target))) {
      throw std::invalid_argument("batch HR shape " + tape.shape(target).str() + " does not match network output " +
                                  tape.shape(out.output).str());
    }
    Var loss = options.loss == LossKind::L1 ? l1_loss(tape, out.output, target) : mse_loss(tape, out.output, target);
    const double loss_value = tape.value(loss).item();
    if (!std::isfinite(loss_value)) {
      throw TrainingDiverged(divergence_report("non-finite loss", net, step, lr, loss_value, out.params, tape, nullptr));
    }
    const Gradients<float> grads = tape.backward(loss);
    for (const auto& [key, var] : out.params) {
      for (float g : grads[var].values()) {
        if (std::isfinite(g)) continue;
        throw TrainingDiverged(
            divergence_report("non-finite gradient", net, step, lr, loss_value, out.params, tape, &grads));
      }
    }

    adam.begin_step();
    for (const auto& [key, var] : out.params) {
      Tensor<float>& p = param_tensor(net, key);
      adam.update(key, p.values(), grads[var].values(), lr);
    }

    LogRow row;
    row.step = step;
    row.lr = lr;
    row.loss = loss_value;
    row.wall_ms =
        options.timing ? std::chrono::duration<double, std::milli>(Clock::now() - start).count() : 0.0;
    result.log.push_back(row);
    if (options.on_step) options.on_step(row);
  }
  return result;
}

void write_log_csv(std::ostream& out, std::span<const LogRow> log) {
  out << "step,lr,loss,wall_ms\n";
  const auto old = out.precision(17);
  for (const LogRow& r : log) out << r.step << ',' << r.lr << ',' << r.loss << ',' << r.wall_ms << '\n';
  out.precision(old);
}

}  // namespace ghostsr

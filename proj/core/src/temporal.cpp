#include "jamdet/temporal.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "jamdet/random.hpp"

namespace jamdet {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void check_window(const LstmModel& model, const Window& window) {
  if (window.rows.empty()) throw ValidationError("lstm: empty window");
  for (const auto& row : window.rows) {
    if (static_cast<int>(row.size()) != model.input) {
      throw ValidationError("lstm: window row dimension mismatch");
    }
  }
}

struct StepCache {
  std::vector<double> z;  // [x_t; h_{t-1}]
  std::vector<double> gi, gf, go, gc;  // gate activations
  std::vector<double> c, tanh_c;
  std::vector<double> c_prev;
};

struct ForwardCache {
  std::vector<StepCache> steps;
  std::vector<double> h_last;
  std::vector<double> a_fc, r;
  std::array<double, 2> logits;
  std::array<double, 2> prob;
};

ForwardCache forward_pass(const LstmModel& m, const Window& window) {
  ForwardCache cache;
  std::vector<double> h(m.hidden, 0.0), c(m.hidden, 0.0);
  const bool scaled = !m.feat_min.empty();

  for (const auto& row : window.rows) {
    StepCache step;
    step.c_prev = c;
    step.z.resize(m.input + m.hidden);
    for (int f = 0; f < m.input; ++f) {
      double v = row[f];
      if (scaled) {
        const double range = m.feat_max[f] - m.feat_min[f];
        v = range > 0.0 ? std::clamp((v - m.feat_min[f]) / range, 0.0, 1.0) : 0.0;
      }
      step.z[f] = v;
    }
    for (int j = 0; j < m.hidden; ++j) step.z[m.input + j] = h[j];

    step.gi = matvec(m.w_input, step.z);
    step.gf = matvec(m.w_forget, step.z);
    step.go = matvec(m.w_output, step.z);
    step.gc = matvec(m.w_cell, step.z);
    step.c.resize(m.hidden);
    step.tanh_c.resize(m.hidden);
    for (int j = 0; j < m.hidden; ++j) {
      step.gi[j] = sigmoid(step.gi[j] + m.b_input[j]);
      step.gf[j] = sigmoid(step.gf[j] + m.b_forget[j]);
      step.go[j] = sigmoid(step.go[j] + m.b_output[j]);
      step.gc[j] = std::tanh(step.gc[j] + m.b_cell[j]);
      step.c[j] = step.gf[j] * step.c_prev[j] + step.gi[j] * step.gc[j];
      step.tanh_c[j] = std::tanh(step.c[j]);
      h[j] = step.go[j] * step.tanh_c[j];
      c[j] = step.c[j];
    }
    cache.steps.push_back(std::move(step));
  }

  cache.h_last = h;
  cache.a_fc = matvec(m.w_fc, h);
  cache.r.resize(m.fc);
  for (int j = 0; j < m.fc; ++j) {
    cache.a_fc[j] += m.b_fc[j];
    cache.r[j] = std::max(0.0, cache.a_fc[j]);
  }
  const std::vector<double> logits = matvec(m.w_out, cache.r);
  cache.logits = {logits[0] + m.b_out[0], logits[1] + m.b_out[1]};
  const double mx = std::max(cache.logits[0], cache.logits[1]);
  const double e0 = std::exp(cache.logits[0] - mx);
  const double e1 = std::exp(cache.logits[1] - mx);
  cache.prob = {e0 / (e0 + e1), e1 / (e0 + e1)};
  return cache;
}

LstmGradients zero_gradients(const LstmModel& m) {
  LstmGradients g;
  g.w_input = Mat(m.hidden, m.input + m.hidden);
  g.w_forget = Mat(m.hidden, m.input + m.hidden);
  g.w_output = Mat(m.hidden, m.input + m.hidden);
  g.w_cell = Mat(m.hidden, m.input + m.hidden);
  g.b_input.assign(m.hidden, 0.0);
  g.b_forget.assign(m.hidden, 0.0);
  g.b_output.assign(m.hidden, 0.0);
  g.b_cell.assign(m.hidden, 0.0);
  g.w_fc = Mat(m.fc, m.hidden);
  g.b_fc.assign(m.fc, 0.0);
  g.w_out = Mat(2, m.fc);
  g.b_out.assign(2, 0.0);
  return g;
}

// Flat views over all parameters (or their gradients) in a fixed order.
template <typename ModelLike>
std::vector<std::pair<double*, std::size_t>> views(ModelLike& m) {
  return {
      {m.w_input.a.data(), m.w_input.a.size()},
      {m.b_input.data(), m.b_input.size()},
      {m.w_forget.a.data(), m.w_forget.a.size()},
      {m.b_forget.data(), m.b_forget.size()},
      {m.w_output.a.data(), m.w_output.a.size()},
      {m.b_output.data(), m.b_output.size()},
      {m.w_cell.a.data(), m.w_cell.a.size()},
      {m.b_cell.data(), m.b_cell.size()},
      {m.w_fc.a.data(), m.w_fc.a.size()},
      {m.b_fc.data(), m.b_fc.size()},
      {m.w_out.a.data(), m.w_out.a.size()},
      {m.b_out.data(), m.b_out.size()},
  };
}

void accumulate_window(const LstmModel& m, const Window& window, LstmGradients& g,
                       double weight) {
  const ForwardCache cache = forward_pass(m, window);
  const int target = window.label.is_jam() ? 1 : 0;

  const std::array<double, 2> dlogits = {cache.prob[0] - (target == 0 ? 1.0 : 0.0),
                                         cache.prob[1] - (target == 1 ? 1.0 : 0.0)};
  std::vector<double> dlog = {dlogits[0] * weight, dlogits[1] * weight};
  add_outer(g.w_out, dlog, cache.r);
  g.b_out[0] += dlog[0];
  g.b_out[1] += dlog[1];

  std::vector<double> dr = matvec_t(m.w_out, dlog);
  for (int j = 0; j < m.fc; ++j) {
    if (cache.a_fc[j] <= 0.0) dr[j] = 0.0;
  }
  add_outer(g.w_fc, dr, cache.h_last);
  axpy(g.b_fc, dr, 1.0);

  std::vector<double> dh = matvec_t(m.w_fc, dr);
  std::vector<double> dc_next(m.hidden, 0.0);

  for (int t = static_cast<int>(cache.steps.size()) - 1; t >= 0; --t) {
    const StepCache& s = cache.steps[t];
    std::vector<double> da_i(m.hidden), da_f(m.hidden), da_o(m.hidden), da_c(m.hidden);
    for (int j = 0; j < m.hidden; ++j) {
      const double dc = dh[j] * s.go[j] * (1.0 - s.tanh_c[j] * s.tanh_c[j]) + dc_next[j];
      const double d_o = dh[j] * s.tanh_c[j];
      const double d_i = dc * s.gc[j];
      const double d_g = dc * s.gi[j];
      const double d_f = dc * s.c_prev[j];
      da_i[j] = d_i * s.gi[j] * (1.0 - s.gi[j]);
      da_f[j] = d_f * s.gf[j] * (1.0 - s.gf[j]);
      da_o[j] = d_o * s.go[j] * (1.0 - s.go[j]);
      da_c[j] = d_g * (1.0 - s.gc[j] * s.gc[j]);
      dc_next[j] = dc * s.gf[j];
    }
    add_outer(g.w_input, da_i, s.z);
    add_outer(g.w_forget, da_f, s.z);
    add_outer(g.w_output, da_o, s.z);
    add_outer(g.w_cell, da_c, s.z);
    axpy(g.b_input, da_i, 1.0);
    axpy(g.b_forget, da_f, 1.0);
    axpy(g.b_output, da_o, 1.0);
    axpy(g.b_cell, da_c, 1.0);

    std::vector<double> dz(m.input + m.hidden, 0.0);
    const std::vector<double> t_i = matvec_t(m.w_input, da_i);
    const std::vector<double> t_f = matvec_t(m.w_forget, da_f);
    const std::vector<double> t_o = matvec_t(m.w_output, da_o);
    const std::vector<double> t_c = matvec_t(m.w_cell, da_c);
    for (std::size_t j = 0; j < dz.size(); ++j) dz[j] = t_i[j] + t_f[j] + t_o[j] + t_c[j];
    for (int j = 0; j < m.hidden; ++j) dh[j] = dz[m.input + j];
  }
}

}  // namespace

LstmModel lstm_init(const LstmParams& params, int input) {
  if (params.hidden < 1 || params.fc < 1) {
    throw ValidationError("lstm_init: hidden and fc sizes must be >= 1");
  }
  LstmModel m;
  m.input = input;
  m.hidden = params.hidden;
  m.fc = params.fc;
  m.params = params;

  const int zdim = m.input + m.hidden;
  m.w_input = Mat(m.hidden, zdim);
  m.w_forget = Mat(m.hidden, zdim);
  m.w_output = Mat(m.hidden, zdim);
  m.w_cell = Mat(m.hidden, zdim);
  m.b_input.assign(m.hidden, 0.0);
  m.b_forget.assign(m.hidden, 1.0);  // forget-gate bias +1
  m.b_output.assign(m.hidden, 0.0);
  m.b_cell.assign(m.hidden, 0.0);
  m.w_fc = Mat(m.fc, m.hidden);
  m.b_fc.assign(m.fc, 0.0);
  m.w_out = Mat(2, m.fc);
  m.b_out.assign(2, 0.0);

  Rng rng(params.seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(m.hidden));
  for (Mat* w : {&m.w_input, &m.w_forget, &m.w_output, &m.w_cell, &m.w_fc, &m.w_out}) {
    for (double& v : w->a) v = (2.0 * rng.uniform() - 1.0) * bound;
  }
  return m;
}

std::array<double, 2> lstm_forward(const LstmModel& model, const Window& window) {
  check_window(model, window);
  return forward_pass(model, window).prob;
}

double lstm_loss(const LstmModel& model, const std::vector<Window>& batch) {
  if (batch.empty()) throw ValidationError("lstm_loss: empty batch");
  double loss = 0.0;
  for (const auto& w : batch) {
    check_window(model, w);
    const ForwardCache cache = forward_pass(model, w);
    const int target = w.label.is_jam() ? 1 : 0;
    const double mx = std::max(cache.logits[0], cache.logits[1]);
    const double lse =
        mx + std::log(std::exp(cache.logits[0] - mx) + std::exp(cache.logits[1] - mx));
    loss += lse - cache.logits[target];
  }
  return loss / static_cast<double>(batch.size());
}

LstmGradients lstm_gradients(const LstmModel& model, const std::vector<Window>& batch) {
  if (batch.empty()) throw ValidationError("lstm_gradients: empty batch");
  LstmGradients g = zero_gradients(model);
  const double weight = 1.0 / static_cast<double>(batch.size());
  for (const auto& w : batch) {
    check_window(model, w);
    accumulate_window(model, w, g, weight);
  }
  return g;
}

LstmModel lstm_train(const std::vector<Window>& windows, const LstmParams& params) {
  if (windows.empty()) throw ValidationError("lstm_train: no windows");
  bool pos = false, neg = false;
  for (const auto& w : windows) (w.label.is_jam() ? pos : neg) = true;
  if (!pos || !neg) throw ValidationError("lstm_train: both classes must be present");

  LstmModel model = lstm_init(params, static_cast<int>(windows[0].rows[0].size()));
  if (params.epochs <= 0) return model;

  Rng rng(derive_seed(params.seed, 0xb47c));
  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t batch_size =
      params.batch > 0 ? static_cast<std::size_t>(params.batch) : windows.size();

  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      std::vector<Window> batch;
      for (std::size_t i = start; i < std::min(start + batch_size, order.size()); ++i) {
        batch.push_back(windows[order[i]]);
      }
      LstmGradients g = lstm_gradients(model, batch);

      double norm_sq = 0.0;
      for (const auto& [ptr, len] : views(g)) {
        for (std::size_t i = 0; i < len; ++i) norm_sq += ptr[i] * ptr[i];
      }
      double scale = params.learning_rate;
      const double norm = std::sqrt(norm_sq);
      if (params.clip_norm > 0.0 && norm > params.clip_norm) {
        scale *= params.clip_norm / norm;
      }

      auto mv = views(model);
      auto gv = views(g);
      for (std::size_t v = 0; v < mv.size(); ++v) {
        for (std::size_t i = 0; i < mv[v].second; ++i) mv[v].first[i] -= scale * gv[v].first[i];
      }
    }
    const double loss = lstm_loss(model, windows);
    if (!std::isfinite(loss)) {
      throw TrainingError("lstm_train: non-finite loss at epoch " + std::to_string(epoch));
    }
    model.loss_history.push_back(loss);
  }
  return model;
}

double gradient_check(const LstmModel& model, const std::vector<Window>& batch,
                      std::size_t subsample, std::uint64_t seed) {
  if (batch.empty()) throw ValidationError("gradient_check: empty batch");
  const LstmGradients analytic = lstm_gradients(model, batch);

  LstmModel probe = model;
  auto pv = views(probe);
  LstmGradients analytic_copy = analytic;
  auto av = views(analytic_copy);

  std::size_t total = 0;
  for (const auto& [ptr, len] : pv) total += len;

  Rng rng(seed);
  const std::size_t n_checks = std::min(subsample, total);
  std::vector<std::size_t> flat(total);
  std::iota(flat.begin(), flat.end(), 0);
  rng.shuffle(flat);

  const double h = 1e-5;
  double max_rel = 0.0;
  for (std::size_t pick = 0; pick < n_checks; ++pick) {
    std::size_t flat_idx = flat[pick];
    double* param = nullptr;
    double analytic_val = 0.0;
    std::size_t offset = flat_idx;
    for (std::size_t v = 0; v < pv.size(); ++v) {
      if (offset < pv[v].second) {
        param = pv[v].first + offset;
        analytic_val = av[v].first[offset];
        break;
      }
      offset -= pv[v].second;
    }

    const double saved = *param;
    *param = saved + h;
    const double plus = lstm_loss(probe, batch);
    *param = saved - h;
    const double minus = lstm_loss(probe, batch);
    *param = saved;

    const double numeric = (plus - minus) / (2.0 * h);
    const double rel = std::abs(analytic_val - numeric) /
                       std::max({std::abs(analytic_val), std::abs(numeric), 1e-8});
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

}  // namespace jamdet

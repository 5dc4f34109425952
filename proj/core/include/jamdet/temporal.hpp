#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "jamdet/mat.hpp"
#include "jamdet/telemetry.hpp"

namespace jamdet {

struct LstmParams {
  int hidden = 16;  // desk-scale default; the reference setup used 100/100
  int fc = 16;
  double learning_rate = 0.05;
  int epochs = 100;
  int batch = 16;
  double clip_norm = 5.0;
  std::uint64_t seed = 0;
};

/// Single-hidden-layer LSTM over k-step windows: sigmoid input/forget/output
/// gates, tanh cell candidate, final hidden state through a ReLU
/// fully-connected layer into a 2-way softmax {H0, H1}.
struct LstmModel {
  int input = static_cast<int>(kFeatureCount);
  int hidden = 0;
  int fc = 0;

  // Gate weights are hidden x (input + hidden), acting on [x_t; h_{t-1}].
  Mat w_input, w_forget, w_output, w_cell;
  std::vector<double> b_input, b_forget, b_output, b_cell;
  Mat w_fc;
  std::vector<double> b_fc;
  Mat w_out;  // 2 x fc
  std::vector<double> b_out;

  // Optional frozen input scaling (min-max with clipping) so persisted
  // models are self-contained on raw telemetry. Empty = inputs are already
  // normalized by the caller.
  std::vector<double> feat_min, feat_max;

  LstmParams params;
  std::vector<double> loss_history;
};

/// Uniform(-1/sqrt(H), 1/sqrt(H)) init with forget-gate bias +1.
LstmModel lstm_init(const LstmParams& params, int input = static_cast<int>(kFeatureCount));

/// Probability pair (p_clean, p_jam), summing to 1.
std::array<double, 2> lstm_forward(const LstmModel& model, const Window& window);

/// Flat parameter-gradient view used by training and the gradient check.
struct LstmGradients {
  Mat w_input, w_forget, w_output, w_cell;
  std::vector<double> b_input, b_forget, b_output, b_cell;
  Mat w_fc;
  std::vector<double> b_fc;
  Mat w_out;
  std::vector<double> b_out;
};

/// Mean cross-entropy over the batch; windows label jam as class 1.
double lstm_loss(const LstmModel& model, const std::vector<Window>& batch);

/// Analytic BPTT gradients of the mean batch cross-entropy.
LstmGradients lstm_gradients(const LstmModel& model, const std::vector<Window>& batch);

/// Mini-batch gradient descent with gradient-norm clipping. Deterministic
/// under the seed; throws TrainingError naming the epoch if the loss goes
/// non-finite.
LstmModel lstm_train(const std::vector<Window>& windows, const LstmParams& params);

/// Max relative error between analytic BPTT gradients and central finite
/// differences (step 1e-5) over a seeded subsample of >= 200 parameters.
/// Relative error uses |a - n| / max(|a|, |n|, 1e-8).
double gradient_check(const LstmModel& model, const std::vector<Window>& batch,
                      std::size_t subsample = 200, std::uint64_t seed = 1);

}  // namespace jamdet

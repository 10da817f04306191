#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "plateprice/numerics.hpp"
#include "plateprice/plate_data.hpp"

namespace plateprice {

struct ModelConfig {
  int embed_dim = 24;
  int recurrent_layers = 3;
  int fc_layers = 1;  // includes the final linear output layer
  int hidden_units = 128;
  double dropout_rate = 0.05;
  int seq_len = kSeqLen;
  int vocab_size = kVocabSize;

  void validate() const;  // throws DataError
  /// Configuration key in hidden-embed-rec-fc-dropout form, e.g. "128-24-3-1-.05".
  std::string id() const;

  bool operator==(const ModelConfig&) const = default;
};

enum class Mode { Train, Infer };

/// Cache of one batch-norm group, everything backward needs.
struct BnCache {
  Matrix xhat;     // batch x units, standardized input
  Matrix inv_std;  // 1 x units, 1/sqrt(var + eps)
  Matrix mean;     // 1 x units, batch mean
  Matrix var;      // 1 x units, batch variance (1/N)
};

/// Standardizes x per unit over the batch, then applies scale and shift.
/// Train mode uses batch statistics (batch >= 2), updates the running
/// statistics in place with `momentum`, and fills `cache` when given. Infer
/// mode standardizes with the running statistics.
Matrix batchnorm_forward(const Matrix& x, const Matrix& scale,
                         const Matrix& shift, Mode mode, Matrix& running_mean,
                         Matrix& running_var, double momentum, double epsilon,
                         BnCache* cache = nullptr);

/// Gradient through train-mode batch norm, including the batch statistics.
/// Accumulates into d_scale / d_shift and returns the input gradient.
Matrix batchnorm_backward(const Matrix& d_out, const Matrix& scale,
                          const BnCache& cache, Matrix& d_scale,
                          Matrix& d_shift);

/// All learned tensors. Gradients and Adagrad accumulators reuse this shape.
struct NetworkParams {
  struct RecurrentLayer {
    Matrix w_fw;      // hidden x in, input weights, left-to-right scan
    Matrix u_fw;      // hidden x hidden, recurrent weights
    Matrix w_bw;      // right-to-left scan
    Matrix u_bw;
    Matrix bn_scale;  // 1 x hidden, shared across directions and time steps
    Matrix bn_shift;  // 1 x hidden
  };
  struct Dense {
    Matrix w;  // out x in
    Matrix b;  // 1 x out
  };

  ModelConfig config;
  Matrix embedding;  // vocab x embed
  std::vector<RecurrentLayer> recurrent;
  std::vector<Dense> fc_hidden;  // fc_layers - 1 entries, ReLU layers
  Dense output;                  // final linear layer, one scalar per sample

  /// Visits every tensor in canonical order with a stable name.
  template <typename Fn>
  void for_each_tensor(Fn&& fn) {
    fn("embedding", embedding);
    for (std::size_t l = 0; l < recurrent.size(); ++l) {
      auto& r = recurrent[l];
      const std::string p = "rec" + std::to_string(l + 1);
      fn(p + ".w_fw", r.w_fw);
      fn(p + ".u_fw", r.u_fw);
      fn(p + ".w_bw", r.w_bw);
      fn(p + ".u_bw", r.u_bw);
      fn(p + ".bn_scale", r.bn_scale);
      fn(p + ".bn_shift", r.bn_shift);
    }
    for (std::size_t l = 0; l < fc_hidden.size(); ++l) {
      const std::string p = "fc" + std::to_string(l + 1);
      fn(p + ".w", fc_hidden[l].w);
      fn(p + ".b", fc_hidden[l].b);
    }
    fn("out.w", output.w);
    fn("out.b", output.b);
  }
  template <typename Fn>
  void for_each_tensor(Fn&& fn) const {
    const_cast<NetworkParams*>(this)->for_each_tensor(
        [&](const std::string& name, Matrix& m) {
          fn(name, static_cast<const Matrix&>(m));
        });
  }

  std::vector<Matrix*> tensor_ptrs();
  std::vector<std::string> tensor_names() const;
};

/// Glorot-uniform weights, uniform(-0.1, 0.1) embedding, scale 1 / shift 0
/// batch norm, zero biases. Deterministic for a given rng.
NetworkParams init_params(const ModelConfig& config, SeededRng& rng);

/// Zero tensors in the shape of `like` (gradients, accumulators).
NetworkParams zeros_like(const NetworkParams& like);

/// Running statistics, one group per (layer, direction, time step). Scale
/// and shift live in NetworkParams; statistics alone define inference.
struct BatchNormState {
  double momentum = 0.9;
  double epsilon = 1e-4;
  struct Group {
    Matrix mean;  // 1 x hidden
    Matrix var;   // 1 x hidden, starts at 1
  };
  // layers[l][dir][t], dir 0 = left-to-right
  std::vector<std::array<std::vector<Group>, 2>> layers;

  static BatchNormState init(const ModelConfig& config);
};

/// Dropout multiplier masks, entries 0 or 1/(1-p) (inverted dropout). Empty
/// matrices mean "no dropout". Masks are drawn per batch; tests reuse them
/// to make a stochastic forward repeatable.
struct DropoutMasks {
  Matrix embed;               // (seq*batch) x embed
  std::vector<Matrix> layer;  // per recurrent layer, (seq*batch) x 2*hidden
  std::vector<Matrix> fc;     // per hidden fc layer, batch x hidden
};

DropoutMasks draw_dropout_masks(const ModelConfig& config, std::size_t batch,
                                SeededRng& rng);

/// Everything backward needs from a train-mode forward. Stacked matrices
/// use row blocks of `batch` rows per time step, step-major.
struct ForwardCache {
  std::vector<TokenSeq> tokens;
  DropoutMasks masks;
  Matrix embedded;  // (seq*batch) x embed, after dropout
  struct StepState {
    BnCache bn;
    Matrix h;  // batch x hidden, post-ReLU state
  };
  struct Layer {
    std::array<std::vector<StepState>, 2> dir;
    Matrix dropped;  // (seq*batch) x 2*hidden, layer output after dropout
  };
  std::vector<Layer> layers;
  Matrix summed;                  // batch x 2*hidden, time-step sum
  std::vector<Matrix> fc_inputs;  // [0] = summed, then post-dropout activations
  std::vector<Matrix> fc_act;     // post-ReLU, pre-dropout, per hidden fc
};

struct ForwardResult {
  std::vector<double> predictions;  // one log price per sample
  ForwardCache cache;               // filled in Train mode only
};

/// Full forward pass. Train mode computes per-step batch statistics, applies
/// dropout (drawing masks from rng when dropout_rate > 0) and returns a
/// cache; Infer mode uses running statistics and no dropout.
ForwardResult forward(const NetworkParams& params, BatchNormState& bn_state,
                      const std::vector<TokenSeq>& batch, Mode mode,
                      SeededRng* rng = nullptr);

/// Train-mode forward with caller-supplied masks.
ForwardResult forward_with_masks(const NetworkParams& params,
                                 BatchNormState& bn_state,
                                 const std::vector<TokenSeq>& batch,
                                 const DropoutMasks& masks);

/// Inference without cache allocation; bn_state is read-only.
std::vector<double> predict(const NetworkParams& params,
                            const BatchNormState& bn_state,
                            const std::vector<TokenSeq>& batch);

/// Mean squared error (1/N) sum (y - t)^2.
double mse_loss(const std::vector<double>& predictions,
                const std::vector<double>& targets);

/// Reverse-mode gradients of the mean squared error over the cached batch,
/// with respect to every tensor in NetworkParams.
NetworkParams backward(const NetworkParams& params, const ForwardCache& cache,
                       const std::vector<double>& targets);

struct AdagradState {
  double learning_rate = 0.001;
  double epsilon = 1e-8;
  NetworkParams accum;  // accumulated squared gradients

  static AdagradState init(const NetworkParams& params, double lr = 0.001);
};

/// accum += g^2; param -= lr * g / (sqrt(accum) + eps), elementwise.
void adagrad_step(NetworkParams& params, const NetworkParams& grads,
                  AdagradState& state);

/// Versioned little-endian binary checkpoint; round-trips bitwise.
void save_params(const NetworkParams& params, const BatchNormState& bn_state,
                 const std::string& path);

struct Checkpoint {
  NetworkParams params;
  BatchNormState bn_state;
};

Checkpoint load_params(const std::string& path);

}  // namespace plateprice

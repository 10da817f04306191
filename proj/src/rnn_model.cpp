#include "plateprice/rnn_model.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace plateprice {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format is little-endian");

void ModelConfig::validate() const {
  if (embed_dim < 1 || recurrent_layers < 1 || fc_layers < 1 ||
      hidden_units < 1 || seq_len < 1 || vocab_size < 2) {
    throw DataError("model config: all counts must be >= 1");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw DataError("model config: dropout_rate must be in [0, 1)");
  }
}

std::string ModelConfig::id() const {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", dropout_rate);
  std::string drop = buf;
  if (drop.rfind("0.", 0) == 0) drop.erase(0, 1);  // 0.05 -> .05, as in "1024-24-7-1-.05"
  return std::to_string(hidden_units) + "-" + std::to_string(embed_dim) + "-" +
         std::to_string(recurrent_layers) + "-" + std::to_string(fc_layers) +
         "-" + drop;
}

// ---------------------------------------------------------------------------
// batch norm

Matrix batchnorm_forward(const Matrix& x, const Matrix& scale,
                         const Matrix& shift, Mode mode, Matrix& running_mean,
                         Matrix& running_var, double momentum, double epsilon,
                         BnCache* cache) {
  const std::size_t b = x.rows, h = x.cols;
  if (scale.cols != h || shift.cols != h || running_mean.cols != h ||
      running_var.cols != h) {
    throw DataError("batchnorm: scale/shift/stats width mismatch");
  }
  Matrix out(b, h);
  if (mode == Mode::Infer) {
    for (std::size_t j = 0; j < h; ++j) {
      const double inv = 1.0 / std::sqrt(running_var(0, j) + epsilon);
      const double m = running_mean(0, j), g = scale(0, j), s = shift(0, j);
      for (std::size_t i = 0; i < b; ++i) {
        out(i, j) = g * (x(i, j) - m) * inv + s;
      }
    }
    return out;
  }
  if (b < 2) {
    throw DataError("batchnorm: train mode needs a batch of at least 2");
  }
  Matrix mean(1, h), var(1, h), inv_std(1, h);
  for (std::size_t j = 0; j < h; ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < b; ++i) m += x(i, j);
    m /= static_cast<double>(b);
    double v = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
      const double d = x(i, j) - m;
      v += d * d;
    }
    v /= static_cast<double>(b);
    mean(0, j) = m;
    var(0, j) = v;
    inv_std(0, j) = 1.0 / std::sqrt(v + epsilon);
  }
  Matrix xhat(b, h);
  for (std::size_t j = 0; j < h; ++j) {
    const double m = mean(0, j), inv = inv_std(0, j);
    const double g = scale(0, j), s = shift(0, j);
    for (std::size_t i = 0; i < b; ++i) {
      const double z = (x(i, j) - m) * inv;
      xhat(i, j) = z;
      out(i, j) = g * z + s;
    }
  }
  for (std::size_t j = 0; j < h; ++j) {
    running_mean(0, j) = momentum * running_mean(0, j) + (1.0 - momentum) * mean(0, j);
    running_var(0, j) = momentum * running_var(0, j) + (1.0 - momentum) * var(0, j);
  }
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
    cache->mean = std::move(mean);
    cache->var = std::move(var);
  }
  return out;
}

Matrix batchnorm_backward(const Matrix& d_out, const Matrix& scale,
                          const BnCache& cache, Matrix& d_scale,
                          Matrix& d_shift) {
  const std::size_t b = d_out.rows, h = d_out.cols;
  Matrix dz(b, h);
  const double inv_b = 1.0 / static_cast<double>(b);
  for (std::size_t j = 0; j < h; ++j) {
    double sum_d = 0.0, sum_dx = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
      sum_d += d_out(i, j);
      sum_dx += d_out(i, j) * cache.xhat(i, j);
    }
    d_shift(0, j) += sum_d;
    d_scale(0, j) += sum_dx;
    const double g = scale(0, j), inv = cache.inv_std(0, j);
    // dz = inv_std/B * (B*dxhat - sum(dxhat) - xhat * sum(dxhat*xhat)),
    // with dxhat = g * d_out; gradients of the batch statistics included.
    for (std::size_t i = 0; i < b; ++i) {
      const double dxhat = g * d_out(i, j);
      dz(i, j) = inv * inv_b *
                 (static_cast<double>(b) * dxhat - g * sum_d -
                  cache.xhat(i, j) * g * sum_dx);
    }
  }
  return dz;
}

// ---------------------------------------------------------------------------
// parameters

std::vector<Matrix*> NetworkParams::tensor_ptrs() {
  std::vector<Matrix*> out;
  for_each_tensor([&](const std::string&, Matrix& m) { out.push_back(&m); });
  return out;
}

std::vector<std::string> NetworkParams::tensor_names() const {
  std::vector<std::string> out;
  for_each_tensor([&](const std::string& n, const Matrix&) { out.push_back(n); });
  return out;
}

namespace {

Matrix glorot_uniform(std::size_t rows, std::size_t cols, SeededRng& rng) {
  const double r = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (double& v : m.data) v = rng.uniform(-r, r);
  return m;
}

std::size_t rec_input_width(const ModelConfig& c, std::size_t layer) {
  return layer == 0 ? static_cast<std::size_t>(c.embed_dim)
                    : 2 * static_cast<std::size_t>(c.hidden_units);
}

std::size_t fc_input_width(const ModelConfig& c, std::size_t layer) {
  return layer == 0 ? 2 * static_cast<std::size_t>(c.hidden_units)
                    : static_cast<std::size_t>(c.hidden_units);
}

}  // namespace

NetworkParams init_params(const ModelConfig& config, SeededRng& rng) {
  config.validate();
  NetworkParams p;
  p.config = config;
  const auto h = static_cast<std::size_t>(config.hidden_units);
  p.embedding = Matrix(config.vocab_size, config.embed_dim);
  for (double& v : p.embedding.data) v = rng.uniform(-0.1, 0.1);
  for (int l = 0; l < config.recurrent_layers; ++l) {
    NetworkParams::RecurrentLayer rl;
    const std::size_t in = rec_input_width(config, l);
    rl.w_fw = glorot_uniform(h, in, rng);
    rl.u_fw = glorot_uniform(h, h, rng);
    rl.w_bw = glorot_uniform(h, in, rng);
    rl.u_bw = glorot_uniform(h, h, rng);
    rl.bn_scale = Matrix(1, h, 1.0);
    rl.bn_shift = Matrix(1, h, 0.0);
    p.recurrent.push_back(std::move(rl));
  }
  for (int l = 0; l + 1 < config.fc_layers; ++l) {
    NetworkParams::Dense d;
    d.w = glorot_uniform(h, fc_input_width(config, l), rng);
    d.b = Matrix(1, h, 0.0);
    p.fc_hidden.push_back(std::move(d));
  }
  p.output.w = glorot_uniform(1, fc_input_width(config, p.fc_hidden.size()), rng);
  p.output.b = Matrix(1, 1, 0.0);
  return p;
}

NetworkParams zeros_like(const NetworkParams& like) {
  NetworkParams z;
  z.config = like.config;
  z.embedding = Matrix(like.embedding.rows, like.embedding.cols);
  for (const auto& rl : like.recurrent) {
    NetworkParams::RecurrentLayer g;
    g.w_fw = Matrix(rl.w_fw.rows, rl.w_fw.cols);
    g.u_fw = Matrix(rl.u_fw.rows, rl.u_fw.cols);
    g.w_bw = Matrix(rl.w_bw.rows, rl.w_bw.cols);
    g.u_bw = Matrix(rl.u_bw.rows, rl.u_bw.cols);
    g.bn_scale = Matrix(1, rl.bn_scale.cols);
    g.bn_shift = Matrix(1, rl.bn_shift.cols);
    z.recurrent.push_back(std::move(g));
  }
  for (const auto& d : like.fc_hidden) {
    z.fc_hidden.push_back({Matrix(d.w.rows, d.w.cols), Matrix(d.b.rows, d.b.cols)});
  }
  z.output = {Matrix(like.output.w.rows, like.output.w.cols),
              Matrix(like.output.b.rows, like.output.b.cols)};
  return z;
}

BatchNormState BatchNormState::init(const ModelConfig& config) {
  BatchNormState s;
  const auto h = static_cast<std::size_t>(config.hidden_units);
  s.layers.resize(config.recurrent_layers);
  for (auto& layer : s.layers) {
    for (auto& dir : layer) {
      dir.resize(config.seq_len);
      for (auto& g : dir) {
        g.mean = Matrix(1, h, 0.0);
        g.var = Matrix(1, h, 1.0);
      }
    }
  }
  return s;
}

DropoutMasks draw_dropout_masks(const ModelConfig& config, std::size_t batch,
                                SeededRng& rng) {
  DropoutMasks masks;
  const double p = config.dropout_rate;
  if (p <= 0.0) return masks;
  const double keep_scale = 1.0 / (1.0 - p);
  auto draw = [&](std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    for (double& v : m.data) v = rng.uniform() >= p ? keep_scale : 0.0;
    return m;
  };
  const auto t = static_cast<std::size_t>(config.seq_len);
  masks.embed = draw(t * batch, config.embed_dim);
  for (int l = 0; l < config.recurrent_layers; ++l) {
    masks.layer.push_back(draw(t * batch, 2 * config.hidden_units));
  }
  for (int l = 0; l + 1 < config.fc_layers; ++l) {
    masks.fc.push_back(draw(batch, config.hidden_units));
  }
  return masks;
}

// ---------------------------------------------------------------------------
// forward

namespace {

void apply_mask(Matrix& m, const Matrix& mask) {
  if (mask.size() == 0) return;
  emap(m) = emap(m).cwiseProduct(emap(mask));
}

void relu_inplace(Matrix& m) { emap(m) = emap(m).cwiseMax(0.0); }

// One direction of one recurrent layer over the whole batch. `w_term` holds
// the precomputed input product, step-major row blocks of `b` rows. Writes
// post-ReLU states (and, in train mode, BN caches) into `steps`.
void scan_direction(const Matrix& w_term, const Matrix& u,
                    const Matrix& bn_scale, const Matrix& bn_shift, Mode mode,
                    std::vector<BatchNormState::Group>& stats, double momentum,
                    double epsilon, bool left_to_right, std::size_t seq_len,
                    std::size_t b, std::vector<ForwardCache::StepState>* steps,
                    std::vector<Matrix>& h_out) {
  const std::size_t h = u.rows;
  h_out.assign(seq_len, Matrix());
  const Matrix* h_prev = nullptr;
  for (std::size_t k = 0; k < seq_len; ++k) {
    const std::size_t t = left_to_right ? k : seq_len - 1 - k;
    Matrix z(b, h);
    emap(z) = emap(w_term).middleRows(t * b, b);
    if (h_prev) {
      emap(z).noalias() += emap(*h_prev) * emap(u).transpose();
    }
    BnCache* cache = steps ? &(*steps)[t].bn : nullptr;
    Matrix y = batchnorm_forward(z, bn_scale, bn_shift, mode, stats[t].mean,
                                 stats[t].var, momentum, epsilon, cache);
    relu_inplace(y);
    h_out[t] = std::move(y);
    if (steps) (*steps)[t].h = h_out[t];
    h_prev = &h_out[t];
  }
}

ForwardResult run_forward(const NetworkParams& params,
                          BatchNormState& bn_state,
                          const std::vector<TokenSeq>& batch, Mode mode,
                          const DropoutMasks* masks) {
  const ModelConfig& c = params.config;
  const std::size_t b = batch.size();
  const auto t_len = static_cast<std::size_t>(c.seq_len);
  const auto h = static_cast<std::size_t>(c.hidden_units);
  const auto e = static_cast<std::size_t>(c.embed_dim);
  if (b == 0) throw DataError("forward: empty batch");
  const bool train = mode == Mode::Train;

  ForwardResult res;
  ForwardCache& cache = res.cache;
  if (train) {
    cache.tokens = batch;
    if (masks) cache.masks = *masks;
  }

  // embedding lookup, step-major stacking: row t*b + i
  Matrix embedded(t_len * b, e);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t t = 0; t < t_len; ++t) {
      const int id = batch[i].ids[t];
      if (id < 0 || id >= c.vocab_size) {
        throw DataError("forward: token id " + std::to_string(id) + " out of range");
      }
      std::memcpy(embedded.data.data() + (t * b + i) * e,
                  params.embedding.data.data() + static_cast<std::size_t>(id) * e,
                  e * sizeof(double));
    }
  }
  if (train && masks) apply_mask(embedded, masks->embed);

  const Matrix* input = &embedded;
  Matrix dropped;  // current layer output
  cache.layers.reserve(params.recurrent.size());
  for (std::size_t l = 0; l < params.recurrent.size(); ++l) {
    const auto& rl = params.recurrent[l];
    Matrix w_term_fw(t_len * b, h), w_term_bw(t_len * b, h);
    emap(w_term_fw).noalias() = emap(*input) * emap(rl.w_fw).transpose();
    emap(w_term_bw).noalias() = emap(*input) * emap(rl.w_bw).transpose();

    ForwardCache::Layer* lc = nullptr;
    if (train) {
      cache.layers.emplace_back();
      lc = &cache.layers.back();
      lc->dir[0].resize(t_len);
      lc->dir[1].resize(t_len);
    }
    std::vector<Matrix> h_fw, h_bw;
    scan_direction(w_term_fw, rl.u_fw, rl.bn_scale, rl.bn_shift, mode,
                   bn_state.layers[l][0], bn_state.momentum, bn_state.epsilon,
                   true, t_len, b, lc ? &lc->dir[0] : nullptr, h_fw);
    scan_direction(w_term_bw, rl.u_bw, rl.bn_scale, rl.bn_shift, mode,
                   bn_state.layers[l][1], bn_state.momentum, bn_state.epsilon,
                   false, t_len, b, lc ? &lc->dir[1] : nullptr, h_bw);

    dropped = Matrix(t_len * b, 2 * h);
    for (std::size_t t = 0; t < t_len; ++t) {
      auto block = emap(dropped).middleRows(t * b, b);
      block.leftCols(h) = emap(h_fw[t]);
      block.rightCols(h) = emap(h_bw[t]);
    }
    if (train && masks) apply_mask(dropped, masks->layer[l]);
    if (train) {
      lc->dropped = std::move(dropped);
      input = &lc->dropped;
    } else {
      embedded = std::move(dropped);  // reuse the storage slot between layers
      input = &embedded;
    }
  }

  // sum the final recurrent layer's outputs over all time steps
  Matrix summed(b, 2 * h);
  for (std::size_t t = 0; t < t_len; ++t) {
    emap(summed) += emap(*input).middleRows(t * b, b);
  }

  std::vector<Matrix> fc_inputs, fc_act;
  fc_inputs.push_back(std::move(summed));
  for (std::size_t l = 0; l < params.fc_hidden.size(); ++l) {
    const auto& d = params.fc_hidden[l];
    Matrix act(b, d.w.rows);
    emap(act).noalias() = emap(fc_inputs.back()) * emap(d.w).transpose();
    for (std::size_t i = 0; i < b; ++i) {
      for (std::size_t j = 0; j < act.cols; ++j) act(i, j) += d.b(0, j);
    }
    relu_inplace(act);
    if (train) fc_act.push_back(act);
    Matrix out = std::move(act);
    if (train && masks) apply_mask(out, masks->fc[l]);
    fc_inputs.push_back(std::move(out));
  }

  const Matrix& last = fc_inputs.back();
  res.predictions.resize(b);
  for (std::size_t i = 0; i < b; ++i) {
    double y = params.output.b(0, 0);
    for (std::size_t j = 0; j < last.cols; ++j) {
      y += params.output.w(0, j) * last(i, j);
    }
    res.predictions[i] = y;
  }

  if (train) {
    cache.summed = fc_inputs.front();
    cache.fc_inputs = std::move(fc_inputs);
    cache.fc_act = std::move(fc_act);
    cache.embedded = std::move(embedded);
  }
  return res;
}

}  // namespace

ForwardResult forward(const NetworkParams& params, BatchNormState& bn_state,
                      const std::vector<TokenSeq>& batch, Mode mode,
                      SeededRng* rng) {
  if (mode == Mode::Infer) {
    return run_forward(params, bn_state, batch, mode, nullptr);
  }
  if (params.config.dropout_rate > 0.0) {
    if (!rng) throw DataError("forward: train mode with dropout needs an rng");
    const DropoutMasks masks = draw_dropout_masks(params.config, batch.size(), *rng);
    return run_forward(params, bn_state, batch, mode, &masks);
  }
  return run_forward(params, bn_state, batch, mode, nullptr);
}

ForwardResult forward_with_masks(const NetworkParams& params,
                                 BatchNormState& bn_state,
                                 const std::vector<TokenSeq>& batch,
                                 const DropoutMasks& masks) {
  return run_forward(params, bn_state, batch, Mode::Train, &masks);
}

std::vector<double> predict(const NetworkParams& params,
                            const BatchNormState& bn_state,
                            const std::vector<TokenSeq>& batch) {
  // infer mode never writes the running statistics
  auto& mutable_state = const_cast<BatchNormState&>(bn_state);
  return run_forward(params, mutable_state, batch, Mode::Infer, nullptr).predictions;
}

double mse_loss(const std::vector<double>& predictions,
                const std::vector<double>& targets) {
  if (predictions.size() != targets.size() || predictions.empty()) {
    throw DataError("mse_loss: length mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double d = predictions[i] - targets[i];
    s += d * d;
  }
  return s / static_cast<double>(predictions.size());
}

// ---------------------------------------------------------------------------
// backward

NetworkParams backward(const NetworkParams& params, const ForwardCache& cache,
                       const std::vector<double>& targets) {
  const ModelConfig& c = params.config;
  const std::size_t b = cache.tokens.size();
  if (targets.size() != b || b == 0) {
    throw DataError("backward: cache/targets size mismatch");
  }
  const auto t_len = static_cast<std::size_t>(c.seq_len);
  const auto h = static_cast<std::size_t>(c.hidden_units);
  NetworkParams grads = zeros_like(params);

  // d(mse)/dy = 2 (y - t) / N
  const Matrix& last = cache.fc_inputs.back();
  Matrix dy(b, 1);
  {
    // recompute predictions from the cache to avoid storing them twice
    for (std::size_t i = 0; i < b; ++i) {
      double y = params.output.b(0, 0);
      for (std::size_t j = 0; j < last.cols; ++j) {
        y += params.output.w(0, j) * last(i, j);
      }
      dy(i, 0) = 2.0 * (y - targets[i]) / static_cast<double>(b);
    }
  }

  emap(grads.output.w).noalias() += emap(dy).transpose() * emap(last);
  grads.output.b(0, 0) += emap(dy).sum();
  Matrix da(b, last.cols);
  emap(da).noalias() = emap(dy) * emap(params.output.w);

  for (std::size_t l = params.fc_hidden.size(); l-- > 0;) {
    if (l < cache.masks.fc.size()) apply_mask(da, cache.masks.fc[l]);
    const Matrix& act = cache.fc_act[l];
    for (std::size_t i = 0; i < da.rows; ++i) {
      for (std::size_t j = 0; j < da.cols; ++j) {
        if (act(i, j) <= 0.0) da(i, j) = 0.0;
      }
    }
    const Matrix& in = cache.fc_inputs[l];
    emap(grads.fc_hidden[l].w).noalias() += emap(da).transpose() * emap(in);
    for (std::size_t j = 0; j < da.cols; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < da.rows; ++i) s += da(i, j);
      grads.fc_hidden[l].b(0, j) += s;
    }
    Matrix prev(b, in.cols);
    emap(prev).noalias() = emap(da) * emap(params.fc_hidden[l].w);
    da = std::move(prev);
  }

  // da is now the gradient at the time-step sum; broadcast to every step of
  // the final recurrent layer's (post-dropout) output
  Matrix dout(t_len * b, 2 * h);
  for (std::size_t t = 0; t < t_len; ++t) {
    emap(dout).middleRows(t * b, b) = emap(da);
  }

  for (std::size_t l = params.recurrent.size(); l-- > 0;) {
    const auto& rl = params.recurrent[l];
    const auto& lc = cache.layers[l];
    if (l < cache.masks.layer.size()) apply_mask(dout, cache.masks.layer[l]);

    auto& grl = grads.recurrent[l];
    Matrix dz_stack_fw(t_len * b, h), dz_stack_bw(t_len * b, h);
    for (int dir = 0; dir < 2; ++dir) {
      const bool left_to_right = dir == 0;
      const Matrix& u = left_to_right ? rl.u_fw : rl.u_bw;
      Matrix& du = left_to_right ? grl.u_fw : grl.u_bw;
      Matrix& dz_stack = left_to_right ? dz_stack_fw : dz_stack_bw;
      Matrix carry;  // gradient flowing through the recurrence, empty = zero
      for (std::size_t k = 0; k < t_len; ++k) {
        // reverse scan order: last-computed step first
        const std::size_t t = left_to_right ? t_len - 1 - k : k;
        const auto& st = lc.dir[dir][t];
        Matrix dh(b, h);
        {
          auto block = emap(dout).middleRows(t * b, b);
          if (left_to_right) {
            emap(dh) = block.leftCols(h);
          } else {
            emap(dh) = block.rightCols(h);
          }
        }
        if (carry.size() != 0) emap(dh) += emap(carry);
        for (std::size_t i = 0; i < b; ++i) {
          for (std::size_t j = 0; j < h; ++j) {
            if (st.h(i, j) <= 0.0) dh(i, j) = 0.0;
          }
        }
        Matrix dz = batchnorm_backward(dh, rl.bn_scale, st.bn, grl.bn_scale,
                                       grl.bn_shift);
        const auto neighbor =
            left_to_right ? static_cast<std::ptrdiff_t>(t) - 1
                          : static_cast<std::ptrdiff_t>(t) + 1;
        if (neighbor >= 0 && neighbor < static_cast<std::ptrdiff_t>(t_len)) {
          const Matrix& h_n = lc.dir[dir][neighbor].h;
          emap(du).noalias() += emap(dz).transpose() * emap(h_n);
          if (carry.size() == 0) carry = Matrix(b, h);
          emap(carry).noalias() = emap(dz) * emap(u);
        }
        emap(dz_stack).middleRows(t * b, b) = emap(dz);
      }
    }

    const Matrix& in = l == 0 ? cache.embedded : cache.layers[l - 1].dropped;
    emap(grl.w_fw).noalias() += emap(dz_stack_fw).transpose() * emap(in);
    emap(grl.w_bw).noalias() += emap(dz_stack_bw).transpose() * emap(in);
    Matrix din(t_len * b, in.cols);
    emap(din).noalias() = emap(dz_stack_fw) * emap(rl.w_fw);
    emap(din).noalias() += emap(dz_stack_bw) * emap(rl.w_bw);
    dout = std::move(din);
  }

  // dout is now the gradient at the post-dropout embedding
  if (cache.masks.embed.size() != 0) apply_mask(dout, cache.masks.embed);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t t = 0; t < t_len; ++t) {
      const int id = cache.tokens[i].ids[t];
      for (std::size_t j = 0; j < dout.cols; ++j) {
        grads.embedding(id, j) += dout(t * b + i, j);
      }
    }
  }
  return grads;
}

// ---------------------------------------------------------------------------
// optimizer

AdagradState AdagradState::init(const NetworkParams& params, double lr) {
  AdagradState s;
  s.learning_rate = lr;
  s.accum = zeros_like(params);
  return s;
}

void adagrad_step(NetworkParams& params, const NetworkParams& grads,
                  AdagradState& state) {
  auto p = params.tensor_ptrs();
  auto g = const_cast<NetworkParams&>(grads).tensor_ptrs();
  auto a = state.accum.tensor_ptrs();
  const auto names = params.tensor_names();
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (!p[k]->same_shape(*g[k])) {
      throw DataError("adagrad_step: gradient shape mismatch for " + names[k]);
    }
    double* pv = p[k]->data.data();
    const double* gv = g[k]->data.data();
    double* av = a[k]->data.data();
    const std::size_t n = p[k]->size();
    for (std::size_t i = 0; i < n; ++i) {
      av[i] += gv[i] * gv[i];
      const double step =
          state.learning_rate * gv[i] / (std::sqrt(av[i]) + state.epsilon);
      if (!std::isfinite(step)) {
        throw NumericError("adagrad_step: non-finite update in " + names[k]);
      }
      pv[i] -= step;
    }
  }
}

// ---------------------------------------------------------------------------
// checkpoints

namespace {

constexpr char kMagic[8] = {'L', 'P', 'R', 'N', 'N', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_f64(std::ostream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_matrix(std::ostream& out, const Matrix& m) {
  write_u32(out, static_cast<std::uint32_t>(m.rows));
  write_u32(out, static_cast<std::uint32_t>(m.cols));
  out.write(reinterpret_cast<const char*>(m.data.data()),
            static_cast<std::streamsize>(m.data.size() * sizeof(double)));
}

std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw DataError("checkpoint: truncated file");
  return v;
}
double read_f64(std::istream& in) {
  double v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!in) throw DataError("checkpoint: truncated file");
  return v;
}
void read_matrix_into(std::istream& in, Matrix& m, const std::string& name) {
  const std::uint32_t rows = read_u32(in), cols = read_u32(in);
  if (rows != m.rows || cols != m.cols) {
    throw DataError("checkpoint: tensor " + name + " is " + std::to_string(rows) +
                    "x" + std::to_string(cols) + ", config expects " +
                    std::to_string(m.rows) + "x" + std::to_string(m.cols));
  }
  in.read(reinterpret_cast<char*>(m.data.data()),
          static_cast<std::streamsize>(m.data.size() * sizeof(double)));
  if (!in) throw DataError("checkpoint: truncated file");
}

}  // namespace

void save_params(const NetworkParams& params, const BatchNormState& bn_state,
                 const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path + "'");
  out.write(kMagic, sizeof(kMagic));
  write_u32(out, kVersion);
  const ModelConfig& c = params.config;
  write_u32(out, c.embed_dim);
  write_u32(out, c.recurrent_layers);
  write_u32(out, c.fc_layers);
  write_u32(out, c.hidden_units);
  write_u32(out, c.seq_len);
  write_u32(out, c.vocab_size);
  write_f64(out, c.dropout_rate);
  write_f64(out, bn_state.momentum);
  write_f64(out, bn_state.epsilon);
  params.for_each_tensor(
      [&](const std::string&, const Matrix& m) { write_matrix(out, m); });
  for (const auto& layer : bn_state.layers) {
    for (const auto& dir : layer) {
      for (const auto& g : dir) {
        write_matrix(out, g.mean);
        write_matrix(out, g.var);
      }
    }
  }
  if (!out) throw DataError("write failed for '" + path + "'");
}

Checkpoint load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  char magic[8] = {};
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError("'" + path + "' is not a model checkpoint (bad magic bytes)");
  }
  const std::uint32_t version = read_u32(in);
  if (version != kVersion) {
    throw DataError("checkpoint version " + std::to_string(version) +
                    " unsupported, this build reads version " +
                    std::to_string(kVersion));
  }
  ModelConfig c;
  c.embed_dim = static_cast<int>(read_u32(in));
  c.recurrent_layers = static_cast<int>(read_u32(in));
  c.fc_layers = static_cast<int>(read_u32(in));
  c.hidden_units = static_cast<int>(read_u32(in));
  c.seq_len = static_cast<int>(read_u32(in));
  c.vocab_size = static_cast<int>(read_u32(in));
  c.dropout_rate = read_f64(in);
  c.validate();

  Checkpoint ckpt;
  SeededRng rng(0);  // shapes only; every value is overwritten below
  ckpt.params = init_params(c, rng);
  ckpt.bn_state = BatchNormState::init(c);
  ckpt.bn_state.momentum = read_f64(in);
  ckpt.bn_state.epsilon = read_f64(in);
  ckpt.params.for_each_tensor(
      [&](const std::string& name, Matrix& m) { read_matrix_into(in, m, name); });
  for (std::size_t l = 0; l < ckpt.bn_state.layers.size(); ++l) {
    for (int dir = 0; dir < 2; ++dir) {
      auto& groups = ckpt.bn_state.layers[l][dir];
      for (std::size_t t = 0; t < groups.size(); ++t) {
        const std::string name = "bn" + std::to_string(l) + "." + std::to_string(dir) +
                                 "." + std::to_string(t);
        read_matrix_into(in, groups[t].mean, name + ".mean");
        read_matrix_into(in, groups[t].var, name + ".var");
      }
    }
  }
  return ckpt;
}

}  // namespace plateprice

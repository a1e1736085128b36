// SPDX-License-Identifier: Apache-2.0
#include "gplasdi/autoencoder.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>

#include "gplasdi/errors.hpp"
#include "gplasdi/io.hpp"
#include "gplasdi/rng.hpp"

namespace gplasdi {

double softplus(double x) noexcept {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

FeedForward::FeedForward(std::vector<std::size_t> widths) : widths_(std::move(widths)) {
  if (widths_.size() < 2) throw InvalidArgument("FeedForward: need at least two widths");
  for (std::size_t w : widths_)
    if (w == 0) throw InvalidArgument("FeedForward: zero layer width");
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    weights.emplace_back(widths_[l], widths_[l + 1]);
    biases.emplace_back(1, widths_[l + 1]);
  }
}

std::size_t FeedForward::parameter_count() const noexcept {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + biases[l].size();
  return n;
}

namespace {

void add_bias(DenseMatrix& y, const DenseMatrix& bias) {
  const std::span<const double> b = bias.values();
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += b[c];
  }
}

// Vectorized max(x,0) + log1p(exp(-|x|)); log1p(e) is evaluated as
// log(u)·e/(u−1) with u = 1+e, which keeps full relative accuracy.
void apply_softplus(DenseMatrix& y) {
  constexpr Eigen::Index kBlock = 64;
  using Block = Eigen::Array<double, kBlock, 1>;
  Block e, u, t;
  const std::span<double> v = y.values();
  std::size_t i = 0;
  for (; i + kBlock <= v.size(); i += kBlock) {
    Eigen::Map<Block> x(v.data() + i);
    e = (-x.abs()).exp();
    u = 1.0 + e;
    t = u.log() * (e / (u - 1.0));
    x = x.max(0.0) + (u == 1.0).select(e, t);
  }
  for (; i < v.size(); ++i) v[i] = softplus(v[i]);
}

}  // namespace

DenseMatrix FeedForward::forward(const DenseMatrix& x) const {
  if (x.cols() != input_width()) {
    throw DimensionMismatch("forward: input width " + std::to_string(x.cols()) + ", expected " +
                            std::to_string(input_width()));
  }
  DenseMatrix h = x;
  DenseMatrix next;
  for (std::size_t l = 0; l < n_layers(); ++l) {
    gemm(h, Transpose::kNo, weights[l], Transpose::kNo, next);
    add_bias(next, biases[l]);
    if (l + 1 < n_layers()) apply_softplus(next);
    std::swap(h, next);
  }
  return h;
}

DenseMatrix FeedForward::forward(const DenseMatrix& x, ForwardTape& tape) const {
  if (x.cols() != input_width()) {
    throw DimensionMismatch("forward: input width " + std::to_string(x.cols()) + ", expected " +
                            std::to_string(input_width()));
  }
  tape.inputs.resize(n_layers());
  tape.activations.resize(n_layers());
  tape.inputs[0] = x;
  for (std::size_t l = 0; l < n_layers(); ++l) {
    DenseMatrix& z = tape.activations[l];
    gemm(tape.inputs[l], Transpose::kNo, weights[l], Transpose::kNo, z);
    add_bias(z, biases[l]);
    if (l + 1 < n_layers()) {
      DenseMatrix& out = tape.inputs[l + 1];
      out = z;
      apply_softplus(out);
    }
  }
  return tape.activations.back();
}

DenseMatrix FeedForward::backward(const ForwardTape& tape, DenseMatrix d_out,
                                  std::span<DenseMatrix> grads, bool input_gradient) const {
  if (grads.size() != 2 * n_layers()) throw DimensionMismatch("backward: gradient list size");
  DenseMatrix delta = std::move(d_out);
  DenseMatrix d_input;
  for (std::size_t l = n_layers(); l-- > 0;) {
    if (l + 1 < n_layers()) {
      const auto z = tape.activations[l].values();
      auto d = delta.values();
      for (std::size_t k = 0; k < d.size(); ++k) d[k] *= sigmoid(z[k]);
    }
    gemm(tape.inputs[l], Transpose::kYes, delta, Transpose::kNo, grads[2 * l], 1.0, 1.0);
    auto db = grads[2 * l + 1].values();
    for (std::size_t r = 0; r < delta.rows(); ++r) {
      const auto row = delta.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) db[c] += row[c];
    }
    if (l > 0 || input_gradient) {
      gemm(delta, Transpose::kNo, weights[l], Transpose::kYes, d_input);
      std::swap(delta, d_input);
    }
  }
  return input_gradient ? delta : DenseMatrix{};
}

AdamState AdamState::for_tensors(std::span<const DenseMatrix* const> params) {
  AdamState s;
  for (const DenseMatrix* p : params) {
    s.first_moment.emplace_back(p->rows(), p->cols());
    s.second_moment.emplace_back(p->rows(), p->cols());
  }
  return s;
}

void adam_update(std::span<DenseMatrix* const> params, std::span<const DenseMatrix> grads,
                 AdamState& state, double lr) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
    throw DimensionMismatch("adam_update: parameter, gradient and moment lists differ");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k]->values();
    const auto g = grads[k].values();
    auto m = state.first_moment[k].values();
    auto v = state.second_moment[k].values();
    if (g.size() != p.size() || m.size() != p.size()) {
      throw DimensionMismatch("adam_update: tensor " + std::to_string(k) + " shape mismatch");
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

MLPParameters::MLPParameters(std::vector<std::size_t> sizes) : layer_sizes(std::move(sizes)) {
  encoder = FeedForward(layer_sizes);
  std::vector<std::size_t> reversed(layer_sizes.rbegin(), layer_sizes.rend());
  decoder = FeedForward(std::move(reversed));
  const auto ts = std::as_const(*this).tensors();
  adam = AdamState::for_tensors(ts);
}

MLPParameters MLPParameters::initialized(std::vector<std::size_t> sizes, std::uint64_t seed) {
  MLPParameters p(std::move(sizes));
  NormalGenerator rng(seed);
  for (FeedForward* net : {&p.encoder, &p.decoder}) {
    for (DenseMatrix& w : net->weights) {
      const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
      for (double& v : w.values()) v = rng.uniform(-bound, bound);
    }
  }
  return p;
}

std::vector<DenseMatrix*> MLPParameters::tensors() {
  std::vector<DenseMatrix*> out;
  for (FeedForward* net : {&encoder, &decoder})
    for (std::size_t l = 0; l < net->n_layers(); ++l) {
      out.push_back(&net->weights[l]);
      out.push_back(&net->biases[l]);
    }
  return out;
}

std::vector<const DenseMatrix*> MLPParameters::tensors() const {
  std::vector<const DenseMatrix*> out;
  for (const FeedForward* net : {&encoder, &decoder})
    for (std::size_t l = 0; l < net->n_layers(); ++l) {
      out.push_back(&net->weights[l]);
      out.push_back(&net->biases[l]);
    }
  return out;
}

std::vector<DenseMatrix> MLPParameters::zero_gradients() const {
  std::vector<DenseMatrix> g;
  for (const DenseMatrix* t : tensors()) g.emplace_back(t->rows(), t->cols());
  return g;
}

DenseMatrix encode(const MLPParameters& params, const DenseMatrix& batch) {
  return params.encoder.forward(batch);
}

std::vector<double> encode(const MLPParameters& params, std::span<const double> u) {
  const DenseMatrix z = params.encoder.forward(DenseMatrix(1, u.size(), {u.begin(), u.end()}));
  return {z.values().begin(), z.values().end()};
}

DenseMatrix decode(const MLPParameters& params, const DenseMatrix& batch) {
  return params.decoder.forward(batch);
}

std::vector<double> decode(const MLPParameters& params, std::span<const double> z) {
  const DenseMatrix u = params.decoder.forward(DenseMatrix(1, z.size(), {z.begin(), z.end()}));
  return {u.values().begin(), u.values().end()};
}

double reconstruction_loss(const MLPParameters& params, std::span<const DenseMatrix> samples) {
  if (samples.empty()) throw InvalidArgument("reconstruction_loss: empty batch");
  double sum = 0.0;
  std::size_t count = 0;
  for (const DenseMatrix& u : samples) {
    const DenseMatrix rec = decode(params, encode(params, u));
    const auto a = rec.values();
    const auto b = u.values();
    for (std::size_t k = 0; k < a.size(); ++k) sum += (a[k] - b[k]) * (a[k] - b[k]);
    count += a.size();
  }
  return sum / static_cast<double>(count);
}

DenseMatrix NormalizationSpec::apply(const DenseMatrix& m) const {
  DenseMatrix out = m;
  for (double& v : out.values()) v = apply(v);
  return out;
}

DenseMatrix NormalizationSpec::invert(const DenseMatrix& m) const {
  DenseMatrix out = m;
  for (double& v : out.values()) v = invert(v);
  return out;
}

NormalizationSpec fit_normalization(std::span<const DenseMatrix> samples) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const DenseMatrix& m : samples)
    for (double v : m.values()) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  if (!(hi > lo)) throw DegenerateRange("normalize: data range is degenerate (max == min)");
  return {lo, hi};
}

NormalizedTensor normalize(const SnapshotTensor& tensor) {
  NormalizedTensor out;
  out.spec = fit_normalization(tensor.values);
  for (const DenseMatrix& m : tensor.values) out.values.push_back(out.spec.apply(m));
  return out;
}

void save_model(const std::filesystem::path& dir, const ModelCheckpoint& ck,
                const std::string& stem) {
  const auto ts = ck.params.tensors();
  std::vector<double> blob;
  io::json tensors = io::json::array();
  auto append = [&](const DenseMatrix& m) {
    blob.insert(blob.end(), m.values().begin(), m.values().end());
  };
  std::size_t n_enc = 2 * ck.params.encoder.n_layers();
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const bool enc = k < n_enc;
    const std::size_t local = enc ? k : k - n_enc;
    tensors.push_back({{"name", std::string(enc ? "encoder." : "decoder.") +
                                    std::to_string(local / 2) + (local % 2 ? ".bias" : ".weight")},
                       {"shape", {ts[k]->rows(), ts[k]->cols()}}});
    append(*ts[k]);
  }
  for (const DenseMatrix& m : ck.params.adam.first_moment) append(m);
  for (const DenseMatrix& m : ck.params.adam.second_moment) append(m);

  io::json manifest = {
      {"format", "gplasdi-autoencoder"},
      {"version", 1},
      {"layer_sizes", ck.params.layer_sizes},
      {"activation", "softplus"},
      {"output_activation", "linear"},
      {"normalization", {{"min", ck.normalization.min}, {"max", ck.normalization.max}}},
      {"seed", ck.seed},
      {"epoch", ck.epoch},
      {"adam",
       {{"beta1", ck.params.adam.beta1},
        {"beta2", ck.params.adam.beta2},
        {"epsilon", ck.params.adam.epsilon},
        {"step", ck.params.adam.step}}},
      {"element_type", "f64-le"},
      {"blob_layout", "parameters, then Adam first moments, then Adam second moments, each in tensor order"},
      {"tensors", tensors},
      {"blob", stem + ".bin"}};
  io::write_f64_blob(dir / (stem + ".bin"), blob);
  io::write_json_atomic(dir / (stem + ".json"), manifest);
}

ModelCheckpoint load_model(const std::filesystem::path& dir, const std::string& stem) {
  const io::json manifest = io::read_json(dir / (stem + ".json"));
  if (io::require(manifest, "activation").get<std::string>() != "softplus") {
    throw FormatError("load_model: unsupported activation");
  }
  ModelCheckpoint ck;
  ck.params = MLPParameters(io::require(manifest, "layer_sizes").get<std::vector<std::size_t>>());
  const auto& norm = io::require(manifest, "normalization");
  ck.normalization = {io::require(norm, "min").get<double>(), io::require(norm, "max").get<double>()};
  ck.seed = io::require(manifest, "seed").get<std::uint64_t>();
  ck.epoch = io::require(manifest, "epoch").get<long>();
  const auto& adam = io::require(manifest, "adam");
  ck.params.adam.beta1 = io::require(adam, "beta1").get<double>();
  ck.params.adam.beta2 = io::require(adam, "beta2").get<double>();
  ck.params.adam.epsilon = io::require(adam, "epsilon").get<double>();
  ck.params.adam.step = io::require(adam, "step").get<std::int64_t>();

  const auto blob = io::read_f64_blob(dir / io::require(manifest, "blob").get<std::string>());
  std::size_t offset = 0;
  auto take = [&](DenseMatrix& m) {
    if (offset + m.size() > blob.size()) throw FormatError("load_model: blob too short");
    std::copy_n(blob.begin() + static_cast<std::ptrdiff_t>(offset), m.size(), m.values().begin());
    offset += m.size();
  };
  for (DenseMatrix* t : ck.params.tensors()) take(*t);
  for (DenseMatrix& m : ck.params.adam.first_moment) take(m);
  for (DenseMatrix& m : ck.params.adam.second_moment) take(m);
  if (offset != blob.size()) throw FormatError("load_model: blob has trailing data");
  return ck;
}

}  // namespace gplasdi

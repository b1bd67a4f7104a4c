/* Copyright 2026 The CSLR Toolkit Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "cslr/augment.hpp"
#include "cslr/checkpoint.hpp"
#include "cslr/data.hpp"
#include "cslr/errors.hpp"
#include "cslr/rng.hpp"
#include "cslr/tensor.hpp"

namespace cslr {

// Conformer encoder configuration. Defaults are the paper-scale model; the
// acceptance tests swap in toy sizes via config files.
struct ModelConfig {
  int input_dim = 492;
  int d_model = 512;
  int n_blocks = 8;
  int n_heads = 8;
  int d_ff = 2048;
  double dropout = 0.3;
  int conv_kernel = 15;
  int subsample_factor = 4;
  int vocab_size = 1000;     // V; classifier emits V + 1 logits (blank)
  double layer_drop = 0.0;   // stochastic depth on whole blocks

  int n_classes() const { return vocab_size + 1; }

  void validate() const {
    if (input_dim < 1 || d_model < 1 || n_blocks < 1 || d_ff < 1 ||
        vocab_size < 1)
      throw ConfigError("model: dimensions must be >= 1");
    if (n_heads < 1 || d_model % n_heads != 0)
      throw ConfigError("model: d_model (" + std::to_string(d_model) +
                        ") must be divisible by n_heads (" +
                        std::to_string(n_heads) + ")");
    if (d_model % 2 != 0)
      throw ConfigError("model: d_model must be even for the sinusoidal "
                        "positional encoding");
    if (conv_kernel < 1 || conv_kernel % 2 == 0)
      throw ConfigError("model: conv_kernel must be odd, got " +
                        std::to_string(conv_kernel));
    if (subsample_factor != 4)
      throw ConfigError("model: subsample_factor is fixed at 4 (two stride-2 "
                        "stages)");
    if (dropout < 0.0 || dropout >= 1.0)
      throw ConfigError("model: dropout must be in [0, 1)");
    if (layer_drop < 0.0 || layer_drop >= 1.0)
      throw ConfigError("model: layer_drop must be in [0, 1)");
  }

  std::map<std::string, std::string> to_kv() const;
  static ModelConfig from_kv(const std::map<std::string, std::string>& kv);
};

inline std::map<std::string, std::string> ModelConfig::to_kv() const {
  std::map<std::string, std::string> kv;
  kv["input_dim"] = std::to_string(input_dim);
  kv["d_model"] = std::to_string(d_model);
  kv["n_blocks"] = std::to_string(n_blocks);
  kv["n_heads"] = std::to_string(n_heads);
  kv["d_ff"] = std::to_string(d_ff);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", dropout);
  kv["dropout"] = buf;
  kv["conv_kernel"] = std::to_string(conv_kernel);
  kv["subsample_factor"] = std::to_string(subsample_factor);
  kv["vocab_size"] = std::to_string(vocab_size);
  std::snprintf(buf, sizeof(buf), "%.17g", layer_drop);
  kv["layer_drop"] = buf;
  return kv;
}

inline ModelConfig ModelConfig::from_kv(
    const std::map<std::string, std::string>& kv) {
  ModelConfig cfg;
  const auto get = [&](const char* key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end())
      throw ParseError(std::string("model config: missing key '") + key + "'");
    return it->second;
  };
  cfg.input_dim = std::stoi(get("input_dim"));
  cfg.d_model = std::stoi(get("d_model"));
  cfg.n_blocks = std::stoi(get("n_blocks"));
  cfg.n_heads = std::stoi(get("n_heads"));
  cfg.d_ff = std::stoi(get("d_ff"));
  cfg.dropout = std::stod(get("dropout"));
  cfg.conv_kernel = std::stoi(get("conv_kernel"));
  cfg.subsample_factor = std::stoi(get("subsample_factor"));
  cfg.vocab_size = std::stoi(get("vocab_size"));
  cfg.layer_drop = std::stod(get("layer_drop"));
  cfg.validate();
  return cfg;
}

template <typename Scalar>
struct LinearParams {
  Tensor<Scalar> w;  // in x out
  Tensor<Scalar> b;  // 1 x out
};

template <typename Scalar>
struct NormParams {
  Tensor<Scalar> gain;  // 1 x d
  Tensor<Scalar> bias;  // 1 x d
};

template <typename Scalar>
struct FfnParams {
  NormParams<Scalar> norm;
  LinearParams<Scalar> in;   // d -> d_ff
  LinearParams<Scalar> out;  // d_ff -> d
};

template <typename Scalar>
struct AttentionParams {
  NormParams<Scalar> norm;
  LinearParams<Scalar> q, k, v, o;  // all d -> d
};

template <typename Scalar>
struct ConvModuleParams {
  NormParams<Scalar> pre_norm;
  LinearParams<Scalar> pw_in;     // d -> 2d, gated by GLU back to d
  Tensor<Scalar> dw_kernel;       // d x conv_kernel
  Tensor<Scalar> dw_bias;         // 1 x d
  NormParams<Scalar> mid_norm;
  LinearParams<Scalar> pw_out;    // d -> d
};

template <typename Scalar>
struct BlockParams {
  FfnParams<Scalar> ffn1;
  AttentionParams<Scalar> attn;
  ConvModuleParams<Scalar> conv;
  FfnParams<Scalar> ffn2;
  NormParams<Scalar> final_norm;
};

template <typename Scalar>
struct SubsamplerParams {
  LinearParams<Scalar> conv1;  // (3 * input_dim) -> d_model, via time_unfold
  LinearParams<Scalar> conv2;  // (3 * d_model) -> d_model
  LinearParams<Scalar> proj;   // d_model -> d_model
};

template <typename Scalar>
struct ModelParams {
  SubsamplerParams<Scalar> sub;
  std::vector<BlockParams<Scalar>> blocks;
  LinearParams<Scalar> classifier;  // d_model -> V + 1

  // Visits every parameter in a fixed order with a stable dotted name.
  template <typename Fn>
  void visit(Fn&& fn) {
    const auto linear = [&](const std::string& p, LinearParams<Scalar>& l) {
      fn(p + ".w", l.w);
      fn(p + ".b", l.b);
    };
    const auto norm = [&](const std::string& p, NormParams<Scalar>& m) {
      fn(p + ".gain", m.gain);
      fn(p + ".bias", m.bias);
    };
    const auto ffn = [&](const std::string& p, FfnParams<Scalar>& f) {
      norm(p + ".norm", f.norm);
      linear(p + ".in", f.in);
      linear(p + ".out", f.out);
    };
    linear("sub.conv1", sub.conv1);
    linear("sub.conv2", sub.conv2);
    linear("sub.proj", sub.proj);
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      const std::string p = "block" + std::to_string(i);
      BlockParams<Scalar>& blk = blocks[i];
      ffn(p + ".ffn1", blk.ffn1);
      norm(p + ".attn.norm", blk.attn.norm);
      linear(p + ".attn.q", blk.attn.q);
      linear(p + ".attn.k", blk.attn.k);
      linear(p + ".attn.v", blk.attn.v);
      linear(p + ".attn.o", blk.attn.o);
      norm(p + ".conv.pre_norm", blk.conv.pre_norm);
      linear(p + ".conv.pw_in", blk.conv.pw_in);
      fn(p + ".conv.dw_kernel", blk.conv.dw_kernel);
      fn(p + ".conv.dw_bias", blk.conv.dw_bias);
      norm(p + ".conv.mid_norm", blk.conv.mid_norm);
      linear(p + ".conv.pw_out", blk.conv.pw_out);
      ffn(p + ".ffn2", blk.ffn2);
      norm(p + ".final_norm", blk.final_norm);
    }
    linear("classifier", classifier);
  }

  std::vector<std::pair<std::string, Tensor<Scalar>*>> named() {
    std::vector<std::pair<std::string, Tensor<Scalar>*>> out;
    visit([&](const std::string& name, Tensor<Scalar>& t) {
      out.emplace_back(name, &t);
    });
    return out;
  }

  std::size_t parameter_count() {
    std::size_t n = 0;
    visit([&](const std::string&, Tensor<Scalar>& t) {
      n += static_cast<std::size_t>(t.numel());
    });
    return n;
  }
};

namespace detail {

template <typename Scalar>
LinearParams<Scalar> init_linear(Eigen::Index in, Eigen::Index out, Rng& rng) {
  LinearParams<Scalar> l;
  l.w = Tensor<Scalar>::uniform_init(in, out, in, rng, true);
  l.b = Tensor<Scalar>::zeros(1, out, true);
  return l;
}

template <typename Scalar>
NormParams<Scalar> init_norm(Eigen::Index d) {
  NormParams<Scalar> m;
  m.gain = Tensor<Scalar>::ones(1, d, true);
  m.bias = Tensor<Scalar>::zeros(1, d, true);
  return m;
}

template <typename Scalar>
FfnParams<Scalar> init_ffn(Eigen::Index d, Eigen::Index d_ff, Rng& rng) {
  FfnParams<Scalar> f;
  f.norm = init_norm<Scalar>(d);
  f.in = init_linear<Scalar>(d, d_ff, rng);
  f.out = init_linear<Scalar>(d_ff, d, rng);
  return f;
}

}  // namespace detail

template <typename Scalar>
ModelParams<Scalar> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  const Eigen::Index d = cfg.d_model;
  ModelParams<Scalar> p;
  p.sub.conv1 = detail::init_linear<Scalar>(3 * cfg.input_dim, d, rng);
  p.sub.conv2 = detail::init_linear<Scalar>(3 * d, d, rng);
  p.sub.proj = detail::init_linear<Scalar>(d, d, rng);
  p.blocks.resize(static_cast<std::size_t>(cfg.n_blocks));
  for (auto& blk : p.blocks) {
    blk.ffn1 = detail::init_ffn<Scalar>(d, cfg.d_ff, rng);
    blk.attn.norm = detail::init_norm<Scalar>(d);
    blk.attn.q = detail::init_linear<Scalar>(d, d, rng);
    blk.attn.k = detail::init_linear<Scalar>(d, d, rng);
    blk.attn.v = detail::init_linear<Scalar>(d, d, rng);
    blk.attn.o = detail::init_linear<Scalar>(d, d, rng);
    blk.conv.pre_norm = detail::init_norm<Scalar>(d);
    blk.conv.pw_in = detail::init_linear<Scalar>(d, 2 * d, rng);
    blk.conv.dw_kernel = Tensor<Scalar>::uniform_init(d, cfg.conv_kernel,
                                                      cfg.conv_kernel, rng,
                                                      true);
    blk.conv.dw_bias = Tensor<Scalar>::zeros(1, d, true);
    blk.conv.mid_norm = detail::init_norm<Scalar>(d);
    blk.conv.pw_out = detail::init_linear<Scalar>(d, d, rng);
    blk.ffn2 = detail::init_ffn<Scalar>(d, cfg.d_ff, rng);
    blk.final_norm = detail::init_norm<Scalar>(d);
  }
  p.classifier = detail::init_linear<Scalar>(d, cfg.n_classes(), rng);
  return p;
}

// Deep copy of parameter values (fresh leaves, no shared graph state).
template <typename Scalar>
ModelParams<Scalar> clone_params(ModelParams<Scalar>& params) {
  ModelParams<Scalar> out = params;  // copies structure and shared handles
  // Rebuild each tensor as an independent leaf with the same value.
  out.visit([](const std::string&, Tensor<Scalar>& t) {
    t = Tensor<Scalar>(DenseMatrix<Scalar>(t.value()), true);
  });
  return out;
}

inline Eigen::Index subsampled_length(Eigen::Index t_len) {
  const Eigen::Index once = (t_len + 1) / 2;
  return (once + 1) / 2;
}

// PE(pos, 2i) = sin(pos / 10000^(2i/d)); PE(pos, 2i+1) = cos(same).
template <typename Scalar>
DenseMatrix<Scalar> positional_encoding(Eigen::Index t_len, Eigen::Index d) {
  if (d % 2 != 0)
    throw ConfigError("positional_encoding: d_model must be even, got " +
                      std::to_string(d));
  if (t_len < 1)
    throw ValidationError("positional_encoding: need at least one position");
  DenseMatrix<Scalar> pe(t_len, d);
  for (Eigen::Index pos = 0; pos < t_len; ++pos)
    for (Eigen::Index i = 0; i < d / 2; ++i) {
      const double rate =
          std::pow(10000.0, 2.0 * static_cast<double>(i) /
                                static_cast<double>(d));
      const double angle = static_cast<double>(pos) / rate;
      pe(pos, 2 * i) = static_cast<Scalar>(std::sin(angle));
      pe(pos, 2 * i + 1) = static_cast<Scalar>(std::cos(angle));
    }
  return pe;
}

namespace detail {

// Zeroes rows at and past valid_len; keeps padded frames from leaking into
// cross-time ops (time_unfold windows, depthwise conv taps).
template <typename Scalar>
Tensor<Scalar> zero_pad_rows(const Tensor<Scalar>& x, Eigen::Index valid_len) {
  if (valid_len >= x.rows()) return x;
  DenseMatrix<Scalar> mask = DenseMatrix<Scalar>::Zero(x.rows(), x.cols());
  mask.topRows(valid_len).setOnes();
  return mul_const(x, std::move(mask));
}

template <typename Scalar>
Tensor<Scalar> linear(const Tensor<Scalar>& x, const LinearParams<Scalar>& l) {
  return add_rowvec(matmul(x, l.w), l.b);
}

template <typename Scalar>
Tensor<Scalar> apply_norm(const Tensor<Scalar>& x,
                          const NormParams<Scalar>& norm) {
  return layer_norm(x, norm.gain, norm.bias, Scalar(1e-5));
}

}  // namespace detail

// Two stride-2 kernel-3 "same" convolution stages (swish between) and a
// linear projection; T -> ceil(T/4) frames, input_dim -> d_model channels.
// Returns the projected tensor and the updated valid length.
template <typename Scalar>
std::pair<Tensor<Scalar>, Eigen::Index> subsample(
    const Tensor<Scalar>& x, Eigen::Index valid_len,
    const SubsamplerParams<Scalar>& params) {
  if (valid_len < 1 || valid_len > x.rows())
    throw ValidationError("subsample: valid_len outside [1, T]");
  Tensor<Scalar> h = detail::zero_pad_rows(x, valid_len);
  h = swish(detail::linear(time_unfold(h, 3, 2), params.conv1));
  const Eigen::Index valid1 = (valid_len + 1) / 2;
  h = detail::zero_pad_rows(h, valid1);
  h = swish(detail::linear(time_unfold(h, 3, 2), params.conv2));
  const Eigen::Index valid2 = (valid1 + 1) / 2;
  h = detail::zero_pad_rows(h, valid2);
  h = detail::linear(h, params.proj);
  return {detail::zero_pad_rows(h, valid2), valid2};
}

// One Macaron Conformer block: half-step FFN, multi-head self-attention
// with key masking at valid_len, the convolution module (padded rows zeroed
// before the depthwise conv), a second half-step FFN, then a final norm.
template <typename Scalar>
Tensor<Scalar> conformer_block(const Tensor<Scalar>& x,
                               const BlockParams<Scalar>& blk,
                               const ModelConfig& cfg, Eigen::Index valid_len,
                               bool training, Rng* rng) {
  const Scalar half = Scalar(0.5);
  const double p = cfg.dropout;
  const auto drop = [&](const Tensor<Scalar>& t) {
    return training ? dropout(t, p, true, *rng) : t;
  };

  // Feed-forward half-step 1.
  Tensor<Scalar> h = detail::apply_norm(x, blk.ffn1.norm);
  h = drop(swish(detail::linear(h, blk.ffn1.in)));
  h = drop(detail::linear(h, blk.ffn1.out));
  Tensor<Scalar> out = add(x, scale(h, half));

  // Multi-head self-attention; keys/values masked to the valid frames.
  Tensor<Scalar> a_in = detail::apply_norm(out, blk.attn.norm);
  Tensor<Scalar> q = detail::linear(a_in, blk.attn.q);
  Tensor<Scalar> k = detail::linear(a_in, blk.attn.k);
  Tensor<Scalar> v = detail::linear(a_in, blk.attn.v);
  const Eigen::Index d_head = cfg.d_model / cfg.n_heads;
  const Scalar inv_sqrt_dh =
      Scalar(1) / std::sqrt(static_cast<Scalar>(d_head));
  std::vector<Tensor<Scalar>> heads;
  heads.reserve(static_cast<std::size_t>(cfg.n_heads));
  for (int head = 0; head < cfg.n_heads; ++head) {
    const Eigen::Index at = head * d_head;
    Tensor<Scalar> scores =
        scale(matmul_nt(slice_cols(q, at, d_head), slice_cols(k, at, d_head)),
              inv_sqrt_dh);
    Tensor<Scalar> weights = masked_softmax_rows(scores, valid_len);
    heads.push_back(matmul(weights, slice_cols(v, at, d_head)));
  }
  Tensor<Scalar> attn_out = detail::linear(concat_cols(heads), blk.attn.o);
  out = add(out, drop(attn_out));

  // Convolution module.
  Tensor<Scalar> c = detail::apply_norm(out, blk.conv.pre_norm);
  c = glu(detail::linear(c, blk.conv.pw_in));
  c = detail::zero_pad_rows(c, valid_len);
  c = add_rowvec(conv1d_depthwise(c, blk.conv.dw_kernel), blk.conv.dw_bias);
  c = swish(detail::apply_norm(c, blk.conv.mid_norm));
  c = detail::linear(c, blk.conv.pw_out);
  out = add(out, drop(c));

  // Feed-forward half-step 2 and the closing norm.
  h = detail::apply_norm(out, blk.ffn2.norm);
  h = drop(swish(detail::linear(h, blk.ffn2.in)));
  h = drop(detail::linear(h, blk.ffn2.out));
  out = add(out, scale(h, half));
  return detail::apply_norm(out, blk.final_norm);
}

template <typename Scalar>
struct ForwardResult {
  Tensor<Scalar> log_probs;  // T' x (V + 1), rows past valid_len are junk
  Eigen::Index valid_len = 0;
};

// Full encoder pass over one (optionally right-padded) sample. Padding rows
// of x must be ignorable: they are zeroed on entry, attention keys are
// masked, and the conv module re-zeroes them, so outputs over the valid
// prefix match the unpadded computation exactly.
template <typename Scalar>
ForwardResult<Scalar> forward(const DenseMatrix<Scalar>& features,
                              Eigen::Index valid_len,
                              ModelParams<Scalar>& params,
                              const ModelConfig& cfg, bool training,
                              Rng* rng = nullptr,
                              const AugmentConfig* augment = nullptr) {
  cfg.validate();
  if (features.cols() != cfg.input_dim)
    throw ShapeError("forward: input has " + std::to_string(features.cols()) +
                     " features, model expects " +
                     std::to_string(cfg.input_dim));
  if (valid_len < 1 || valid_len > features.rows())
    throw ValidationError("forward: valid_len outside [1, T]");
  if (!features.allFinite())
    throw ValidationError("forward: input contains non-finite values");
  if (training && rng == nullptr)
    throw UsageError("forward: training mode needs an rng");

  Tensor<Scalar> x(features, false);
  auto [h, sub_valid] = subsample(x, valid_len, params.sub);

  DenseMatrix<Scalar> pe =
      positional_encoding<Scalar>(h.rows(), cfg.d_model);
  h = add_const(h, pe);
  if (training) h = dropout(h, cfg.dropout, true, *rng);

  if (training && augment != nullptr) {
    // Mask bands are drawn over the valid frames, then padded with ones.
    DenseMatrix<Scalar> mask = DenseMatrix<Scalar>::Ones(h.rows(), h.cols());
    mask.topRows(sub_valid) =
        spec_augment_mask<Scalar>(sub_valid, h.cols(), *augment, *rng);
    h = mul_const(h, std::move(mask));
  }

  for (const auto& blk : params.blocks) {
    if (training && cfg.layer_drop > 0.0 &&
        rng->uniform() < cfg.layer_drop)
      continue;  // stochastic depth: identity for this block
    h = conformer_block(h, blk, cfg, sub_valid, training, rng);
  }

  ForwardResult<Scalar> result;
  result.log_probs = log_softmax_rows(detail::linear(h, params.classifier));
  result.valid_len = sub_valid;
  return result;
}

// Model checkpoint: a self-describing text preamble (model config and the
// vocabulary it was trained against) followed by the tensor container.
template <typename Scalar>
void save_checkpoint(const std::filesystem::path& path,
                     ModelParams<Scalar>& params, const ModelConfig& cfg,
                     const GlossVocabulary& vocab) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot write checkpoint: " + path.string());
  os << "CSLRCKPT 1\n";
  os << "[config]\n";
  for (const auto& [key, value] : cfg.to_kv())
    os << key << " = " << value << "\n";
  os << "[vocab]\n";
  os << "count " << vocab.size() << "\n";
  for (const auto& token : vocab.tokens()) os << token << "\n";
  os << "[tensors]\n";
  TensorMap<Scalar> tensors;
  params.visit([&](const std::string& name, Tensor<Scalar>& t) {
    tensors.emplace(name, t);
  });
  write_tensors(os, tensors);
  if (!os) throw Error("checkpoint write failed: " + path.string());
}

template <typename Scalar>
struct Checkpoint {
  ModelConfig config;
  ModelParams<Scalar> params;
  GlossVocabulary vocab;
};

template <typename Scalar>
Checkpoint<Scalar> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open checkpoint: " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != "CSLRCKPT 1")
    throw ParseError("checkpoint " + path.string() + ": bad magic '" + line +
                     "'");
  if (!std::getline(is, line) || line != "[config]")
    throw ParseError("checkpoint " + path.string() + ": missing [config]");
  std::map<std::string, std::string> kv;
  while (std::getline(is, line) && line != "[vocab]") {
    const auto eq = line.find(" = ");
    if (eq == std::string::npos)
      throw ParseError("checkpoint " + path.string() +
                       ": bad config line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 3);
  }
  if (line != "[vocab]")
    throw ParseError("checkpoint " + path.string() + ": missing [vocab]");

  Checkpoint<Scalar> ckpt;
  ckpt.config = ModelConfig::from_kv(kv);
  if (!std::getline(is, line) || line.rfind("count ", 0) != 0)
    throw ParseError("checkpoint " + path.string() + ": missing vocab count");
  const int count = std::stoi(line.substr(6));
  std::vector<std::string> tokens;
  tokens.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    if (!std::getline(is, line))
      throw ParseError("checkpoint " + path.string() + ": truncated vocab");
    tokens.push_back(line);
  }
  ckpt.vocab = GlossVocabulary(std::move(tokens));
  if (ckpt.vocab.size() != ckpt.config.vocab_size)
    throw ValidationError("checkpoint " + path.string() + ": vocab has " +
                          std::to_string(ckpt.vocab.size()) +
                          " tokens but config says " +
                          std::to_string(ckpt.config.vocab_size));
  if (!std::getline(is, line) || line != "[tensors]")
    throw ParseError("checkpoint " + path.string() + ": missing [tensors]");

  TensorMap<Scalar> tensors = read_tensors<Scalar>(is);
  ckpt.params = init_params<Scalar>(ckpt.config, 0);
  ckpt.params.visit([&](const std::string& name, Tensor<Scalar>& t) {
    const auto it = tensors.find(name);
    if (it == tensors.end())
      throw ParseError("checkpoint " + path.string() + ": missing tensor '" +
                       name + "'");
    if (it->second.rows() != t.rows() || it->second.cols() != t.cols())
      throw ParseError("checkpoint " + path.string() + ": tensor '" + name +
                       "' has shape " + std::to_string(it->second.rows()) +
                       "x" + std::to_string(it->second.cols()) +
                       ", expected " + std::to_string(t.rows()) + "x" +
                       std::to_string(t.cols()));
    t = Tensor<Scalar>(DenseMatrix<Scalar>(it->second.value()), true);
    tensors.erase(it);
  });
  if (!tensors.empty())
    throw ParseError("checkpoint " + path.string() + ": unexpected tensor '" +
                     tensors.begin()->first + "'");
  return ckpt;
}

}  // namespace cslr

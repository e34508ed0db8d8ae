#pragma once

// Encoder-decoder matting network.
//
//   stem        conv3x3 stride 2 (no pooling)             /2
//   stage1..4   residual blocks, strides [1,2,2,2]        /2 /4 /8 /16
//   pyramid     4 parallel dilated conv3x3 (d=1,3,6,9), concat, 1x1 fuse
//   decoder     4x [bilinear up x2, skip concat, conv3x3] back to /1
//   heads       conv3x3 -> sigmoid, one for matte, one for boundary
//
// Presets: depth {small: [2,2,2,2], large: [3,4,23,3]} blocks per stage,
// widths width_multiplier * [64,128,256,512] (encoder) and * [256,128,64,32]
// (decoder), rounded to a multiple of 4 with a floor of 4.
//
// Forward accepts any input size: it reflection-pads to the /16 grid and
// crops the heads back, and the backward pass routes gradients through that
// crop. Both heads squash through a sigmoid, so outputs live in [0,1] for
// arbitrary parameter values. Parameter names and shapes are a pure function
// of the config; initialization draws from init_seed in registration order.

#include "matteblend/core/rng.hpp"
#include "matteblend/nn/layers.hpp"
#include "matteblend/nn/param.hpp"

#include <nlohmann/json.hpp>

#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace matteblend {

enum class EncoderPreset { small, large };

inline const char* to_string(EncoderPreset p) {
  return p == EncoderPreset::small ? "small" : "large";
}

inline EncoderPreset encoder_preset_from_string(const std::string& s) {
  if (s == "small") return EncoderPreset::small;
  if (s == "large") return EncoderPreset::large;
  throw std::invalid_argument("unknown encoder preset '" + s + "'");
}

struct NetworkConfig {
  EncoderPreset preset = EncoderPreset::small;
  double width_multiplier = 1.0;
  int in_channels = 3;
  std::vector<int> pyramid_dilations = {1, 3, 6, 9};

  bool operator==(const NetworkConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const NetworkConfig& c) {
  j = nlohmann::json{{"preset", to_string(c.preset)},
                     {"width_multiplier", c.width_multiplier},
                     {"in_channels", c.in_channels},
                     {"pyramid_dilations", c.pyramid_dilations}};
}

inline void from_json(const nlohmann::json& j, NetworkConfig& c) {
  c.preset = encoder_preset_from_string(j.at("preset").get<std::string>());
  c.width_multiplier = j.at("width_multiplier").get<double>();
  c.in_channels = j.at("in_channels").get<int>();
  c.pyramid_dilations = j.at("pyramid_dilations").get<std::vector<int>>();
}

inline int scaled_width(int base, double multiplier) {
  const int w = static_cast<int>(std::lround(base * multiplier / 4.0)) * 4;
  return std::max(4, w);
}

inline constexpr int kDownsampleFactor = 16;

namespace nn_detail {

template <typename T>
struct ResidualBlock {
  ResidualBlock(ParamStore<T>& store, const std::string& name, int in_c, int out_c, int stride)
      : conv1(store, name + ".conv1", in_c, out_c, 3, stride),
        gn1(store, name + ".gn1", out_c),
        conv2(store, name + ".conv2", out_c, out_c, 3, 1),
        gn2(store, name + ".gn2", out_c) {
    if (stride != 1 || in_c != out_c) {
      proj.emplace(store, name + ".proj", in_c, out_c, 1, stride);
      proj_gn.emplace(store, name + ".proj_gn", out_c);
    }
  }

  Tensor<T> forward(const Tensor<T>& x, bool train) {
    Tensor<T> h = gn2.forward(conv2.forward(relu1.forward(gn1.forward(conv1.forward(x, train), train), train), train), train);
    if (proj) {
      Tensor<T> s = proj_gn->forward(proj->forward(x, train), train);
      h.flat() += s.flat();
    } else {
      h.flat() += x.flat();
    }
    return relu_out.forward(h, train);
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    Tensor<T> dh = relu_out.backward(dy);
    Tensor<T> dmain = conv1.backward(gn1.backward(relu1.backward(conv2.backward(gn2.backward(dh)))));
    Tensor<T> dskip = proj ? proj->backward(proj_gn->backward(dh)) : std::move(dh);
    dmain.flat() += dskip.flat();
    return dmain;
  }

  Conv2d<T> conv1;
  GroupNorm<T> gn1;
  ReLU<T> relu1;
  Conv2d<T> conv2;
  GroupNorm<T> gn2;
  std::optional<Conv2d<T>> proj;
  std::optional<GroupNorm<T>> proj_gn;
  ReLU<T> relu_out;
};

template <typename T>
struct ConvGnRelu {
  ConvGnRelu(ParamStore<T>& store, const std::string& name, int in_c, int out_c, int k,
             int stride = 1, int dilation = 1)
      : conv(store, name + ".conv", in_c, out_c, k, stride, dilation), gn(store, name + ".gn", out_c) {}

  Tensor<T> forward(const Tensor<T>& x, bool train) {
    return relu.forward(gn.forward(conv.forward(x, train), train), train);
  }
  Tensor<T> backward(const Tensor<T>& dy) {
    return conv.backward(gn.backward(relu.backward(dy)));
  }

  Conv2d<T> conv;
  GroupNorm<T> gn;
  ReLU<T> relu;
};

}  // namespace nn_detail

template <typename T>
struct NetworkOutput {
  Tensor<T> matte;
  Tensor<T> boundary;
};

template <typename T>
class MattingNetwork {
 public:
  MattingNetwork(const NetworkConfig& cfg, std::uint64_t init_seed) : cfg_(validate(cfg)) {
    const double m = cfg_.width_multiplier;
    const int w0 = scaled_width(64, m), w1 = scaled_width(128, m), w2 = scaled_width(256, m),
              w3 = scaled_width(512, m);
    const int d0 = scaled_width(256, m), d1 = scaled_width(128, m), d2 = scaled_width(64, m),
              d3 = scaled_width(32, m);
    const std::vector<int> blocks =
        cfg_.preset == EncoderPreset::small ? std::vector<int>{2, 2, 2, 2}
                                            : std::vector<int>{3, 4, 23, 3};

    stem_.emplace(store_, "encoder.stem", cfg_.in_channels, w0, 3, 2);
    const int stage_in[4] = {w0, w0, w1, w2};
    const int stage_out[4] = {w0, w1, w2, w3};
    const int stage_stride[4] = {1, 2, 2, 2};
    for (int s = 0; s < 4; ++s) {
      auto& stage = stages_[s];
      for (int b = 0; b < blocks[s]; ++b) {
        const std::string name =
            "encoder.stage" + std::to_string(s + 1) + ".block" + std::to_string(b);
        const int in_c = b == 0 ? stage_in[s] : stage_out[s];
        const int stride = b == 0 ? stage_stride[s] : 1;
        stage.push_back(
            std::make_unique<nn_detail::ResidualBlock<T>>(store_, name, in_c, stage_out[s], stride));
      }
    }

    const int wb = std::max(4, w3 / 4);
    for (std::size_t i = 0; i < cfg_.pyramid_dilations.size(); ++i)
      pyramid_.push_back(std::make_unique<nn_detail::ConvGnRelu<T>>(
          store_, "pyramid.branch" + std::to_string(i), w3, wb, 3, 1, cfg_.pyramid_dilations[i]));
    pyramid_out_c_ = wb * static_cast<int>(cfg_.pyramid_dilations.size());
    fuse_.emplace(store_, "pyramid.fuse", pyramid_out_c_, w3, 1);

    up_[0].emplace(store_, "decoder.up1", w3 + w2, d0, 3);
    up_[1].emplace(store_, "decoder.up2", d0 + w1, d1, 3);
    up_[2].emplace(store_, "decoder.up3", d1 + w0, d2, 3);
    up_[3].emplace(store_, "decoder.up4", d2, d3, 3);
    skip_c_ = {w2, w1, w0};

    head_matte_.emplace(store_, "head.matte", d3, 1, 3);
    head_boundary_.emplace(store_, "head.boundary", d3, 1, 3);

    initialize(init_seed);
  }

  MattingNetwork(const MattingNetwork& o) : MattingNetwork(o.cfg_, 0) { copy_parameters_from(o); }
  MattingNetwork& operator=(const MattingNetwork&) = delete;
  MattingNetwork(MattingNetwork&&) = default;
  MattingNetwork& operator=(MattingNetwork&&) = default;

  const NetworkConfig& config() const { return cfg_; }
  std::vector<Param<T>*>& parameters() { return store_.all(); }
  const std::vector<Param<T>*>& parameters() const { return store_.all(); }
  std::size_t parameter_count() const { return store_.parameter_count(); }
  void zero_grad() { store_.zero_grad(); }

  /// Deep copy: same config and parameter values, independent storage.
  MattingNetwork clone() const { return MattingNetwork(*this); }

  void copy_parameters_from(const MattingNetwork& o) {
    const auto& src = o.store_.all();
    auto& dst = store_.all();
    if (src.size() != dst.size()) throw std::invalid_argument("parameter layout mismatch");
    for (std::size_t i = 0; i < src.size(); ++i) {
      if (src[i]->name != dst[i]->name || src[i]->shape != dst[i]->shape)
        throw std::invalid_argument("parameter layout mismatch at " + dst[i]->name);
      dst[i]->value = src[i]->value;
    }
  }

  /// Both heads come back [N,1,H,W] in [0,1]. A training forward caches
  /// activations for one subsequent backward().
  NetworkOutput<T> forward(const Tensor<T>& x, bool train) {
    if (x.c() != cfg_.in_channels)
      throw std::invalid_argument("forward: expected " + std::to_string(cfg_.in_channels) +
                                  " channels, got " + std::to_string(x.c()));
    in_h_ = x.h();
    in_w_ = x.w();
    pad_h_ = round_up(x.h(), kDownsampleFactor);
    pad_w_ = round_up(x.w(), kDownsampleFactor);
    Tensor<T> h = pad_reflect_tensor(x, pad_h_ - x.h(), pad_w_ - x.w());

    h = stem_->forward(h, train);
    std::array<Tensor<T>, 3> enc;  // skip sources: stage1..3 outputs
    for (int s = 0; s < 4; ++s) {
      for (auto& block : stages_[s]) h = block->forward(h, train);
      if (s < 3) enc[s] = h;
    }

    std::vector<Tensor<T>> branches;
    branches.reserve(pyramid_.size());
    for (auto& b : pyramid_) branches.push_back(b->forward(h, train));
    Tensor<T> cat = branches[0];
    for (std::size_t i = 1; i < branches.size(); ++i) cat = concat_channels(cat, branches[i]);
    h = fuse_->forward(cat, train);

    for (int u = 0; u < 4; ++u) {
      h = ups_[u].forward(h, train);
      if (u < 3) h = concat_channels(h, enc[2 - u]);
      h = up_[u]->forward(h, train);
    }

    Tensor<T> matte = sig_matte_.forward(head_matte_->forward(h, train), train);
    Tensor<T> boundary = sig_boundary_.forward(head_boundary_->forward(h, train), train);
    return {crop_tensor(matte, in_h_, in_w_), crop_tensor(boundary, in_h_, in_w_)};
  }

  /// Consumes the caches of the last training forward. Gradients accumulate
  /// into Param::grad; the return value is the gradient w.r.t. the input.
  Tensor<T> backward(const Tensor<T>& dmatte, const Tensor<T>& dboundary) {
    Tensor<T> dm = sig_matte_.backward(uncrop_tensor(dmatte, pad_h_, pad_w_));
    Tensor<T> db = sig_boundary_.backward(uncrop_tensor(dboundary, pad_h_, pad_w_));
    Tensor<T> dh = head_matte_->backward(dm);
    {
      Tensor<T> dh2 = head_boundary_->backward(db);
      dh.flat() += dh2.flat();
    }

    for (int u = 3; u >= 0; --u) {
      dh = up_[u]->backward(dh);
      if (u < 3) {
        auto [dup, dskip] = split_channels(dh, dh.c() - skip_c_[u]);
        denc_[2 - u] = std::move(dskip);
        dh = std::move(dup);
      }
      dh = ups_[u].backward(dh);
    }

    dh = fuse_->backward(dh);
    Tensor<T> dbottleneck;
    {
      const int wb = pyramid_out_c_ / static_cast<int>(pyramid_.size());
      int offset = 0;
      for (std::size_t i = 0; i < pyramid_.size(); ++i) {
        Tensor<T> dbranch(dh.n(), wb, dh.h(), dh.w());
        const std::size_t plane = static_cast<std::size_t>(dh.h()) * dh.w();
        for (int n = 0; n < dh.n(); ++n)
          for (int c = 0; c < wb; ++c)
            std::copy(dh.plane(n, offset + c), dh.plane(n, offset + c) + plane,
                      dbranch.plane(n, c));
        Tensor<T> dx = pyramid_[i]->backward(dbranch);
        if (i == 0)
          dbottleneck = std::move(dx);
        else
          dbottleneck.flat() += dx.flat();
        offset += wb;
      }
    }

    Tensor<T> d = std::move(dbottleneck);
    for (int s = 3; s >= 0; --s) {
      if (s < 3) d.flat() += denc_[s].flat();
      for (auto it = stages_[s].rbegin(); it != stages_[s].rend(); ++it) d = (*it)->backward(d);
      if (s < 3) denc_[s] = Tensor<T>();
    }
    return pad_reflect_tensor_backward(stem_->backward(d), in_h_, in_w_);
  }

 private:
  static NetworkConfig validate(const NetworkConfig& cfg) {
    if (cfg.width_multiplier <= 0) throw std::invalid_argument("width_multiplier must be positive");
    if (cfg.in_channels <= 0) throw std::invalid_argument("in_channels must be positive");
    if (cfg.pyramid_dilations.empty())
      throw std::invalid_argument("pyramid needs at least one dilation");
    for (int d : cfg.pyramid_dilations)
      if (d < 1) throw std::invalid_argument("pyramid dilations must be >= 1");
    return cfg;
  }

  void initialize(std::uint64_t init_seed) {
    const Rng root(init_seed);
    auto& params = store_.all();
    for (std::size_t i = 0; i < params.size(); ++i) {
      Param<T>& p = *params[i];
      if (p.shape.size() == 4) {
        const double fan_in =
            static_cast<double>(p.shape[1]) * p.shape[2] * p.shape[3];
        const double std_dev = std::sqrt(2.0 / fan_in);
        Rng rng = root.stream(i);
        for (auto& v : p.value) v = static_cast<T>(rng.normal() * std_dev);
      } else if (p.name.size() >= 5 && p.name.compare(p.name.size() - 5, 5, "gamma") == 0) {
        std::fill(p.value.begin(), p.value.end(), T(1));
      }  // biases and betas stay zero
    }
  }

  NetworkConfig cfg_;
  ParamStore<T> store_;

  std::optional<nn_detail::ConvGnRelu<T>> stem_;
  std::array<std::vector<std::unique_ptr<nn_detail::ResidualBlock<T>>>, 4> stages_;
  std::vector<std::unique_ptr<nn_detail::ConvGnRelu<T>>> pyramid_;
  int pyramid_out_c_ = 0;
  std::optional<nn_detail::ConvGnRelu<T>> fuse_;
  std::array<Upsample2x<T>, 4> ups_;
  std::array<std::optional<nn_detail::ConvGnRelu<T>>, 4> up_;
  std::array<int, 3> skip_c_{};
  std::optional<Conv2d<T>> head_matte_;
  std::optional<Conv2d<T>> head_boundary_;
  Sigmoid<T> sig_matte_, sig_boundary_;

  // forward bookkeeping for backward
  int in_h_ = 0, in_w_ = 0, pad_h_ = 0, pad_w_ = 0;
  std::array<Tensor<T>, 3> denc_;
};

}  // namespace matteblend

#include "fcfuzz/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace fcfuzz {

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv2D: return "Conv2D";
    case LayerKind::MaxPool2x2: return "MaxPool2x2";
    case LayerKind::UpsampleNearest2x: return "UpsampleNearest2x";
    case LayerKind::Dense: return "Dense";
    case LayerKind::ReLU: return "ReLU";
    case LayerKind::Tanh: return "Tanh";
    case LayerKind::Softmax: return "Softmax";
    case LayerKind::CenterCrop: return "CenterCrop";
  }
  return "?";
}

Tensor Tensor::flat(std::vector<double> data) {
  Tensor t;
  t.h = 1;
  t.w = 1;
  t.c = static_cast<int>(data.size());
  t.v = std::move(data);
  return t;
}

bool Tensor::all_finite() const {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

namespace {

class Conv2DLayer final : public Layer {
 public:
  Conv2DLayer(int c_in, int c_out) : c_in_(c_in), c_out_(c_out) {
    if (c_in < 1 || c_out < 1) throw ValidationError("Conv2D: bad channel counts");
    w_.assign(static_cast<size_t>(9) * c_in * c_out + c_out, 0.0);
  }

  LayerKind kind() const override { return LayerKind::Conv2D; }
  std::span<double> params() override { return w_; }
  std::span<const double> params() const override { return w_; }
  std::array<int, 2> meta() const override { return {c_in_, c_out_}; }
  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<Conv2DLayer>(*this);
  }

  void init_params(Rng& rng) override {
    const double std = std::sqrt(2.0 / (9.0 * c_in_));
    const size_t n_w = static_cast<size_t>(9) * c_in_ * c_out_;
    for (size_t i = 0; i < n_w; ++i) w_[i] = std * rng.normal();
    for (int i = 0; i < c_out_; ++i) w_[n_w + i] = 0.0;
  }

  // Tap (ky, kx) with offsets dy = ky-1, dx = kx-1 contributes
  // out[y][x] += w * in[y+dy][x+dx] over the in-range rectangle.
  struct TapRange {
    int dy, dx, y0, y1, x0, x1;
  };
  static TapRange tap_range(int ky, int kx, int h, int w) {
    const int dy = ky - 1, dx = kx - 1;
    return {dy,
            dx,
            dy < 0 ? 1 : 0,
            dy > 0 ? h - 1 : h,
            dx < 0 ? 1 : 0,
            dx > 0 ? w - 1 : w};
  }

  double weight(int ci, int ky, int kx, int co) const {
    return w_[(static_cast<size_t>(ci) * 9 + ky * 3 + kx) * c_out_ + co];
  }

  Tensor forward(const Tensor& in, TapeEntry* tape) const override {
    if (in.c != c_in_)
      throw Error("Conv2D: input has " + std::to_string(in.c) +
                  " channels, expected " + std::to_string(c_in_));
    const int h = in.h, w = in.w;
    Tensor out(h, w, c_out_);
    const double* bias = w_.data() + static_cast<size_t>(9) * c_in_ * c_out_;
    for (int co = 0; co < c_out_; ++co) {
      double* __restrict__ op0 = out.plane(co);
      std::fill(op0, op0 + static_cast<size_t>(h) * w, bias[co]);
      for (int ci = 0; ci < c_in_; ++ci) {
        const double* __restrict__ ip0 = in.plane(ci);
        for (int ky = 0; ky < 3; ++ky) {
          for (int kx = 0; kx < 3; ++kx) {
            const double wv = weight(ci, ky, kx, co);
            const TapRange t = tap_range(ky, kx, h, w);
            for (int y = t.y0; y < t.y1; ++y) {
              double* __restrict__ op = op0 + static_cast<size_t>(y) * w;
              const double* __restrict__ ip =
                  ip0 + static_cast<size_t>(y + t.dy) * w + t.dx;
              for (int x = t.x0; x < t.x1; ++x) op[x] += wv * ip[x];
            }
          }
        }
      }
    }
    if (tape) {
      tape->saved = in;
      tape->in_shape = {in.h, in.w, in.c};
    }
    return out;
  }

  // Fixed 4-lane association so the reduction vectorizes without changing
  // results across runs.
  static double dot4(const double* __restrict__ a, const double* __restrict__ b,
                     int n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    int x = 0;
    for (; x + 4 <= n; x += 4) {
      s0 += a[x] * b[x];
      s1 += a[x + 1] * b[x + 1];
      s2 += a[x + 2] * b[x + 2];
      s3 += a[x + 3] * b[x + 3];
    }
    for (; x < n; ++x) s0 += a[x] * b[x];
    return (s0 + s1) + (s2 + s3);
  }

  static double sum4(const double* __restrict__ a, size_t n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    size_t x = 0;
    for (; x + 4 <= n; x += 4) {
      s0 += a[x];
      s1 += a[x + 1];
      s2 += a[x + 2];
      s3 += a[x + 3];
    }
    for (; x < n; ++x) s0 += a[x];
    return (s0 + s1) + (s2 + s3);
  }

  Tensor backward(const Tensor& gout, const TapeEntry& tape,
                  std::vector<double>* pgrad) const override {
    const Tensor& in = tape.saved;
    const int h = in.h, w = in.w;
    Tensor gin(h, w, in.c);
    std::vector<double>& g = *pgrad;
    double* gbias = g.data() + static_cast<size_t>(9) * c_in_ * c_out_;
    for (int co = 0; co < c_out_; ++co) {
      const double* __restrict__ gop0 = gout.plane(co);
      gbias[co] += sum4(gop0, static_cast<size_t>(h) * w);
      for (int ci = 0; ci < c_in_; ++ci) {
        const double* __restrict__ ip0 = in.plane(ci);
        double* __restrict__ gip0 = gin.plane(ci);
        for (int ky = 0; ky < 3; ++ky) {
          for (int kx = 0; kx < 3; ++kx) {
            const TapRange t = tap_range(ky, kx, h, w);
            const double wv = weight(ci, ky, kx, co);
            double wgrad = 0.0;
            for (int y = t.y0; y < t.y1; ++y) {
              const double* __restrict__ gop = gop0 + static_cast<size_t>(y) * w;
              const double* __restrict__ ip =
                  ip0 + static_cast<size_t>(y + t.dy) * w + t.dx;
              double* __restrict__ gip =
                  gip0 + static_cast<size_t>(y + t.dy) * w + t.dx;
              wgrad += dot4(ip + t.x0, gop + t.x0, t.x1 - t.x0);
              for (int x = t.x0; x < t.x1; ++x) gip[x] += wv * gop[x];
            }
            g[(static_cast<size_t>(ci) * 9 + ky * 3 + kx) * c_out_ + co] += wgrad;
          }
        }
      }
    }
    return gin;
  }

 private:
  int c_in_, c_out_;
  std::vector<double> w_;
};

class MaxPoolLayer final : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::MaxPool2x2; }
  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<MaxPoolLayer>(*this);
  }

  Tensor forward(const Tensor& in, TapeEntry* tape) const override {
    const int oh = (in.h + 1) / 2;
    const int ow = (in.w + 1) / 2;
    Tensor out(oh, ow, in.c);
    if (tape) {
      tape->arg.assign(out.v.size(), 0);
      tape->in_shape = {in.h, in.w, in.c};
    }
    for (int ch = 0; ch < in.c; ++ch) {
      for (int oy = 0; oy < oh; ++oy) {
        const int y1 = std::min(2 * oy + 1, in.h - 1);
        for (int ox = 0; ox < ow; ++ox) {
          const int x1 = std::min(2 * ox + 1, in.w - 1);
          double best = -std::numeric_limits<double>::infinity();
          int32_t best_idx = 0;
          for (int sy = 2 * oy; sy <= y1; ++sy) {
            for (int sx = 2 * ox; sx <= x1; ++sx) {
              const auto idx = static_cast<int32_t>(
                  (static_cast<size_t>(ch) * in.h + sy) * in.w + sx);
              const double value = in.v[idx];
              if (value > best) {
                best = value;
                best_idx = idx;
              }
            }
          }
          const size_t oidx = (static_cast<size_t>(ch) * oh + oy) * ow + ox;
          out.v[oidx] = best;
          if (tape) tape->arg[oidx] = best_idx;
        }
      }
    }
    return out;
  }

  Tensor backward(const Tensor& gout, const TapeEntry& tape,
                  std::vector<double>*) const override {
    Tensor gin(tape.in_shape[0], tape.in_shape[1], tape.in_shape[2]);
    for (size_t i = 0; i < gout.v.size(); ++i) gin.v[tape.arg[i]] += gout.v[i];
    return gin;
  }
};

class UpsampleLayer final : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::UpsampleNearest2x; }
  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<UpsampleLayer>(*this);
  }

  Tensor forward(const Tensor& in, TapeEntry* tape) const override {
    Tensor out(2 * in.h, 2 * in.w, in.c);
    for (int y = 0; y < in.h; ++y)
      for (int x = 0; x < in.w; ++x)
        for (int ch = 0; ch < in.c; ++ch) {
          const double value = in.at(y, x, ch);
          out.at(2 * y, 2 * x, ch) = value;
          out.at(2 * y, 2 * x + 1, ch) = value;
          out.at(2 * y + 1, 2 * x, ch) = value;
          out.at(2 * y + 1, 2 * x + 1, ch) = value;
        }
    if (tape) tape->in_shape = {in.h, in.w, in.c};
    return out;
  }

  Tensor backward(const Tensor& gout, const TapeEntry& tape,
                  std::vector<double>*) const override {
    Tensor gin(tape.in_shape[0], tape.in_shape[1], tape.in_shape[2]);
    for (int y = 0; y < gin.h; ++y)
      for (int x = 0; x < gin.w; ++x)
        for (int ch = 0; ch < gin.c; ++ch)
          gin.at(y, x, ch) = gout.at(2 * y, 2 * x, ch) +
                             gout.at(2 * y, 2 * x + 1, ch) +
                             gout.at(2 * y + 1, 2 * x, ch) +
                             gout.at(2 * y + 1, 2 * x + 1, ch);
    return gin;
  }
};

class DenseLayer final : public Layer {
 public:
  DenseLayer(int in, int out) : in_(in), out_(out) {
    if (in < 1 || out < 1) throw ValidationError("Dense: bad dimensions");
    w_.assign(static_cast<size_t>(in) * out + out, 0.0);
  }

  LayerKind kind() const override { return LayerKind::Dense; }
  std::span<double> params() override { return w_; }
  std::span<const double> params() const override { return w_; }
  std::array<int, 2> meta() const override { return {in_, out_}; }
  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<DenseLayer>(*this);
  }

  void init_params(Rng& rng) override {
    const double std = std::sqrt(2.0 / in_);
    for (size_t i = 0; i < static_cast<size_t>(in_) * out_; ++i)
      w_[i] = std * rng.normal();
    for (int i = 0; i < out_; ++i) w_[static_cast<size_t>(in_) * out_ + i] = 0.0;
  }

  Tensor forward(const Tensor& in, TapeEntry* tape) const override {
    if (in.size() != in_)
      throw Error("Dense: input size " + std::to_string(in.size()) +
                  ", expected " + std::to_string(in_));
    Tensor out(1, 1, out_);
    const double* bias = w_.data() + static_cast<size_t>(in_) * out_;
    for (int o = 0; o < out_; ++o) out.v[o] = bias[o];
    for (int i = 0; i < in_; ++i) {
      const double value = in.v[i];
      const double* wp = &w_[static_cast<size_t>(i) * out_];
      for (int o = 0; o < out_; ++o) out.v[o] += value * wp[o];
    }
    if (tape) {
      tape->saved = in;
      tape->in_shape = {in.h, in.w, in.c};
    }
    return out;
  }

  Tensor backward(const Tensor& gout, const TapeEntry& tape,
                  std::vector<double>* pgrad) const override {
    const Tensor& in = tape.saved;
    Tensor gin(tape.in_shape[0], tape.in_shape[1], tape.in_shape[2]);
    std::vector<double>& g = *pgrad;
    double* gbias = g.data() + static_cast<size_t>(in_) * out_;
    for (int o = 0; o < out_; ++o) gbias[o] += gout.v[o];
    for (int i = 0; i < in_; ++i) {
      const double value = in.v[i];
      const double* wp = &w_[static_cast<size_t>(i) * out_];
      double* gwp = &g[static_cast<size_t>(i) * out_];
      double acc = 0.0;
      for (int o = 0; o < out_; ++o) {
        gwp[o] += value * gout.v[o];
        acc += wp[o] * gout.v[o];
      }
      gin.v[i] = acc;
    }
    return gin;
  }

 private:
  int in_, out_;
  std::vector<double> w_;
};

class ReluLayer final : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::ReLU; }
  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<ReluLayer>(*this);
  }
  Tensor forward(const Tensor& in, TapeEntry* tape) const override {
    Tensor out = in;
    for (double& x : out.v) x = x > 0.0 ? x : 0.0;
    if (tape) tape->saved = out;
    return out;
  }
  Tensor backward(const Tensor& gout, const TapeEntry& tape,
                  std::vector<double>*) const override {
    Tensor gin = gout;
    for (size_t i = 0; i < gin.v.size(); ++i)
      if (!(tape.saved.v[i] > 0.0)) gin.v[i] = 0.0;
    return gin;
  }
};

class TanhLayer final : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::Tanh; }
  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<TanhLayer>(*this);
  }
  Tensor forward(const Tensor& in, TapeEntry* tape) const override {
    Tensor out = in;
    for (double& x : out.v) x = std::tanh(x);
    if (tape) tape->saved = out;
    return out;
  }
  Tensor backward(const Tensor& gout, const TapeEntry& tape,
                  std::vector<double>*) const override {
    Tensor gin = gout;
    for (size_t i = 0; i < gin.v.size(); ++i) {
      const double y = tape.saved.v[i];
      gin.v[i] *= 1.0 - y * y;
    }
    return gin;
  }
};

class SoftmaxLayer final : public Layer {
 public:
  LayerKind kind() const override { return LayerKind::Softmax; }
  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<SoftmaxLayer>(*this);
  }
  Tensor forward(const Tensor& in, TapeEntry* tape) const override {
    Tensor out = in;
    const double m = *std::max_element(out.v.begin(), out.v.end());
    double sum = 0.0;
    for (double& x : out.v) {
      x = std::exp(x - m);
      sum += x;
    }
    for (double& x : out.v) x /= sum;
    if (tape) tape->saved = out;
    return out;
  }
  Tensor backward(const Tensor& gout, const TapeEntry& tape,
                  std::vector<double>*) const override {
    const Tensor& y = tape.saved;
    double dot = 0.0;
    for (size_t i = 0; i < y.v.size(); ++i) dot += gout.v[i] * y.v[i];
    Tensor gin = gout;
    for (size_t i = 0; i < y.v.size(); ++i)
      gin.v[i] = y.v[i] * (gout.v[i] - dot);
    return gin;
  }
};

class CenterCropLayer final : public Layer {
 public:
  CenterCropLayer(int th, int tw) : th_(th), tw_(tw) {
    if (th < 1 || tw < 1) throw ValidationError("CenterCrop: bad target size");
  }
  LayerKind kind() const override { return LayerKind::CenterCrop; }
  std::array<int, 2> meta() const override { return {th_, tw_}; }
  std::unique_ptr<Layer> clone() const override {
    return std::make_unique<CenterCropLayer>(*this);
  }
  Tensor forward(const Tensor& in, TapeEntry* tape) const override {
    if (in.h < th_ || in.w < tw_)
      throw Error("CenterCrop: input " + std::to_string(in.h) + "x" +
                  std::to_string(in.w) + " smaller than target " +
                  std::to_string(th_) + "x" + std::to_string(tw_));
    const int oy = (in.h - th_) / 2;
    const int ox = (in.w - tw_) / 2;
    Tensor out(th_, tw_, in.c);
    for (int y = 0; y < th_; ++y)
      for (int x = 0; x < tw_; ++x)
        for (int ch = 0; ch < in.c; ++ch)
          out.at(y, x, ch) = in.at(y + oy, x + ox, ch);
    if (tape) tape->in_shape = {in.h, in.w, in.c};
    return out;
  }
  Tensor backward(const Tensor& gout, const TapeEntry& tape,
                  std::vector<double>*) const override {
    Tensor gin(tape.in_shape[0], tape.in_shape[1], tape.in_shape[2]);
    const int oy = (gin.h - th_) / 2;
    const int ox = (gin.w - tw_) / 2;
    for (int y = 0; y < th_; ++y)
      for (int x = 0; x < tw_; ++x)
        for (int ch = 0; ch < gin.c; ++ch)
          gin.at(y + oy, x + ox, ch) = gout.at(y, x, ch);
    return gin;
  }

 private:
  int th_, tw_;
};

}  // namespace

std::unique_ptr<Layer> make_conv2d(int c_in, int c_out) {
  return std::make_unique<Conv2DLayer>(c_in, c_out);
}
std::unique_ptr<Layer> make_maxpool2x2() { return std::make_unique<MaxPoolLayer>(); }
std::unique_ptr<Layer> make_upsample2x() { return std::make_unique<UpsampleLayer>(); }
std::unique_ptr<Layer> make_dense(int in, int out) {
  return std::make_unique<DenseLayer>(in, out);
}
std::unique_ptr<Layer> make_relu() { return std::make_unique<ReluLayer>(); }
std::unique_ptr<Layer> make_tanh() { return std::make_unique<TanhLayer>(); }
std::unique_ptr<Layer> make_softmax() { return std::make_unique<SoftmaxLayer>(); }
std::unique_ptr<Layer> make_center_crop(int th, int tw) {
  return std::make_unique<CenterCropLayer>(th, tw);
}

void Network::add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

Tensor Network::forward(const Tensor& in, Tape* tape) const {
  return forward_prefix(in, layer_count(), tape);
}

Tensor Network::forward_prefix(const Tensor& in, int n_layers, Tape* tape) const {
  if (n_layers < 0 || n_layers > layer_count())
    throw Error("forward_prefix: bad layer count");
  if (tape) tape->assign(n_layers, TapeEntry{});
  Tensor x = in;
  for (int i = 0; i < n_layers; ++i)
    x = layers_[i]->forward(x, tape ? &(*tape)[i] : nullptr);
  return x;
}

Tensor Network::backward(const Tensor& grad_out, const Tape& tape,
                         Gradients& grads) const {
  if (static_cast<int>(tape.size()) != layer_count() ||
      grads.size() != layers_.size())
    throw Error("backward: tape/gradient structure mismatch");
  Tensor g = grad_out;
  for (int i = layer_count() - 1; i >= 0; --i)
    g = layers_[i]->backward(g, tape[i], &grads[i]);
  return g;
}

Gradients Network::zero_gradients() const {
  Gradients g(layers_.size());
  for (size_t i = 0; i < layers_.size(); ++i)
    g[i].assign(layers_[i]->params().size(), 0.0);
  return g;
}

size_t Network::param_count() const {
  size_t n = 0;
  for (const auto& l : layers_) n += l->params().size();
  return n;
}

void Network::init_params(Rng& rng) {
  for (auto& l : layers_) l->init_params(rng);
}

Network Network::clone() const {
  Network n;
  for (const auto& l : layers_) n.add(l->clone());
  return n;
}

namespace {

void write_u32(std::ofstream& out, uint32_t value) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(value >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ofstream& out, uint64_t value) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(value >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

uint32_t read_u32(std::ifstream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw Error("checkpoint: truncated file");
  uint32_t value = 0;
  for (int i = 0; i < 4; ++i) value |= static_cast<uint32_t>(b[i]) << (8 * i);
  return value;
}

uint64_t read_u64(std::ifstream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw Error("checkpoint: truncated file");
  uint64_t value = 0;
  for (int i = 0; i < 8; ++i) value |= static_cast<uint64_t>(b[i]) << (8 * i);
  return value;
}

constexpr char kMagic[4] = {'F', 'C', 'N', 'N'};
constexpr uint32_t kVersion = 1;

}  // namespace

void Network::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint '" + path.string() + "'");
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  write_u32(out, static_cast<uint32_t>(layers_.size()));
  for (const auto& l : layers_) {
    write_u32(out, static_cast<uint32_t>(l->kind()));
    const auto meta = l->meta();
    write_u32(out, static_cast<uint32_t>(meta[0]));
    write_u32(out, static_cast<uint32_t>(meta[1]));
  }
  write_u64(out, param_count());
  for (const auto& l : layers_) {
    for (double value : l->params()) {
      uint64_t bits;
      std::memcpy(&bits, &value, 8);
      write_u64(out, bits);
    }
  }
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

Network Network::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint '" + path.string() + "'");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw Error("checkpoint '" + path.string() + "': bad magic");
  const uint32_t version = read_u32(in);
  if (version != kVersion)
    throw Error("checkpoint '" + path.string() + "': unsupported version " +
                std::to_string(version));
  const uint32_t n_layers = read_u32(in);
  Network net;
  for (uint32_t i = 0; i < n_layers; ++i) {
    const auto kind = static_cast<LayerKind>(read_u32(in));
    const int a = static_cast<int>(read_u32(in));
    const int b = static_cast<int>(read_u32(in));
    switch (kind) {
      case LayerKind::Conv2D: net.add(make_conv2d(a, b)); break;
      case LayerKind::MaxPool2x2: net.add(make_maxpool2x2()); break;
      case LayerKind::UpsampleNearest2x: net.add(make_upsample2x()); break;
      case LayerKind::Dense: net.add(make_dense(a, b)); break;
      case LayerKind::ReLU: net.add(make_relu()); break;
      case LayerKind::Tanh: net.add(make_tanh()); break;
      case LayerKind::Softmax: net.add(make_softmax()); break;
      case LayerKind::CenterCrop: net.add(make_center_crop(a, b)); break;
      default:
        throw Error("checkpoint '" + path.string() + "': unknown layer kind");
    }
  }
  const uint64_t declared = read_u64(in);
  if (declared != net.param_count())
    throw Error("checkpoint '" + path.string() + "': parameter count mismatch");
  for (int i = 0; i < net.layer_count(); ++i) {
    auto params = net.layer(i).params();
    for (double& value : params) {
      const uint64_t bits = read_u64(in);
      std::memcpy(&value, &bits, 8);
    }
  }
  return net;
}

LossGrad mse_loss(const Tensor& pred, const Tensor& target) {
  if (pred.size() != target.size()) throw Error("mse_loss: size mismatch");
  LossGrad lg;
  lg.grad = pred;
  const double inv_n = 1.0 / pred.size();
  double sum = 0.0;
  for (size_t i = 0; i < pred.v.size(); ++i) {
    const double d = pred.v[i] - target.v[i];
    sum += d * d;
    lg.grad.v[i] = 2.0 * d * inv_n;
  }
  lg.value = sum * inv_n;
  return lg;
}

LossGrad cross_entropy_loss(const Tensor& probs, int target_class) {
  if (target_class < 0 || target_class >= probs.size())
    throw Error("cross_entropy_loss: target class out of range");
  constexpr double kFloor = 1e-12;
  LossGrad lg;
  lg.grad = probs;
  std::fill(lg.grad.v.begin(), lg.grad.v.end(), 0.0);
  const double p = std::max(probs.v[target_class], kFloor);
  lg.value = -std::log(p);
  lg.grad.v[target_class] = -1.0 / p;
  return lg;
}

Optimizer::Optimizer(OptimizerKind kind, double learning_rate)
    : kind_(kind), lr_(learning_rate) {}

void Optimizer::freeze_layers(std::vector<int> layer_indices) {
  frozen_ = std::move(layer_indices);
  std::sort(frozen_.begin(), frozen_.end());
}

void Optimizer::step(Network& net, const Gradients& grads) {
  if (static_cast<int>(grads.size()) != net.layer_count())
    throw Error("optimizer: gradient structure mismatch");
  if (kind_ == OptimizerKind::Adam && m_.empty()) {
    m_.resize(grads.size());
    v_.resize(grads.size());
    for (size_t i = 0; i < grads.size(); ++i) {
      m_[i].assign(grads[i].size(), 0.0);
      v_[i].assign(grads[i].size(), 0.0);
    }
  }
  ++t_;
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  const double bc1 = 1.0 - std::pow(kBeta1, t_);
  const double bc2 = 1.0 - std::pow(kBeta2, t_);
  for (int i = 0; i < net.layer_count(); ++i) {
    if (std::binary_search(frozen_.begin(), frozen_.end(), i)) continue;
    auto params = net.layer(i).params();
    const auto& g = grads[i];
    if (kind_ == OptimizerKind::SGD) {
      for (size_t j = 0; j < params.size(); ++j) params[j] -= lr_ * g[j];
    } else {
      auto& m = m_[i];
      auto& v = v_[i];
      for (size_t j = 0; j < params.size(); ++j) {
        m[j] = kBeta1 * m[j] + (1.0 - kBeta1) * g[j];
        v[j] = kBeta2 * v[j] + (1.0 - kBeta2) * g[j] * g[j];
        const double mhat = m[j] / bc1;
        const double vhat = v[j] / bc2;
        params[j] -= lr_ * mhat / (std::sqrt(vhat) + kEps);
      }
    }
  }
}

namespace {

template <typename LossFn>
double train_step_impl(Network& net, Optimizer& opt, std::span<const Tensor> inputs,
                       LossFn&& loss_of) {
  if (inputs.empty()) throw ValidationError("train_step: empty batch");
  Gradients grads = net.zero_gradients();
  Tape tape;
  double total = 0.0;
  const double inv_b = 1.0 / static_cast<double>(inputs.size());
  for (size_t s = 0; s < inputs.size(); ++s) {
    Tensor out = net.forward(inputs[s], &tape);
    LossGrad lg = loss_of(out, s);
    if (!std::isfinite(lg.value))
      throw Error("train_step: non-finite loss (divergence) at sample " +
                  std::to_string(s));
    total += lg.value;
    for (double& g : lg.grad.v) g *= inv_b;
    net.backward(lg.grad, tape, grads);
  }
  opt.step(net, grads);
  return total * inv_b;
}

}  // namespace

double train_step(Network& net, Optimizer& opt, std::span<const Tensor> inputs,
                  std::span<const Tensor> mse_targets) {
  if (inputs.size() != mse_targets.size())
    throw ValidationError("train_step: inputs/targets size mismatch");
  return train_step_impl(net, opt, inputs, [&](const Tensor& out, size_t s) {
    return mse_loss(out, mse_targets[s]);
  });
}

double train_step(Network& net, Optimizer& opt, std::span<const Tensor> inputs,
                  std::span<const int> class_labels, std::vector<int>* predicted) {
  if (inputs.size() != class_labels.size())
    throw ValidationError("train_step: inputs/labels size mismatch");
  if (predicted) predicted->assign(inputs.size(), -1);
  return train_step_impl(net, opt, inputs, [&](const Tensor& out, size_t s) {
    if (predicted)
      (*predicted)[s] = static_cast<int>(
          std::max_element(out.v.begin(), out.v.end()) - out.v.begin());
    return cross_entropy_loss(out, class_labels[s]);
  });
}

}  // namespace fcfuzz

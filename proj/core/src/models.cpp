#include "cloudpatch/models.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "detail/seed.hpp"

namespace cloudpatch {

namespace {

enum class OpType { kConv, kPool, kUpsample, kDropout, kDense, kLstm, kReshape };

struct Op {
  OpType type;
  std::size_t layer = 0;
  Activation act = Activation::kLinear;
  double rate = 0.0;
  Shape4 reshape{};  // h, w, c used; n taken from the running batch
};

struct LayerDef {
  std::string name;
  LayerKind kind;
  std::size_t in;
  std::size_t out;
};

struct Layout {
  std::vector<LayerDef> layers;
  std::vector<Op> ops;

  void conv(std::string name, std::size_t in, std::size_t out, Activation act) {
    ops.push_back({OpType::kConv, layers.size(), act});
    layers.push_back({std::move(name), LayerKind::kConv2d, in, out});
  }
  void dense(std::string name, std::size_t in, std::size_t out, Activation act) {
    ops.push_back({OpType::kDense, layers.size(), act});
    layers.push_back({std::move(name), LayerKind::kDense, in, out});
  }
  void lstm(std::string name, std::size_t in, std::size_t units) {
    ops.push_back({OpType::kLstm, layers.size()});
    layers.push_back({std::move(name), LayerKind::kLstm, in, units});
  }
  void pool() { ops.push_back({OpType::kPool}); }
  void upsample() { ops.push_back({OpType::kUpsample}); }
  void drop(double rate) { ops.push_back({OpType::kDropout, 0, Activation::kLinear, rate}); }
  void reshape(std::size_t h, std::size_t w, std::size_t c) {
    ops.push_back({OpType::kReshape, 0, Activation::kLinear, 0.0, Shape4{1, h, w, c}});
  }
};

Layout make_layout(const ModelSpec& spec) {
  spec.validate();
  const auto& f = spec.filters;
  const std::size_t qh = spec.height / 4;
  const std::size_t qw = spec.width / 4;
  const auto relu = Activation::kRelu;
  const auto linear = Activation::kLinear;
  Layout l;
  switch (spec.kind) {
    case ModelKind::kCnn:
      l.conv("conv1", spec.in_channels, f[0], relu);
      l.conv("conv2", f[0], f[1], relu);
      l.drop(spec.dropout);
      l.conv("conv3", f[1], f[2], relu);
      l.conv("conv_out", f[2], spec.out_channels, linear);
      break;
    case ModelKind::kAutoencoderCnn:
      l.conv("enc1", spec.in_channels, f[0], relu);
      l.pool();
      l.conv("enc2", f[0], f[1], relu);
      l.pool();
      l.conv("bottleneck", f[1], f[2], relu);
      l.drop(spec.dropout);
      l.upsample();
      l.conv("dec1", f[2], f[1], relu);
      l.upsample();
      l.conv("dec2", f[1], f[0], relu);
      l.conv("conv_out", f[0], spec.out_channels, linear);
      break;
    case ModelKind::kCnnLstm:
      l.conv("enc1", spec.in_channels, f[0], relu);
      l.pool();
      l.conv("enc2", f[0], f[1], relu);
      l.pool();
      l.drop(spec.dropout);
      l.lstm("lstm", qh * qw * f[1], spec.lstm_units);
      l.dense("expand", spec.lstm_units, qh * qw * f[0], relu);
      l.reshape(qh, qw, f[0]);
      l.upsample();
      l.conv("dec1", f[0], f[0], relu);
      l.upsample();
      l.conv("conv_out", f[0], spec.out_channels, linear);
      break;
    case ModelKind::kAutoencoderLstm:
      l.conv("enc1", spec.in_channels, f[0], relu);
      l.pool();
      l.conv("enc2", f[0], f[1], relu);
      l.pool();
      l.lstm("lstm", qh * qw * f[1], spec.lstm_units);
      l.drop(spec.dropout);
      l.dense("expand", spec.lstm_units, qh * qw * f[1], relu);
      l.reshape(qh, qw, f[1]);
      l.upsample();
      l.conv("dec1", f[1], f[1], relu);
      l.upsample();
      l.conv("dec2", f[1], f[0], relu);
      l.conv("conv_out", f[0], spec.out_channels, linear);
      break;
  }
  return l;
}

void check_batch(const ModelSpec& spec, const Shape4& s) {
  if (s.h != spec.height || s.w != spec.width || s.c != spec.in_channels) {
    throw Error(ErrorKind::kShapeMismatch, "model expects (N," + std::to_string(spec.height) + "," +
                                               std::to_string(spec.width) + "," +
                                               std::to_string(spec.in_channels) + "), got " +
                                               s.str());
  }
  if (spec.temporal() && s.n % spec.timesteps != 0) {
    throw Error(ErrorKind::kShapeMismatch, "temporal models take whole sequences of " +
                                               std::to_string(spec.timesteps) + " frames");
  }
}

// Gathers rows n*T+t of a (N*T, ...) batch into per-step (N,1,1,F) inputs.
template <class T>
std::vector<Tensor4<T>> split_steps(const Tensor4<T>& x, std::size_t steps) {
  const std::size_t seqs = x.shape().n / steps;
  const std::size_t feat = x.shape().item();
  std::vector<Tensor4<T>> out;
  for (std::size_t t = 0; t < steps; ++t) {
    Tensor4<T> xt(Shape4{seqs, 1, 1, feat});
    for (std::size_t n = 0; n < seqs; ++n) {
      const T* src = x.data() + (n * steps + t) * feat;
      std::copy(src, src + feat, xt.data() + n * feat);
    }
    out.push_back(std::move(xt));
  }
  return out;
}

template <class T>
Tensor4<T> join_steps(const std::vector<Tensor4<T>>& parts, const Shape4& shape) {
  const std::size_t steps = parts.size();
  const std::size_t feat = shape.item();
  Tensor4<T> out(shape);
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t n = 0; n < shape.n / steps; ++n) {
      const T* src = parts[t].data() + n * feat;
      std::copy(src, src + feat, out.data() + (n * steps + t) * feat);
    }
  }
  return out;
}

template <class T>
void accumulate(LayerParams<T>& into, const LayerParams<T>& add) {
  const auto acc = [](Blob<T>& a, const Blob<T>& b) {
    for (std::size_t k = 0; k < a.values.size(); ++k) a.values[k] += b.values[k];
  };
  acc(into.weight, add.weight);
  acc(into.recurrent, add.recurrent);
  acc(into.bias, add.bias);
}

template <class T>
ForwardResult<T> run_forward(const ModelSpec& spec, const ParamSet<T>& params,
                             const Tensor4<T>& batch, bool training, std::uint64_t seed,
                             bool keep_trace) {
  check_batch(spec, batch.shape());
  for (T v : batch.values()) {
    if (!std::isfinite(static_cast<double>(v))) {
      throw Error(ErrorKind::kNonFiniteInput, "model input contains NaN or Inf; use prepare_input");
    }
  }
  const Layout layout = make_layout(spec);
  if (params.layers.size() != layout.layers.size()) {
    throw Error(ErrorKind::kShapeMismatch, "parameter set does not match the model layout");
  }

  ForwardResult<T> result;
  Tensor4<T> x = batch;
  for (std::size_t i = 0; i < layout.ops.size(); ++i) {
    const Op& op = layout.ops[i];
    OpRecord<T> rec;
    if (keep_trace) rec.input = x;
    switch (op.type) {
      case OpType::kConv:
      case OpType::kDense: {
        const auto& p = params.layers[op.layer];
        Tensor4<T> z = op.type == OpType::kConv ? conv2d(x, p) : dense(x, p);
        x = activate(op.act, z);
        if (keep_trace) {
          rec.pre_activation = std::move(z);
          rec.output = x;
        }
        break;
      }
      case OpType::kPool: {
        auto r = maxpool2(x);
        x = std::move(r.output);
        rec.argmax = std::move(r.argmax);
        break;
      }
      case OpType::kUpsample:
        x = upsample2(x);
        break;
      case OpType::kDropout: {
        auto r = dropout(x, op.rate, training, detail::mix_seed(seed, i));
        x = std::move(r.output);
        rec.dropout_scale = std::move(r.scale);
        break;
      }
      case OpType::kLstm: {
        const auto& p = params.layers[op.layer];
        auto seq = lstm_sequence(split_steps(x, spec.timesteps), p);
        x = join_steps(seq.hidden, Shape4{x.shape().n, 1, 1, p.recurrent.shape[0]});
        if (keep_trace) rec.lstm_caches = std::move(seq.caches);
        break;
      }
      case OpType::kReshape:
        x = std::move(x).reshaped(Shape4{x.shape().n, op.reshape.h, op.reshape.w, op.reshape.c});
        break;
    }
    if (keep_trace) result.trace.ops.push_back(std::move(rec));
  }
  result.output = std::move(x);
  return result;
}

}  // namespace

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kCnn: return "cnn";
    case ModelKind::kAutoencoderCnn: return "autoencoder_cnn";
    case ModelKind::kCnnLstm: return "cnn_lstm";
    case ModelKind::kAutoencoderLstm: return "autoencoder_lstm";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  for (auto k : {ModelKind::kCnn, ModelKind::kAutoencoderCnn, ModelKind::kCnnLstm,
                 ModelKind::kAutoencoderLstm}) {
    if (name == to_string(k)) return k;
  }
  throw Error(ErrorKind::kUnsupportedKind, "unsupported model kind '" + std::string(name) + "'");
}

ModelSpec ModelSpec::for_kind(ModelKind kind, std::size_t height, std::size_t width) {
  ModelSpec s;
  s.kind = kind;
  s.height = height;
  s.width = width;
  switch (kind) {
    case ModelKind::kCnn:
    case ModelKind::kAutoencoderCnn:
      s.filters = {32, 64, 128};
      s.dropout = 0.2;
      break;
    case ModelKind::kCnnLstm:
      s.filters = {32, 64};
      s.lstm_units = 64;
      s.dropout = 0.2;
      s.timesteps = kSequenceLength;
      break;
    case ModelKind::kAutoencoderLstm:
      s.filters = {32, 64};
      s.lstm_units = 64;
      s.dropout = 0.3;
      s.timesteps = kSequenceLength;
      break;
  }
  return s;
}

void ModelSpec::validate() const {
  if (height < 4 || width < 4 || height % 4 != 0 || width % 4 != 0) {
    throw Error(ErrorKind::kBadDims, "model input " + std::to_string(height) + "x" +
                                         std::to_string(width) + " must be divisible by 4");
  }
  if (in_channels == 0 || out_channels == 0) {
    throw Error(ErrorKind::kBadConfig, "channel counts must be positive");
  }
  const ModelSpec reference = for_kind(kind, height, width);
  if (filters != reference.filters || lstm_units != reference.lstm_units ||
      timesteps != reference.timesteps) {
    throw Error(ErrorKind::kBadConfig,
                "filter plan, LSTM units or timesteps differ from the " +
                    std::string(to_string(kind)) + " configuration");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(ErrorKind::kBadRate, "dropout must be in [0,1)");
}

std::string ModelSpec::serialize() const {
  std::ostringstream out;
  out << "kind = " << to_string(kind) << "\n"
      << "height = " << height << "\n"
      << "width = " << width << "\n"
      << "in_channels = " << in_channels << "\n"
      << "out_channels = " << out_channels << "\n"
      << "filters = ";
  for (std::size_t i = 0; i < filters.size(); ++i) out << (i ? "," : "") << filters[i];
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, dropout);
  out << "\nlstm_units = " << lstm_units << "\n"
      << "dropout = " << std::string(buf, res.ptr) << "\n"
      << "timesteps = " << timesteps << "\n";
  return out.str();
}

ModelSpec ModelSpec::parse(std::string_view text) {
  ModelSpec s;
  bool have_kind = false;
  std::istringstream in{std::string(text)};
  std::string line;
  const auto number = [](const std::string& v, const std::string& key) {
    std::size_t out = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc{} || r.ptr != v.data() + v.size()) {
      throw Error(ErrorKind::kBadConfig, "model spec field '" + key + "' is not an integer");
    }
    return out;
  };
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string v) {
      v.erase(0, v.find_first_not_of(" \t"));
      v.erase(v.find_last_not_of(" \t\r") + 1);
      return v;
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "kind") {
      s.kind = parse_model_kind(value);
      have_kind = true;
    } else if (key == "height") {
      s.height = number(value, key);
    } else if (key == "width") {
      s.width = number(value, key);
    } else if (key == "in_channels") {
      s.in_channels = number(value, key);
    } else if (key == "out_channels") {
      s.out_channels = number(value, key);
    } else if (key == "lstm_units") {
      s.lstm_units = number(value, key);
    } else if (key == "timesteps") {
      s.timesteps = number(value, key);
    } else if (key == "dropout") {
      const auto r = std::from_chars(value.data(), value.data() + value.size(), s.dropout);
      if (r.ec != std::errc{}) throw Error(ErrorKind::kBadConfig, "model spec dropout is not a number");
    } else if (key == "filters") {
      s.filters.clear();
      std::istringstream fs(value);
      std::string item;
      while (std::getline(fs, item, ',')) s.filters.push_back(number(trim(item), key));
    }
  }
  if (!have_kind) throw Error(ErrorKind::kBadConfig, "model spec lacks 'kind'");
  s.validate();
  return s;
}

template <class T>
ParamSet<T> build_model(const ModelSpec& spec, std::uint64_t seed) {
  const Layout layout = make_layout(spec);
  std::mt19937_64 rng(seed);
  ParamSet<T> params;
  for (const auto& def : layout.layers) {
    switch (def.kind) {
      case LayerKind::kConv2d:
        params.layers.push_back(make_conv_layer<T>(def.name, def.in, def.out, rng));
        break;
      case LayerKind::kDense:
        params.layers.push_back(make_dense_layer<T>(def.name, def.in, def.out, rng));
        break;
      case LayerKind::kLstm:
        params.layers.push_back(make_lstm_layer<T>(def.name, def.in, def.out, rng));
        break;
    }
  }
  return params;
}

template <class T>
ForwardResult<T> forward(const ModelSpec& spec, const ParamSet<T>& params, const Tensor4<T>& batch,
                         bool training, std::uint64_t seed) {
  return run_forward(spec, params, batch, training, seed, true);
}

template <class T>
Tensor4<T> predict(const ModelSpec& spec, const ParamSet<T>& params, const Tensor4<T>& batch) {
  return run_forward(spec, params, batch, false, 0, false).output;
}

template <class T>
ParamSet<T> backward(const ModelSpec& spec, const ParamSet<T>& params, const ForwardTrace<T>& trace,
                     const Tensor4<T>& grad_output) {
  const Layout layout = make_layout(spec);
  if (trace.ops.size() != layout.ops.size()) {
    throw Error(ErrorKind::kShapeMismatch, "trace does not belong to this model");
  }
  ParamSet<T> grads = params.zeros_like();
  Tensor4<T> g = grad_output;
  for (std::size_t i = layout.ops.size(); i-- > 0;) {
    const Op& op = layout.ops[i];
    const OpRecord<T>& rec = trace.ops[i];
    switch (op.type) {
      case OpType::kConv:
      case OpType::kDense: {
        const auto& p = params.layers[op.layer];
        Tensor4<T> gz = activate_backward(op.act, g, rec.pre_activation, rec.output);
        auto lg = op.type == OpType::kConv ? conv2d_backward(gz, rec.input, p)
                                           : dense_backward(gz, rec.input, p);
        accumulate(grads.layers[op.layer], lg.params);
        g = std::move(lg.input);
        break;
      }
      case OpType::kPool:
        g = maxpool2_backward(g, rec.argmax, rec.input.shape());
        break;
      case OpType::kUpsample:
        g = upsample2_backward(g);
        break;
      case OpType::kDropout:
        g = dropout_backward(g, rec.dropout_scale);
        break;
      case OpType::kLstm: {
        const auto& p = params.layers[op.layer];
        auto sg = lstm_sequence_backward(split_steps(g, spec.timesteps), rec.lstm_caches, p);
        accumulate(grads.layers[op.layer], sg.params);
        g = join_steps(sg.inputs, rec.input.shape());
        break;
      }
      case OpType::kReshape:
        g = std::move(g).reshaped(rec.input.shape());
        break;
    }
  }
  return grads;
}

Tensor4<float> prepare_input(const MultibandImage& x, const CloudMask& mask) {
  if (mask.height() != x.height() || mask.width() != x.width()) {
    throw Error(ErrorKind::kDimMismatch, "mask does not match image dimensions");
  }
  const std::size_t bands = x.bands();
  Tensor4<float> t(Shape4{1, x.height(), x.width(), bands + 1});
  for (std::size_t p = 0; p < x.pixels(); ++p) {
    const float* px = x.data().data() + p * bands;
    const bool gap = mask[p] || std::any_of(px, px + bands, [](float v) { return std::isnan(v); });
    if (!gap) std::copy(px, px + bands, &t[p * (bands + 1)]);
    t[p * (bands + 1) + bands] = gap ? 1.0f : 0.0f;
  }
  return t;
}

template <class T>
Tensor4<T> stack_frames(const std::vector<Tensor4<T>>& frames) {
  if (frames.empty()) throw Error(ErrorKind::kShapeMismatch, "no frames to stack");
  const Shape4 one = frames[0].shape();
  std::vector<T> values;
  values.reserve(one.size() * frames.size());
  std::size_t n = 0;
  for (const auto& f : frames) {
    if (f.shape().h != one.h || f.shape().w != one.w || f.shape().c != one.c) {
      throw Error(ErrorKind::kShapeMismatch, "frames differ in shape");
    }
    values.insert(values.end(), f.values().begin(), f.values().end());
    n += f.shape().n;
  }
  return Tensor4<T>(Shape4{n, one.h, one.w, one.c}, std::move(values));
}

template <class T>
Tensor4<T> frame(const Tensor4<T>& batch, std::size_t index) {
  const Shape4& s = batch.shape();
  if (index >= s.n) throw Error(ErrorKind::kShapeMismatch, "frame index out of range");
  const T* src = batch.data() + index * s.item();
  return Tensor4<T>(Shape4{1, s.h, s.w, s.c}, std::vector<T>(src, src + s.item()));
}

#define CLOUDPATCH_INSTANTIATE(T)                                                              \
  template ParamSet<T> build_model<T>(const ModelSpec&, std::uint64_t);                        \
  template ForwardResult<T> forward<T>(const ModelSpec&, const ParamSet<T>&, const Tensor4<T>&, \
                                       bool, std::uint64_t);                                   \
  template Tensor4<T> predict<T>(const ModelSpec&, const ParamSet<T>&, const Tensor4<T>&);     \
  template ParamSet<T> backward<T>(const ModelSpec&, const ParamSet<T>&,                       \
                                   const ForwardTrace<T>&, const Tensor4<T>&);                 \
  template Tensor4<T> stack_frames<T>(const std::vector<Tensor4<T>>&);                         \
  template Tensor4<T> frame<T>(const Tensor4<T>&, std::size_t);
CLOUDPATCH_INSTANTIATE(float)
CLOUDPATCH_INSTANTIATE(double)
#undef CLOUDPATCH_INSTANTIATE

}  // namespace cloudpatch

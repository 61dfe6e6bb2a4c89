#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cloudpatch/layers.hpp"
#include "cloudpatch/lstm.hpp"
#include "cloudpatch/raster.hpp"
#include "cloudpatch/tensor.hpp"

namespace cloudpatch {

enum class ModelKind { kCnn, kAutoencoderCnn, kCnnLstm, kAutoencoderLstm };

std::string_view to_string(ModelKind kind);
// Throws UnsupportedKind for anything else, including the Inception-ResNet
// variants.
ModelKind parse_model_kind(std::string_view name);

inline constexpr std::size_t kInputChannels = 9;  // 8 bands + gap indicator
inline constexpr std::size_t kOutputChannels = 8;
inline constexpr std::size_t kSequenceLength = 5;

struct ModelSpec {
  ModelKind kind = ModelKind::kCnn;
  std::size_t height = 64;
  std::size_t width = 64;
  std::size_t in_channels = kInputChannels;
  std::size_t out_channels = kOutputChannels;
  std::vector<std::size_t> filters;
  std::size_t lstm_units = 0;
  double dropout = 0.0;
  std::size_t timesteps = 1;

  // Hyperparameters from the published configuration table for `kind`.
  static ModelSpec for_kind(ModelKind kind, std::size_t height, std::size_t width);

  bool temporal() const noexcept {
    return kind == ModelKind::kCnnLstm || kind == ModelKind::kAutoencoderLstm;
  }
  void validate() const;

  // `key = value` lines; stored as the checkpoint header.
  std::string serialize() const;
  static ModelSpec parse(std::string_view text);

  bool operator==(const ModelSpec&) const = default;
};

template <class T>
ParamSet<T> build_model(const ModelSpec& spec, std::uint64_t seed);

// One recorded op of a forward pass, sufficient for its backward.
template <class T>
struct OpRecord {
  Tensor4<T> input;
  Tensor4<T> pre_activation;
  Tensor4<T> output;
  std::vector<std::uint32_t> argmax;
  std::vector<T> dropout_scale;
  std::vector<LstmStepCache<T>> lstm_caches;
};

template <class T>
struct ForwardTrace {
  std::vector<OpRecord<T>> ops;
};

template <class T>
struct ForwardResult {
  Tensor4<T> output;
  ForwardTrace<T> trace;
};

// Spatial kinds take (N,H,W,9) and return (N,H,W,8). Temporal kinds take
// N sequences stacked frame-major as (N*5,H,W,9), frame n*5+t, and return
// one prediction per frame in the same layout. Dropout noise is drawn from
// `seed` when training is set.
template <class T>
ForwardResult<T> forward(const ModelSpec& spec, const ParamSet<T>& params, const Tensor4<T>& batch,
                         bool training, std::uint64_t seed);

template <class T>
Tensor4<T> predict(const ModelSpec& spec, const ParamSet<T>& params, const Tensor4<T>& batch);

template <class T>
ParamSet<T> backward(const ModelSpec& spec, const ParamSet<T>& params, const ForwardTrace<T>& trace,
                     const Tensor4<T>& grad_output);

// Channels 0..7: band values, zeroed in every cell to impute. Channel 8: 1
// where the cell must be imputed (artificial mask or NaN in any band).
Tensor4<float> prepare_input(const MultibandImage& x, const CloudMask& mask);

// Concatenates (1,H,W,C) frames along the batch axis.
template <class T>
Tensor4<T> stack_frames(const std::vector<Tensor4<T>>& frames);

// Frame `index` of a batch as a (1,H,W,C) tensor.
template <class T>
Tensor4<T> frame(const Tensor4<T>& batch, std::size_t index);

}  // namespace cloudpatch

#pragma once

#include <cstdint>

#include "pidrme/network.hpp"
#include "pidrme/sampling.hpp"

namespace pidrme {

using Tensord = Tensor<double>;
using Params = ParamTree<double>;

struct AutoencoderParams {
  Params encoder;
  Params decoder;

  /// Encoder blocks followed by decoder blocks.
  Params joined() const;
  void assign_joined(const Params& all);
  Index size() const { return encoder.size() + decoder.size(); }
  friend bool operator==(const AutoencoderParams&, const AutoencoderParams&) = default;
};

// g_com: its encoder is averaged across clients, its decoder stays local.
using CommonAE = AutoencoderParams;
// g_ind: never leaves its client.
using IndividualAE = AutoencoderParams;

/// Conv encoder (in -> 16 -> 32 -> 64, stride 2 each) with a mirrored
/// upsample+conv decoder ending in a single sigmoid channel.
class AutoencoderNet {
 public:
  struct Trace {
    Sequential<double>::Trace encoder;
    Sequential<double>::Trace decoder;
  };

  explicit AutoencoderNet(Index in_channels);

  Index in_channels() const { return in_channels_; }
  const Sequential<double>& encoder() const { return encoder_; }
  const Sequential<double>& decoder() const { return decoder_; }

  AutoencoderParams init_params(std::uint64_t seed) const;
  AutoencoderParams zero_params() const;

  Tensord forward(const AutoencoderParams& params, const Tensord& input, Trace* trace = nullptr) const;

  /// Returns d loss / d input; parameter gradients accumulate into `grads` if given.
  Tensord backward(const AutoencoderParams& params, const Trace& trace, const Tensord& grad_out,
                   AutoencoderParams* grads) const;

 private:
  Index in_channels_;
  Sequential<double> encoder_;
  Sequential<double> decoder_;
};

inline constexpr Index kDownsampleFactor = 8;

const AutoencoderNet& common_net();      // 3 input channels
const AutoencoderNet& individual_net();  // Phi_com plus the 3 input channels

AutoencoderParams zero_grads(const AutoencoderParams& like);

/// Pathloss-pattern estimate Phi_com, 1 x H x W in [0, 1].
Tensord forward_common(const CommonAE& ae, const InputTensor& input, AutoencoderNet::Trace* trace = nullptr);

/// Individual estimate Phi^s from concat(Phi_com, input), 1 x H x W in [0, 1].
Tensord forward_individual(const IndividualAE& ae, const Tensord& common_out, const InputTensor& input,
                           AutoencoderNet::Trace* trace = nullptr);

/// Backward through g_ind; returns the gradient w.r.t. Phi_com (channel 0 of its input).
Tensord backward_individual(const IndividualAE& ae, const AutoencoderNet::Trace& trace, const Tensord& grad_out,
                            IndividualAE* grads);

void backward_common(const CommonAE& ae, const AutoencoderNet::Trace& trace, const Tensord& grad_out,
                     CommonAE* grads);

inline Grid as_grid(const Tensord& t) { return Grid(t.channel(0)); }

}  // namespace pidrme

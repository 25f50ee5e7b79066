#include "pidrme/model.hpp"

#include <string>

namespace pidrme {

namespace {

std::vector<LayerSpec> encoder_layers(Index in) {
  return {LayerSpec::conv(in, 16, 2), LayerSpec::leaky_relu(), LayerSpec::conv(16, 32, 2), LayerSpec::leaky_relu(),
          LayerSpec::conv(32, 64, 2), LayerSpec::leaky_relu()};
}

std::vector<LayerSpec> decoder_layers() {
  return {LayerSpec::upsample(),      LayerSpec::conv(64, 32), LayerSpec::leaky_relu(),
          LayerSpec::upsample(),      LayerSpec::conv(32, 16), LayerSpec::leaky_relu(),
          LayerSpec::upsample(),      LayerSpec::conv(16, 1),  LayerSpec::sigmoid()};
}

}  // namespace

Params AutoencoderParams::joined() const {
  Params all = encoder;
  all.convs.insert(all.convs.end(), decoder.convs.begin(), decoder.convs.end());
  return all;
}

void AutoencoderParams::assign_joined(const Params& all) {
  if (all.convs.size() != encoder.convs.size() + decoder.convs.size()) {
    throw ShapeError("assign_joined: block count mismatch");
  }
  const auto split = all.convs.begin() + static_cast<std::ptrdiff_t>(encoder.convs.size());
  Params enc{{all.convs.begin(), split}};
  Params dec{{split, all.convs.end()}};
  encoder.require_same_shape(enc);
  decoder.require_same_shape(dec);
  encoder = std::move(enc);
  decoder = std::move(dec);
}

AutoencoderNet::AutoencoderNet(Index in_channels)
    : in_channels_(in_channels), encoder_(encoder_layers(in_channels)), decoder_(decoder_layers()) {}

AutoencoderParams AutoencoderNet::init_params(std::uint64_t seed) const {
  return {encoder_.init_params(mix_seed(seed, 11)), decoder_.init_params(mix_seed(seed, 12))};
}

AutoencoderParams AutoencoderNet::zero_params() const { return {encoder_.zero_params(), decoder_.zero_params()}; }

Tensord AutoencoderNet::forward(const AutoencoderParams& params, const Tensord& input, Trace* trace) const {
  if (input.channels() != in_channels_) {
    throw ShapeError("autoencoder: expected " + std::to_string(in_channels_) + " input channels, got " +
                     input.shape_string());
  }
  if (input.height() % kDownsampleFactor != 0 || input.width() % kDownsampleFactor != 0) {
    throw ShapeError("autoencoder: height and width must be divisible by 8, got " + input.shape_string());
  }
  const Tensord latent = encoder_.forward(params.encoder, input, trace ? &trace->encoder : nullptr);
  return decoder_.forward(params.decoder, latent, trace ? &trace->decoder : nullptr);
}

Tensord AutoencoderNet::backward(const AutoencoderParams& params, const Trace& trace, const Tensord& grad_out,
                                 AutoencoderParams* grads) const {
  const Tensord g_latent =
      decoder_.backward(params.decoder, trace.decoder, grad_out, grads ? &grads->decoder : nullptr);
  return encoder_.backward(params.encoder, trace.encoder, g_latent, grads ? &grads->encoder : nullptr);
}

const AutoencoderNet& common_net() {
  static const AutoencoderNet net(kInputChannels);
  return net;
}

const AutoencoderNet& individual_net() {
  static const AutoencoderNet net(kInputChannels + 1);
  return net;
}

AutoencoderParams zero_grads(const AutoencoderParams& like) {
  return {like.encoder.zeros_like(), like.decoder.zeros_like()};
}

Tensord forward_common(const CommonAE& ae, const InputTensor& input, AutoencoderNet::Trace* trace) {
  return common_net().forward(ae, input, trace);
}

Tensord forward_individual(const IndividualAE& ae, const Tensord& common_out, const InputTensor& input,
                           AutoencoderNet::Trace* trace) {
  if (common_out.channels() != 1) throw ShapeError("forward_individual: Phi_com must have one channel");
  return individual_net().forward(ae, concat_channels(common_out, input), trace);
}

Tensord backward_individual(const IndividualAE& ae, const AutoencoderNet::Trace& trace, const Tensord& grad_out,
                            IndividualAE* grads) {
  const Tensord g_in = individual_net().backward(ae, trace, grad_out, grads);
  return split_channels(g_in, 1).first;
}

void backward_common(const CommonAE& ae, const AutoencoderNet::Trace& trace, const Tensord& grad_out,
                     CommonAE* grads) {
  common_net().backward(ae, trace, grad_out, grads);
}

}  // namespace pidrme

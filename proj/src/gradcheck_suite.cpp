#include "pidrme/gradcheck_suite.hpp"

#include <chrono>
#include <random>

#include "pidrme/losses.hpp"
#include "pidrme/model.hpp"

namespace pidrme {

namespace {

Tensord random_tensor(Index c, Index h, Index w, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensord t(c, h, w);
  for (Index i = 0; i < t.data().size(); ++i) t.data().data()[i] = u(rng);
  return t;
}

GradCheckCase check_stack(const std::string& name, std::vector<LayerSpec> layers, Index c, Index h, Index w,
                          double threshold, std::uint64_t seed, Index max_per_tensor = 0) {
  std::mt19937_64 rng(seed);
  Sequential<double> net(std::move(layers));
  const Params params = net.init_params(mix_seed(seed, 1));
  const Tensord input = random_tensor(c, h, w, rng);
  const Tensord probe = net.forward(params, input);
  const Tensord target = random_tensor(probe.channels(), probe.height(), probe.width(), rng, 0.0, 1.0);
  GradCheckOptions opts;
  opts.max_per_tensor = max_per_tensor;
  return {name, finite_diff_check<double>(net, params, input, half_squared_error(target), opts), threshold};
}

Params concat_trees(const Params& a, const Params& b) {
  Params out = a;
  out.convs.insert(out.convs.end(), b.convs.begin(), b.convs.end());
  return out;
}

AutoencoderParams split_ae(const Params& all, std::size_t first, const AutoencoderParams& like) {
  Params joined;
  const std::size_t n = like.encoder.convs.size() + like.decoder.convs.size();
  joined.convs.assign(all.convs.begin() + static_cast<std::ptrdiff_t>(first),
                      all.convs.begin() + static_cast<std::ptrdiff_t>(first + n));
  AutoencoderParams out = like;
  out.assign_joined(joined);
  return out;
}

Tensord grid_tensor(const Grid& g) { return Tensord::from_grid(g); }

}  // namespace

double GradCheckReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& c : cases) m = std::max(m, c.result.max_rel_error);
  return m;
}

bool GradCheckReport::passed() const {
  for (const auto& c : cases) {
    if (!c.passed()) return false;
  }
  return !cases.empty();
}

GradCheckReport run_gradcheck_suite(const GradCheckSuiteOptions& opts) {
  const auto start = std::chrono::steady_clock::now();
  GradCheckReport report;
  const std::uint64_t s = opts.seed;
  const double lin = opts.linear_threshold;
  const double lay = opts.layer_threshold;

  report.cases.push_back(check_stack("conv3x3 stride 1", {LayerSpec::conv(2, 3, 1)}, 2, 7, 6, lin, mix_seed(s, 1)));
  report.cases.push_back(check_stack("conv3x3 stride 2", {LayerSpec::conv(3, 2, 2)}, 3, 8, 7, lin, mix_seed(s, 2)));
  report.cases.push_back(check_stack("upsample x2", {LayerSpec::conv(2, 2, 1), LayerSpec::upsample()}, 2, 4, 5, lin,
                                     mix_seed(s, 3)));
  report.cases.push_back(check_stack("linear stack",
                                     {LayerSpec::conv(2, 4, 2), LayerSpec::conv(4, 3, 1), LayerSpec::upsample(),
                                      LayerSpec::conv(3, 1, 1)},
                                     2, 8, 8, lin, mix_seed(s, 4)));
  report.cases.push_back(check_stack("leaky relu", {LayerSpec::conv(2, 3, 1), LayerSpec::leaky_relu()}, 2, 6, 6, lay,
                                     mix_seed(s, 5)));
  report.cases.push_back(
      check_stack("sigmoid", {LayerSpec::conv(2, 2, 1), LayerSpec::sigmoid()}, 2, 6, 6, lay, mix_seed(s, 6)));

  const Index n = opts.size;
  std::mt19937_64 rng(mix_seed(s, 7));
  const InputTensor input = random_tensor(kInputChannels, n, n, rng, 0.0, 1.0);
  const Grid truth = random_tensor(1, n, n, rng, 0.0, 1.0).channel(0);
  const Grid psi = random_tensor(1, n, n, rng, 0.0, 1.0).channel(0);

  const AutoencoderNet& com_net = common_net();
  const AutoencoderNet& ind_net = individual_net();
  const CommonAE com = com_net.init_params(mix_seed(s, 8));
  const IndividualAE ind = ind_net.init_params(mix_seed(s, 9));

  GradCheckOptions sub;
  sub.max_per_tensor = opts.max_per_tensor;

  // Full autoencoders under a half squared error, each as one stack.
  for (int which = 0; which < 2; ++which) {
    const AutoencoderNet& net = which == 0 ? com_net : ind_net;
    const AutoencoderParams& p = which == 0 ? com : ind;
    const Tensord x = which == 0 ? input : concat_channels(grid_tensor(psi), input);
    std::vector<LayerSpec> layers = net.encoder().layers();
    layers.insert(layers.end(), net.decoder().layers().begin(), net.decoder().layers().end());
    Sequential<double> stack(layers);
    const auto loss = half_squared_error(grid_tensor(truth));
    report.cases.push_back({which == 0 ? "common autoencoder" : "individual autoencoder",
                            finite_diff_check<double>(stack, p.joined(), x, loss, sub), lay});
  }

  // L_rec through g_com -> g_ind, w.r.t. both parameter sets.
  {
    const std::size_t com_blocks = com.joined().convs.size();
    auto value = [&](const Params& all, std::size_t) {
      const CommonAE c = split_ae(all, 0, com);
      const IndividualAE i = split_ae(all, com_blocks, ind);
      AutoencoderNet::Trace a;
      AutoencoderNet::Trace b;
      const Tensord phi = forward_common(c, input, &a);
      Probe<double> probe{loss_rec(as_grid(forward_individual(i, phi, input, &b)), truth).value, {}};
      for (const auto* t : {&a, &b}) {
        append_regions(t->encoder, probe.regions);
        append_regions(t->decoder, probe.regions);
      }
      return probe;
    };
    AutoencoderNet::Trace tc;
    AutoencoderNet::Trace ti;
    const Tensord phi = forward_common(com, input, &tc);
    const Tensord out = forward_individual(ind, phi, input, &ti);
    const LossGrad lr = loss_rec(as_grid(out), truth);
    CommonAE gc = zero_grads(com);
    IndividualAE gi = zero_grads(ind);
    const Tensord g_phi = backward_individual(ind, ti, grid_tensor(lr.grad), &gi);
    backward_common(com, tc, g_phi, &gc);
    report.cases.push_back({"reconstruction loss through both modules",
                            finite_diff_check<double>(ProbeFn<double>(value), concat_trees(com.joined(), ind.joined()),
                                                      concat_trees(gc.joined(), gi.joined()), sub),
                            lay});
  }

  // mu1 * L_gra through g_com.
  {
    const double mu1 = LossWeights{}.mu1;
    auto value = [&](const Params& all, std::size_t) {
      AutoencoderNet::Trace a;
      Probe<double> probe{mu1 * loss_gra(as_grid(forward_common(split_ae(all, 0, com), input, &a)), psi).value, {}};
      append_regions(a.encoder, probe.regions);
      append_regions(a.decoder, probe.regions);
      return probe;
    };
    AutoencoderNet::Trace tc;
    const Tensord out = forward_common(com, input, &tc);
    const LossGrad lg = loss_gra(as_grid(out), psi);
    CommonAE gc = zero_grads(com);
    backward_common(com, tc, grid_tensor(Grid(mu1 * lg.grad)), &gc);
    report.cases.push_back(
        {"weighted gradient loss through common module", finite_diff_check<double>(ProbeFn<double>(value), com.joined(), gc.joined(), sub),
         opts.loss_threshold});
  }

  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace pidrme

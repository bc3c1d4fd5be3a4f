#include "rcabs/pipeline.hpp"

#include <cmath>

#include "rcabs/rng.hpp"

namespace rcabs {

TrainedSystem train_system(const AttractorSpec& spec, const ReservoirParams& params, const TrainingConfig& cfg,
                           bool keep_training_set) {
  TrainedSystem sys{spec, cfg, build_reservoir(params, spec.dimension()), {}, {}, 0.0, std::nullopt};
  TrainingSet ts = assemble_training_set(sys.reservoir, spec, cfg);
  ReadoutFit fit = fit_readout(ts, cfg.ridge_beta);
  sys.readout = std::move(fit.readout);
  sys.rcond = fit.rcond;
  sys.fit = training_error(sys.readout, ts);
  if (keep_training_set) sys.training_set = std::move(ts);
  return sys;
}

Vec prepare_state(const Reservoir& res, const AttractorSpec& spec, const TrainingConfig& cfg, double c,
                  double prepare_s, std::uint64_t seed) {
  const Index skip = cfg.transient_steps();
  const Index prep = static_cast<Index>(std::llround(prepare_s / cfg.dt));
  Vec r = uniform_state(res.neurons(), substream_seed(seed, Stream::prepare_state, 0));
  if (prep == 0) return r;
  const Trajectory x = integrate(spec, cfg.attractor_start(spec), cfg.dt, skip + prep);
  const Trajectory input = shift(x.slice(skip, skip + prep + 1), ShiftSpec{cfg.direction(spec.dimension()), c});
  drive_streaming(res, input, r, [](Index, const Vec&) {});
  return r;
}

LyapunovResult closed_loop_spectrum(const Reservoir& res, const OutputMatrix& W, const AttractorSpec& spec,
                                    const TrainingConfig& cfg, const LyapunovConfig& lyap, double c,
                                    double prepare_s, std::uint64_t seed) {
  ClosedLoopOrbit orbit(res, W, prepare_state(res, spec, cfg, c, prepare_s, seed));
  return lyapunov_spectrum(orbit, lyap);
}

Index classification_exponents(AttractorKind kind) { return kind == AttractorKind::limit_cycle ? 4 : 5; }

void apply_desk_scale(ReservoirParams& reservoir, TrainingConfig& training, LyapunovConfig& lyapunov) {
  reservoir.n_neurons = 300;
  training.learn_s = 50.0;
  lyapunov.measure_s = 50.0;
}

}  // namespace rcabs

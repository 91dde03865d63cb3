// Serial-vs-OpenMP comparison for the two data-parallel kernels: the
// Monte-Carlo output-range sampler and the SNR sweep. Both paths share
// one body and per-index RNG streams, so results must match exactly;
// this harness times them and verifies that equality.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>

#include "oracles.hpp"
#include "semcom/parallel.hpp"
#include "semcom/pipeline.hpp"

using namespace semcom;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

ExperimentConfig bench_config(int trials) {
  ExperimentConfig cfg;
  cfg.snr_db = {0, 6, 12, 18};
  cfg.trials = trials;
  cfg.train_epochs = 60;
  cfg.train_samples = 128;
  cfg.calib_samples = 128;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  const bool smoke = argc > 1 && std::strcmp(argv[1], "--smoke") == 0;
  const std::size_t samples = smoke ? 20000 : 400000;
  const int trials = smoke ? 10 : 200;
  const int parallel_jobs = effective_jobs(0);

  std::printf("kernel                 jobs=1      jobs=%-2d     speedup  match\n", parallel_jobs);

  // Output-range sampling over a trained decoder.
  {
    ExperimentConfig cfg = bench_config(trials);
    ToyFusionModel model = build_model(cfg);
    Dataset data = make_synthetic_dataset(cfg.seed, cfg.modality_dims, 1);
    auto features = encode_features(model, data.front().inputs);
    PerturbationBall ball{NormOrder::linf, Vec(cfg.modality_dims.size(), 0.1)};

    auto t0 = std::chrono::steady_clock::now();
    auto serial = oracles::output_range(model.decoder, features, ball, samples, 99, 1);
    const double t_serial = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    auto parallel = oracles::output_range(model.decoder, features, ball, samples, 99, 0);
    const double t_parallel = seconds_since(t0);

    const bool match =
        serial.front().lo == parallel.front().lo && serial.front().hi == parallel.front().hi;
    std::printf("range sampler (%7zu) %8.3fs  %8.3fs  %6.2fx  %s\n", samples, t_serial,
                t_parallel, t_serial / t_parallel, match ? "yes" : "NO");
    if (!match) return 1;
  }

  // Full sweep, adaptive + fixed + errorfree.
  {
    ExperimentConfig cfg = bench_config(trials);
    cfg.jobs = 1;
    auto t0 = std::chrono::steady_clock::now();
    SweepResult serial = snr_sweep(cfg);
    const double t_serial = seconds_since(t0);

    cfg.jobs = 0;
    t0 = std::chrono::steady_clock::now();
    SweepResult parallel = snr_sweep(cfg);
    const double t_parallel = seconds_since(t0);

    const bool match = sweep_csv(serial) == sweep_csv(parallel);
    std::printf("snr sweep (%4d x %2zu)  %8.3fs  %8.3fs  %6.2fx  %s\n", trials,
                cfg.snr_db.size(), t_serial, t_parallel, t_serial / t_parallel,
                match ? "yes" : "NO");
    if (!match) return 1;
  }
  return 0;
}

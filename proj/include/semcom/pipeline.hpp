#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "semcom/bounds.hpp"
#include "semcom/channel.hpp"
#include "semcom/model.hpp"
#include "semcom/ratesolver.hpp"

namespace semcom {

enum class Scheme { adaptive, fixed_rate, errorfree };
std::string scheme_name(Scheme s);
Scheme scheme_from_name(const std::string& name);

struct ExperimentConfig {
  std::uint64_t seed = 7;
  std::vector<std::size_t> modality_dims = {2, 16, 8};
  std::size_t hidden_dim = 16;
  unsigned bits_per_element = 8;
  double blocklength = 256.0;
  double delta0 = 1e-3;
  Fading fading = Fading::awgn;
  std::vector<double> snr_db = {0, 3, 6, 9, 12, 15, 18};
  int trials = 100;
  std::vector<Scheme> schemes = {Scheme::adaptive, Scheme::fixed_rate, Scheme::errorfree};
  NormOrder p = NormOrder::linf;
  double tol = 1e-6;
  int jobs = 1;
  bool freeze_kappa = false;
  double tx_power = 1.0;
  int train_epochs = 200;
  double train_step = 0.1;
  std::size_t train_samples = 256;
  std::size_t calib_samples = 256;
  // Per-modality emphasis of the synthetic task's hidden teacher
  // (empty = uniform); shapes the kappa profile of trained models.
  Vec teacher_emphasis;

  std::vector<std::string> violations() const;
};

nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const nlohmann::json& j);

struct ModalityTrial {
  double rate = 0.0;
  double eps = 0.0;
  double delta_realized = 0.0;  // measured L-inf feature distortion
  double gain = 1.0;
  std::size_t flips = 0;
  std::size_t bits = 0;
};

struct TrialResult {
  bool ok = false;
  std::string error;
  std::vector<ModalityTrial> modalities;
  Vec kappa;
  double gamma_pred = 0.0;      // solver's sum a_m * eps_m
  double gamma_realized = 0.0;  // certified output-box width at realized distortions
  double deviation = 0.0;       // |y_hat - y_clean|
  double delay = 0.0;           // channel uses
  double y_hat = 0.0;
  double y_clean = 0.0;
  double label = 0.0;
};

// Deterministic model construction for a config: make, train, calibrate.
ToyFusionModel build_model(const ExperimentConfig& cfg);

// Importance weights from bound propagation at the feasible-region
// ceiling (per-element distortion 1/2 covers worst-case flips plus
// rounding).
Vec compute_kappa(const ToyFusionModel& model, const std::vector<Vec>& features,
                  const ExperimentConfig& cfg);

// One adaptive trial: encode, bound, solve, quantize, transmit, decode,
// then re-certify at the realized distortions. `stream_seed` isolates
// this trial's bit-flip randomness.
TrialResult run_adaptive(const ToyFusionModel& model, const RegressionSample& sample,
                         const std::vector<ChannelState>& states, const ExperimentConfig& cfg,
                         std::uint64_t stream_seed, const Vec* frozen_kappa = nullptr);

// Same pipeline at one uniform rate for every modality.
TrialResult run_fixed(const ToyFusionModel& model, const RegressionSample& sample,
                      const std::vector<ChannelState>& states, double fixed_rate,
                      const ExperimentConfig& cfg, std::uint64_t stream_seed,
                      const Vec* frozen_kappa = nullptr);

struct SweepRow {
  double snr_db = 0.0;
  Scheme scheme = Scheme::adaptive;
  int trial = 0;
  int modality = 0;
  double rate = 0.0;
  double eps = 0.0;
  double delta_realized = 0.0;
  double gamma_realized = 0.0;
  double deviation = 0.0;
  double delay = 0.0;
  double mse = 0.0;
  double mae = 0.0;
  // transcript extras (not part of the main CSV schema)
  double gain = 1.0;
  std::size_t flips = 0;
  std::size_t bits = 0;
};

struct SweepSummary {
  double snr_db = 0.0;
  Scheme scheme = Scheme::adaptive;
  int trials = 0;
  int failures = 0;
  double mse_mean = 0.0;
  double mse_std = 0.0;
  double mae_mean = 0.0;
  double delay_mean = 0.0;
  double gamma_realized_mean = 0.0;
  Vec rate_mean;  // per modality
};

struct SweepResult {
  ExperimentConfig config;
  std::vector<SweepRow> rows;
  std::vector<SweepSummary> summaries;
};

// Full sweep over the SNR grid. Trials run under parallel_for with
// per-trial substreams and preallocated slots, so the output is
// byte-identical for every jobs value.
SweepResult snr_sweep(const ExperimentConfig& cfg);

// Main CSV (header: snr_db,scheme,trial,modality,rate,eps,
// delta_realized,gamma_realized,deviation,delay,mse,mae).
std::string sweep_csv(const SweepResult& result);
// Channel transcript CSV (gains, error probabilities, flip counts).
std::string transcript_csv(const SweepResult& result);
std::string summary_lines(const SweepResult& result);

void write_text_file(const std::string& path, const std::string& content);

// Illustrative MCS quantizer: snap a rate to the densest table entry
// not exceeding it.
struct McsEntry {
  double code_rate = 0.5;
  int bits_per_symbol = 2;
};
struct McsChoice {
  McsEntry entry;
  double effective_rate = 0.0;
  bool below_table = false;  // requested rate under the smallest entry
};
McsChoice mcs_snap(double rate, const std::vector<McsEntry>& table);
std::vector<McsEntry> default_mcs_table();

}  // namespace semcom

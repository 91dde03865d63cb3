#include "semcom/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "semcom/parallel.hpp"
#include "semcom/quant.hpp"
#include "semcom/rng.hpp"
#include "semcom/serialize.hpp"

namespace semcom {

namespace {

// Pipeline-level stream tags (model.cpp owns 1..4).
constexpr std::uint64_t kTagGains = 16;
constexpr std::uint64_t kTagFlips = 17;

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

}  // namespace

std::string scheme_name(Scheme s) {
  switch (s) {
    case Scheme::adaptive:
      return "adaptive";
    case Scheme::fixed_rate:
      return "fixed";
    case Scheme::errorfree:
      return "errorfree";
  }
  return "?";
}

Scheme scheme_from_name(const std::string& name) {
  if (name == "adaptive") return Scheme::adaptive;
  if (name == "fixed") return Scheme::fixed_rate;
  if (name == "errorfree") return Scheme::errorfree;
  throw std::invalid_argument("unknown scheme '" + name + "'");
}

std::vector<std::string> ExperimentConfig::violations() const {
  std::vector<std::string> out;
  if (modality_dims.empty()) out.push_back("modality_dims empty");
  for (std::size_t d : modality_dims)
    if (d < 1) out.push_back("modality dim below 1");
  if (hidden_dim < 1) out.push_back("hidden_dim below 1");
  if (bits_per_element < 1) out.push_back("bits_per_element below 1");
  if (blocklength < 2.0) out.push_back("blocklength below 2");
  if (!(delta0 > 0.0)) out.push_back("delta0 not positive");
  if (snr_db.empty()) out.push_back("snr grid empty");
  for (double s : snr_db)
    if (!std::isfinite(s)) out.push_back("snr grid entry not finite");
  if (trials < 1) out.push_back("trials below 1");
  if (schemes.empty()) out.push_back("no schemes selected");
  if (!(tol > 0.0)) out.push_back("tol not positive");
  if (!(tx_power > 0.0)) out.push_back("tx_power not positive");
  if (!teacher_emphasis.empty() && teacher_emphasis.size() != modality_dims.size())
    out.push_back("teacher_emphasis size mismatch");
  return out;
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json schemes = nlohmann::json::array();
  for (Scheme s : cfg.schemes) schemes.push_back(scheme_name(s));
  return nlohmann::json{{"seed", cfg.seed},
                        {"modality_dims", cfg.modality_dims},
                        {"hidden_dim", cfg.hidden_dim},
                        {"bits", cfg.bits_per_element},
                        {"blocklength", cfg.blocklength},
                        {"delta0", cfg.delta0},
                        {"fading", cfg.fading == Fading::awgn ? "awgn" : "rayleigh"},
                        {"snr_db", cfg.snr_db},
                        {"trials", cfg.trials},
                        {"schemes", std::move(schemes)},
                        {"p", norm_order_name(cfg.p)},
                        {"tol", cfg.tol},
                        {"jobs", cfg.jobs},
                        {"freeze_kappa", cfg.freeze_kappa},
                        {"tx_power", cfg.tx_power},
                        {"train_epochs", cfg.train_epochs},
                        {"train_step", cfg.train_step},
                        {"train_samples", cfg.train_samples},
                        {"calib_samples", cfg.calib_samples},
                        {"teacher_emphasis", cfg.teacher_emphasis}};
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  auto get = [&j](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("seed", cfg.seed);
  get("modality_dims", cfg.modality_dims);
  get("hidden_dim", cfg.hidden_dim);
  get("bits", cfg.bits_per_element);
  get("blocklength", cfg.blocklength);
  get("delta0", cfg.delta0);
  if (j.contains("fading")) {
    const std::string f = j.at("fading").get<std::string>();
    if (f == "awgn")
      cfg.fading = Fading::awgn;
    else if (f == "rayleigh")
      cfg.fading = Fading::rayleigh;
    else
      throw std::invalid_argument("unknown fading '" + f + "'");
  }
  get("snr_db", cfg.snr_db);
  get("trials", cfg.trials);
  if (j.contains("schemes")) {
    cfg.schemes.clear();
    for (const auto& s : j.at("schemes")) cfg.schemes.push_back(scheme_from_name(s));
  }
  if (j.contains("p")) cfg.p = norm_order_from_name(j.at("p").get<std::string>());
  get("tol", cfg.tol);
  get("jobs", cfg.jobs);
  get("freeze_kappa", cfg.freeze_kappa);
  get("tx_power", cfg.tx_power);
  get("train_epochs", cfg.train_epochs);
  get("train_step", cfg.train_step);
  get("train_samples", cfg.train_samples);
  get("calib_samples", cfg.calib_samples);
  get("teacher_emphasis", cfg.teacher_emphasis);
  return cfg;
}

ToyFusionModel build_model(const ExperimentConfig& cfg) {
  const std::size_t total = cfg.train_samples + cfg.calib_samples;
  Dataset data =
      make_synthetic_dataset(cfg.seed, cfg.modality_dims, total, 0.01, cfg.teacher_emphasis);
  Dataset train(data.begin(), data.begin() + cfg.train_samples);
  Dataset calib(data.begin() + cfg.train_samples, data.end());
  ToyFusionModel model = make_toy_fusion(cfg.seed, cfg.modality_dims, cfg.hidden_dim);
  model = train_toy(model, train, cfg.train_epochs, cfg.train_step);
  return calibrate_normalization(model, calib);
}

Vec compute_kappa(const ToyFusionModel& model, const std::vector<Vec>& features,
                  const ExperimentConfig& cfg) {
  PerturbationBall ball{cfg.p, Vec(model.modality_dims.size(), 0.5)};
  LinearBounds lb = propagate_bounds(model.decoder, features, ball);
  return robustness_bound(lb, features, ball).kappa;
}

namespace {

struct TransmittedFeatures {
  std::vector<Vec> received;
  std::vector<ModalityTrial> modalities;
};

// Quantize-transmit-dequantize for each modality at the given rates.
// Features are clamped to the quantizer domain first; rare calibration
// overshoot then shows up in the measured distortion, which the
// certified bound accounts for.
TransmittedFeatures push_through_channel(const std::vector<Vec>& features,
                                         const std::vector<ChannelState>& states,
                                         const Vec& rates, const Vec& eps,
                                         const ExperimentConfig& cfg,
                                         std::uint64_t stream_seed) {
  TransmittedFeatures out;
  for (std::size_t m = 0; m < features.size(); ++m) {
    Vec clamped = features[m];
    for (double& v : clamped) v = std::min(1.0, std::max(0.0, v));
    QuantizedFeature q = quantize(clamped, cfg.bits_per_element);

    RngStream flip_rng(substream(stream_seed, m));
    std::vector<std::uint8_t> received_bits = transmit(q.bits, eps[m], flip_rng);
    std::size_t flips = 0;
    for (std::size_t i = 0; i < q.bits.size(); ++i) flips += q.bits[i] != received_bits[i];

    QuantizedFeature rq{std::move(received_bits), q.bits_per_element, q.element_count};
    Vec received = dequantize(rq);

    ModalityTrial mt;
    mt.rate = rates[m];
    mt.eps = eps[m];
    mt.gain = states[m].gain;
    mt.flips = flips;
    mt.bits = q.bits.size();
    double delta = 0.0;
    for (std::size_t j = 0; j < received.size(); ++j)
      delta = std::max(delta, std::abs(received[j] - features[m][j]));
    mt.delta_realized = delta;

    out.received.push_back(std::move(received));
    out.modalities.push_back(mt);
  }
  return out;
}

// Certified output-box width at the measured per-modality distortions
// (always an L-inf ball: that is what the measurement is).
double certified_width(const ToyFusionModel& model, const std::vector<Vec>& features,
                       const Vec& realized) {
  PerturbationBall ball{NormOrder::linf, realized};
  LinearBounds lb = propagate_bounds(model.decoder, features, ball);
  const auto box = concretize(lb, features, ball);
  double width = 0.0;
  for (const Interval& iv : box) width = std::max(width, iv.hi - iv.lo);
  return width;
}

std::vector<ModalityLink> build_links(const ToyFusionModel& model, const Vec& kappa,
                                      const CsiReport& csi, const ExperimentConfig& cfg) {
  std::vector<ModalityLink> links;
  for (std::size_t m = 0; m < model.modality_dims.size(); ++m) {
    ModalityLink link;
    link.payload_bits =
        static_cast<double>(model.modality_dims[m]) * static_cast<double>(cfg.bits_per_element);
    link.kappa = kappa[m];
    link.link = LinkParams::from_snr(csi.snr[m], cfg.blocklength);
    link.bits_per_element = cfg.bits_per_element;
    links.push_back(link);
  }
  return links;
}

TrialResult finish_trial(const ToyFusionModel& model, const RegressionSample& sample,
                         const std::vector<Vec>& features, TransmittedFeatures&& tx,
                         double delay, const Vec& kappa, double gamma_pred) {
  TrialResult r;
  r.ok = true;
  r.modalities = std::move(tx.modalities);
  r.kappa = kappa;
  r.gamma_pred = gamma_pred;
  r.y_clean = decoder_output(model, features);
  r.y_hat = decoder_output(model, tx.received);
  r.deviation = std::abs(r.y_hat - r.y_clean);
  Vec realized(r.modalities.size());
  for (std::size_t m = 0; m < realized.size(); ++m) realized[m] = r.modalities[m].delta_realized;
  r.gamma_realized = certified_width(model, features, realized);
  r.delay = delay;
  r.label = sample.label;
  return r;
}

}  // namespace

TrialResult run_adaptive(const ToyFusionModel& model, const RegressionSample& sample,
                         const std::vector<ChannelState>& states, const ExperimentConfig& cfg,
                         std::uint64_t stream_seed, const Vec* frozen_kappa) {
  TrialResult failed;
  std::vector<Vec> features = encode_features(model, sample.inputs);
  Vec kappa = frozen_kappa ? *frozen_kappa : compute_kappa(model, features, cfg);

  const CsiReport csi = report_csi(states, stream_seed);
  std::vector<ModalityLink> links = build_links(model, kappa, csi, cfg);
  RateSolution sol;
  try {
    sol = solve_bisection(links, cfg.delta0, cfg.tol);
  } catch (const std::domain_error& e) {
    failed.error = std::string("solve: ") + e.what();
    failed.label = sample.label;
    return failed;
  }

  TransmittedFeatures tx =
      push_through_channel(features, states, sol.rates, sol.eps, cfg, stream_seed);
  TrialResult r =
      finish_trial(model, sample, features, std::move(tx), sol.delay, kappa, sol.gamma_pred);
  return r;
}

TrialResult run_fixed(const ToyFusionModel& model, const RegressionSample& sample,
                      const std::vector<ChannelState>& states, double fixed_rate,
                      const ExperimentConfig& cfg, std::uint64_t stream_seed,
                      const Vec* frozen_kappa) {
  TrialResult failed;
  if (!(fixed_rate > 0.0)) {
    failed.error = "fixed rate must be positive";
    failed.label = sample.label;
    return failed;
  }
  std::vector<Vec> features = encode_features(model, sample.inputs);
  Vec kappa = frozen_kappa ? *frozen_kappa : compute_kappa(model, features, cfg);
  const CsiReport csi = report_csi(states, stream_seed);
  std::vector<ModalityLink> links = build_links(model, kappa, csi, cfg);

  Vec rates(links.size(), fixed_rate), eps(links.size(), 0.0);
  double gamma_pred = 0.0;
  double delay = 0.0;
  for (std::size_t m = 0; m < links.size(); ++m) {
    eps[m] = error_prob_of_rate(links[m].link, fixed_rate);
    gamma_pred += links[m].importance_weight() * eps[m];
    delay = std::max(delay, links[m].payload_bits / fixed_rate);
  }

  TransmittedFeatures tx = push_through_channel(features, states, rates, eps, cfg, stream_seed);
  return finish_trial(model, sample, features, std::move(tx), delay, kappa, gamma_pred);
}

namespace {

struct TrialSlot {
  TrialResult adaptive;
  TrialResult fixed;
};

SweepSummary summarize(double snr_db, Scheme scheme, const std::vector<SweepRow>& rows,
                       std::size_t modalities, int failures) {
  SweepSummary s;
  s.snr_db = snr_db;
  s.scheme = scheme;
  s.failures = failures;
  s.rate_mean.assign(modalities, 0.0);
  double mse_acc = 0.0, mse_sq = 0.0, mae_acc = 0.0, delay_acc = 0.0, gamma_acc = 0.0;
  int trials = 0;
  for (const SweepRow& r : rows) {
    if (r.snr_db != snr_db || r.scheme != scheme) continue;
    s.rate_mean[static_cast<std::size_t>(r.modality)] += r.rate;
    if (r.modality != 0) continue;  // trial-level fields repeat per modality
    ++trials;
    mse_acc += r.mse;
    mse_sq += r.mse * r.mse;
    mae_acc += r.mae;
    delay_acc += r.delay;
    gamma_acc += r.gamma_realized;
  }
  s.trials = trials;
  if (trials > 0) {
    s.mse_mean = mse_acc / trials;
    s.mse_std = std::sqrt(std::max(0.0, mse_sq / trials - s.mse_mean * s.mse_mean));
    s.mae_mean = mae_acc / trials;
    s.delay_mean = delay_acc / trials;
    s.gamma_realized_mean = gamma_acc / trials;
    for (double& v : s.rate_mean) v /= trials;
  }
  return s;
}

void emit_rows(std::vector<SweepRow>& rows, const TrialResult& trial, double snr_db, Scheme scheme,
               int trial_index) {
  const double err = trial.y_hat - trial.label;
  for (std::size_t m = 0; m < trial.modalities.size(); ++m) {
    const ModalityTrial& mt = trial.modalities[m];
    SweepRow row;
    row.snr_db = snr_db;
    row.scheme = scheme;
    row.trial = trial_index;
    row.modality = static_cast<int>(m);
    row.rate = mt.rate;
    row.eps = mt.eps;
    row.delta_realized = mt.delta_realized;
    row.gamma_realized = trial.gamma_realized;
    row.deviation = trial.deviation;
    row.delay = trial.delay;
    row.mse = err * err;
    row.mae = std::abs(err);
    row.gain = mt.gain;
    row.flips = mt.flips;
    row.bits = mt.bits;
    rows.push_back(row);
  }
}

}  // namespace

SweepResult snr_sweep(const ExperimentConfig& cfg) {
  {
    const auto bad = cfg.violations();
    if (!bad.empty()) throw std::invalid_argument("snr_sweep: invalid config: " + bad.front());
  }
  SweepResult result;
  result.config = cfg;

  const ToyFusionModel model = build_model(cfg);
  const std::size_t modalities = cfg.modality_dims.size();

  // Evaluation samples live past the train and calibration slices of
  // the same synthetic stream, so they share the teacher.
  const std::size_t skip = cfg.train_samples + cfg.calib_samples;
  Dataset all = make_synthetic_dataset(cfg.seed, cfg.modality_dims,
                                       skip + static_cast<std::size_t>(cfg.trials), 0.01,
                                       cfg.teacher_emphasis);
  const Dataset eval(all.begin() + skip, all.end());

  Vec frozen_kappa;
  if (cfg.freeze_kappa) {
    // Frozen importance comes from the first evaluation sample.
    frozen_kappa = compute_kappa(model, encode_features(model, eval.front().inputs), cfg);
  }

  const std::size_t points = cfg.snr_db.size();
  const std::size_t total = points * static_cast<std::size_t>(cfg.trials);
  std::vector<TrialSlot> slots(total);

  parallel_for(total, cfg.jobs, [&](std::size_t flat) {
    const std::size_t point = flat / static_cast<std::size_t>(cfg.trials);
    const std::size_t trial = flat % static_cast<std::size_t>(cfg.trials);
    const double snr_linear = db_to_linear(cfg.snr_db[point]);
    const double noise_power = cfg.tx_power / snr_linear;

    std::vector<ChannelState> states;
    states.reserve(modalities);
    for (std::size_t m = 0; m < modalities; ++m) {
      RngStream gain_rng(substream(cfg.seed, {kTagGains, point, trial, m}));
      const double gain = sample_gain(cfg.fading, gain_rng);
      states.push_back(ChannelState::make(cfg.fading, gain, cfg.tx_power, noise_power,
                                          cfg.blocklength, cfg.seed));
    }

    const RegressionSample& sample = eval[trial];
    const Vec* kappa_ptr = cfg.freeze_kappa ? &frozen_kappa : nullptr;

    TrialSlot& slot = slots[flat];
    slot.adaptive = run_adaptive(
        model, sample, states, cfg,
        substream(cfg.seed, {kTagFlips, 0, point, trial}), kappa_ptr);

    if (slot.adaptive.ok) {
      Vec payloads(modalities), rates(modalities);
      for (std::size_t m = 0; m < modalities; ++m) {
        payloads[m] = static_cast<double>(cfg.modality_dims[m]) *
                      static_cast<double>(cfg.bits_per_element);
        rates[m] = slot.adaptive.modalities[m].rate;
      }
      const double r_fixed = fixed_rate_baseline(payloads, rates);
      slot.fixed = run_fixed(model, sample, states, r_fixed, cfg,
                             substream(cfg.seed, {kTagFlips, 1, point, trial}), kappa_ptr);
    } else {
      slot.fixed.error = "adaptive solve failed: " + slot.adaptive.error;
      slot.fixed.label = sample.label;
    }
  });

  // Serial emission in (point, scheme, trial, modality) order keeps the
  // output independent of the parallel schedule.
  for (std::size_t point = 0; point < points; ++point) {
    for (Scheme scheme : cfg.schemes) {
      int failures = 0;
      for (int trial = 0; trial < cfg.trials; ++trial) {
        const TrialSlot& slot = slots[point * cfg.trials + trial];
        if (scheme == Scheme::adaptive) {
          if (!slot.adaptive.ok) {
            ++failures;
            continue;
          }
          emit_rows(result.rows, slot.adaptive, cfg.snr_db[point], scheme, trial);
        } else if (scheme == Scheme::fixed_rate) {
          if (!slot.fixed.ok) {
            ++failures;
            continue;
          }
          emit_rows(result.rows, slot.fixed, cfg.snr_db[point], scheme, trial);
        } else {
          // Error-free reference: clean features at the adaptive rates,
          // so delays stay comparable.
          if (!slot.adaptive.ok) {
            ++failures;
            continue;
          }
          TrialResult ef;
          ef.ok = true;
          ef.modalities = slot.adaptive.modalities;
          for (ModalityTrial& mt : ef.modalities) {
            mt.eps = 0.0;
            mt.delta_realized = 0.0;
            mt.flips = 0;
          }
          ef.kappa = slot.adaptive.kappa;
          ef.delay = slot.adaptive.delay;
          ef.y_clean = slot.adaptive.y_clean;
          ef.y_hat = slot.adaptive.y_clean;
          ef.deviation = 0.0;
          ef.gamma_realized = 0.0;
          ef.label = slot.adaptive.label;
          emit_rows(result.rows, ef, cfg.snr_db[point], scheme, trial);
        }
      }
      result.summaries.push_back(
          summarize(cfg.snr_db[point], scheme, result.rows, modalities, failures));
    }
  }
  return result;
}

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::string sweep_csv(const SweepResult& result) {
  std::string out =
      "snr_db,scheme,trial,modality,rate,eps,delta_realized,gamma_realized,deviation,delay,mse,"
      "mae\n";
  for (const SweepRow& r : result.rows) {
    out += fmt(r.snr_db) + ',' + scheme_name(r.scheme) + ',' + std::to_string(r.trial) + ',' +
           std::to_string(r.modality) + ',' + fmt(r.rate) + ',' + fmt(r.eps) + ',' +
           fmt(r.delta_realized) + ',' + fmt(r.gamma_realized) + ',' + fmt(r.deviation) + ',' +
           fmt(r.delay) + ',' + fmt(r.mse) + ',' + fmt(r.mae) + '\n';
  }
  return out;
}

std::string transcript_csv(const SweepResult& result) {
  std::string out = "snr_db,scheme,trial,modality,gain,eps,flips,bits\n";
  for (const SweepRow& r : result.rows) {
    out += fmt(r.snr_db) + ',' + scheme_name(r.scheme) + ',' + std::to_string(r.trial) + ',' +
           std::to_string(r.modality) + ',' + fmt(r.gain) + ',' + fmt(r.eps) + ',' +
           std::to_string(r.flips) + ',' + std::to_string(r.bits) + '\n';
  }
  return out;
}

std::string summary_lines(const SweepResult& result) {
  std::string out;
  for (const SweepSummary& s : result.summaries) {
    out += "snr_db=" + fmt(s.snr_db) + " scheme=" + scheme_name(s.scheme) +
           " trials=" + std::to_string(s.trials) + " failures=" + std::to_string(s.failures) +
           " mse=" + fmt(s.mse_mean) + " mae=" + fmt(s.mae_mean) + " delay=" + fmt(s.delay_mean) +
           " gamma=" + fmt(s.gamma_realized_mean) + " rates=";
    for (std::size_t m = 0; m < s.rate_mean.size(); ++m) {
      if (m) out += '/';
      out += fmt(s.rate_mean[m]);
    }
    out += '\n';
  }
  return out;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << content;
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

McsChoice mcs_snap(double rate, const std::vector<McsEntry>& table) {
  if (table.empty()) throw std::invalid_argument("mcs_snap: empty table");
  McsChoice best;
  bool found = false;
  McsEntry smallest = table.front();
  double smallest_rate = smallest.code_rate * smallest.bits_per_symbol;
  for (const McsEntry& e : table) {
    const double eff = e.code_rate * e.bits_per_symbol;
    if (eff < smallest_rate) {
      smallest_rate = eff;
      smallest = e;
    }
    if (eff <= rate && (!found || eff > best.effective_rate)) {
      best.entry = e;
      best.effective_rate = eff;
      found = true;
    }
  }
  if (!found) {
    best.entry = smallest;
    best.effective_rate = smallest_rate;
    best.below_table = true;
  }
  return best;
}

std::vector<McsEntry> default_mcs_table() {
  std::vector<McsEntry> table;
  for (int bits : {2, 4, 6, 8})
    for (double cr : {1.0 / 3.0, 0.5, 2.0 / 3.0, 0.75}) table.push_back({cr, bits});
  return table;
}

}  // namespace semcom

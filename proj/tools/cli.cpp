#include "cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "semcom/bounds.hpp"
#include "semcom/channel.hpp"
#include "semcom/model.hpp"
#include "semcom/pipeline.hpp"
#include "semcom/quant.hpp"
#include "semcom/ratesolver.hpp"
#include "semcom/rng.hpp"
#include "semcom/serialize.hpp"

namespace semcom {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitAuditFailed = 1;
constexpr int kExitInput = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitIo = 4;

struct CliState {
  std::string config_path;
  ExperimentConfig cfg;

  // Shared overrides; applied only when the flag was actually given.
  std::uint64_t seed = 0;
  std::vector<double> snr_db;
  double delta0 = 0.0;
  double blocklength = 0.0;
  unsigned bits = 0;
  std::string scheme;
  double tol = 0.0;
  int jobs = 0;
  bool freeze_kappa = false;
  std::vector<std::size_t> dims;
  std::size_t hidden = 0;
};

void add_common_options(CLI::App* cmd, CliState& st) {
  cmd->add_option("--config", st.config_path, "JSON config file");
  cmd->add_option("--seed", st.seed, "master seed");
  cmd->add_option("--snr-db", st.snr_db, "SNR grid in dB")->delimiter(',');
  cmd->add_option("--delta0", st.delta0, "output distortion budget");
  cmd->add_option("--blocklength", st.blocklength, "channel code blocklength");
  cmd->add_option("--bits", st.bits, "quantization bits per element");
  cmd->add_option("--scheme", st.scheme, "adaptive|fixed|errorfree|all");
  cmd->add_option("--tol", st.tol, "bisection tolerance");
  cmd->add_option("--jobs", st.jobs, "worker threads (0 = all, 1 = serial)");
  cmd->add_flag("--freeze-kappa", st.freeze_kappa, "freeze importance from one sample");
  cmd->add_option("--dims", st.dims, "modality feature dims")->delimiter(',');
  cmd->add_option("--hidden", st.hidden, "decoder hidden width");
}

// Precedence: CLI flag > config file > built-in default.
void resolve_config(const CLI::App* cmd, CliState& st) {
  if (cmd->count("--config")) {
    std::ifstream in(st.config_path);
    if (!in) throw std::runtime_error("cannot open config '" + st.config_path + "'");
    nlohmann::json j;
    in >> j;
    st.cfg = config_from_json(j);
  }
  if (cmd->count("--seed")) st.cfg.seed = st.seed;
  if (cmd->count("--snr-db")) st.cfg.snr_db = st.snr_db;
  if (cmd->count("--delta0")) st.cfg.delta0 = st.delta0;
  if (cmd->count("--blocklength")) st.cfg.blocklength = st.blocklength;
  if (cmd->count("--bits")) st.cfg.bits_per_element = st.bits;
  if (cmd->count("--tol")) st.cfg.tol = st.tol;
  if (cmd->count("--jobs")) st.cfg.jobs = st.jobs;
  if (cmd->count("--freeze-kappa")) st.cfg.freeze_kappa = true;
  if (cmd->count("--dims")) st.cfg.modality_dims = st.dims;
  if (cmd->count("--hidden")) st.cfg.hidden_dim = st.hidden;
  if (cmd->count("--scheme")) {
    if (st.scheme == "all")
      st.cfg.schemes = {Scheme::adaptive, Scheme::fixed_rate, Scheme::errorfree};
    else
      st.cfg.schemes = {scheme_from_name(st.scheme)};
  }
  const auto bad = st.cfg.violations();
  if (!bad.empty()) throw std::invalid_argument("config: " + bad.front());
}

CompGraph linear_demo_graph() {
  std::vector<NodeSpec> nodes;
  nodes.push_back({0, InputNode{0, 1}, {}});
  nodes.push_back({1, InputNode{1, 1}, {}});
  nodes.push_back({2, ConcatNode{}, {0, 1}});
  nodes.push_back({3, AffineNode{Mat(1, 2, {1.0, 1.0}), Vec{0.0}}, {2}});
  return CompGraph(std::move(nodes), 3, {{0, 1}, {1, 1}});
}

// First evaluation sample of the config's synthetic stream.
RegressionSample first_eval_sample(const ExperimentConfig& cfg) {
  const std::size_t skip = cfg.train_samples + cfg.calib_samples;
  Dataset all =
      make_synthetic_dataset(cfg.seed, cfg.modality_dims, skip + 1, 0.01, cfg.teacher_emphasis);
  return all.back();
}

std::vector<ChannelState> states_at_first_snr(const ExperimentConfig& cfg) {
  const double snr_linear = std::pow(10.0, cfg.snr_db.front() / 10.0);
  const double noise = cfg.tx_power / snr_linear;
  std::vector<ChannelState> states;
  for (std::size_t m = 0; m < cfg.modality_dims.size(); ++m) {
    RngStream rng(substream(cfg.seed, {16, 0, 0, m}));
    const double gain = sample_gain(cfg.fading, rng);
    states.push_back(
        ChannelState::make(cfg.fading, gain, cfg.tx_power, noise, cfg.blocklength, cfg.seed));
  }
  return states;
}

struct BoundInputs {
  CompGraph graph;
  std::vector<Vec> center;
};

BoundInputs bound_inputs(const CliState& st, const std::string& model_path,
                         const std::string& demo) {
  BoundInputs bi;
  if (!demo.empty()) {
    if (demo != "linear") throw std::invalid_argument("unknown demo '" + demo + "'");
    bi.graph = linear_demo_graph();
    bi.center = {{0.2}, {0.3}};
    return bi;
  }
  ToyFusionModel model;
  if (!model_path.empty()) {
    model = load_model(model_path);
    const auto bad = validate_graph(model.decoder);
    if (!bad.empty()) throw std::invalid_argument("model: " + bad.front());
  } else {
    model = build_model(st.cfg);
  }
  bi.graph = model.decoder;
  bi.center = encode_features(model, first_eval_sample(st.cfg).inputs);
  return bi;
}

int cmd_bound(const CliState& st, const std::string& model_path, const std::string& demo,
              std::vector<double> radii, const std::string& p_name, bool importance_only) {
  BoundInputs bi = bound_inputs(st, model_path, demo);
  const std::size_t modalities = bi.graph.modalities().size();
  if (radii.empty()) radii.assign(modalities, 0.1);
  if (radii.size() == 1) radii.assign(modalities, radii.front());
  if (radii.size() != modalities)
    throw std::invalid_argument("expected one radius per modality (" +
                                std::to_string(modalities) + ")");
  PerturbationBall ball{norm_order_from_name(p_name), radii};
  LinearBounds lb = propagate_bounds(bi.graph, bi.center, ball);
  RobustnessReport report = robustness_bound(lb, bi.center, ball);
  if (importance_only) {
    nlohmann::json j{{"kappa", report.kappa}, {"p", norm_order_name(report.p)}};
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << report_to_json(report).dump(2) << "\n";
  }
  return kExitOk;
}

std::vector<ModalityLink> parse_raw_links(const std::string& raw) {
  std::vector<ModalityLink> links;
  std::stringstream groups(raw);
  std::string group;
  while (std::getline(groups, group, ';')) {
    RawModality rm;
    if (std::sscanf(group.c_str(), "%lf,%lf,%lf,%lf", &rm.a, &rm.k, &rm.b, &rm.payload_bits) != 4)
      throw std::invalid_argument("raw link must be a,k,b,D; got '" + group + "'");
    links.push_back(link_from_raw(rm));
  }
  if (links.empty()) throw std::invalid_argument("no raw links given");
  return links;
}

int cmd_solve(const CliState& st, const std::string& raw) {
  std::vector<ModalityLink> links;
  if (!raw.empty()) {
    links = parse_raw_links(raw);
  } else {
    const ToyFusionModel model = build_model(st.cfg);
    const auto states = states_at_first_snr(st.cfg);
    const auto features = encode_features(model, first_eval_sample(st.cfg).inputs);
    const Vec kappa = compute_kappa(model, features, st.cfg);
    for (std::size_t m = 0; m < kappa.size(); ++m) {
      ModalityLink link;
      link.payload_bits = static_cast<double>(st.cfg.modality_dims[m]) *
                          static_cast<double>(st.cfg.bits_per_element);
      link.kappa = kappa[m];
      link.link = LinkParams::from_snr(states[m].snr, st.cfg.blocklength);
      link.bits_per_element = st.cfg.bits_per_element;
      links.push_back(link);
    }
  }

  const FeasibilityReport feas = feasibility_check(links, st.cfg.delta0);
  if (!feas.ok) {
    std::cerr << "infeasible: " << feas.violation << "\n"
              << "delta0 = " << feas.delta0 << ", 0.5*sum(a) = " << feas.half_weight_sum << "\n";
    return kExitInfeasible;
  }
  const RateSolution sol = solve_bisection(links, st.cfg.delta0, st.cfg.tol);
  nlohmann::json j{{"tau_star", sol.tau_star},  {"rates", sol.rates},
                   {"eps", sol.eps},            {"gamma_pred", sol.gamma_pred},
                   {"delay", sol.delay},        {"iterations", sol.iterations},
                   {"bracket_width", sol.bracket_width}};
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

int cmd_simulate(const CliState& st) {
  const ToyFusionModel model = build_model(st.cfg);
  const RegressionSample sample = first_eval_sample(st.cfg);
  const auto states = states_at_first_snr(st.cfg);
  const TrialResult r =
      run_adaptive(model, sample, states, st.cfg, substream(st.cfg.seed, {17, 0, 0, 0}));
  if (!r.ok) {
    std::cerr << "trial failed: " << r.error << "\n";
    return kExitInfeasible;
  }
  nlohmann::json mods = nlohmann::json::array();
  for (const ModalityTrial& mt : r.modalities)
    mods.push_back({{"rate", mt.rate},
                    {"eps", mt.eps},
                    {"delta_realized", mt.delta_realized},
                    {"gain", mt.gain},
                    {"flips", mt.flips},
                    {"bits", mt.bits}});
  nlohmann::json j{{"modalities", std::move(mods)},
                   {"kappa", r.kappa},
                   {"gamma_pred", r.gamma_pred},
                   {"gamma_realized", r.gamma_realized},
                   {"deviation", r.deviation},
                   {"delay", r.delay},
                   {"y_hat", r.y_hat},
                   {"y_clean", r.y_clean},
                   {"label", r.label}};
  std::cout << j.dump(2) << "\n";
  return kExitOk;
}

int cmd_sweep(const CliState& st, const std::string& out_path,
              const std::string& transcript_path) {
  const SweepResult result = snr_sweep(st.cfg);
  try {
    write_text_file(out_path, sweep_csv(result));
    if (!transcript_path.empty()) write_text_file(transcript_path, transcript_csv(result));
  } catch (const std::runtime_error& e) {
    std::cerr << e.what() << "\n";
    return kExitIo;
  }
  std::cout << summary_lines(result);
  return kExitOk;
}

int cmd_model(const CliState& st, const std::string& in_path, const std::string& out_path) {
  if (!in_path.empty()) {
    const ToyFusionModel model = load_model(in_path);
    std::vector<std::string> problems;
    for (std::size_t m = 0; m < model.encoders.size(); ++m)
      for (const std::string& v : validate_graph(model.encoders[m]))
        problems.push_back("encoder " + std::to_string(m) + ": " + v);
    for (const std::string& v : validate_graph(model.decoder)) problems.push_back("decoder: " + v);
    if (!problems.empty()) {
      for (const std::string& p : problems) std::cerr << p << "\n";
      return kExitInput;
    }
    std::cout << "model ok: " << model.encoders.size() << " modalities, hidden "
              << model.hidden_dim << ", checksum " << model_checksum(model) << "\n";
    return kExitOk;
  }
  const ToyFusionModel model = build_model(st.cfg);
  if (!out_path.empty()) {
    try {
      save_model(out_path, model);
    } catch (const std::runtime_error& e) {
      std::cerr << e.what() << "\n";
      return kExitIo;
    }
  }
  std::cout << "built model: seed " << model.seed << ", training loss " << model.training_loss
            << ", checksum " << model_checksum(model) << "\n";
  return kExitOk;
}

int cmd_audit(const CliState& st) {
  int failures = 0;
  auto check = [&failures](bool ok, const std::string& what) {
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << what << "\n";
    if (!ok) ++failures;
  };

  // Dual-norm identities on a few deterministic vectors.
  {
    RngStream rng(substream(st.cfg.seed, 0xA0D17));
    bool holder_ok = true, maximizer_ok = true;
    for (int i = 0; i < 2000; ++i) {
      Vec x(6), y(6);
      for (double& v : x) v = 2.0 * rng.next_unit() - 1.0;
      for (double& v : y) v = 2.0 * rng.next_unit() - 1.0;
      for (NormOrder p : {NormOrder::l1, NormOrder::l2, NormOrder::linf}) {
        if (std::abs(dot(x, y)) > norm_of(x, p) * dual_norm(y, p) + 1e-12) holder_ok = false;
        const Vec xt = dual_maximizer(y, p);
        if (std::abs(norm_of(xt, p) - 1.0) > 1e-9) maximizer_ok = false;
        if (std::abs(dot(y, xt) - dual_norm(y, p)) > 1e-9) maximizer_ok = false;
      }
    }
    check(holder_ok, "holder inequality on 2000 random pairs");
    check(maximizer_ok, "dual maximizer attains the dual norm");
  }

  // Convexity audit of the budget constraint on the config instance.
  {
    const ToyFusionModel model = build_model(st.cfg);
    const auto features = encode_features(model, first_eval_sample(st.cfg).inputs);
    const Vec kappa = compute_kappa(model, features, st.cfg);
    const auto states = states_at_first_snr(st.cfg);
    std::vector<ModalityLink> links;
    for (std::size_t m = 0; m < kappa.size(); ++m) {
      ModalityLink link;
      link.payload_bits = static_cast<double>(st.cfg.modality_dims[m]) *
                          static_cast<double>(st.cfg.bits_per_element);
      link.kappa = kappa[m];
      link.link = LinkParams::from_snr(states[m].snr, st.cfg.blocklength);
      link.bits_per_element = st.cfg.bits_per_element;
      links.push_back(link);
    }
    const ConvexityAudit audit = convexity_audit(links, 1000);
    check(audit.ok, "constraint convexity on feasible grid (min second difference " +
                        std::to_string(audit.min_second_difference) + ")");

    // Certified box soundness against sampled perturbations.
    PerturbationBall ball{st.cfg.p, Vec(kappa.size(), 0.05)};
    LinearBounds lb = propagate_bounds(model.decoder, features, ball);
    const auto box = concretize(lb, features, ball);
    RngStream rng(substream(st.cfg.seed, 0xA0D18));
    bool sound = true;
    for (int i = 0; i < 2000; ++i) {
      std::vector<Vec> probe = features;
      for (std::size_t m = 0; m < probe.size(); ++m)
        for (double& v : probe[m]) v += (2.0 * rng.next_unit() - 1.0) * 0.05;
      const double y = forward(model.decoder, probe).front();
      if (y < box.front().lo - 1e-9 || y > box.front().hi + 1e-9) sound = false;
    }
    check(sound, "certified box contains 2000 sampled perturbed outputs");
  }
  return failures == 0 ? kExitOk : kExitAuditFailed;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"rate-adaptive unequal error protection simulator for multi-modal semantic links"};
  app.require_subcommand(1);

  CliState st;

  auto* model_cmd = app.add_subcommand("model", "build or inspect a fusion model");
  std::string model_in, model_out;
  add_common_options(model_cmd, st);
  model_cmd->add_option("--in", model_in, "model JSON to inspect");
  model_cmd->add_option("--out", model_out, "where to write the built model");

  auto* bound_cmd = app.add_subcommand("bound", "certified output bounds and robustness report");
  std::string bound_model, bound_demo, bound_p = "inf";
  std::vector<double> bound_delta;
  add_common_options(bound_cmd, st);
  bound_cmd->add_option("--model", bound_model, "model JSON (default: build from config)");
  bound_cmd->add_option("--demo", bound_demo, "built-in demo graph (linear)");
  bound_cmd->add_option("--delta", bound_delta, "ball radii per modality")->delimiter(',');
  bound_cmd->add_option("--p", bound_p, "norm order: 1, 2, or inf");

  auto* imp_cmd = app.add_subcommand("importance", "per-modality semantic importance");
  std::string imp_model, imp_demo, imp_p = "inf";
  add_common_options(imp_cmd, st);
  imp_cmd->add_option("--model", imp_model, "model JSON (default: build from config)");
  imp_cmd->add_option("--demo", imp_demo, "built-in demo graph (linear)");
  imp_cmd->add_option("--p", imp_p, "norm order: 1, 2, or inf");

  auto* solve_cmd = app.add_subcommand("solve", "rate allocation for one channel state");
  std::string solve_raw;
  add_common_options(solve_cmd, st);
  solve_cmd->add_option("--raw", solve_raw, "raw links 'a,k,b,D[;...]' instead of a model");

  auto* sim_cmd = app.add_subcommand("simulate", "one end-to-end adaptive trial");
  add_common_options(sim_cmd, st);

  auto* sweep_cmd = app.add_subcommand("sweep", "SNR sweep writing trial rows as CSV");
  std::string sweep_out = "sweep.csv", sweep_transcript;
  int sweep_trials = 0;
  add_common_options(sweep_cmd, st);
  sweep_cmd->add_option("--out", sweep_out, "output CSV path");
  sweep_cmd->add_option("--transcript", sweep_transcript, "channel transcript CSV path");
  sweep_cmd->add_option("--trials", sweep_trials, "trials per SNR point");

  auto* audit_cmd = app.add_subcommand("audit", "run numeric invariant audits");
  add_common_options(audit_cmd, st);

  std::vector<const char*> argv;
  argv.push_back("semcom");
  for (const std::string& a : args) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return kExitInput;
  }

  try {
    CLI::App* cmd = app.get_subcommands().front();
    resolve_config(cmd, st);
    if (sweep_cmd->parsed() && sweep_trials > 0) st.cfg.trials = sweep_trials;

    if (model_cmd->parsed()) return cmd_model(st, model_in, model_out);
    if (bound_cmd->parsed()) return cmd_bound(st, bound_model, bound_demo, bound_delta, bound_p, false);
    if (imp_cmd->parsed()) return cmd_bound(st, imp_model, imp_demo, {}, imp_p, true);
    if (solve_cmd->parsed()) return cmd_solve(st, solve_raw);
    if (sim_cmd->parsed()) return cmd_simulate(st);
    if (sweep_cmd->parsed()) return cmd_sweep(st, sweep_out, sweep_transcript);
    if (audit_cmd->parsed()) return cmd_audit(st);
    std::cerr << "no subcommand\n";
    return kExitInput;
  } catch (const std::domain_error& e) {
    std::cerr << e.what() << "\n";
    return kExitInfeasible;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "input parse error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    return kExitInput;
  } catch (const std::runtime_error& e) {
    std::cerr << e.what() << "\n";
    return kExitInput;
  }
}

}  // namespace semcom

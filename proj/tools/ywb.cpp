// Command-line workbench: train policies, evaluate and attack checkpoints,
// run the verification audits, and regenerate campaign reports.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "ywb/ars.hpp"
#include "ywb/attack.hpp"
#include "ywb/config.hpp"
#include "ywb/policy.hpp"
#include "ywb/report.hpp"
#include "ywb/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ywb;

namespace {

constexpr int kOk = 0;
constexpr int kValidationError = 2;
constexpr int kAuditFailure = 3;
constexpr int kPartialFailure = 4;

json gamma_json(double g) {
  if (std::isinf(g)) return json("inf");
  return json(g);
}

void write_json_file(const std::string& path, const json& j) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out.good()) throw ConfigError("cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
  if (!out.good()) throw ConfigError("write to '" + path + "' failed");
}

json pair_fit_json(const PairFit& f) {
  return {{"rate", f.rate},     {"overshoot", f.overshoot}, {"r2", f.r2},
          {"points", f.points}, {"d0", f.d0},               {"d_min", f.d_min},
          {"degenerate", f.degenerate}, {"fast", f.fast},   {"decayed", f.decayed}};
}

json contraction_json(const ContractionReport& r) {
  json j;
  j["rate"] = r.rate;
  j["overshoot"] = r.overshoot;
  j["min_r2"] = r.min_r2;
  j["dispersion"] = r.dispersion;
  j["fitted"] = r.fitted;
  j["fast"] = r.fast;
  j["degenerate"] = r.degenerate;
  j["all_degenerate"] = r.all_degenerate;
  j["pass"] = r.pass;
  if (!r.failure.empty()) j["failure"] = r.failure;
  return j;
}

json gain_json(const GainReport& g) {
  return {{"gain", g.gain},
          {"offset", g.offset},
          {"gain_probes", g.gain_probes},
          {"offset_probes", g.offset_probes},
          {"finite", g.finite}};
}

json closed_loop_json(const ClosedLoopAuditReport& r) {
  return {{"contraction", contraction_json(r.contraction)},
          {"gain", gain_json(r.gain)},
          {"pass", r.pass}};
}

json assumptions_json(const AssumptionReport& r) {
  return {{"observer_exactness",
           {{"max_error", r.exactness.max_error},
            {"samples", r.exactness.samples},
            {"pass", r.exactness.pass}}},
          {"observer_contraction", contraction_json(r.observer_contraction)},
          {"base_loop", closed_loop_json(r.base_loop)},
          {"pass", r.pass}};
}

json counterexample_json(const CounterexampleReport& r) {
  return {{"nominal_gap_final", r.nominal_gap_final},
          {"disturbed_gap_min", r.disturbed_gap_min},
          {"disturbed_sup", r.disturbed_sup},
          {"nominal_contracts", r.nominal_contracts},
          {"disturbed_separates", r.disturbed_separates},
          {"disturbed_bounded", r.disturbed_bounded},
          {"pass", r.pass}};
}

json fixtures_json(const FixtureAuditReport& r) {
  return {{"scalar_fit", pair_fit_json(r.scalar_fit)},
          {"stable_bounded",
           {{"sup_norm", r.stable_bounded.sup_norm},
            {"trend", r.stable_bounded.trend},
            {"pass", r.stable_bounded.pass}}},
          {"unstable_control_flagged",
           {{"sup_norm", r.unstable_control.sup_norm}, {"pass", r.unstable_control.pass}}},
          {"input_decay",
           {{"state_rate", r.input_decay.state_fit.rate},
            {"output_rate", r.input_decay.output_fit.rate},
            {"rate_bound", r.input_decay.rate_bound},
            {"pass", r.input_decay.pass}}},
          {"counterexample", counterexample_json(r.counterexample)},
          {"pass", r.pass}};
}

std::vector<double> parse_double_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  return out;
}

ExperimentConfig config_from_checkpoint(const Checkpoint& ck) {
  ExperimentConfig cfg;
  cfg.environment = ck.environment;
  cfg.policy_class = ck.policy_class;
  cfg.label = ck.label;
  cfg.model = ck.model;
  cfg.alpha_bar = ck.alpha_bar;
  cfg.gamma = ck.gamma;
  return cfg;
}

struct LoadedPolicy {
  ControllerBundle bundle;
  ExperimentConfig cfg;
  std::unique_ptr<Policy> policy;
  std::string policy_id;
  double gamma = std::numeric_limits<double>::infinity();
  double base_cost = 1.0;
};

LoadedPolicy load_policy(const std::string& checkpoint_path, const std::string& base_env,
                         const std::string& config_path, bool force) {
  LoadedPolicy lp;
  if (!base_env.empty()) {
    lp.bundle = make_bundle(base_env);
    lp.cfg.environment = base_env;
    lp.cfg.policy_class = "base-only";
    lp.policy = lp.bundle.base_policy();
    lp.policy_id = "base";
    return lp;
  }
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  lp.cfg = config_from_checkpoint(ck);
  if (!config_path.empty()) {
    const ExperimentConfig file_cfg = load_experiment_config(config_path);
    if (file_cfg.hash() != ck.config_hash) {
      if (!force)
        throw ConfigError("config: hash mismatch between '" + config_path +
                          "' and checkpoint metadata (pass --force to override)");
      std::fprintf(stderr, "warning: config hash mismatch overridden by --force\n");
    }
  }
  lp.bundle = make_bundle(lp.cfg.environment);
  lp.policy = lp.bundle.make_policy(lp.cfg, ck.params);
  lp.policy_id = lp.cfg.policy_id();
  lp.gamma = (lp.cfg.policy_class == "youla-gamma") ? lp.cfg.gamma
                                                    : std::numeric_limits<double>::infinity();
  lp.base_cost = ck.base_cost;
  return lp;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

int run_train(const std::string& config_path, const std::string& out_override,
              std::uint64_t seed_override, bool has_seed_override, bool skip_audit, bool force) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  if (!out_override.empty()) cfg.out_dir = out_override;
  if (has_seed_override) cfg.seeds = {seed_override};
  cfg.validate();
  if (cfg.policy_class == "base-only") {
    std::fprintf(stderr, "error: the base controller has no trainable parameters\n");
    return kValidationError;
  }

  const fs::path out(cfg.out_dir);
  if (fs::exists(out / "manifest.json") && !force) {
    std::fprintf(stderr,
                 "error: '%s' already holds a campaign (manifest.json present); "
                 "choose a fresh --out or pass --force to overwrite\n",
                 cfg.out_dir.c_str());
    return kValidationError;
  }
  fs::create_directories(out / "logs");
  fs::create_directories(out / "checkpoints");
  fs::create_directories(out / "reports");

  ControllerBundle bundle = make_bundle(cfg.environment);
  json audit_report;
  if (skip_audit) {
    std::printf("audit: skipped (--skip-audit)\n");
  } else {
    std::printf("audit: checking observer exactness, observer contraction, base loop...\n");
    const AssumptionReport rep =
        audit_assumptions(*bundle.env, *bundle.observer, *bundle.feedback, cfg.eval_seed);
    audit_report = assumptions_json(rep);
    bool ok = rep.pass;
    if (bundle.innovations_observer) {
      const ExactnessReport ex =
          audit_observer_exactness(*bundle.env, *bundle.innovations_observer, 64, cfg.eval_seed);
      const ContractionReport ic = audit_observer_contraction(
          *bundle.env, *bundle.innovations_observer, *bundle.feedback, cfg.eval_seed);
      audit_report["innovations_observer_exactness"] = ex.pass;
      audit_report["innovations_observer_contraction"] = contraction_json(ic);
      ok = ok && ex.pass && ic.pass;
    }
    std::printf("audit: %s\n", ok ? "pass" : "FAIL");
    if (!ok) {
      write_json_file((out / "audit_failure.json").string(), audit_report);
      std::fprintf(stderr, "error: base-controller audit failed; see %s\n",
                   (out / "audit_failure.json").string().c_str());
      return kAuditFailure;
    }
  }

  const TrainTask task = make_experiment_task(bundle, cfg);
  std::printf("train: %s on %s, %d params, %d epochs, %zu seed(s)\n", task.label.c_str(),
              cfg.environment.c_str(), static_cast<int>(task.param_count), cfg.ars.epochs,
              cfg.seeds.size());
  const CampaignResult campaign = multi_seed_campaign(task, cfg.ars, cfg.seeds);

  save_experiment_config(cfg, (out / "config.json").string());
  const std::string id = cfg.policy_id();
  json manifest;
  manifest["config_hash"] = cfg.hash();
  manifest["policy_id"] = id;
  manifest["environment"] = cfg.environment;
  manifest["gamma"] = gamma_json(cfg.gamma);
  manifest["base_cost"] = task.base_test_cost;
  if (!audit_report.is_null()) manifest["audit"] = audit_report;
  json seed_entries = json::array();

  int failures = 0;
  for (const SeedRun& run : campaign.runs) {
    json entry;
    entry["seed"] = run.seed;
    entry["ok"] = run.ok;
    if (!run.ok) {
      ++failures;
      entry["error"] = run.error;
      std::printf("seed %llu: FAILED (%s)\n", static_cast<unsigned long long>(run.seed),
                  run.error.c_str());
      seed_entries.push_back(entry);
      continue;
    }
    char stem[128];
    std::snprintf(stem, sizeof(stem), "%s_seed%llu", id.c_str(),
                  static_cast<unsigned long long>(run.seed));
    const std::string log_rel = std::string("logs/") + stem + ".csv";
    const std::string det_rel = std::string("logs/") + stem + "_det.csv";
    const std::string ck_rel = std::string("checkpoints/") + stem + ".ckpt";
    write_train_log_csv((out / log_rel).string(), run.log);
    write_train_log_csv_deterministic((out / det_rel).string(), run.log);

    Checkpoint ck;
    ck.environment = cfg.environment;
    ck.policy_class = cfg.policy_class;
    ck.label = id;
    ck.model = cfg.model;
    ck.alpha_bar = cfg.alpha_bar;
    ck.gamma = cfg.gamma;
    ck.config_hash = cfg.hash();
    ck.seed = run.seed;
    ck.best_epoch = run.log.best_epoch;
    ck.best_test_cost = run.log.best_test_cost;
    ck.base_cost = run.log.base_cost;
    ck.params = run.log.best_params;
    save_checkpoint((out / ck_rel).string(), ck);

    entry["log"] = log_rel;
    entry["log_det"] = det_rel;
    entry["checkpoint"] = ck_rel;
    entry["best_epoch"] = run.log.best_epoch;
    entry["best_test_cost"] = run.log.best_test_cost;
    entry["final_norm"] = run.log.records.back().normalized_test_cost;
    seed_entries.push_back(entry);
    std::printf("seed %llu: final normalized cost %.4f (best %.4f at epoch %d)\n",
                static_cast<unsigned long long>(run.seed),
                run.log.records.back().normalized_test_cost,
                run.log.best_test_cost / run.log.base_cost, run.log.best_epoch);
  }
  manifest["seeds"] = seed_entries;
  write_json_file((out / "manifest.json").string(), manifest);

  if (campaign.completed() > 0) {
    write_campaign_curve_csv((out / "reports" / (id + "_curve.csv")).string(), campaign);
    write_campaign_chart_svg((out / "reports" / (id + "_curve.svg")).string(), {{id, campaign}},
                             id + " learning curve");
  }
  std::printf("train: wrote %s\n", (out / "manifest.json").string().c_str());
  return failures == 0 ? kOk : kPartialFailure;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

int run_eval(const std::string& checkpoint_path, const std::string& base_env,
             const std::string& config_path, const std::string& out_path, std::uint64_t seed,
             int batch, bool force) {
  LoadedPolicy lp = load_policy(checkpoint_path, base_env, config_path, force);
  const std::uint64_t suite = derive_stream(seed, {stream_id::kEvalSuite});
  const double mean_cost = env_batch_cost(*lp.bundle.env, *lp.policy, suite, batch);
  const auto base = lp.bundle.base_policy();
  const double base_cost = env_batch_cost(*lp.bundle.env, *base, suite, batch);
  const double normalized = base_cost > 0.0 ? mean_cost / base_cost : mean_cost;

  json j;
  j["policy_id"] = lp.policy_id;
  j["environment"] = lp.cfg.environment;
  j["gamma"] = gamma_json(lp.gamma);
  j["eval_seed"] = seed;
  j["batch"] = batch;
  j["mean_cost"] = mean_cost;
  j["base_cost"] = base_cost;
  j["normalized_cost"] = normalized;
  if (!out_path.empty()) write_json_file(out_path, j);
  std::printf("eval: %s on %s: mean cost %.6g, normalized %.4f (batch %d)\n", lp.policy_id.c_str(),
              lp.cfg.environment.c_str(), mean_cost, normalized, batch);
  return kOk;
}

// ---------------------------------------------------------------------------
// attack
// ---------------------------------------------------------------------------

int run_attack(const std::string& checkpoint_path, const std::string& base_env,
               const std::string& config_path, const std::string& out_dir,
               const std::string& eps_list, bool critical, double eps_lo, double eps_hi,
               std::uint64_t seed, int window, int iters, int batch, bool force) {
  LoadedPolicy lp = load_policy(checkpoint_path, base_env, config_path, force);
  AttackConfig acfg;
  acfg.window = window;
  acfg.iters = iters;
  acfg.batch = batch;
  acfg.seed = seed;
  const fs::path out(out_dir);

  if (critical) {
    const CriticalAttackResult res =
        critical_attack_size(*lp.bundle.env, *lp.policy, acfg, eps_lo, eps_hi);
    json j;
    j["policy_id"] = lp.policy_id;
    j["gamma"] = gamma_json(lp.gamma);
    j["critical_epsilon"] = res.critical_epsilon;
    j["lo"] = res.lo;
    j["hi"] = res.hi;
    j["censored_low"] = res.censored_low;
    j["censored_high"] = res.censored_high;
    json evals = json::array();
    for (const SweepPoint& pt : res.evaluations) {
      evals.push_back({{"epsilon", pt.epsilon},
                       {"mean_cost", pt.mean_cost},
                       {"mean_norm_cost", pt.mean_norm_cost},
                       {"mean_deviation", pt.mean_deviation},
                       {"criterion_hit", pt.criterion_hit}});
    }
    j["evaluations"] = evals;
    write_json_file((out / "critical.json").string(), j);
    std::printf("attack: %s critical epsilon %.6g [%.6g, %.6g]%s%s\n", lp.policy_id.c_str(),
                res.critical_epsilon, res.lo, res.hi, res.censored_low ? " (left-censored)" : "",
                res.censored_high ? " (right-censored)" : "");
    return kOk;
  }

  const std::vector<double> eps = parse_double_list(eps_list);
  if (eps.empty()) {
    std::fprintf(stderr, "error: --eps needs a comma-separated list of budgets\n");
    return kValidationError;
  }
  std::vector<RobustnessRow> rows;
  ChartSeries curve;
  curve.name = lp.policy_id;
  for (double e : eps) {
    AttackConfig c = acfg;
    c.epsilon = e;
    const AttackSummary s = evaluate_attack(*lp.bundle.env, *lp.policy, c);
    RobustnessRow row;
    row.policy_id = lp.policy_id;
    row.gamma = lp.gamma;
    row.epsilon = e;
    row.mean_norm_cost = s.mean_norm_cost;
    row.mean_deviation = s.mean_deviation;
    row.criterion_hit = s.criterion_hit;
    rows.push_back(row);
    curve.x.push_back(e);
    curve.y.push_back(s.mean_norm_cost);
    std::printf("attack: eps %.4g -> norm cost %.4f, deviation %.6g%s\n", e, s.mean_norm_cost,
                s.mean_deviation, s.criterion_hit ? " [criterion hit]" : "");
  }
  write_robustness_csv((out / "robustness.csv").string(), rows);
  ChartOptions copt;
  copt.title = lp.policy_id + " under measurement attack";
  copt.x_label = "attack size";
  copt.y_label = "normalized cost";
  write_line_chart_svg((out / "robustness.svg").string(), {curve}, copt);
  std::printf("attack: wrote %s\n", (out / "robustness.csv").string().c_str());
  return kOk;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

int run_verify(const std::string& target, std::uint64_t seed, const std::string& out_path) {
  json j;
  bool all_pass = true;

  if (target == "fixtures" || target == "all") {
    const FixtureAuditReport rep = run_fixture_audits();
    j["fixtures"] = fixtures_json(rep);
    all_pass = all_pass && rep.pass;
    std::printf("verify: fixtures %s\n", rep.pass ? "pass" : "FAIL");
  }
  for (const std::string env_name : {std::string("maglev"), std::string("pendulum")}) {
    if (target != env_name && target != "all") continue;
    ControllerBundle bundle = make_bundle(env_name);
    const AssumptionReport rep =
        audit_assumptions(*bundle.env, *bundle.observer, *bundle.feedback, seed);
    json env_json = assumptions_json(rep);
    bool env_pass = rep.pass;
    if (bundle.innovations_observer) {
      const ExactnessReport ex =
          audit_observer_exactness(*bundle.env, *bundle.innovations_observer, 64, seed);
      const ContractionReport ic = audit_observer_contraction(
          *bundle.env, *bundle.innovations_observer, *bundle.feedback, seed);
      env_json["innovations_observer_exactness"] = ex.pass;
      env_json["innovations_observer_contraction"] = contraction_json(ic);
      env_pass = env_pass && ex.pass && ic.pass;
    }
    j[env_name] = env_json;
    all_pass = all_pass && env_pass;
    std::printf("verify: %s assumptions %s (base-loop rate %.4f, gain %.4g)\n", env_name.c_str(),
                env_pass ? "pass" : "FAIL", rep.base_loop.contraction.rate, rep.base_loop.gain.gain);
  }
  j["pass"] = all_pass;
  if (!out_path.empty()) write_json_file(out_path, j);
  std::printf("verify: %s\n", all_pass ? "pass" : "FAIL");
  return all_pass ? kOk : kAuditFailure;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

bool read_log_csv(const std::string& path, TrainLog& log) {
  std::ifstream in(path);
  if (!in.good()) return false;
  std::string line;
  if (!std::getline(in, line)) return false;  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> vals;
    while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    if (vals.size() < 6) return false;
    TrainRecord rec;
    rec.epoch = static_cast<int>(vals[0]);
    rec.train_cost = vals[1];
    rec.test_cost = vals[2];
    rec.normalized_test_cost = vals[3];
    rec.grad_norm = vals[4];
    rec.lr = vals[5];
    log.records.push_back(rec);
  }
  return !log.records.empty();
}

int run_report(const std::string& campaign_dir) {
  const fs::path dir(campaign_dir);
  const std::string manifest_path = (dir / "manifest.json").string();
  std::ifstream in(manifest_path);
  if (!in.good()) {
    std::fprintf(stderr, "error: no manifest.json in '%s'\n", campaign_dir.c_str());
    return kValidationError;
  }
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    std::fprintf(stderr, "error: manifest unreadable: %s\n", e.what());
    return kValidationError;
  }
  const std::string id = manifest.at("policy_id").get<std::string>();

  CampaignResult campaign;
  int missing = 0;
  for (const json& entry : manifest.at("seeds")) {
    SeedRun run;
    run.seed = entry.at("seed").get<std::uint64_t>();
    run.ok = entry.at("ok").get<bool>();
    if (run.ok) {
      const std::string rel = entry.at("log").get<std::string>();
      if (!read_log_csv((dir / rel).string(), run.log)) {
        std::fprintf(stderr, "warning: missing or unreadable log '%s'; skipping seed %llu\n",
                     rel.c_str(), static_cast<unsigned long long>(run.seed));
        run.ok = false;
        ++missing;
      }
    }
    campaign.runs.push_back(std::move(run));
  }
  if (campaign.completed() == 0) {
    std::fprintf(stderr, "error: no readable seed logs in '%s'\n", campaign_dir.c_str());
    return kValidationError;
  }
  write_campaign_curve_csv((dir / "reports" / (id + "_curve.csv")).string(), campaign);
  write_campaign_chart_svg((dir / "reports" / (id + "_curve.svg")).string(), {{id, campaign}},
                           id + " learning curve");
  std::printf("report: wrote %s over %d seed(s)\n",
              (dir / "reports" / (id + "_curve.csv")).string().c_str(), campaign.completed());
  return missing == 0 ? kOk : kPartialFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Youla policy workbench: training, evaluation, attacks, and audits"};
  app.require_subcommand(1);

  // train
  std::string train_config, train_out;
  std::uint64_t train_seed = 0;
  bool train_skip_audit = false, train_force = false;
  auto* train_cmd = app.add_subcommand("train", "Train a policy campaign from a config file");
  train_cmd->add_option("--config", train_config, "experiment config (JSON)")->required();
  train_cmd->add_option("--out", train_out, "output directory override");
  auto* train_seed_opt = train_cmd->add_option("--seed", train_seed, "train only this seed");
  train_cmd->add_flag("--skip-audit", train_skip_audit, "skip the base-controller audit gate");
  train_cmd->add_flag("--force", train_force, "overwrite an existing campaign directory");

  // eval
  std::string eval_ck, eval_env, eval_config, eval_out;
  std::uint64_t eval_seed = 2024;
  int eval_batch = 100;
  bool eval_force = false;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a frozen test suite");
  auto* eval_ck_opt = eval_cmd->add_option("--checkpoint", eval_ck, "checkpoint path");
  eval_cmd->add_option("--base", eval_env, "evaluate the base controller of this environment")
      ->excludes(eval_ck_opt);
  eval_cmd->add_option("--config", eval_config, "config for hash verification");
  eval_cmd->add_option("--out", eval_out, "write eval JSON here");
  eval_cmd->add_option("--seed", eval_seed, "test-suite seed");
  eval_cmd->add_option("--batch", eval_batch, "rollouts in the suite");
  eval_cmd->add_flag("--force", eval_force, "ignore config hash mismatch");

  // attack
  std::string atk_ck, atk_env, atk_config, atk_out = "attack-out", atk_eps = "0";
  bool atk_critical = false, atk_force = false;
  double atk_lo = 0.001, atk_hi = 0.5;
  std::uint64_t atk_seed = 2024;
  int atk_window = 10, atk_iters = 20, atk_batch = 12;
  auto* atk_cmd = app.add_subcommand("attack", "Adversarial measurement attacks on a policy");
  auto* atk_ck_opt = atk_cmd->add_option("--checkpoint", atk_ck, "checkpoint path");
  atk_cmd->add_option("--base", atk_env, "attack the base controller of this environment")
      ->excludes(atk_ck_opt);
  atk_cmd->add_option("--config", atk_config, "config for hash verification");
  atk_cmd->add_option("--out", atk_out, "output directory");
  atk_cmd->add_option("--eps", atk_eps, "comma-separated attack budgets");
  atk_cmd->add_flag("--critical", atk_critical, "bisect for the critical budget");
  atk_cmd->add_option("--eps-lo", atk_lo, "bisection lower bound");
  atk_cmd->add_option("--eps-hi", atk_hi, "bisection upper bound");
  atk_cmd->add_option("--seed", atk_seed, "evaluation suite seed");
  atk_cmd->add_option("--window", atk_window, "receding-horizon window");
  atk_cmd->add_option("--iters", atk_iters, "optimizer iterations per step");
  atk_cmd->add_option("--batch", atk_batch, "rollouts per budget");
  atk_cmd->add_flag("--force", atk_force, "ignore config hash mismatch");

  // verify
  std::string ver_target = "all", ver_out = "verify.json";
  std::uint64_t ver_seed = 2024;
  auto* ver_cmd = app.add_subcommand("verify", "Run the audit suite");
  ver_cmd->add_option("--target", ver_target, "fixtures | maglev | pendulum | all")
      ->check(CLI::IsMember({"fixtures", "maglev", "pendulum", "all"}));
  ver_cmd->add_option("--seed", ver_seed, "audit seed");
  ver_cmd->add_option("--out", ver_out, "report JSON path ('' to skip)");

  // report
  std::string rep_dir;
  auto* rep_cmd = app.add_subcommand("report", "Regenerate reports for a campaign directory");
  rep_cmd->add_option("dir", rep_dir, "campaign directory (holds manifest.json)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed())
      return run_train(train_config, train_out, train_seed, train_seed_opt->count() > 0,
                       train_skip_audit, train_force);
    if (eval_cmd->parsed()) {
      if (eval_ck.empty() && eval_env.empty()) {
        std::fprintf(stderr, "error: eval needs --checkpoint or --base\n");
        return kValidationError;
      }
      return run_eval(eval_ck, eval_env, eval_config, eval_out, eval_seed, eval_batch, eval_force);
    }
    if (atk_cmd->parsed()) {
      if (atk_ck.empty() && atk_env.empty()) {
        std::fprintf(stderr, "error: attack needs --checkpoint or --base\n");
        return kValidationError;
      }
      return run_attack(atk_ck, atk_env, atk_config, atk_out, atk_eps, atk_critical, atk_lo,
                        atk_hi, atk_seed, atk_window, atk_iters, atk_batch, atk_force);
    }
    if (ver_cmd->parsed()) return run_verify(ver_target, ver_seed, ver_out);
    if (rep_cmd->parsed()) return run_report(rep_dir);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kValidationError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return kOk;
}

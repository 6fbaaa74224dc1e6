// orchnet: synthetic orchard data, descriptor training, retrieval evaluation
// and loop-aware Monte Carlo localization from the command line.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "orchnet/csv.hpp"
#include "orchnet/loopmcl.hpp"
#include "orchnet/retrieval.hpp"
#include "orchnet/synthgen.hpp"
#include "orchnet/training.hpp"

namespace fs = std::filesystem;
using namespace orchnet;

namespace {

// ---------------------------------------------------------------------------
// config files

/// `key=value` lines with `#` comments, returned in file order.
std::vector<std::pair<std::string, std::string>> read_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file " + path.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int number = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError(path.string() + ":" + std::to_string(number) + ": expected key=value");
    }
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

/// Splices the values of `--config FILE` in front of the command-line flags
/// of the chosen subcommand, so explicit flags win. Unknown keys are rejected.
std::vector<std::string> expand_config(const CLI::App& app, std::vector<std::string> args) {
  if (args.size() < 2) return args;
  const CLI::App* sub = nullptr;
  for (const CLI::App* s : app.get_subcommands([](const CLI::App*) { return true; })) {
    if (s->get_name() == args[1]) sub = s;
  }
  if (sub == nullptr) return args;

  std::optional<fs::path> file;
  std::vector<std::string> rest;
  for (std::size_t i = 2; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      file = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      file = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (!file) return args;

  std::vector<std::string> out = {args[0], args[1]};
  for (const auto& [key, value] : read_config(*file)) {
    if (sub->get_option_no_throw("--" + key) == nullptr || key == "config" || key == "help") {
      throw UsageError("unknown key '" + key + "' in " + file->string());
    }
    out.push_back("--" + key + "=" + value);
  }
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

fs::path manifest_path(const fs::path& p) {
  if (fs::is_directory(p)) return p / "manifest.txt";
  return p;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw DataError("cannot create output directory " + dir.string());
  const fs::path probe = dir / ".write_probe";
  {
    std::ofstream f(probe);
    if (!f) throw DataError("output directory " + dir.string() + " is not writable");
  }
  fs::remove(probe, ec);
}

// ---------------------------------------------------------------------------
// model options shared by train, eval and mcl

struct ModelOptions {
  std::string preset = "desk";
  std::string extractor = "points";
  std::string head = "fusion";
  long long points = 1024;
  long long bev_points = 512;
  long long channels = 64;
  long long dim = 128;
  bool l2 = false;

  std::map<std::string, CLI::Option*> opts;

  void add(CLI::App& app) {
    opts["preset"] = app.add_option("--model-preset", preset, "Model size preset")
                         ->check(CLI::IsMember({"desk", "paper-points", "paper-bev"}));
    opts["extractor"] = app.add_option("--extractor", extractor, "Local feature extractor")
                            ->check(CLI::IsMember({"points", "bev"}));
    opts["head"] = app.add_option("--head", head, "Aggregation head")->check(CLI::IsMember({"fusion", "mac", "spoc", "gem"}));
    opts["points"] = app.add_option("--points", points, "Points per scan fed to the point extractor");
    opts["bev-points"] = app.add_option("--bev-points", bev_points, "Points per scan projected for the BEV extractor");
    opts["channels"] = app.add_option("--channels", channels, "Local feature channels C");
    opts["dim"] = app.add_option("--dim", dim, "Descriptor dimension K");
    opts["l2"] = app.add_flag("--l2,!--no-l2", l2, "L2-normalize descriptors");
  }

  bool given(const std::string& key) const { return opts.at(key)->count() > 0; }

  /// The preset, overridden by every explicitly given size flag.
  ModelConfig config() const {
    ModelConfig c = preset == "paper-points" ? ModelConfig::paper_points()
                    : preset == "paper-bev"  ? ModelConfig::paper_bev()
                                             : ModelConfig::desk();
    if (given("extractor")) c.extractor = parse_extractor_kind(extractor);
    if (given("head")) c.head = parse_head_mode(head);
    if (given("points")) c.n_points = points;
    if (given("bev-points")) c.bev_points = bev_points;
    if (given("channels")) c.channels = channels;
    if (given("dim")) c.dim = dim;
    if (given("l2")) c.l2_normalize = l2;
    if (c.n_points < 1 || c.bev_points < 1 || c.channels < 1 || c.dim < 1) throw UsageError("model sizes must be positive");
    return c;
  }
};

std::string model_cfg_text(const ModelConfig& c) {
  std::string s = "# model configuration written by `orchnet train`\n";
  s += "extractor=" + to_string(c.extractor) + "\n";
  s += "head=" + to_string(c.head) + "\n";
  s += "points=" + std::to_string(c.n_points) + "\n";
  s += "bev-points=" + std::to_string(c.bev_points) + "\n";
  s += "channels=" + std::to_string(c.channels) + "\n";
  s += "dim=" + std::to_string(c.dim) + "\n";
  s += std::string("l2=") + (c.l2_normalize ? "true" : "false") + "\n";
  return s;
}

struct LoopOptions {
  double r_th = kDefaultLoopRadius;
  int gamma = kDefaultGamma;

  void add(CLI::App& app) {
    app.add_option("--r-th", r_th, "Loop radius in metres");
    app.add_option("--gamma", gamma, "Temporal exclusion window in scans");
  }
};

// ---------------------------------------------------------------------------
// synth

struct SynthOptions {
  std::string preset = "autumn-like";
  std::string plan;
  std::string scale = "desk";
  std::uint64_t seed = 1;
  fs::path out;
};

int cmd_synth(const SynthOptions& o) {
  OrchardSpec spec = o.preset == "summer-like" ? OrchardSpec::summer_like() : OrchardSpec::autumn_like();
  PathPlan plan = o.preset == "summer-like" ? PathPlan::single_revisit : PathPlan::multi_revisit;
  if (!o.plan.empty()) plan = parse_path_plan(o.plan);
  if (o.scale == "paper") spec = spec.paper_scale();
  spec.seed = o.seed;
  spec.validate();
  ensure_dir(o.out);
  const SyntheticSequence s = generate(spec, plan);
  const fs::path manifest = write_synthetic(o.out, s);
  std::cout << "wrote " << s.sequence.size() << " scans, " << s.revisit_log.size() << " loop pairs, "
            << s.landmarks.size() << " landmarks to " << manifest.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
  fs::path data;
  fs::path out;
  TripletConfig triplet;
  bool no_augment = false;
  double split = 0.6;
  std::uint64_t init_seed = 0;
  bool init_seed_given = false;
  LoopOptions loops;
  ModelOptions model;
};

int cmd_train(TrainOptions& o) {
  const ModelConfig mc = o.model.config();
  TripletConfig tc = o.triplet;
  tc.augment = !o.no_augment;
  tc.validate();
  if (o.split <= 0.0 || o.split > 1.0) throw UsageError("--split must lie in (0, 1]");
  const Sequence full = load_sequence(manifest_path(o.data));
  ensure_dir(o.out);

  const LoopGroundTruth gt_full = build_ground_truth(full.entries, o.loops.r_th, o.loops.gamma);
  const int split = o.split >= 1.0 ? static_cast<int>(full.size()) : split_index(gt_full, o.split);
  const Sequence seq = full.prefix(static_cast<std::size_t>(split));
  const LoopGroundTruth gt = build_ground_truth(seq.entries, o.loops.r_th, o.loops.gamma);
  if (gt.anchors.empty()) throw DataError("training prefix has no anchors; increase --split or check the data");

  std::cout << "margin=" << csv::format_double(tc.margin) << " negatives=" << tc.negatives << " epochs=" << tc.epochs
            << " lr=" << csv::format_double(tc.lr) << " wd=" << csv::format_double(tc.weight_decay)
            << " r_th=" << csv::format_double(o.loops.r_th) << " gamma=" << o.loops.gamma << "\n";
  std::cout << "extractor=" << to_string(mc.extractor) << " head=" << to_string(mc.head) << " points=" << mc.n_points
            << " channels=" << mc.channels << " dim=" << mc.dim << " seed=" << tc.seed << "\n";
  std::cout << "training on scans 1.." << split << " with " << gt.anchors.size() << " anchors\n";

  Model model(mc);
  model.init(o.init_seed_given ? o.init_seed : mix_seed(tc.seed, 0x1417));
  const TrainResult result = train(model, seq, gt, tc, [](int epoch, double loss) {
    std::cout << "epoch " << epoch << " loss " << csv::format_double(loss) << "\n" << std::flush;
  });
  model.save(o.out / "model.ornn");
  csv::write_file(o.out / "loss.csv", loss_trace_csv(result));
  csv::write_file(o.out / "model.cfg", model_cfg_text(mc));
  std::cout << "wrote " << (o.out / "model.ornn").string() << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOptions {
  fs::path model;
  bool oracle = false;
  fs::path data;
  fs::path test_manifest;
  fs::path train_manifest;
  fs::path out;
  std::vector<std::string> at = {"1", "1pct"};
  double split = 0.6;
  std::uint64_t seed = 0;
  LoopOptions loops;
  ModelOptions model_opts;
};

struct Evaluated {
  RecallReport report;
  std::vector<Descriptor> descriptors;
  Sequence seq;
};

Evaluated evaluate_manifest(const fs::path& manifest, const std::optional<Model>& model, Index oracle_dim,
                            const EvalOptions& o, const std::vector<RecallCutoff>& cutoffs) {
  Evaluated e;
  e.seq = load_sequence(manifest_path(manifest));
  const LoopGroundTruth gt = build_ground_truth(e.seq.entries, o.loops.r_th, o.loops.gamma);
  if (model) {
    e.descriptors = describe_sequence(*model, e.seq, o.seed);
  } else {
    for (const auto& entry : e.seq.entries) e.descriptors.push_back(oracle_descriptor(entry, oracle_dim));
  }
  const int first = o.split > 0.0 ? split_index(gt, o.split) : 0;
  e.report = evaluate_recall(e.descriptors, e.seq.entries, gt, o.loops.gamma, cutoffs,
                             [first](int index) { return index > first; });
  return e;
}

void print_report(const std::string& name, const RecallReport& r) {
  std::cout << name << ": " << r.anchors.size() << " anchors";
  for (std::size_t c = 0; c < r.cutoffs.size(); ++c) {
    std::cout << "  recall@" << r.cutoffs[c].label() << "=" << csv::format_double(r.recall[c]);
  }
  std::cout << "\n";
}

int cmd_eval(EvalOptions& o) {
  const fs::path test = !o.test_manifest.empty() ? o.test_manifest : o.data;
  if (test.empty()) throw UsageError("eval needs --data or --test-manifest");
  if (o.oracle == !o.model.empty()) throw UsageError("eval needs exactly one of --model and --oracle");
  if (o.split < 0.0 || o.split >= 1.0) throw UsageError("--split must lie in [0, 1)");
  std::vector<RecallCutoff> cutoffs;
  for (const auto& a : o.at) cutoffs.push_back(RecallCutoff::parse(a));

  const ModelConfig mc = o.model_opts.config();
  std::optional<Model> model;
  if (!o.oracle) {
    model.emplace(mc);
    model->load(o.model);
  }
  ensure_dir(o.out);

  const Evaluated test_run = evaluate_manifest(test, model, mc.dim, o, cutoffs);
  print_report("test", test_run.report);
  csv::write_file(o.out / "recall.csv", recall_csv(test_run.report));
  for (std::size_t c = 0; c < cutoffs.size(); ++c) {
    csv::write_file(o.out / ("per_anchor_" + cutoffs[c].file_tag() + ".csv"), per_anchor_csv(test_run.report, c));
  }
  DescriptorDB db(test_run.descriptors.empty() ? 0 : test_run.descriptors.front().size());
  for (std::size_t k = 0; k < test_run.descriptors.size(); ++k) {
    db.append(test_run.seq.entries[k].index, test_run.descriptors[k]);
  }
  save_descriptor_db(o.out / "descriptors.ordb", db);

  if (!o.train_manifest.empty()) {
    const Evaluated same = evaluate_manifest(o.train_manifest, model, mc.dim, o, cutoffs);
    print_report("same-season", same.report);
    csv::write_file(o.out / "recall_same_season.csv", recall_csv(same.report));
    for (std::size_t c = 0; c < cutoffs.size(); ++c) {
      std::cout << "degradation@" << cutoffs[c].label() << "="
                << csv::format_double(same.report.recall[c] - test_run.report.recall[c]) << "\n";
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// mcl

struct MclOptions {
  fs::path data;
  fs::path model;
  fs::path out;
  std::string proposals = "off";
  LocalizationConfig loc = LocalizationConfig::drift_preset();
  double noise_scale = 1.0;
  std::uint64_t seed = 0;
  std::uint64_t describe_seed = 0;
  ModelOptions model_opts;
};

int cmd_mcl(MclOptions& o) {
  if (o.noise_scale < 0.0) throw UsageError("--motion-noise-scale must be nonnegative");
  if (o.proposals == "model" && o.model.empty()) throw UsageError("--proposals model needs --model");
  const fs::path mpath = manifest_path(o.data);
  const Manifest manifest = read_manifest(mpath);
  if (manifest.landmarks.empty()) throw DataError("missing landmarks: " + mpath.string() + " lists no landmark file");
  const std::vector<Eigen::Vector2d> landmarks = read_landmarks_csv(manifest.resolve(manifest.landmarks));
  const Sequence seq = load_sequence(mpath);
  ensure_dir(o.out);

  LocalizationConfig cfg = o.loc;
  cfg.seed = o.seed;
  cfg.motion_noise_xy *= o.noise_scale;
  cfg.motion_noise_xy_per_m *= o.noise_scale;
  cfg.motion_noise_heading *= o.noise_scale;
  cfg.motion_noise_heading_per_rad *= o.noise_scale;
  cfg.init_spread.x *= o.noise_scale;
  cfg.init_spread.y *= o.noise_scale;
  cfg.init_spread.heading *= o.noise_scale;

  std::vector<Descriptor> descriptors;
  if (o.proposals == "oracle") {
    for (const auto& e : seq.entries) descriptors.push_back(oracle_descriptor(e, 3));
  } else if (o.proposals == "model") {
    Model model(o.model_opts.config());
    model.load(o.model);
    descriptors = describe_sequence(model, seq, o.describe_seed);
  }
  const LocalizationResult r = run_localization({&seq, &landmarks, &descriptors}, cfg);
  csv::write_file(o.out / "trajectory.csv", trajectory_csv(r));
  csv::write_file(o.out / "trajectory.svg", trajectory_svg(r, landmarks));
  const double dr = rmse(r.dead_reckoning, r.truth, 0, r.truth.size());
  std::cout << "proposals=" << o.proposals << " particles=" << cfg.particles << " seed=" << cfg.seed << "\n";
  std::cout << "rmse=" << csv::format_double(r.rmse) << " rmse_final_third=" << csv::format_double(r.rmse_final_third)
            << " dead_reckoning_rmse=" << csv::format_double(dr) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Orchard place recognition: synthetic data, training, evaluation and localization"};
  app.option_defaults()->always_capture_default()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");
  const std::string config_help = "Read key=value defaults from FILE (# starts a comment; flags override)";

  SynthOptions synth;
  CLI::App* s = app.add_subcommand("synth", "Generate a synthetic orchard sequence");
  s->add_option("--config", config_help);
  s->add_option("--preset", synth.preset, "Season preset; autumn-like drives multiple revisits, summer-like one")
      ->check(CLI::IsMember({"autumn-like", "summer-like"}));
  s->add_option("--plan", synth.plan, "Override the path plan (single_revisit|multi_revisit)");
  s->add_option("--scale", synth.scale, "Orchard size")->check(CLI::IsMember({"desk", "paper"}));
  s->add_option("--seed", synth.seed, "Generator seed");
  s->add_option("--out", synth.out, "Output directory")->required();

  TrainOptions train_o;
  CLI::App* t = app.add_subcommand("train", "Train a descriptor model with the lazy triplet loss");
  t->add_option("--config", config_help);
  t->add_option("--data", train_o.data, "Dataset manifest or directory")->required();
  t->add_option("--out", train_o.out, "Output directory for model.ornn, model.cfg and loss.csv")->required();
  t->add_option("--margin", train_o.triplet.margin, "Triplet margin");
  t->add_option("--negatives", train_o.triplet.negatives, "Negatives sampled per anchor");
  t->add_option("--epochs", train_o.triplet.epochs, "Training epochs");
  t->add_option("--lr", train_o.triplet.lr, "AdamW learning rate");
  t->add_option("--wd", train_o.triplet.weight_decay, "AdamW decoupled weight decay");
  t->add_option("--seed", train_o.triplet.seed, "Seed for sampling, augmentation and (by default) initialization");
  auto* init_opt = t->add_option("--init-seed", train_o.init_seed, "Separate initialization seed");
  t->add_flag("--no-augment", train_o.no_augment, "Disable random yaw augmentation");
  t->add_option("--split", train_o.split, "Train on the scans up to this fraction of the loop anchors");
  train_o.loops.add(*t);
  train_o.model.add(*t);

  EvalOptions eval_o;
  CLI::App* e = app.add_subcommand("eval", "Incremental recall@N evaluation");
  e->add_option("--config", config_help);
  e->add_option("--model", eval_o.model, "Checkpoint to evaluate");
  e->add_flag("--oracle", eval_o.oracle, "Use the pose-embedding oracle instead of a model");
  e->add_option("--data", eval_o.data, "Dataset manifest or directory");
  e->add_option("--test-manifest", eval_o.test_manifest, "Evaluation sequence (takes precedence over --data)");
  e->add_option("--train-manifest", eval_o.train_manifest,
                "Training-season sequence; adds the same-season recall and the degradation");
  e->add_option("--at", eval_o.at, "Recall cutoffs: N or a percentage such as 1pct")
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  e->add_option("--split", eval_o.split, "Only score anchors after this fraction of the anchors (0 scores all)");
  e->add_option("--seed", eval_o.seed, "Downsampling seed");
  e->add_option("--out", eval_o.out, "Output directory")->required();
  eval_o.loops.add(*e);
  eval_o.model_opts.add(*e);

  MclOptions mcl;
  CLI::App* m = app.add_subcommand("mcl", "Monte Carlo localization with loop proposals");
  m->add_option("--config", config_help);
  m->add_option("--data", mcl.data, "Dataset manifest or directory (needs landmarks)")->required();
  m->add_option("--proposals", mcl.proposals, "Loop proposal source")->check(CLI::IsMember({"off", "model", "oracle"}));
  m->add_option("--model", mcl.model, "Checkpoint for --proposals model");
  m->add_option("--particles", mcl.loc.particles, "Particle count");
  m->add_option("--p-inject", mcl.loc.p_inject, "Probability that a resampling slot draws a loop proposal");
  m->add_option("--proposals-per-query", mcl.loc.proposals_per_query, "Retrieved candidates per scan");
  m->add_option("--exclude-window", mcl.loc.exclude_window, "Scans this close in time are never proposed");
  m->add_option("--subsample", mcl.loc.likelihood.subsample, "Keep every k-th scan point in the likelihood");
  m->add_option("--sigma", mcl.loc.likelihood.sigma, "Likelihood field sigma in metres");
  m->add_option("--odom-scale-bias", mcl.loc.odometry.scale_bias, "Relative odometry translation bias");
  m->add_option("--odom-heading-bias", mcl.loc.odometry.heading_bias, "Odometry heading bias in rad per metre");
  m->add_option("--odom-trans-noise", mcl.loc.odometry.trans_noise, "Odometry translation noise per metre");
  m->add_option("--odom-rot-noise", mcl.loc.odometry.rot_noise, "Odometry rotation noise per radian");
  m->add_option("--motion-noise-scale", mcl.noise_scale, "Scales the filter's motion noise and initial spread");
  m->add_option("--seed", mcl.seed, "Filter seed");
  m->add_option("--describe-seed", mcl.describe_seed, "Downsampling seed for model descriptors");
  m->add_option("--out", mcl.out, "Output directory for trajectory.csv and trajectory.svg")->required();
  mcl.model_opts.add(*m);

  try {
    std::vector<std::string> args(argv, argv + argc);
    args = expand_config(app, args);
    std::vector<std::string> reversed(args.rbegin(), args.rend() - 1);
    app.parse(reversed);
    train_o.init_seed_given = init_opt->count() > 0;

    if (s->parsed()) return cmd_synth(synth);
    if (t->parsed()) return cmd_train(train_o);
    if (e->parsed()) return cmd_eval(eval_o);
    if (m->parsed()) return cmd_mcl(mcl);
    return 1;
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  } catch (const UsageError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  } catch (const DataError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  } catch (const NumericError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 3;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  }
}

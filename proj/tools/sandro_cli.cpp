// Command-line front end: register, features, bench, eval, synth.

#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "sandro/sandro.hpp"

namespace {

using namespace sandro;

struct SolverFlags {
  std::map<std::string, std::string> values;  // config key -> raw value

  void add(CLI::App* app) {
    const std::pair<const char*, const char*> flags[] = {
        {"--voxel", "voxel"},       {"--splits", "splits"},       {"--alpha0", "alpha0"},
        {"--beta", "beta"},         {"--epsilon", "epsilon"},     {"--max-iters", "max_iters"},
        {"--scheme", "scheme"},     {"--selection", "selection"}, {"--seed", "seed"},
        {"--normal-radius", "normal_radius"}, {"--feature-radius", "feature_radius"},
        {"--threshold-rot-deg", "threshold_rot_deg"}, {"--threshold-trans-m", "threshold_trans_m"},
    };
    for (const auto& [flag, key] : flags) {
      app->add_option_function<std::string>(
          flag, [this, k = std::string(key)](const std::string& v) { values[k] = v; },
          std::string("override config field '") + key + "'");
    }
  }

  RunConfig resolve(const std::string& config_path) const {
    RunConfig cfg;
    std::string path = config_path;
    if (path.empty()) {
      if (const char* env = std::getenv(kConfigEnvVar)) path = env;
    }
    if (!path.empty()) cfg = RunConfig::from_file(path);
    for (const auto& [k, v] : values) cfg.set(k, v);
    cfg.validate();
    return cfg;
  }
};

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
  } else {
    atomic_write(out_path, text);
  }
}

std::string descriptors_csv(const FeatureStage& f) {
  std::ostringstream os;
  os << "cloud,index";
  for (std::size_t b = 0; b < kFpfhSize; ++b) os << ",b" << b;
  os << '\n' << std::setprecision(17);
  auto dump = [&](const char* name, const std::vector<FpfhDescriptor>& d) {
    for (std::size_t i = 0; i < d.size(); ++i) {
      os << name << ',' << i;
      for (double x : d[i]) os << ',' << x;
      os << '\n';
    }
  };
  dump("source", f.source_descriptors);
  dump("target", f.target_descriptors);
  return os.str();
}

std::string trial_records_jsonl(const std::vector<TrialRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::json j;
    j["method"] = r.method;
    j["scenario"] = r.scenario;
    j["trial"] = r.trial;
    j["outlier_rate"] = r.outlier_rate;
    j["rotation_error_deg"] = std::isfinite(r.rotation_error_deg) ? nlohmann::json(r.rotation_error_deg) : nlohmann::json(nullptr);
    j["translation_error_m"] =
        std::isfinite(r.translation_error_m) ? nlohmann::json(r.translation_error_m) : nlohmann::json(nullptr);
    j["success"] = r.success;
    j["wall_ms"] = r.wall_ms;
    j["winner"] = r.winner;
    j["ground_truth"] = transform_to_json(r.ground_truth);
    j["estimate"] = transform_to_json(r.estimate);
    if (!r.error.empty()) j["error"] = r.error;
    out += j.dump() + '\n';
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust point-cloud registration with graduated non-convexity and correspondence splitting"};
  app.require_subcommand(1);

  // register
  auto* reg = app.add_subcommand("register", "Register a source cloud onto a target cloud");
  std::string reg_source, reg_target, reg_out, reg_matches, reg_config;
  SolverFlags reg_flags;
  reg->add_option("source", reg_source, "Source PLY")->required();
  reg->add_option("target", reg_target, "Target PLY")->required();
  reg->add_option("--out", reg_out, "Write the result record here instead of stdout");
  reg->add_option("--matches", reg_matches, "CSV of src_idx,tgt_idx pairs; skips FPFH matching");
  reg->add_option("--config", reg_config, std::string("Key-value config file (default: $") + kConfigEnvVar + ")");
  reg_flags.add(reg);

  // features
  auto* feat = app.add_subcommand("features", "Compute FPFH mutual matches between two clouds");
  std::string feat_source, feat_target, feat_out, feat_src_out, feat_tgt_out, feat_desc_out, feat_config;
  SolverFlags feat_flags;
  feat->add_option("source", feat_source, "Source PLY")->required();
  feat->add_option("target", feat_target, "Target PLY")->required();
  feat->add_option("--out", feat_out, "Matches CSV (stdout if omitted)");
  feat->add_option("--source-out", feat_src_out, "Write the downsampled source (match indices refer to it)");
  feat->add_option("--target-out", feat_tgt_out, "Write the downsampled target");
  feat->add_option("--descriptors-out", feat_desc_out, "Write all descriptors as CSV");
  feat->add_option("--config", feat_config, "Key-value config file");
  feat_flags.add(feat);

  // bench
  auto* bench = app.add_subcommand("bench", "Run a synthetic outlier campaign");
  std::string bench_config, bench_out, bench_records;
  bench->add_option("config", bench_config, "Campaign config file")->required();
  bench->add_option("--out", bench_out, "Aggregate CSV (stdout if omitted)");
  bench->add_option("--records", bench_records, "Per-trial records as JSON lines");

  // eval
  auto* ev = app.add_subcommand("eval", "Compare an estimated transform with ground truth");
  std::string ev_est, ev_gt;
  SuccessThresholds thresholds;
  ev->add_option("estimate", ev_est, "Estimate: result record or 16 numbers")->required();
  ev->add_option("ground_truth", ev_gt, "Ground truth: result record or 16 numbers")->required();
  ev->add_option("--threshold-rot-deg", thresholds.rotation_deg, "Rotation threshold, degrees");
  ev->add_option("--threshold-trans-m", thresholds.translation_m, "Translation threshold, meters");

  // synth
  auto* synth = app.add_subcommand("synth", "Write one synthetic registration problem to disk");
  double synth_rate = 0.5, synth_voxel = 0.02;
  std::uint64_t synth_seed = 1;
  std::string synth_input, synth_src_out, synth_tgt_out, synth_gt_out, synth_matches_out;
  synth->add_option("--rate", synth_rate, "Outlier rate in [0, 1)");
  synth->add_option("--seed", synth_seed, "Scenario seed");
  synth->add_option("--input", synth_input, "Source PLY (built-in stand-in if omitted)");
  synth->add_option("--voxel", synth_voxel, "Downsampling voxel, 0 disables");
  synth->add_option("--source-out", synth_src_out, "Source PLY output")->required();
  synth->add_option("--target-out", synth_tgt_out, "Target PLY output")->required();
  synth->add_option("--gt-out", synth_gt_out, "Ground-truth record output")->required();
  synth->add_option("--matches-out", synth_matches_out, "Identity correspondences CSV output");

  CLI11_PARSE(app, argc, argv);

  try {
    if (reg->parsed()) {
      const RunConfig cfg = reg_flags.resolve(reg_config);
      const PointCloud source = read_cloud(reg_source);
      const PointCloud target = read_cloud(reg_target);
      std::optional<CorrespondenceSet> matches;
      if (!reg_matches.empty()) matches = read_correspondences(reg_matches);
      const RegistrationResult result = register_clouds(source, target, cfg, matches);
      emit(result.to_json().dump(2) + '\n', reg_out);
    } else if (feat->parsed()) {
      const RunConfig cfg = feat_flags.resolve(feat_config);
      const FeatureStage f = compute_features(read_cloud(feat_source), read_cloud(feat_target), cfg);
      if (!feat_src_out.empty()) write_cloud(f.source, feat_src_out);
      if (!feat_tgt_out.empty()) write_cloud(f.target, feat_tgt_out);
      if (!feat_desc_out.empty()) atomic_write(feat_desc_out, descriptors_csv(f));
      emit(correspondences_csv(f.matches), feat_out);
    } else if (bench->parsed()) {
      const CampaignConfig cfg = CampaignConfig::from_file(bench_config);
      PointCloud source = cfg.source == "builtin" ? make_standin_cloud() : read_cloud(cfg.source);
      if (cfg.voxel > 0.0) source = voxel_downsample(source, cfg.voxel);
      const CampaignResult result = run_campaign(source, cfg.scenarios(source), cfg.methods, cfg.options);
      if (!bench_records.empty()) atomic_write(bench_records, trial_records_jsonl(result.records));
      emit(aggregates_csv(result.aggregates), bench_out);
    } else if (ev->parsed()) {
      const RigidTransform est = read_transform(ev_est);
      const RigidTransform gt = read_transform(ev_gt);
      nlohmann::json j;
      j["rotation_error_deg"] = rotation_error(est, gt);
      j["translation_error_m"] = translation_error(est, gt);
      const bool ok = thresholds.success(j["rotation_error_deg"], j["translation_error_m"]);
      j["success"] = ok;
      std::cout << j.dump() << '\n';
      return ok ? 0 : 1;
    } else if (synth->parsed()) {
      PointCloud source = synth_input.empty() ? make_standin_cloud() : read_cloud(synth_input);
      if (synth_voxel > 0.0) source = voxel_downsample(source, synth_voxel);
      ScenarioConfig sc;
      sc.outlier_rate = synth_rate;
      const GeneratedPair gen = generate_pair(source, sc, synth_seed);
      write_cloud(gen.source, synth_src_out);
      write_cloud(gen.target, synth_tgt_out);
      nlohmann::json gt;
      gt["transform"] = transform_to_json(gen.ground_truth);
      atomic_write(synth_gt_out, gt.dump(2) + '\n');
      if (!synth_matches_out.empty()) atomic_write(synth_matches_out, correspondences_csv(gen.correspondences));
    }
  } catch (const Error& e) {
    nlohmann::json j;
    j["error"] = std::string(category_name(e.category()));
    j["message"] = e.what();
    std::cerr << j.dump() << '\n';
    return exit_code(e.category());
  } catch (const std::exception& e) {
    nlohmann::json j;
    j["error"] = "internal";
    j["message"] = e.what();
    std::cerr << j.dump() << '\n';
    return 1;
  }
  return 0;
}

#include "evgrasp/mems/escore.hpp"
#include "evgrasp/pipeline/model_based.hpp"
#include "evgrasp/pipeline/model_free.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace evg;
namespace fs = std::filesystem;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitPipeline = 3;
constexpr int kExitIo = 4;

struct ScenarioArgs {
  std::string scenario_path;
  std::string out_dir;
  std::optional<uint64_t> seed;
  std::vector<std::string> overrides;

  void attach(CLI::App* cmd, bool need_out) {
    cmd->add_option("--scenario", scenario_path, "Scenario JSON file")->required();
    auto* out = cmd->add_option("--out", out_dir, "Output directory");
    if (need_out) out->required();
    cmd->add_option("--seed", seed, "Override the scenario seed");
    cmd->add_option("--override", overrides,
                    "Override a scenario value as section.key=value (repeatable)");
  }

  [[nodiscard]] pipeline::Scenario load() const {
    std::ifstream f(scenario_path);
    if (!f) throw ParseError(ParseError::Kind::Io, 0, "cannot open " + scenario_path);
    nlohmann::json j;
    try {
      f >> j;
    } catch (const nlohmann::json::exception& e) {
      throw pipeline::ScenarioError("scenario parse error: " + std::string(e.what()));
    }
    for (const auto& o : overrides) pipeline::apply_override(j, o);
    if (seed) j["seed"] = *seed;
    return pipeline::parse_scenario(j);
  }
};

int cmd_simulate(const ScenarioArgs& args, const std::string& phase) {
  const auto sc = args.load();
  fs::create_directories(args.out_dir);
  const Trajectory traj =
      phase == "slosh" ? sc.slosh_trajectory(0) : sc.scan_trajectory();
  auto labeled = generate_labeled_events(sc.scene, traj, sc.camera,
                                         sc.motion.sim_dt_us,
                                         pipeline::derive_seed(sc.seed, 1));
  if (sc.noise.rate_hz > 0.0)
    labeled =
        inject_noise(labeled, sc.noise.rate_hz, pipeline::derive_seed(sc.seed, 2));
  write_events(labeled.stream, fs::path(args.out_dir) / "events.csv");
  io::write_labels(labeled.labels, fs::path(args.out_dir) / "labels.csv");
  std::cout << "wrote " << labeled.stream.events.size() << " events (" << phase
            << " phase)\n";
  return kExitOk;
}

int cmd_filter(const std::string& in, const std::string& out, int64_t window_us,
               int radius, int width, int height) {
  const auto stream = read_events(in, width, height);
  const auto filtered = filter_noise(stream, window_us, radius);
  write_events(filtered, out);
  std::cout << "kept " << filtered.events.size() << " of " << stream.events.size()
            << " events\n";
  return kExitOk;
}

int cmd_segment(const std::string& in, const std::string& labels_path,
                const std::string& out, const mems::MemsConfig& cfg, uint64_t seed,
                int width, int height) {
  const auto stream = read_events(in, width, height);
  const auto clusters = mems::segment(stream, cfg, seed);
  io::write_clusters(clusters, out);
  std::cout << "clusters: " << clusters.num_clusters() << "\n";
  if (!labels_path.empty()) {
    const auto truth = io::read_labels(labels_path);
    std::vector<int32_t> retained_truth;
    for (std::size_t idx : clusters.retained_indices)
      retained_truth.push_back(truth.at(idx));
    const auto q = mems::clustering_quality(clusters.labels, retained_truth);
    std::cout << "precision: " << q.precision << "\nrecall: " << q.recall
              << "\nF1: " << q.f1 << "\n";
  }
  return kExitOk;
}

int cmd_emvs(const ScenarioArgs& args, const std::string& events_path) {
  const auto sc = args.load();
  fs::create_directories(args.out_dir);
  const auto stream = read_events(events_path, sc.camera.width, sc.camera.height);
  const Trajectory traj = sc.scan_trajectory();
  const auto dsi =
      emvs::build_dsi(stream, traj, sc.camera, sc.emvs.z_min, sc.emvs.z_max,
                      static_cast<std::size_t>(sc.emvs.n_z));
  uint32_t max_vote = 0;
  for (uint32_t v : dsi.scores) max_vote = std::max(max_vote, v);
  const auto threshold = std::max<uint32_t>(
      1, static_cast<uint32_t>(std::lround(sc.emvs.confidence_rel * max_vote)));
  const auto map = emvs::extract_depth(dsi, threshold);
  io::write_depth_map(map, fs::path(args.out_dir) / "depth_map.csv");
  const auto cloud = emvs::to_point_cloud(map, sc.camera, dsi.ref_pose);
  io::write_point_cloud(cloud, fs::path(args.out_dir) / "cloud.csv");
  std::cout << "votes: " << dsi.total_votes()
            << "\nskipped events: " << dsi.skipped_events
            << "\ndepth pixels: " << map.valid_count()
            << "\ncloud points: " << cloud.size() << "\n";
  return kExitOk;
}

int cmd_register(const std::string& cloud_path, const std::string& out) {
  const auto cloud = io::read_point_cloud(cloud_path);
  const auto reg = register_model(cloud);
  io::write_transform(reg.transform, out);
  std::cout << "centroid: " << reg.centroid.x() << " " << reg.centroid.y() << " "
            << reg.centroid.z() << "\nyaw_deg: " << reg.yaw_deg
            << "\nscale: " << reg.transform.c << "\nmse: " << reg.transform.mse
            << "\n";
  return kExitOk;
}

int cmd_evaluate(const std::string& in, const std::string& out, double l_p,
                 double l_r) {
  std::ifstream f(in);
  if (!f) throw ParseError(ParseError::Kind::Io, 0, "cannot open " + in);
  const evaluation::Limits lim{l_p, l_r};

  std::vector<io::MetricsRow> rows;
  std::string line;
  std::size_t line_no = 0;
  std::getline(f, line);  // header
  ++line_no;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream is(line);
    io::MetricsRow row;
    double gx, gy, gyaw, ox, oy, oyaw, ax, ay, ayaw;
    if (!(is >> row.scenario >> row.object_id >> gx >> gy >> gyaw >> ox >> oy >>
          oyaw >> ax >> ay >> ayaw))
      throw ParseError(ParseError::Kind::MalformedLine, line_no,
                       "malformed pose row at line " + std::to_string(line_no));
    const Pose grip = Pose::planar({gx, gy, 0.0}, gyaw);
    const Pose before = Pose::planar({ox, oy, 0.0}, oyaw);
    const Pose after = Pose::planar({ax, ay, 0.0}, ayaw);
    row.metrics = evaluation::evaluate_grasp(grip, before, after, lim);
    rows.push_back(std::move(row));
  }
  io::write_metrics_report(rows, out);
  std::cout << "evaluated " << rows.size() << " grasps\n";
  return kExitOk;
}

int cmd_bench(const ScenarioArgs& args, const std::string& sweep, int reps) {
  const auto sc = args.load();
  fs::create_directories(args.out_dir);

  // Labeled observation stream straight from the simulator.
  const Trajectory slosh = sc.slosh_trajectory(0);
  const auto labeled =
      generate_labeled_events(sc.scene, slosh, sc.camera, sc.motion.sim_dt_us,
                              pipeline::derive_seed(sc.seed, 4));

  std::ofstream out(fs::path(args.out_dir) / ("bench_" + sweep + ".csv"),
                    std::ios::binary);
  out << "sweep,value,t_e_us,precision,recall,f1,ere,fre,e_score\n";

  mems::MemsConfig base_cfg = sc.mems;
  base_cfg.alpha = 0.0;
  base_cfg.beta = 1;
  const auto base =
      mems::bench_segment(labeled.stream, labeled.labels, base_cfg, reps, sc.seed);

  auto emit = [&](double value, const mems::EScoreInputs& in) {
    const auto r = mems::e_score(base, in);
    out << sweep << ',' << value << ',' << in.t_e_us << ',' << in.precision << ','
        << in.recall << ',' << in.f1 << ',' << r.ere << ',' << r.fre << ','
        << r.e_score << '\n';
    std::cout << sweep << "=" << value << " T_e=" << in.t_e_us << "us F1=" << in.f1
              << " E-score=" << r.e_score << "\n";
  };

  if (sweep == "alpha") {
    for (int i = 0; i < 20; ++i) {
      mems::MemsConfig cfg = base_cfg;
      cfg.alpha = 0.05 * i;
      emit(cfg.alpha,
           mems::bench_segment(labeled.stream, labeled.labels, cfg, reps, sc.seed));
    }
  } else {
    for (int beta = 1; beta <= 10; ++beta) {
      mems::MemsConfig cfg = base_cfg;
      cfg.beta = beta;
      emit(beta,
           mems::bench_segment(labeled.stream, labeled.labels, cfg, reps, sc.seed));
    }
  }
  return kExitOk;
}

int cmd_run(const ScenarioArgs& args, const std::string& pipeline_override) {
  auto sc = args.load();
  if (pipeline_override == "model_based")
    sc.pipeline = pipeline::PipelineKind::ModelBased;
  else if (pipeline_override == "model_free")
    sc.pipeline = pipeline::PipelineKind::ModelFree;
  else if (!pipeline_override.empty())
    throw pipeline::ScenarioError("pipeline must be model_based or model_free");

  const auto result = sc.pipeline == pipeline::PipelineKind::ModelBased
                          ? pipeline::run_model_based(sc, args.out_dir)
                          : pipeline::run_model_free(sc, args.out_dir);
  std::cout << "objects: " << result.rows.size()
            << "\nsuccess rate: " << result.success_rate() << "\n";
  for (const auto& row : result.rows)
    if (row.failed)
      std::cout << "object " << row.object_id << " failed: " << row.error << "\n";
  return result.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-camera grasping pipelines: simulation, segmentation, "
               "reconstruction, servoing and evaluation"};
  app.require_subcommand(1);

  ScenarioArgs sim_args, emvs_args, bench_args, run_args;
  std::string phase = "scan";
  auto* sim =
      app.add_subcommand("simulate-events", "Render a scenario into an event stream");
  sim_args.attach(sim, true);
  sim->add_option("--phase", phase, "Trajectory phase: scan or slosh")
      ->check(CLI::IsMember({"scan", "slosh"}));

  std::string in_path, out_path;
  int64_t window_us = 2000;
  int radius = 1, width = 346, height = 260;
  auto* filter = app.add_subcommand("filter", "Background-activity noise filter");
  filter->add_option("--in", in_path, "Input event file")->required();
  filter->add_option("--out", out_path, "Output event file")->required();
  filter->add_option("--window-us", window_us, "Support window, microseconds");
  filter->add_option("--radius", radius, "Neighborhood radius, pixels");
  filter->add_option("--width", width, "Sensor width");
  filter->add_option("--height", height, "Sensor height");

  mems::MemsConfig seg_cfg;
  uint64_t seg_seed = 0;
  std::string seg_in, seg_out, seg_labels;
  int seg_w = 346, seg_h = 260;
  auto* seg = app.add_subcommand("segment", "Spatio-temporal mean-shift clustering");
  seg->add_option("--in", seg_in, "Input event file")->required();
  seg->add_option("--out", seg_out, "Cluster output file")->required();
  seg->add_option("--labels", seg_labels, "Ground-truth labels for F1");
  seg->add_option("--sigma", seg_cfg.sigma, "Kernel bandwidth, pixels");
  seg->add_option("--alpha", seg_cfg.alpha, "Shift acceleration, [0, 1)");
  seg->add_option("--beta", seg_cfg.beta, "Downsampling stride");
  seg->add_option("--kappa", seg_cfg.time_scale, "Temporal scale, px per ms");
  seg->add_option("--seed", seg_seed, "Seed");
  seg->add_option("--width", seg_w, "Sensor width");
  seg->add_option("--height", seg_h, "Sensor height");

  std::string emvs_events;
  auto* emvs_cmd = app.add_subcommand("emvs", "Ray-vote depth from corner events");
  emvs_args.attach(emvs_cmd, true);
  emvs_cmd->add_option("--events", emvs_events, "Corner event file")->required();

  std::string reg_cloud, reg_out;
  auto* reg = app.add_subcommand("register", "Fit the unit-cube model to a cloud");
  reg->add_option("--cloud", reg_cloud, "Point cloud file")->required();
  reg->add_option("--out", reg_out, "Transform record output")->required();

  std::string eval_in, eval_out;
  double l_p = 2.0, l_r = 15.0;
  auto* eval = app.add_subcommand("evaluate", "Grasp metrics from pose records");
  eval->add_option("--in", eval_in, "Pose rows input")->required();
  eval->add_option("--out", eval_out, "Metrics report output")->required();
  eval->add_option("--l-p-cm", l_p, "Position limit, cm");
  eval->add_option("--l-r-deg", l_r, "Orientation limit, degrees");

  std::string sweep = "beta";
  int reps = 5;
  auto* bench =
      app.add_subcommand("bench-mems", "Sweep alpha or beta, report E-score");
  bench_args.attach(bench, true);
  bench->add_option("--sweep", sweep, "Parameter to sweep: alpha or beta")
      ->check(CLI::IsMember({"alpha", "beta"}));
  bench->add_option("--reps", reps, "Repetitions per setting (median time)");

  std::string pipeline_override;
  auto* run = app.add_subcommand("run", "Execute a grasping pipeline end to end");
  run_args.attach(run, true);
  run->add_option("--pipeline", pipeline_override,
                  "Override the scenario pipeline choice");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (sim->parsed()) return cmd_simulate(sim_args, phase);
    if (filter->parsed())
      return cmd_filter(in_path, out_path, window_us, radius, width, height);
    if (seg->parsed())
      return cmd_segment(seg_in, seg_labels, seg_out, seg_cfg, seg_seed, seg_w, seg_h);
    if (emvs_cmd->parsed()) return cmd_emvs(emvs_args, emvs_events);
    if (reg->parsed()) return cmd_register(reg_cloud, reg_out);
    if (eval->parsed()) return cmd_evaluate(eval_in, eval_out, l_p, l_r);
    if (bench->parsed()) return cmd_bench(bench_args, sweep, reps);
    if (run->parsed()) return cmd_run(run_args, pipeline_override);
  } catch (const pipeline::ScenarioError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParseError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "pipeline error: " << e.what() << "\n";
    return kExitPipeline;
  }
  return kExitOk;
}

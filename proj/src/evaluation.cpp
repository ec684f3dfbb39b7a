#include "oreos/evaluation.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace oreos {

namespace fs = std::filesystem;

namespace {

void require_exists(const fs::path& p, const std::string& what) {
  if (!fs::exists(p)) throw std::runtime_error("missing " + what + ": " + p.string());
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  return f;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

void note(std::ostream* log, const std::string& line) {
  if (log) *log << line << std::endl;
}

synth::TrajectoryParams lap_params(const WorldConfig& w, const std::vector<double>& offsets,
                                   double start_step, double place_radius, std::uint64_t seed) {
  synth::TrajectoryParams p;
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    p.laps.push_back({offsets[i], start_step * static_cast<double>(i)});
  }
  p.spacing = w.spacing;
  p.heading_jitter = w.heading_jitter;
  p.lateral_jitter = w.lateral_jitter;
  p.place_radius = place_radius;
  p.seed = seed;
  return p;
}

OreosNet load_net(const RunConfig& config) {
  const fs::path ckpt = config.resolve(config.checkpoint);
  require_exists(ckpt, "checkpoint");
  OreosNet net = OreosNet::load(ckpt);
  if (!(net.projection() == config.projection)) {
    throw std::runtime_error("checkpoint " + ckpt.string() + " was trained for a different projection");
  }
  return net;
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double population_std(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

bool localization_success(double candidate_distance, double yaw_error, double max_distance, double max_yaw) {
  return candidate_distance <= max_distance && std::abs(yaw_error) <= max_yaw;
}

double EvalReport::recall_at_1() const {
  for (const RecallAtK& r : recall_at_k) {
    if (r.k == 1) return r.recall;
  }
  return 0.0;
}

EvalReport summarize(std::vector<EvalCase> cases, const std::vector<double>& shifts, int k_max,
                     std::size_t map_places, std::size_t queries) {
  EvalReport rep;
  rep.map_places = map_places;
  rep.queries = queries;

  const int ks = std::max(1, std::min<int>(k_max, static_cast<int>(std::max<std::size_t>(map_places, 1))));
  std::vector<std::vector<double>> recall_by_shift(static_cast<std::size_t>(ks));
  for (double shift : shifts) {
    std::size_t n = 0, success = 0;
    std::vector<std::size_t> hits(static_cast<std::size_t>(ks), 0);
    for (const EvalCase& c : cases) {
      if (c.shift != shift) continue;
      ++n;
      success += c.success;
      for (int k = 1; k <= ks; ++k) {
        if (c.true_rank >= 1 && c.true_rank <= k) ++hits[static_cast<std::size_t>(k - 1)];
      }
    }
    const double denom = n ? static_cast<double>(n) : 1.0;
    for (int k = 0; k < ks; ++k) {
      recall_by_shift[static_cast<std::size_t>(k)].push_back(static_cast<double>(hits[static_cast<std::size_t>(k)]) / denom);
    }
    rep.shift_curve.push_back({rad2deg(shift), static_cast<double>(success) / denom, static_cast<double>(hits[0]) / denom});
  }
  for (int k = 1; k <= ks; ++k) {
    const auto& v = recall_by_shift[static_cast<std::size_t>(k - 1)];
    rep.recall_at_k.push_back({k, mean(v), population_std(v)});
  }

  std::vector<double> yaw_errors;
  std::size_t correct = 0, correct_success = 0, estimates = 0;
  for (const EvalCase& c : cases) {
    if (!c.correct) continue;
    ++correct;
    if (std::isfinite(c.pre_icp_yaw_error)) {
      ++estimates;
      yaw_errors.push_back(std::abs(rad2deg(c.pre_icp_yaw_error)));
    }
    correct_success += c.success;
  }
  rep.yaw.samples = yaw_errors.size();
  rep.yaw.mean_deg = mean(yaw_errors);
  rep.yaw.std_deg = population_std(yaw_errors);
  rep.yaw.recall_pct = correct ? 100.0 * static_cast<double>(estimates) / static_cast<double>(correct) : 0.0;
  rep.post_icp_success_given_correct =
      correct ? static_cast<double>(correct_success) / static_cast<double>(correct) : 0.0;
  rep.cases = std::move(cases);
  return rep;
}

void write_report(const fs::path& dir, const EvalReport& report) {
  fs::create_directories(dir);
  {
    std::ofstream f = open_out(dir / "recall_vs_shift.csv");
    f << "shift_deg,recall\n";
    for (const auto& s : report.shift_curve) f << num(s.shift_deg) << ',' << num(s.recall) << '\n';
  }
  {
    std::ofstream f = open_out(dir / "recall_at_k.csv");
    f << "k,recall,stddev\n";
    for (const auto& r : report.recall_at_k) f << r.k << ',' << num(r.recall) << ',' << num(r.stddev) << '\n';
  }
  {
    std::ofstream f = open_out(dir / "yaw_stats.csv");
    f << "mean_deg,std_deg,recall_pct\n";
    f << num(report.yaw.mean_deg) << ',' << num(report.yaw.std_deg) << ',' << num(report.yaw.recall_pct) << '\n';
  }
  {
    std::ofstream f = open_out(dir / "runtimes.csv");
    f << "stage,mean_ms\n";
    for (const auto& r : report.runtimes) f << r.stage << ',' << num(r.mean_ms) << '\n';
  }
  {
    std::ofstream f = open_out(dir / "cases.csv");
    f << "query_id,shift_deg,candidate_id,candidate_distance_m,true_rank,pre_icp_yaw_error_deg,"
         "post_icp_yaw_error_deg,icp_converged,success\n";
    for (const auto& c : report.cases) {
      f << c.query_id << ',' << num(rad2deg(c.shift)) << ',' << c.candidate_id << ','
        << num(c.candidate_distance) << ',' << c.true_rank << ',' << num(rad2deg(c.pre_icp_yaw_error)) << ','
        << num(rad2deg(c.post_icp_yaw_error)) << ',' << (c.icp_converged ? 1 : 0) << ','
        << (c.success ? 1 : 0) << '\n';
    }
  }
}

void write_run_meta(const fs::path& path, const RunConfig& config, const std::string& command) {
  fs::create_directories(path.parent_path());
  std::ofstream f = open_out(path);
  f << "command = " << command << '\n';
  f << "seed = " << config.seed << '\n';
  f << "config_hash = " << config.hash() << '\n';
  f << "oreos_version = " << OREOS_VERSION << '\n';
  f << "eigen_version = " << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION << '\n';
  f << "# config\n" << config.to_keyvalue().to_string();
}

void cmd_generate(const RunConfig& config, std::ostream* log) {
  config.validate();
  const WorldConfig& w = config.world;
  const synth::Scene scene = synth::generate_scene(config.seed, w.extent, w.primitives);
  synth::SensorParams sensor;
  sensor.range_noise_sigma = w.range_noise;

  const auto write = [&](const std::string& name, const std::vector<double>& offsets, double start_step,
                         std::uint64_t traj_seed) {
    const synth::Trajectory traj = synth::make_trajectory(
        scene, lap_params(w, offsets, start_step, config.sampling.similar_radius, traj_seed));
    const std::vector<synth::ScanSample> samples = synth::generate_dataset(scene, traj, sensor);
    const fs::path dir = config.resolve(name);
    data::write_dataset(dir, samples, config.sampling);
    note(log, "wrote " + std::to_string(samples.size()) + " scans to " + dir.string());
  };
  write(config.train_data, w.train_offsets, 0.25 * w.spacing, config.seed * 2 + 1);
  write(config.eval_data, w.eval_offsets, 0.5 * w.spacing, config.seed * 2 + 2);
  write_run_meta(config.out_dir / "run_meta.txt", config, "generate");
}

TrainResult cmd_train(const RunConfig& config, std::ostream* log) {
  config.validate();
  const fs::path train_dir = config.resolve(config.train_data);
  require_exists(train_dir, "training dataset");
  const data::Dataset ds = data::load_dataset(train_dir);
  note(log, "training on " + std::to_string(ds.records.size()) + " scans");

  OreosNet net(OreosArchitecture::standard(config.projection, config.net), config.projection, config.seed);
  TrainConfig tc = config.train;
  tc.seed = config.seed;
  TrainResult result = train(net, ds.records, tc, config.sampling, config.resolve(config.model_dir), log);
  const fs::path ckpt = config.resolve(config.checkpoint);
  if (fs::absolute(ckpt) != fs::absolute(result.final_checkpoint)) {
    fs::create_directories(ckpt.parent_path());
    net.save(ckpt);
  }
  write_run_meta(config.resolve(config.model_dir) / "run_meta.txt", config, "train");
  return result;
}

EvalSplit load_eval_split(const RunConfig& config) {
  const fs::path dir = config.resolve(config.eval_data);
  require_exists(dir, "evaluation dataset");
  EvalSplit s;
  s.dataset = data::load_dataset(dir);
  const data::MapQuerySplit split = data::split_map_query(s.dataset.records, config.sampling);
  for (std::size_t i : split.map) s.map.push_back(s.dataset.records[i]);
  for (std::size_t i : split.query) s.queries.push_back(s.dataset.records[i]);
  return s;
}

DescriptorMap cmd_build_map(const RunConfig& config, std::ostream* log) {
  config.validate();
  const OreosNet net = load_net(config);
  const EvalSplit split = load_eval_split(config);
  DescriptorMap map = build_map(net, split.map);
  const fs::path out = config.resolve(config.map_file);
  fs::create_directories(out.parent_path());
  map.save(out);
  note(log, "map with " + std::to_string(map.size()) + " places written to " + out.string());
  return map;
}

LocalizationResult cmd_localize(const RunConfig& config, const fs::path& scan, int k, std::ostream* log) {
  config.validate();
  require_exists(scan, "query scan");
  const fs::path map_path = config.resolve(config.map_file);
  require_exists(map_path, "map");
  const OreosNet net = load_net(config);
  const EvalSplit split = load_eval_split(config);
  const Localizer loc(net, DescriptorMap::load(map_path), split.map, config.icp);
  const LocalizationResult r = loc.localize(data::load_kitti_scan(scan), k);
  if (log) {
    for (const MapHit& h : r.candidates) *log << "candidate " << h.id << " distance " << num(h.distance) << '\n';
    const PlanarPose p = r.pose();
    *log << "delta_theta_deg " << num(rad2deg(r.delta_theta)) << '\n'
         << "pose " << num(p.x) << ' ' << num(p.y) << ' ' << num(rad2deg(p.theta)) << '\n'
         << "icp_converged " << (r.icp_converged ? "true" : "false") << std::endl;
  }
  return r;
}

EvalReport cmd_eval(const RunConfig& config, std::ostream* log) {
  config.validate();
  const fs::path map_path = config.resolve(config.map_file);
  require_exists(map_path, "map");
  const OreosNet net = load_net(config);
  const EvalSplit split = load_eval_split(config);
  const Localizer loc(net, DescriptorMap::load(map_path), split.map, config.icp);
  const DescriptorMap& map = loc.map();

  std::vector<data::ScanRecord> queries = split.queries;
  if (config.eval.max_queries > 0 && queries.size() > static_cast<std::size_t>(config.eval.max_queries)) {
    queries.resize(static_cast<std::size_t>(config.eval.max_queries));
  }
  std::vector<double> shifts;
  const int n_shifts = static_cast<int>(std::lround(2.0 * std::numbers::pi / config.eval.yaw_step));
  for (int i = 0; i < std::max(1, n_shifts); ++i) shifts.push_back(i * config.eval.yaw_step);

  const int k = std::min<int>(config.eval.k_max, static_cast<int>(map.size()));
  std::vector<EvalCase> cases;
  std::vector<StageTimings> timings;
  for (const data::ScanRecord& q : queries) {
    for (double shift : shifts) {
      const PointCloud cloud = shift == 0.0 ? q.cloud : rotate_yaw(q.cloud, shift);
      const double gt_theta = q.gt_pose.theta - shift;
      const LocalizationResult r = loc.localize(cloud, k);
      timings.push_back(r.timings);

      EvalCase c;
      c.query_id = q.id;
      c.shift = shift;
      c.candidate_id = r.chosen_id;
      c.candidate_distance = std::hypot(r.x_nn - q.gt_pose.x, r.y_nn - q.gt_pose.y);
      for (std::size_t i = 0; i < r.candidates.size(); ++i) {
        const MapEntry& e = map.entry(r.candidates[i].index);
        if (std::hypot(e.x - q.gt_pose.x, e.y - q.gt_pose.y) <= config.eval.success_distance) {
          c.true_rank = static_cast<int>(i) + 1;
          break;
        }
      }
      c.pre_icp_yaw_error = normalize_angle(r.initial_guess.theta - gt_theta);
      c.post_icp_yaw_error = normalize_angle(r.pose().theta - gt_theta);
      c.icp_converged = r.icp_converged;
      c.correct = c.candidate_distance <= config.eval.success_distance;
      c.success = localization_success(c.candidate_distance, c.post_icp_yaw_error, config.eval.success_distance,
                                       config.eval.success_yaw);
      cases.push_back(c);
    }
  }

  EvalReport rep = summarize(std::move(cases), shifts, config.eval.k_max, map.size(), queries.size());
  // The first localization pays one-off costs and is left out of the means.
  const auto stage_mean = [&](double StageTimings::*field) {
    std::vector<double> v;
    for (std::size_t i = 1; i < timings.size(); ++i) v.push_back(timings[i].*field);
    return mean(v);
  };
  rep.runtimes = {{"projection", stage_mean(&StageTimings::projection_ms)},
                  {"cnn", stage_mean(&StageTimings::cnn_ms)},
                  {"nn_search", stage_mean(&StageTimings::nn_ms)},
                  {"yaw", stage_mean(&StageTimings::yaw_ms)},
                  {"icp", stage_mean(&StageTimings::icp_ms)}};

  const fs::path dir = config.resolve(config.report_dir);
  write_report(dir, rep);
  write_run_meta(dir / "run_meta.txt", config, "eval");
  if (log) {
    *log << "map places " << rep.map_places << ", queries " << rep.queries << ", cases " << rep.cases.size() << '\n'
         << "recall@1 " << num(rep.recall_at_1()) << '\n'
         << "yaw error mean " << num(rep.yaw.mean_deg) << " deg, std " << num(rep.yaw.std_deg) << " deg\n"
         << "post-ICP success given correct candidate " << num(rep.post_icp_success_given_correct) << std::endl;
  }
  return rep;
}

}  // namespace oreos

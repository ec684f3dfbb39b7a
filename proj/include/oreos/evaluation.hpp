#ifndef OREOS_EVALUATION_HPP
#define OREOS_EVALUATION_HPP

#include "oreos/config.hpp"
#include "oreos/localizer.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace oreos {

/// Candidate within `max_distance` of ground truth and |yaw error| within
/// `max_yaw` (both inclusive).
bool localization_success(double candidate_distance, double yaw_error, double max_distance = 1.5,
                          double max_yaw = deg2rad(2.5));

/// One localization of one query at one yaw shift.
struct EvalCase {
  std::uint64_t query_id = 0;
  double shift = 0.0;            // radians the query cloud was rotated by
  std::uint64_t candidate_id = 0;
  double candidate_distance = 0.0;
  int true_rank = 0;             // 1-based rank of the first correct place in the top k_max, 0 if absent
  double pre_icp_yaw_error = 0.0;   // signed, radians
  double post_icp_yaw_error = 0.0;  // signed, radians
  bool icp_converged = false;
  bool correct = false;
  bool success = false;
};

struct ShiftRecall {
  double shift_deg;
  double recall;  // localization success rate at this shift
  double recall_at_1;
};

struct RecallAtK {
  int k;
  double recall;  // mean over shifts
  double stddev;  // population std over shifts
};

struct YawStats {
  double mean_deg = 0.0;
  double std_deg = 0.0;
  double recall_pct = 0.0;
  std::size_t samples = 0;
};

struct StageRuntime {
  std::string stage;
  double mean_ms;
};

struct EvalReport {
  std::size_t map_places = 0;
  std::size_t queries = 0;
  std::vector<EvalCase> cases;
  std::vector<ShiftRecall> shift_curve;
  std::vector<RecallAtK> recall_at_k;
  YawStats yaw;
  std::vector<StageRuntime> runtimes;
  /// Fraction of cases with a correct candidate that end within the yaw bound.
  double post_icp_success_given_correct = 0.0;

  double recall_at_1() const;
};

/// Pure aggregation of per-case results; `shifts` lists every evaluated shift.
EvalReport summarize(std::vector<EvalCase> cases, const std::vector<double>& shifts, int k_max,
                     std::size_t map_places, std::size_t queries);

/// Writes recall_vs_shift.csv, recall_at_k.csv, yaw_stats.csv, runtimes.csv and cases.csv.
void write_report(const std::filesystem::path& dir, const EvalReport& report);

// --- pipeline commands; `log` receives progress lines and may be null ---

/// Synthetic scene plus the training and evaluation sequences.
void cmd_generate(const RunConfig& config, std::ostream* log = nullptr);
TrainResult cmd_train(const RunConfig& config, std::ostream* log = nullptr);
DescriptorMap cmd_build_map(const RunConfig& config, std::ostream* log = nullptr);
LocalizationResult cmd_localize(const RunConfig& config, const std::filesystem::path& scan, int k,
                                std::ostream* log = nullptr);
EvalReport cmd_eval(const RunConfig& config, std::ostream* log = nullptr);

/// Map/query split of the evaluation sequence as used by build-map and eval.
struct EvalSplit {
  data::Dataset dataset;
  std::vector<data::ScanRecord> map;
  std::vector<data::ScanRecord> queries;
};
EvalSplit load_eval_split(const RunConfig& config);

/// run_meta.txt: command, seed, config hash, versions, canonical config.
void write_run_meta(const std::filesystem::path& path, const RunConfig& config, const std::string& command);

}  // namespace oreos

#endif  // OREOS_EVALUATION_HPP

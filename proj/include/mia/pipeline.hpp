#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mia/attack.hpp"
#include "mia/dataset.hpp"
#include "mia/encoder.hpp"
#include "mia/eval.hpp"
#include "mia/victim.hpp"

namespace mia {

struct OracleSpec {
  enum class Kind { sim, http, replay };
  Kind kind = Kind::sim;
  SimVictimConfig sim;
  HttpOracleConfig http;
  std::filesystem::path replay_store;  // replay only; defaults to the trace store
};

/// One experiment: every (smoothing x observer x metric x classifier) cell
/// is trained on the leaked split and scored on the holdout.
///
/// JSON keys (relative paths resolve against the config file's directory):
///   manifest, output_dir, trace_store?, threat, leak_fraction, split_seed,
///   n_per_pool?, sample_seed, jobs,
///   diffusion {steps, guidance, strength, seed},
///   oracle {kind: sim|http|replay, memorization_mu, noise_seed, decoy_strategy,
///           url, max_in_flight, timeout_seconds, store},
///   observers [...], metrics [...], smoothing [bool...],
///   classifiers [name | {kind, hyperparams}], sidecar_command [argv...]?
struct ExperimentConfig {
  std::filesystem::path manifest;
  std::filesystem::path output_dir = "mia-out";
  std::optional<std::filesystem::path> trace_store;
  OracleSpec oracle;
  ThreatModel threat = ThreatModel::gray_box;
  DiffusionParams params;
  double leak_fraction = 0.5;
  std::uint64_t split_seed = 0;
  std::optional<std::size_t> n_per_pool;
  std::uint64_t sample_seed = 0;
  std::vector<Observer> observers = {Observer::one_shot, Observer::complete, Observer::progressive};
  std::vector<Metric> metrics = {Metric::psnr, Metric::rmse, Metric::dssim, Metric::vector_distance};
  std::vector<bool> smoothing = {false};
  std::vector<ClassifierSpec> classifiers;
  std::vector<std::string> sidecar_command;
  unsigned jobs = 1;

  ExperimentConfig();

  static ExperimentConfig from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
  static ExperimentConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  // Throws ConfigError, e.g. for a progressive/complete observer under a
  // black-box threat.
  void validate() const;

  // trace_store, else $MIA_CACHE_DIR, else <output_dir>/traces.
  std::filesystem::path resolved_trace_store() const;
};

// Builds the victim oracle described by `spec`. The simulator's training set
// is the member-labeled part of `population`.
std::unique_ptr<VictimOracle> make_oracle(const OracleSpec& spec, const MembershipDataset& population,
                                          const std::filesystem::path& default_store);

// Queries the oracle for every sample (reusing traces already in `store`) and
// records them. Returns the traces aligned with `dataset`.
std::vector<DiffusionTrace> trace_dataset(VictimOracle& oracle, TraceStore& store, const MembershipDataset& dataset,
                                          const DiffusionParams& params, ThreatModel threat, unsigned jobs);

struct ScoreRow {
  std::string sample_id;
  std::optional<bool> label;
  double score = 0.0;
};
void write_scores_csv(const std::filesystem::path& path, const std::vector<ScoreRow>& rows);
std::vector<ScoreRow> read_scores_csv(const std::filesystem::path& path);

// Report from a directory of <observer>__<metric>[__smooth]__<classifier>.csv
// score files, rows in file-name order.
AttackReport report_from_scores_dir(const std::filesystem::path& dir);

// `members` + `nonmembers` synthetic scenes of size x size, ids m0000.. and
// n0000.., labeled by pool.
MembershipDataset synthetic_dataset(std::size_t members, std::size_t nonmembers, std::size_t size,
                                    std::uint64_t seed);

// Runs split -> trace -> encode -> fit -> score -> report, persisting every
// intermediate under output_dir. Stage failures are rethrown as
// "stage <name>: ..." with the original error code.
AttackReport run_experiment(const ExperimentConfig& config);

}  // namespace mia

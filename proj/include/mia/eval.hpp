#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "mia/attack.hpp"
#include "mia/encoder.hpp"

namespace mia {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

/// Points run from (0,0) to (1,1). thresholds[i] is the score cutoff
/// (predict member when score >= cutoff) that produces points[i]; the first
/// cutoff is +inf.
struct RocCurve {
  std::vector<RocPoint> points;
  std::vector<double> thresholds;
  double auc = 0.0;
};

// Sweeps every distinct score from high to low; equal scores cross the
// threshold together, which makes the trapezoidal AUC equal the pairwise
// statistic with ties counted as 1/2. Throws DegenerateLabels.
RocCurve roc_curve(const std::vector<double>& scores, const std::vector<bool>& labels);

// Highest TPR among points with FPR <= target.
double tpr_at_fpr(const RocCurve& curve, double fpr_target);

// FPR targets reported in report.csv, in column order.
inline constexpr std::array<double, 4> kReportFprTargets = {0.0, 0.001, 0.01, 0.1};

/// A trained attack plus the encoder configuration that produced its
/// training features: everything needed to score a fresh sample.
struct AttackPipeline {
  const TrainedAttack& model;
  Observer observer;
  const Distance& distance;
  DiffusionParams params;
  ThreatModel threat;

  double score(VictimOracle& oracle, const Sample& sample) const;
};

// Each round flips a fair seeded coin, draws a member (heads) or nonmember
// from `holdout`, scores it and guesses member iff score >= 0.5. Returns the
// fraction of correct guesses. Throws EmptyGame for zero rounds and
// DegenerateLabels when the holdout lacks a class.
double play_security_game(const std::function<double(const Sample&)>& scorer, const MembershipDataset& holdout,
                          std::size_t rounds, std::uint64_t seed);
double play_security_game(const AttackPipeline& attack, VictimOracle& oracle, const MembershipDataset& holdout,
                          std::size_t rounds, std::uint64_t seed);

struct ReportRow {
  std::string observer;
  std::string metric;
  std::string classifier;
  bool smoothed = false;
  double auc = 0.0;
  std::array<double, kReportFprTargets.size()> tpr_at_fpr{};
  RocCurve curve;

  std::string slug() const;  // file-name stem, e.g. complete__rmse__logistic_regression
};

struct AttackReport {
  std::vector<ReportRow> rows;
};

ReportRow make_report_row(std::string observer, std::string metric, std::string classifier, bool smoothed,
                          const std::vector<double>& scores, const std::vector<bool>& labels);

// Writes report.csv plus roc/<slug>_roc_linear.svg and roc/<slug>_roc_log.svg
// per row. Returns the paths written. Throws EmptyReport / IoError.
std::vector<std::filesystem::path> export_report(const AttackReport& report, const std::filesystem::path& out_dir);

std::string report_csv(const AttackReport& report);
std::string render_roc_svg(const ReportRow& row, bool log_scale);

}  // namespace mia

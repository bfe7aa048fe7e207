#include "mia/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "mia/error.hpp"
#include "mia/util.hpp"

namespace mia {

RocCurve roc_curve(const std::vector<double>& scores, const std::vector<bool>& labels) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorCode::DimensionMismatch,
                std::to_string(scores.size()) + " scores vs " + std::to_string(labels.size()) + " labels");
  }
  const auto pos = static_cast<double>(std::count(labels.begin(), labels.end(), true));
  const double neg = static_cast<double>(labels.size()) - pos;
  if (pos == 0.0 || neg == 0.0) throw Error(ErrorCode::DegenerateLabels, "ROC needs both classes");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0});
  curve.thresholds.push_back(std::numeric_limits<double>::infinity());
  double tp = 0.0, fp = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    const double cutoff = scores[order[i]];
    while (i < order.size() && scores[order[i]] == cutoff) {
      (labels[order[i]] ? tp : fp) += 1.0;
      ++i;
    }
    curve.points.push_back({fp / neg, tp / pos});
    curve.thresholds.push_back(cutoff);
  }
  // Integer counts keep the last point at exactly (1,1).
  double area = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& a = curve.points[i - 1];
    const auto& b = curve.points[i];
    area += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
  }
  curve.auc = area;
  return curve;
}

double tpr_at_fpr(const RocCurve& curve, double fpr_target) {
  double best = 0.0;
  for (const auto& p : curve.points) {
    if (p.fpr <= fpr_target + 1e-12) best = std::max(best, p.tpr);
  }
  return best;
}

double AttackPipeline::score(VictimOracle& oracle, const Sample& sample) const {
  const DiffusionTrace trace = oracle.query(sample, params, threat);
  return model.score(observe(observer, sample.image, trace, distance));
}

double play_security_game(const std::function<double(const Sample&)>& scorer, const MembershipDataset& holdout,
                          std::size_t rounds, std::uint64_t seed) {
  if (rounds == 0) throw Error(ErrorCode::EmptyGame, "security game needs at least one round");
  std::vector<std::size_t> members, nonmembers;
  for (std::size_t i = 0; i < holdout.size(); ++i) {
    auto m = holdout[i].membership();
    if (!m) continue;
    (*m ? members : nonmembers).push_back(i);
  }
  if (members.empty() || nonmembers.empty()) {
    throw Error(ErrorCode::DegenerateLabels, "security game needs members and nonmembers");
  }
  Rng rng(seed);
  std::size_t correct = 0;
  for (std::size_t r = 0; r < rounds; ++r) {
    const bool heads = rng.coin();
    const auto& pool = heads ? members : nonmembers;
    const Sample& s = holdout[pool[rng.below(pool.size())]];
    const bool guess = scorer(s) >= 0.5;
    if (guess == heads) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(rounds);
}

double play_security_game(const AttackPipeline& attack, VictimOracle& oracle, const MembershipDataset& holdout,
                          std::size_t rounds, std::uint64_t seed) {
  return play_security_game([&](const Sample& s) { return attack.score(oracle, s); }, holdout, rounds, seed);
}

std::string ReportRow::slug() const {
  return observer + "__" + metric + (smoothed ? "__smooth" : "") + "__" + classifier;
}

ReportRow make_report_row(std::string observer, std::string metric, std::string classifier, bool smoothed,
                          const std::vector<double>& scores, const std::vector<bool>& labels) {
  ReportRow row;
  row.observer = std::move(observer);
  row.metric = std::move(metric);
  row.classifier = std::move(classifier);
  row.smoothed = smoothed;
  row.curve = roc_curve(scores, labels);
  row.auc = row.curve.auc;
  for (std::size_t i = 0; i < kReportFprTargets.size(); ++i) {
    row.tpr_at_fpr[i] = tpr_at_fpr(row.curve, kReportFprTargets[i]);
  }
  return row;
}

std::string report_csv(const AttackReport& report) {
  std::ostringstream out;
  out << "observer,metric,classifier,smoothed,auc,tpr_at_fpr_0,tpr_at_fpr_0.001,tpr_at_fpr_0.01,tpr_at_fpr_0.1\n";
  for (const auto& r : report.rows) {
    out << r.observer << ',' << r.metric << ',' << r.classifier << ',' << (r.smoothed ? "true" : "false") << ','
        << format_fixed(r.auc, 6);
    for (double t : r.tpr_at_fpr) out << ',' << format_fixed(t, 6);
    out << '\n';
  }
  return out.str();
}

std::string render_roc_svg(const ReportRow& row, bool log_scale) {
  constexpr double kSize = 360.0;
  constexpr double kMargin = 50.0;
  constexpr double kFloor = 1e-3;
  auto axis = [&](double v) {
    if (!log_scale) return v;
    return (std::log10(std::clamp(v, kFloor, 1.0)) - std::log10(kFloor)) / -std::log10(kFloor);
  };
  auto px = [&](double v) { return kMargin + axis(v) * kSize; };
  auto py = [&](double v) { return kMargin + (1.0 - axis(v)) * kSize; };

  std::ostringstream s;
  const double total = kSize + 2 * kMargin;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << total << "\" height=\"" << total
    << "\" viewBox=\"0 0 " << total << ' ' << total << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<rect x=\"" << kMargin << "\" y=\"" << kMargin << "\" width=\"" << kSize << "\" height=\"" << kSize
    << "\" fill=\"none\" stroke=\"black\"/>\n";

  std::vector<double> ticks = log_scale ? std::vector<double>{1e-3, 1e-2, 1e-1, 1.0}
                                        : std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0};
  for (double t : ticks) {
    const std::string label = log_scale ? format_fixed(t, t < 0.01 ? 3 : (t < 0.1 ? 2 : 1)) : format_fixed(t, 2);
    s << "<line x1=\"" << format_fixed(px(t), 2) << "\" y1=\"" << kMargin + kSize << "\" x2=\"" << format_fixed(px(t), 2)
      << "\" y2=\"" << kMargin + kSize + 5 << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << format_fixed(px(t), 2) << "\" y=\"" << kMargin + kSize + 18
      << "\" font-size=\"10\" text-anchor=\"middle\">" << label << "</text>\n";
    s << "<line x1=\"" << kMargin - 5 << "\" y1=\"" << format_fixed(py(t), 2) << "\" x2=\"" << kMargin << "\" y2=\""
      << format_fixed(py(t), 2) << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << kMargin - 8 << "\" y=\"" << format_fixed(py(t) + 3, 2)
      << "\" font-size=\"10\" text-anchor=\"end\">" << label << "</text>\n";
  }
  s << "<text x=\"" << kMargin + kSize / 2 << "\" y=\"" << total - 8
    << "\" font-size=\"12\" text-anchor=\"middle\">False positive rate</text>\n";
  s << "<text x=\"14\" y=\"" << kMargin + kSize / 2 << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
    << kMargin + kSize / 2 << ")\">True positive rate</text>\n";
  s << "<text x=\"" << kMargin << "\" y=\"" << kMargin - 16 << "\" font-size=\"12\">" << row.slug()
    << (log_scale ? " (log)" : "") << "  AUC=" << format_fixed(row.auc, 4) << "</text>\n";

  // Chance line.
  const double origin = log_scale ? kFloor : 0.0;
  s << "<line x1=\"" << format_fixed(px(origin), 2) << "\" y1=\"" << format_fixed(py(origin), 2)
    << "\" x2=\"" << format_fixed(px(1.0), 2) << "\" y2=\"" << format_fixed(py(1.0), 2)
    << "\" stroke=\"gray\" stroke-dasharray=\"4 4\"/>\n";

  s << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < row.curve.points.size(); ++i) {
    const auto& p = row.curve.points[i];
    if (i) s << ' ';
    s << format_fixed(px(p.fpr), 2) << ',' << format_fixed(py(p.tpr), 2);
  }
  s << "\"/>\n</svg>\n";
  return s.str();
}

std::vector<std::filesystem::path> export_report(const AttackReport& report, const std::filesystem::path& out_dir) {
  if (report.rows.empty()) throw Error(ErrorCode::EmptyReport, "nothing to export");
  std::vector<std::filesystem::path> written;
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "roc", ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + (out_dir / "roc").string() + ": " + ec.message());
  const auto csv_path = out_dir / "report.csv";
  write_file(csv_path, report_csv(report));
  written.push_back(csv_path);
  for (const auto& row : report.rows) {
    const auto lin = out_dir / "roc" / (row.slug() + "_roc_linear.svg");
    const auto log = out_dir / "roc" / (row.slug() + "_roc_log.svg");
    write_file(lin, render_roc_svg(row, false));
    write_file(log, render_roc_svg(row, true));
    written.push_back(lin);
    written.push_back(log);
  }
  return written;
}

}  // namespace mia

#include <cstdio>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "mia/csv.hpp"
#include "mia/error.hpp"
#include "mia/imgmath.hpp"
#include "mia/informer.hpp"
#include "mia/pipeline.hpp"
#include "mia/util.hpp"

namespace fs = std::filesystem;
using namespace mia;

namespace {

struct ParamFlags {
  unsigned steps = DiffusionParams{}.steps;
  double guidance = DiffusionParams{}.guidance;
  double strength = DiffusionParams{}.strength;
  std::uint64_t seed = 0;

  void add(CLI::App* app) {
    app->add_option("--steps", steps, "Diffusion steps T")->capture_default_str();
    app->add_option("--guidance", guidance)->capture_default_str();
    app->add_option("--strength", strength)->capture_default_str();
    app->add_option("--diffusion-seed", seed)->capture_default_str();
  }
  DiffusionParams get() const { return {steps, guidance, strength, seed}; }
};

struct SimFlags {
  double mu = 1.0;
  std::uint64_t noise_seed = 0;
  std::string decoy = "prompt_hash_image";

  void add(CLI::App* app) {
    app->add_option("--mu", mu, "Simulator memorization strength")->capture_default_str();
    app->add_option("--noise-seed", noise_seed)->capture_default_str();
    app->add_option("--decoy", decoy, "prompt_hash_image | shuffled_partner")->capture_default_str();
  }
  SimVictimConfig get() const { return {mu, noise_seed, parse_decoy(decoy)}; }
};

std::map<std::string, double> parse_overrides(const std::vector<std::string>& items) {
  std::map<std::string, double> out;
  for (const auto& item : items) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::ConfigError, "expected key=value, got '" + item + "'");
    out[item.substr(0, eq)] = csv::to_double(item.substr(eq + 1));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Membership inference against image-to-image diffusion models"};
  app.require_subcommand(1);
  unsigned jobs = 1;
  app.add_option("--jobs,-j", jobs, "Worker threads")->capture_default_str();

  std::string stage_name;
  std::function<void()> action;

  // split
  auto* split = app.add_subcommand("split", "Leak a labeled subset and hold out the rest");
  fs::path split_manifest, split_out;
  double leak_fraction = 0.5;
  std::uint64_t split_seed = 0;
  std::string split_threat = "gray_box";
  split->add_option("--manifest", split_manifest)->required();
  split->add_option("--leak-fraction", leak_fraction)->capture_default_str();
  split->add_option("--seed", split_seed)->capture_default_str();
  split->add_option("--threat", split_threat)->capture_default_str();
  split->add_option("--out", split_out, "Directory for the three split manifests")->required();
  split->callback([&] {
    action = [&] {
      const auto ds = load_manifest(split_manifest, jobs);
      const auto [spec, leak] = inform(parse_threat(split_threat), ds, leak_fraction, split_seed);
      write_split(split_out, leak);
      std::printf("leak_member=%zu leak_nonmember=%zu holdout=%zu\n", leak.leak_member.size(),
                  leak.leak_nonmember.size(), leak.holdout.size());
    };
  });

  // trace
  auto* trace = app.add_subcommand("trace", "Query the victim for every sample and record traces");
  std::string oracle_kind = "sim", trace_threat = "gray_box", url = OracleSpec{}.http.base_url;
  fs::path trace_manifest, trace_store, replay_from;
  unsigned max_in_flight = 4;
  ParamFlags trace_params;
  SimFlags trace_sim;
  trace->add_option("--oracle", oracle_kind, "sim | http | replay")->capture_default_str();
  trace->add_option("--threat", trace_threat)->capture_default_str();
  trace->add_option("--manifest", trace_manifest)->required();
  trace->add_option("--out", trace_store, "Trace store directory")->required();
  trace->add_option("--url", url, "HTTP victim base URL")->capture_default_str();
  trace->add_option("--max-in-flight", max_in_flight)->capture_default_str();
  trace->add_option("--replay-from", replay_from, "Store to replay from (replay oracle)");
  trace_params.add(trace);
  trace_sim.add(trace);
  trace->callback([&] {
    action = [&] {
      const auto ds = load_manifest(trace_manifest, jobs);
      OracleSpec spec;
      spec.kind = oracle_kind == "sim" ? OracleSpec::Kind::sim
                  : oracle_kind == "http"
                      ? OracleSpec::Kind::http
                      : oracle_kind == "replay" ? OracleSpec::Kind::replay
                                                : throw Error(ErrorCode::ConfigError, "unknown oracle " + oracle_kind);
      spec.sim = trace_sim.get();
      spec.sim.validate();
      spec.http.base_url = url;
      spec.http.max_in_flight = max_in_flight;
      spec.replay_store = replay_from;
      TraceStore store(trace_store);
      auto oracle = make_oracle(spec, ds, store.root());
      const auto params = trace_params.get();
      params.validate();
      const auto traces = trace_dataset(*oracle, store, ds, params, parse_threat(trace_threat), jobs);
      std::printf("%zu traces in %s\n", traces.size(), store.root().string().c_str());
    };
  });

  // encode
  auto* encode = app.add_subcommand("encode", "Turn traces into feature vectors");
  std::string observer = "complete", metric = "rmse", encode_threat = "gray_box";
  bool smooth = false;
  fs::path encode_manifest, encode_store, encode_out;
  std::vector<std::string> sidecar;
  ParamFlags encode_params;
  encode->add_option("--observer", observer, "one-shot | progressive | complete")->capture_default_str();
  encode->add_option("--metric", metric, "psnr | rmse | dssim | vecdist")->capture_default_str();
  encode->add_flag("--smooth", smooth, "Unit box blur before comparing");
  encode->add_option("--traces", encode_store)->required();
  encode->add_option("--manifest", encode_manifest)->required();
  encode->add_option("--threat", encode_threat)->capture_default_str();
  encode->add_option("--sidecar", sidecar, "Embedding sidecar command for vecdist")->expected(-1);
  encode->add_option("--out", encode_out)->required();
  encode_params.add(encode);
  encode->callback([&] {
    action = [&] {
      const auto ds = load_manifest(encode_manifest, jobs);
      std::unique_ptr<SidecarExtractor> extractor;
      const MetricKind kind{parse_metric(metric), smooth};
      if (!sidecar.empty() && kind.kind == Metric::vector_distance) extractor = std::make_unique<SidecarExtractor>(sidecar);
      const Distance d(kind, extractor.get());
      ReplayOracle replay(encode_store);
      const auto features = encode_dataset(replay, ds, parse_observer(observer), d, encode_params.get(),
                                           parse_threat(encode_threat), jobs);
      write_features_csv(encode_out, features);
    };
  });

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "Train an attack classifier on leaked features");
  std::string kind_name = "logistic";
  fs::path fit_features, fit_out;
  std::vector<std::string> hyper;
  fit_cmd->add_option("--kind", kind_name)->capture_default_str();
  fit_cmd->add_option("--features", fit_features)->required();
  fit_cmd->add_option("--set", hyper, "Hyperparameter override key=value")->expected(0, -1);
  fit_cmd->add_option("--out", fit_out)->required();
  fit_cmd->callback([&] {
    action = [&] {
      const auto features = read_features_csv(fit_features);
      std::vector<bool> labels;
      for (const auto& f : features) {
        if (!f.label) throw Error(ErrorCode::SchemaError, "unlabeled training row " + f.sample_id);
        labels.push_back(*f.label);
      }
      const auto spec = ClassifierSpec::make(parse_classifier(kind_name), parse_overrides(hyper));
      fit(spec, features, labels).save(fit_out);
    };
  });

  // score
  auto* score_cmd = app.add_subcommand("score", "Score features with a trained attack");
  fs::path model_path, score_features, score_out;
  score_cmd->add_option("--model", model_path)->required();
  score_cmd->add_option("--features", score_features)->required();
  score_cmd->add_option("--out", score_out)->required();
  score_cmd->callback([&] {
    action = [&] {
      const auto model = TrainedAttack::load(model_path);
      std::vector<ScoreRow> rows;
      for (const auto& f : read_features_csv(score_features)) rows.push_back({f.sample_id, f.label, model.score(f)});
      write_scores_csv(score_out, rows);
    };
  });

  // report
  auto* report_cmd = app.add_subcommand("report", "AUC / TPR table and ROC plots from score files");
  fs::path scores_dir, report_out;
  report_cmd->add_option("--scores-dir", scores_dir)->required();
  report_cmd->add_option("--out", report_out)->required();
  report_cmd->callback([&] {
    action = [&] {
      export_report(report_from_scores_dir(scores_dir), report_out);
      std::cout << read_file(report_out / "report.csv");
    };
  });

  // run
  auto* run = app.add_subcommand("run", "Full experiment from a JSON config");
  fs::path config_path;
  std::optional<fs::path> run_out, run_store;
  run->add_option("--config", config_path)->required();
  run->add_option("--out", run_out, "Override output_dir");
  run->add_option("--trace-store", run_store, "Override trace_store");
  run->callback([&] {
    action = [&] {
      auto config = ExperimentConfig::load(config_path);
      if (run_out) config.output_dir = *run_out;
      if (run_store) config.trace_store = *run_store;
      if (jobs > 1) config.jobs = jobs;
      run_experiment(config);
      std::cout << read_file(config.output_dir / "report" / "report.csv");
    };
  });

  // simulate
  auto* simulate_cmd = app.add_subcommand("simulate", "Write a synthetic manifest, optionally with simulator traces");
  fs::path sim_out;
  std::size_t n_members = 200, n_nonmembers = 200, size = 32;
  std::uint64_t sim_seed = 0;
  std::optional<fs::path> sim_traces;
  std::string sim_threat = "gray_box";
  ParamFlags sim_params;
  SimFlags sim_victim;
  simulate_cmd->add_option("--out", sim_out, "Directory for manifest.jsonl and images")->required();
  simulate_cmd->add_option("--members", n_members)->capture_default_str();
  simulate_cmd->add_option("--nonmembers", n_nonmembers)->capture_default_str();
  simulate_cmd->add_option("--size", size, "Image side length")->capture_default_str();
  simulate_cmd->add_option("--seed", sim_seed)->capture_default_str();
  simulate_cmd->add_option("--traces", sim_traces, "Also record simulator traces into this store");
  simulate_cmd->add_option("--threat", sim_threat)->capture_default_str();
  sim_params.add(simulate_cmd);
  sim_victim.add(simulate_cmd);
  simulate_cmd->callback([&] {
    action = [&] {
      const auto ds = synthetic_dataset(n_members, n_nonmembers, size, sim_seed);
      write_manifest(sim_out / "manifest.jsonl", ds);
      if (sim_traces) {
        OracleSpec spec;
        spec.sim = sim_victim.get();
        spec.sim.validate();
        TraceStore store(*sim_traces);
        auto oracle = make_oracle(spec, ds, store.root());
        trace_dataset(*oracle, store, ds, sim_params.get(), parse_threat(sim_threat), jobs);
      }
      std::printf("%s\n", (sim_out / "manifest.jsonl").string().c_str());
    };
  });

  // metric
  auto* metric_cmd = app.add_subcommand("metric", "Print one image distance");
  std::string metric_kind = "rmse";
  bool metric_smooth = false;
  fs::path image_a, image_b;
  metric_cmd->add_option("--kind", metric_kind)->capture_default_str();
  metric_cmd->add_flag("--smooth", metric_smooth);
  metric_cmd->add_option("a", image_a)->required();
  metric_cmd->add_option("b", image_b)->required();
  metric_cmd->callback([&] {
    action = [&] {
      const Distance d(MetricKind{parse_metric(metric_kind), metric_smooth});
      std::printf("%s\n", format_double(d(read_png(image_a), read_png(image_b))).c_str());
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  stage_name = app.get_subcommands().front()->get_name();
  try {
    action();
  } catch (const Error& e) {
    if (stage_name == "run") std::cerr << "mia: " << e.what() << '\n';
    else std::cerr << "mia: stage " << stage_name << ": " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "mia: stage " << stage_name << ": " << e.what() << '\n';
    return 2;
  }
  return 0;
}

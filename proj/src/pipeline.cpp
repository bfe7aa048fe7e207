#include "mia/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <sstream>

#include "mia/csv.hpp"
#include "mia/error.hpp"
#include "mia/informer.hpp"
#include "mia/parallel.hpp"
#include "mia/util.hpp"

namespace mia {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string_view to_string(OracleSpec::Kind kind) {
  switch (kind) {
    case OracleSpec::Kind::sim: return "sim";
    case OracleSpec::Kind::http: return "http";
    case OracleSpec::Kind::replay: return "replay";
  }
  return "?";
}

OracleSpec::Kind parse_oracle_kind(std::string_view text) {
  if (text == "sim") return OracleSpec::Kind::sim;
  if (text == "http") return OracleSpec::Kind::http;
  if (text == "replay") return OracleSpec::Kind::replay;
  throw Error(ErrorCode::ConfigError, "unknown oracle kind '" + std::string(text) + "'");
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

// Serves traces computed earlier in the run.
class PreloadedOracle final : public VictimOracle {
 public:
  PreloadedOracle(const MembershipDataset& dataset, const std::vector<DiffusionTrace>& traces) {
    for (std::size_t i = 0; i < dataset.size(); ++i) traces_.emplace(dataset[i].id, &traces[i]);
  }

  DiffusionTrace query(const Sample& sample, const DiffusionParams& params, ThreatModel threat) override {
    auto it = traces_.find(sample.id);
    if (it == traces_.end() || !(it->second->params == params)) {
      throw Error(ErrorCode::TraceMiss, sample.id);
    }
    return it->second->masked(threat);
  }

 private:
  std::map<std::string, const DiffusionTrace*> traces_;
};

template <typename Fn>
auto stage(const std::string& name, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.code(), "stage " + name + ": " + e.detail());
  } catch (const std::exception& e) {
    throw Error(ErrorCode::IoError, "stage " + name + ": " + e.what());
  }
}

std::vector<bool> labels_of(const std::vector<FeatureVec>& features) {
  std::vector<bool> out;
  out.reserve(features.size());
  for (const auto& f : features) out.push_back(f.label.value_or(false));
  return out;
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
  for (auto kind : all_classifiers()) classifiers.push_back(ClassifierSpec::make(kind));
}

ExperimentConfig ExperimentConfig::from_json(const json& doc, const fs::path& base_dir) {
  static const std::vector<std::string> kKeys = {
      "manifest",  "output_dir", "trace_store", "oracle",   "threat",      "diffusion",   "leak_fraction",
      "split_seed", "n_per_pool", "sample_seed", "observers", "metrics",    "smoothing",   "classifiers",
      "sidecar_command", "jobs"};
  ExperimentConfig c;
  try {
    if (!doc.is_object()) throw Error(ErrorCode::ConfigError, "config must be a JSON object");
    for (const auto& [key, _] : doc.items()) {
      if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end()) {
        throw Error(ErrorCode::ConfigError, "unknown config key '" + key + "'");
      }
    }
    if (!doc.contains("manifest")) throw Error(ErrorCode::ConfigError, "config needs 'manifest'");
    c.manifest = resolve(base_dir, doc.at("manifest").get<std::string>());
    if (doc.contains("output_dir")) c.output_dir = resolve(base_dir, doc.at("output_dir").get<std::string>());
    else c.output_dir = resolve(base_dir, c.output_dir.string());
    if (doc.contains("trace_store")) c.trace_store = resolve(base_dir, doc.at("trace_store").get<std::string>());
    if (doc.contains("threat")) c.threat = parse_threat(doc.at("threat").get<std::string>());
    if (doc.contains("diffusion")) {
      const auto& d = doc.at("diffusion");
      c.params.steps = d.value("steps", c.params.steps);
      c.params.guidance = d.value("guidance", c.params.guidance);
      c.params.strength = d.value("strength", c.params.strength);
      c.params.seed = d.value("seed", c.params.seed);
    }
    if (doc.contains("oracle")) {
      const auto& o = doc.at("oracle");
      c.oracle.kind = parse_oracle_kind(o.value("kind", std::string("sim")));
      c.oracle.sim.memorization_mu = o.value("memorization_mu", c.oracle.sim.memorization_mu);
      c.oracle.sim.noise_seed = o.value("noise_seed", c.oracle.sim.noise_seed);
      if (o.contains("decoy_strategy")) c.oracle.sim.decoy_strategy = parse_decoy(o.at("decoy_strategy").get<std::string>());
      c.oracle.http.base_url = o.value("url", c.oracle.http.base_url);
      c.oracle.http.max_in_flight = o.value("max_in_flight", c.oracle.http.max_in_flight);
      c.oracle.http.timeout_seconds = o.value("timeout_seconds", c.oracle.http.timeout_seconds);
      if (o.contains("store")) c.oracle.replay_store = resolve(base_dir, o.at("store").get<std::string>());
    }
    c.leak_fraction = doc.value("leak_fraction", c.leak_fraction);
    c.split_seed = doc.value("split_seed", c.split_seed);
    if (doc.contains("n_per_pool")) c.n_per_pool = doc.at("n_per_pool").get<std::size_t>();
    c.sample_seed = doc.value("sample_seed", c.sample_seed);
    c.jobs = doc.value("jobs", c.jobs);
    if (doc.contains("observers")) {
      c.observers.clear();
      for (const auto& o : doc.at("observers")) c.observers.push_back(parse_observer(o.get<std::string>()));
    }
    if (doc.contains("metrics")) {
      c.metrics.clear();
      for (const auto& m : doc.at("metrics")) c.metrics.push_back(parse_metric(m.get<std::string>()));
    }
    if (doc.contains("smoothing")) c.smoothing = doc.at("smoothing").get<std::vector<bool>>();
    if (doc.contains("classifiers")) {
      c.classifiers.clear();
      for (const auto& k : doc.at("classifiers")) {
        if (k.is_string()) {
          c.classifiers.push_back(ClassifierSpec::make(parse_classifier(k.get<std::string>())));
        } else {
          c.classifiers.push_back(ClassifierSpec::make(
              parse_classifier(k.at("kind").get<std::string>()),
              k.value("hyperparams", std::map<std::string, double>{})));
        }
      }
    }
    if (doc.contains("sidecar_command")) c.sidecar_command = doc.at("sidecar_command").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const fs::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, path.string() + ": " + e.what());
  }
  return from_json(doc, fs::absolute(path).parent_path());
}

json ExperimentConfig::to_json() const {
  json classifiers_json = json::array();
  for (const auto& spec : classifiers) {
    classifiers_json.push_back({{"kind", std::string(mia::to_string(spec.kind))}, {"hyperparams", spec.hyperparams}});
  }
  json observers_json = json::array();
  for (auto o : observers) observers_json.push_back(std::string(mia::to_string(o)));
  json metrics_json = json::array();
  for (auto m : metrics) metrics_json.push_back(std::string(mia::to_string(m)));
  json doc = {{"manifest", manifest.string()},
              {"output_dir", output_dir.string()},
              {"threat", std::string(mia::to_string(threat))},
              {"diffusion",
               {{"steps", params.steps}, {"guidance", params.guidance}, {"strength", params.strength}, {"seed", params.seed}}},
              {"oracle",
               {{"kind", std::string(to_string(oracle.kind))},
                {"memorization_mu", oracle.sim.memorization_mu},
                {"noise_seed", oracle.sim.noise_seed},
                {"decoy_strategy", std::string(mia::to_string(oracle.sim.decoy_strategy))},
                {"url", oracle.http.base_url},
                {"max_in_flight", oracle.http.max_in_flight},
                {"timeout_seconds", oracle.http.timeout_seconds}}},
              {"leak_fraction", leak_fraction},
              {"split_seed", split_seed},
              {"sample_seed", sample_seed},
              {"observers", observers_json},
              {"metrics", metrics_json},
              {"smoothing", smoothing},
              {"classifiers", classifiers_json},
              {"jobs", jobs}};
  if (trace_store) doc["trace_store"] = trace_store->string();
  if (!oracle.replay_store.empty()) doc["oracle"]["store"] = oracle.replay_store.string();
  if (n_per_pool) doc["n_per_pool"] = *n_per_pool;
  if (!sidecar_command.empty()) doc["sidecar_command"] = sidecar_command;
  return doc;
}

void ExperimentConfig::validate() const {
  if (manifest.empty()) throw Error(ErrorCode::ConfigError, "manifest path is empty");
  if (observers.empty() || metrics.empty() || classifiers.empty() || smoothing.empty()) {
    throw Error(ErrorCode::ConfigError, "observer/metric/classifier/smoothing grids must be nonempty");
  }
  for (auto o : observers) {
    if (!compatible(o, threat)) {
      throw Error(ErrorCode::ConfigError, std::string(mia::to_string(o)) + " observer requires gray_box, config has " +
                                              std::string(mia::to_string(threat)));
    }
  }
  if (!(leak_fraction > 0.0 && leak_fraction < 1.0)) throw Error(ErrorCode::ConfigError, "leak_fraction must be in (0,1)");
  try {
    params.validate();
    oracle.sim.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, e.detail());
  }
  if (std::find(observers.begin(), observers.end(), Observer::progressive) != observers.end() && params.steps < 2) {
    throw Error(ErrorCode::ConfigError, "progressive observer needs diffusion.steps >= 2");
  }
}

fs::path ExperimentConfig::resolved_trace_store() const {
  if (trace_store) return *trace_store;
  if (const char* env = std::getenv("MIA_CACHE_DIR"); env && *env) return env;
  return output_dir / "traces";
}

std::unique_ptr<VictimOracle> make_oracle(const OracleSpec& spec, const MembershipDataset& population,
                                          const fs::path& default_store) {
  switch (spec.kind) {
    case OracleSpec::Kind::sim:
      return std::make_unique<SimulatedOracle>(SimulatedOracle::from_dataset(spec.sim, population));
    case OracleSpec::Kind::http: return std::make_unique<HttpOracle>(spec.http);
    case OracleSpec::Kind::replay:
      return std::make_unique<ReplayOracle>(spec.replay_store.empty() ? default_store : spec.replay_store);
  }
  throw Error(ErrorCode::ConfigError, "unknown oracle kind");
}

std::vector<DiffusionTrace> trace_dataset(VictimOracle& oracle, TraceStore& store, const MembershipDataset& dataset,
                                          const DiffusionParams& params, ThreatModel threat, unsigned jobs) {
  CachingOracle caching(oracle, store);
  std::vector<DiffusionTrace> traces(dataset.size());
  parallel_for(dataset.size(), jobs, [&](std::size_t i) {
    try {
      traces[i] = caching.query(dataset[i], params, threat);
    } catch (const Error& e) {
      throw Error(e.code(), "sample " + dataset[i].id + ": " + e.detail());
    }
  });
  return traces;
}

void write_scores_csv(const fs::path& path, const std::vector<ScoreRow>& rows) {
  std::ostringstream out;
  out << "sample_id,label,score\n";
  for (const auto& r : rows) {
    out << csv::escape(r.sample_id) << ',' << (r.label ? (*r.label ? "1" : "0") : "") << ',' << format_double(r.score)
        << '\n';
  }
  write_file(path, out.str());
}

std::vector<ScoreRow> read_scores_csv(const fs::path& path) {
  const auto rows = csv::parse(read_file(path));
  if (rows.empty() || rows[0] != std::vector<std::string>{"sample_id", "label", "score"}) {
    throw Error(ErrorCode::SchemaError, path.string() + ": expected header sample_id,label,score");
  }
  std::vector<ScoreRow> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 3) throw Error(ErrorCode::SchemaError, path.string() + ": bad row " + std::to_string(i + 1));
    ScoreRow r;
    r.sample_id = rows[i][0];
    if (rows[i][1] == "1") r.label = true;
    else if (rows[i][1] == "0") r.label = false;
    r.score = csv::to_double(rows[i][2]);
    out.push_back(std::move(r));
  }
  return out;
}

AttackReport report_from_scores_dir(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  AttackReport report;
  for (const auto& file : files) {
    std::vector<std::string> parts;
    const std::string stem = file.stem().string();
    for (std::size_t pos = 0;;) {
      const auto next = stem.find("__", pos);
      parts.push_back(stem.substr(pos, next == std::string::npos ? std::string::npos : next - pos));
      if (next == std::string::npos) break;
      pos = next + 2;
    }
    const bool smoothed = parts.size() == 4 && parts[2] == "smooth";
    if (!(parts.size() == 3 || smoothed)) {
      throw Error(ErrorCode::SchemaError, file.string() + ": expected <observer>__<metric>[__smooth]__<classifier>.csv");
    }
    std::vector<double> scores;
    std::vector<bool> labels;
    for (const auto& r : read_scores_csv(file)) {
      if (!r.label) throw Error(ErrorCode::SchemaError, file.string() + ": unlabeled row " + r.sample_id);
      scores.push_back(r.score);
      labels.push_back(*r.label);
    }
    report.rows.push_back(make_report_row(parts[0], parts[1], parts.back(), smoothed, scores, labels));
  }
  return report;
}

MembershipDataset synthetic_dataset(std::size_t members, std::size_t nonmembers, std::size_t size,
                                    std::uint64_t seed) {
  std::vector<Sample> samples;
  auto add = [&](std::size_t i, bool member) {
    char id[32];
    std::snprintf(id, sizeof id, "%c%04zu", member ? 'm' : 'n', i);
    Sample s;
    s.id = id;
    s.image = synthetic_image(size, size, mix_seed(seed, digest64(s.id)));
    s.prompt = std::string("synthetic scene ") + id;
    s.pool = member ? Pool::member_pool : Pool::nonmember_pool;
    s.label = member;
    samples.push_back(std::move(s));
  };
  for (std::size_t i = 0; i < members; ++i) add(i, true);
  for (std::size_t i = 0; i < nonmembers; ++i) add(i, false);
  return MembershipDataset(std::move(samples));
}

AttackReport run_experiment(const ExperimentConfig& config) {
  stage("validate", [&] {
    config.validate();
    return 0;
  });
  const fs::path out = config.output_dir;

  const LeakSplit split = stage("split", [&] {
    MembershipDataset pool = load_manifest(config.manifest, config.jobs);
    if (config.n_per_pool) pool = sample_balanced(pool, *config.n_per_pool, config.sample_seed);
    auto [spec, leak] = inform(config.threat, pool, config.leak_fraction, config.split_seed);
    write_split(out / "splits", leak);
    return leak;
  });
  const MembershipDataset leaked = split.leaked();

  std::vector<Sample> everyone(leaked.begin(), leaked.end());
  everyone.insert(everyone.end(), split.holdout.begin(), split.holdout.end());
  const MembershipDataset population(std::move(everyone));

  const std::vector<DiffusionTrace> traces = stage("trace", [&] {
    TraceStore store(config.resolved_trace_store());
    auto oracle = make_oracle(config.oracle, population, store.root());
    return trace_dataset(*oracle, store, population, config.params, config.threat, config.jobs);
  });
  PreloadedOracle preloaded(population, traces);

  std::unique_ptr<SidecarExtractor> sidecar;
  if (!config.sidecar_command.empty() &&
      std::find(config.metrics.begin(), config.metrics.end(), Metric::vector_distance) != config.metrics.end()) {
    sidecar = stage("sidecar", [&] { return std::make_unique<SidecarExtractor>(config.sidecar_command); });
  }

  AttackReport report;
  for (bool smooth : config.smoothing) {
    for (Observer observer : config.observers) {
      for (Metric metric : config.metrics) {
        const MetricKind kind{metric, smooth};
        const Distance distance(kind, metric == Metric::vector_distance ? sidecar.get() : nullptr);
        const std::string encoder_slug = std::string(to_string(observer)) + "__" + std::string(to_string(metric)) +
                                         (smooth ? "__smooth" : "");

        auto [train, test] = stage("encode", [&] {
          auto tr = encode_dataset(preloaded, leaked, observer, distance, config.params, config.threat, config.jobs);
          auto te = encode_dataset(preloaded, split.holdout, observer, distance, config.params, config.threat, config.jobs);
          write_features_csv(out / "features" / (encoder_slug + "__leak.csv"), tr);
          write_features_csv(out / "features" / (encoder_slug + "__holdout.csv"), te);
          return std::pair{std::move(tr), std::move(te)};
        });
        const std::vector<bool> train_labels = labels_of(train);
        const std::vector<bool> test_labels = labels_of(test);

        for (const auto& spec : config.classifiers) {
          const std::string slug = encoder_slug + "__" + std::string(to_string(spec.kind));
          const TrainedAttack model = stage("fit", [&] {
            auto m = fit(spec, train, train_labels);
            m.save(out / "models" / (slug + ".json"));
            return m;
          });
          std::vector<double> scores = stage("score", [&] {
            std::vector<double> s;
            std::vector<ScoreRow> rows;
            for (const auto& f : test) {
              s.push_back(model.score(f));
              rows.push_back({f.sample_id, f.label, s.back()});
            }
            write_scores_csv(out / "scores" / (slug + ".csv"), rows);
            return s;
          });
          report.rows.push_back(make_report_row(std::string(to_string(observer)), std::string(to_string(metric)),
                                                std::string(to_string(spec.kind)), smooth, scores, test_labels));
        }
      }
    }
  }

  stage("report", [&] { return export_report(report, out / "report"); });
  return report;
}

}  // namespace mia

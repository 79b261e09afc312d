#include "svl/experiment.hpp"

#include <charconv>
#include <set>

#include "svl/error.hpp"
#include "svl/io.hpp"
#include "svl/zeroshot.hpp"

namespace svl {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::kZeroShot: return "zeroshot";
    case Method::kLinearProbe: return "linear-probe";
    case Method::kClipAdapter: return "clip-adapter";
    case Method::kSvlAdapter: return "svl-adapter";
    case Method::kSvlAdapterAuto: return "svl-adapter-auto";
    case Method::kZeroShotSvl: return "zero-shot-svl";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::kZeroShot, Method::kLinearProbe, Method::kClipAdapter, Method::kSvlAdapter,
                   Method::kSvlAdapterAuto, Method::kZeroShotSvl}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

bool is_zero_shot_method(Method m) { return m == Method::kZeroShot || m == Method::kZeroShotSvl; }

LambdaSetting parse_lambda_setting(std::string_view text) {
  if (text == "auto") return {LambdaMode::kAuto, 0.0};
  if (text == "sweep") return {LambdaMode::kSweep, 0.0};
  double v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() || !(v >= 0.0 && v <= 1.0)) {
    throw ConfigError("--lambda must be auto, sweep, or a number in [0, 1]; got '" + std::string(text) + "'");
  }
  return {LambdaMode::kFixed, v};
}

std::string to_string(const LambdaSetting& s) {
  switch (s.mode) {
    case LambdaMode::kAuto: return "auto";
    case LambdaMode::kSweep: return "sweep";
    case LambdaMode::kFixed: return io::format_double(s.value);
  }
  return "unknown";
}

void RunSpec::validate() const {
  if (manifest.empty()) throw ConfigError("a manifest is required");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (!is_zero_shot_method(method)) {
    if (shots.empty()) throw ConfigError("at least one shot count is required");
    for (std::size_t s : shots) {
      if (s == 0) throw ConfigError("shot counts must be >= 1");
    }
  }
  if (!(temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
  if (k == 0) throw ConfigError("k must be >= 1");
  train.validate();
}

Dataset load_for_method(const std::filesystem::path& manifest, Method method) {
  if (!is_zero_shot_method(method)) return load_dataset(manifest);
  Dataset ds = load_dataset_unlabeled(manifest);
  const io::KeyValues kv = io::read_key_values(manifest);
  std::filesystem::path p(kv.at("test_labels"));
  if (p.is_relative()) p = manifest.parent_path() / p;
  if (!std::filesystem::exists(p)) throw IoError("missing label file " + p.string());
  ds.test.labels = read_labels(p);
  if (ds.test.labels.size() != ds.test.features.size()) throw ShapeError(p.string() + ": label count mismatch");
  validate_labels(ds.test.labels, ds.num_classes, p.string());
  return ds;
}

namespace {

const Matrix& require_text(const Dataset& ds) {
  if (!ds.classes.text_embeddings) {
    throw InvalidInputError("manifest has no class_text_embeddings; zero-shot predictions are unavailable");
  }
  return *ds.classes.text_embeddings;
}

std::vector<int> gather(std::span<const int> labels, std::span<const std::size_t> rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(labels[r]);
  return out;
}

void append(std::vector<std::string>& dst, const std::vector<std::string>& src, const std::string& prefix) {
  for (const auto& w : src) dst.push_back(prefix + w);
}

}  // namespace

CellOutput run_cell(const Dataset& ds, const RunSpec& spec, std::size_t shots, std::uint64_t seed) {
  CellOutput out;
  out.result.dataset = ds.name;
  out.result.method = std::string(to_string(spec.method));
  out.result.shots = is_zero_shot_method(spec.method) ? 0 : shots;
  out.result.seed = spec.method == Method::kZeroShot ? 0 : seed;
  const std::string where = out.result.method + " shots=" + std::to_string(out.result.shots) +
                            " seed=" + std::to_string(out.result.seed) + ": ";

  TrainConfig cfg = spec.train;
  cfg.seed = seed;

  switch (spec.method) {
    case Method::kZeroShot: {
      out.test_probs = zero_shot_probs(ds.test.features.features, require_text(ds), spec.temperature);
      break;
    }
    case Method::kZeroShotSvl: {
      const ProbabilityMatrix pv = zero_shot_probs(ds.test.features.features, require_text(ds), spec.temperature);
      ZeroShotAdaptResult zs = zero_shot_adapt(ds.test.adapter_features(), pv, spec.k, cfg);
      append(out.warnings, zs.trace.warnings, where);
      out.result.lambda_used = zs.fusion.lambda.value;
      out.test_probs = std::move(zs.fusion.probs);
      out.adapter = std::move(zs.adapter);
      out.pseudo_labels = std::move(zs.pseudo_labels);
      break;
    }
    case Method::kLinearProbe:
    case Method::kClipAdapter:
    case Method::kSvlAdapter:
    case Method::kSvlAdapterAuto: {
      const Episode episode = sample_episode(ds.train.labels, ds.num_classes, shots, seed);
      append(out.warnings, episode.warnings, where);
      const std::vector<std::size_t> rows = episode.flat();
      const std::vector<int> labels = gather(ds.train.labels, rows);

      if (spec.method == Method::kLinearProbe) {
        const Matrix x = ds.train.features.features.select_rows(rows);
        const TrainedLinearProbe lp = train_linear_probe(x, labels, ds.num_classes, cfg);
        append(out.warnings, lp.trace.warnings, where);
        out.test_probs = predict_linear_probe(lp.params, ds.test.features.features);
        break;
      }
      if (spec.method == Method::kClipAdapter) {
        const Matrix x = ds.train.features.features.select_rows(rows);
        ClipAdapterConfig acfg = spec.clip;
        acfg.temperature = spec.temperature;
        const TrainedClipAdapter ca = train_clip_adapter(x, labels, require_text(ds), acfg, cfg);
        append(out.warnings, ca.trace.warnings, where);
        out.test_probs = predict_clip_adapter(ca.params, ds.test.features.features, require_text(ds));
        break;
      }

      const EmbeddingTable& train_feats = ds.train.adapter_features();
      const Matrix x = train_feats.features.select_rows(rows);
      TrainedAdapter ad = train_svl_adapter(x, labels, ds.num_classes, cfg, train_feats.encoder_id);
      append(out.warnings, ad.trace.warnings, where);
      const ProbabilityMatrix pv = zero_shot_probs(ds.test.features.features, require_text(ds), spec.temperature);
      const ProbabilityMatrix ps = predict_svl_adapter(ad.params, ds.test.adapter_features().features);

      const LambdaSetting setting =
          spec.method == Method::kSvlAdapterAuto ? LambdaSetting{LambdaMode::kAuto, 0.0} : spec.lambda;
      LambdaEstimate lambda;
      switch (setting.mode) {
        case LambdaMode::kAuto:
          lambda = estimate_lambda(pv);
          break;
        case LambdaMode::kFixed:
          lambda = {setting.value, pv.rows(), LambdaMethod::kFixed};
          break;
        case LambdaMode::kSweep: {
          const Episode val = split_validation(ds.train.labels, ds.num_classes, episode, seed);
          append(out.warnings, val.warnings, where);
          const std::vector<std::size_t> val_rows = val.flat();
          if (val_rows.empty()) throw EmptyInputError(where + "no items left for the validation split");
          const std::vector<int> val_labels = gather(ds.train.labels, val_rows);
          const ProbabilityMatrix pv_val =
              zero_shot_probs(ds.train.features.features.select_rows(val_rows), require_text(ds), spec.temperature);
          const ProbabilityMatrix ps_val = predict_svl_adapter(ad.params, train_feats.features.select_rows(val_rows));
          SweepResult sweep = sweep_lambda(pv_val, ps_val, val_labels);
          lambda = sweep.best;
          out.sweep = std::move(sweep);
          break;
        }
      }
      FusionResult fused = fuse_predictions(pv, ps, lambda);
      out.result.lambda_used = fused.lambda.value;
      out.test_probs = std::move(fused.probs);
      out.adapter = std::move(ad.params);
      break;
    }
  }
  out.result.top1 = top1_accuracy(out.test_probs, ds.test.labels);
  return out;
}

ExperimentOutput run_experiment(const RunSpec& spec) {
  spec.validate();
  const Dataset ds = load_for_method(spec.manifest, spec.method);

  std::vector<std::size_t> shots = spec.shots;
  std::vector<std::uint64_t> seeds = spec.seeds;
  if (spec.method == Method::kZeroShot) {
    shots = {0};
    seeds = {0};
  } else if (spec.method == Method::kZeroShotSvl) {
    shots = {0};
  }
  // Duplicate grid entries collapse.
  const std::set<std::size_t> shot_set(shots.begin(), shots.end());
  const std::set<std::uint64_t> seed_set(seeds.begin(), seeds.end());

  ExperimentOutput out;
  std::vector<std::pair<std::string, std::string>> sweep_files;
  for (std::size_t s : shot_set) {
    for (std::uint64_t seed : seed_set) {
      CellOutput cell = run_cell(ds, spec, s, seed);
      out.warnings.insert(out.warnings.end(), cell.warnings.begin(), cell.warnings.end());
      if (cell.sweep) {
        sweep_files.emplace_back("sweep_" + std::to_string(s) + "_" + std::to_string(seed) + ".csv",
                                 sweep_csv(*cell.sweep));
      }
      out.runs.push_back(std::move(cell.result));
    }
  }
  sort_runs(out.runs);
  out.aggregates = aggregate_runs(out.runs);

  if (!spec.output_dir.empty()) {
    std::filesystem::create_directories(spec.output_dir);
    io::write_file_atomic(spec.output_dir / "runs.csv", runs_csv(out.runs));
    io::write_file_atomic(spec.output_dir / "report.csv", emit_report(out.aggregates, ReportFormat::kCsv));
    io::write_file_atomic(spec.output_dir / "report.md", emit_report(out.aggregates, ReportFormat::kMarkdown));
    for (const auto& [name, text] : sweep_files) io::write_file_atomic(spec.output_dir / name, text);
  }
  return out;
}

}  // namespace svl

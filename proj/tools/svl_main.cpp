// svl: command-line front end for zero- and low-shot classification over
// precomputed embeddings.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "svl/embedding_store.hpp"
#include "svl/error.hpp"
#include "svl/eval_report.hpp"
#include "svl/experiment.hpp"
#include "svl/fusion.hpp"
#include "svl/io.hpp"
#include "svl/kernels.hpp"
#include "svl/pseudolabel.hpp"
#include "svl/zeroshot.hpp"

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string manifest;
  std::string method = "svl-adapter-auto";
  std::vector<std::size_t> shots{svl::protocol::kShots.begin(), svl::protocol::kShots.end()};
  std::vector<std::uint64_t> seeds{svl::protocol::kSeeds.begin(), svl::protocol::kSeeds.end()};
  double temperature = svl::protocol::kTemperature;
  std::string lambda = "sweep";
  std::size_t k = svl::protocol::kPseudoLabelsPerClass;
  std::size_t epochs = svl::protocol::kEpochs;
  std::size_t batch = svl::protocol::kBatchSize;
  double lr = svl::protocol::kLearningRate;
  std::size_t hidden = svl::protocol::kHiddenDim;
  bool normalize_inputs = true;
  double alpha = svl::protocol::kClipAdapterAlpha;
  double beta = svl::protocol::kClipAdapterBeta;
  bool visual_only = true;
  std::size_t reduction = svl::protocol::kClipAdapterReduction;
  std::string out;
  std::string config;

  // single-cell and file-level commands
  std::size_t shot = 16;
  std::uint64_t seed = 0;
  std::size_t bins = 10;
  std::vector<std::string> files;
  std::string probs, pv, ps, labels, runs, format = "csv";
};

void add_config(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "key=value file; command-line flags win");
}

void add_training(CLI::App* sub, Options& o) {
  sub->add_option("--temperature", o.temperature, "zero-shot logit scale")->capture_default_str();
  sub->add_option("--lambda", o.lambda, "blending weight: auto | sweep | <float in [0,1]>")->capture_default_str();
  sub->add_option("--k", o.k, "pseudolabels kept per predicted class")->capture_default_str();
  sub->add_option("--epochs", o.epochs)->capture_default_str();
  sub->add_option("--batch", o.batch)->capture_default_str();
  sub->add_option("--lr", o.lr)->capture_default_str();
  sub->add_option("--hidden", o.hidden, "adapter hidden width")->capture_default_str();
  sub->add_option("--normalize-inputs", o.normalize_inputs, "L2-normalize adapter inputs")->capture_default_str();
  sub->add_option("--alpha", o.alpha, "CLIP-Adapter visual residual ratio")->capture_default_str();
  sub->add_option("--beta", o.beta, "CLIP-Adapter text residual ratio")->capture_default_str();
  sub->add_option("--visual-only", o.visual_only, "CLIP-Adapter adapts image features only")->capture_default_str();
  sub->add_option("--reduction", o.reduction, "CLIP-Adapter bottleneck reduction")->capture_default_str();
}

svl::RunSpec to_spec(const Options& o) {
  svl::RunSpec spec;
  spec.manifest = o.manifest;
  spec.method = svl::parse_method(o.method);
  spec.shots = o.shots;
  spec.seeds = o.seeds;
  spec.temperature = o.temperature;
  spec.lambda = svl::parse_lambda_setting(o.lambda);
  spec.k = o.k;
  spec.train.epochs = o.epochs;
  spec.train.batch_size = o.batch;
  spec.train.lr = o.lr;
  spec.train.hidden_dim = o.hidden;
  spec.train.normalize_inputs = o.normalize_inputs;
  spec.clip.alpha = o.alpha;
  spec.clip.beta = o.beta;
  spec.clip.visual_only = o.visual_only;
  spec.clip.reduction = o.reduction;
  spec.clip.temperature = o.temperature;
  spec.output_dir = o.out;
  return spec;
}

void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

void write_probs(const fs::path& path, const svl::ProbabilityMatrix& p, const std::string& dataset) {
  svl::write_matrix(path, p.probs.cast<float>(), {std::string(svl::to_string(p.source)), false, dataset});
}

int cmd_extract_check(const Options& o) {
  if (o.manifest.empty() && o.files.empty()) throw svl::ConfigError("give --manifest or one or more files");
  if (!o.manifest.empty()) {
    const svl::Dataset ds = svl::load_dataset(o.manifest);
    std::cout << "manifest " << o.manifest << ": ok\n"
              << "  dataset=" << ds.name << " dim=" << ds.dim << " classes=" << ds.num_classes << "\n"
              << "  train=" << ds.train.features.size() << " test=" << ds.test.features.size()
              << " text_embeddings=" << (ds.classes.text_embeddings ? "yes" : "no")
              << " ssl=" << (ds.train.ssl ? std::to_string(ds.train.ssl->dim()) : std::string("no")) << "\n";
  }
  for (const auto& f : o.files) {
    switch (svl::sniff_file_kind(f)) {
      case svl::FileKind::kEmbeddings: {
        const svl::MatrixFile mf = svl::read_matrix(f);
        std::cout << f << ": embeddings " << mf.matrix.rows() << "x" << mf.matrix.cols() << "\n";
        break;
      }
      case svl::FileKind::kLabels: {
        const svl::LabelVector l = svl::read_labels(f);
        std::cout << f << ": labels " << l.size() << "\n";
        break;
      }
      case svl::FileKind::kUnknown:
        throw svl::FormatError(svl::FormatErrorKind::kBadMagic, f + ": not an embedding or label file");
    }
  }
  return 0;
}

int cmd_zeroshot(const Options& o) {
  const svl::Dataset ds = svl::load_for_method(o.manifest, svl::Method::kZeroShot);
  if (!ds.classes.text_embeddings) throw svl::InvalidInputError("manifest has no class_text_embeddings");
  const svl::ProbabilityMatrix probs = svl::zero_shot_probs(ds.test.features, ds.classes, o.temperature);
  const double top1 = svl::top1_accuracy(probs, ds.test.labels);
  const svl::LambdaEstimate lambda = svl::estimate_lambda(probs);
  const svl::ConfidenceHistogram hist = svl::confidence_histogram(probs, o.bins);
  std::cout << "dataset=" << ds.name << "\ntop1=" << svl::io::format_double(top1)
            << "\nlambda=" << svl::io::format_double(lambda.value) << "\n";
  if (!o.out.empty()) {
    const fs::path dir(o.out);
    fs::create_directories(dir);
    write_probs(dir / "zeroshot_probs.svlemb", probs, ds.name);
    svl::io::write_file_atomic(dir / "histogram.csv", svl::histogram_csv(hist));
    svl::io::KeyValues summary{{"dataset", ds.name},
                               {"top1", svl::io::format_double(top1)},
                               {"lambda", svl::io::format_double(lambda.value)},
                               {"temperature", svl::io::format_double(o.temperature)},
                               {"num_items", std::to_string(probs.rows())}};
    svl::io::write_file_atomic(dir / "summary.txt", svl::io::format_key_values(summary));
  } else {
    std::cout << svl::histogram_csv(hist);
  }
  return 0;
}

int cmd_adapt(const Options& o) {
  svl::RunSpec spec = to_spec(o);
  spec.shots = {o.shot};
  spec.seeds = {o.seed};
  spec.validate();
  const svl::Dataset ds = svl::load_for_method(spec.manifest, spec.method);
  svl::CellOutput cell = svl::run_cell(ds, spec, o.shot, o.seed);
  print_warnings(cell.warnings);
  std::cout << "method=" << cell.result.method << "\nshots=" << cell.result.shots << "\nseed=" << cell.result.seed
            << "\ntop1=" << svl::io::format_double(cell.result.top1) << "\n";
  if (cell.result.lambda_used) std::cout << "lambda=" << svl::io::format_double(*cell.result.lambda_used) << "\n";
  if (!o.out.empty()) {
    const fs::path dir(o.out);
    fs::create_directories(dir);
    const std::vector<svl::RunResult> rows{cell.result};
    svl::io::write_file_atomic(dir / "runs.csv", svl::runs_csv(rows));
    write_probs(dir / "test_probs.svlemb", cell.test_probs, ds.name);
    if (cell.adapter) svl::save_adapter(dir / "svl", *cell.adapter);
    if (cell.sweep) svl::io::write_file_atomic(dir / "sweep.csv", svl::sweep_csv(*cell.sweep));
    if (cell.pseudo_labels) {
      svl::io::write_file_atomic(dir / "pseudolabels.csv",
                                 svl::pseudolabels_csv(*cell.pseudo_labels, ds.test.features.ids));
    }
  }
  return 0;
}

svl::ProbabilityMatrix read_probs(const std::string& path) {
  svl::ProbabilityMatrix p;
  p.probs = svl::read_matrix(path).matrix.cast<double>();
  p.source = svl::ProbSource::kExternal;
  p.validate();
  return p;
}

int cmd_lambda_estimate(const Options& o) {
  svl::ProbabilityMatrix probs;
  if (!o.probs.empty()) {
    probs = read_probs(o.probs);
  } else if (!o.manifest.empty()) {
    const svl::Dataset ds = svl::load_dataset_unlabeled(o.manifest);
    if (!ds.classes.text_embeddings) throw svl::InvalidInputError("manifest has no class_text_embeddings");
    probs = svl::zero_shot_probs(ds.test.features, ds.classes, o.temperature);
  } else {
    throw svl::ConfigError("give --probs or --manifest");
  }
  const svl::LambdaEstimate est = svl::estimate_lambda(probs);
  std::cout << "lambda=" << svl::io::format_double(est.value) << "\nnum_items=" << est.num_items << "\n";
  return 0;
}

int cmd_lambda_sweep(const Options& o) {
  const svl::ProbabilityMatrix pv = read_probs(o.pv);
  const svl::ProbabilityMatrix ps = read_probs(o.ps);
  const svl::LabelVector labels = svl::read_labels(o.labels);
  svl::validate_labels(labels, pv.cols(), o.labels);
  const svl::SweepResult sweep = svl::sweep_lambda(pv, ps, labels);
  std::cout << "best_lambda=" << svl::io::format_double(sweep.best.value)
            << "\nbest_val_top1=" << svl::io::format_double(sweep.best_top1) << "\n";
  if (!o.out.empty()) {
    svl::io::write_file_atomic(o.out, svl::sweep_csv(sweep));
  } else {
    std::cout << svl::sweep_csv(sweep);
  }
  return 0;
}

int cmd_pseudo(const Options& o) {
  const svl::Dataset ds = svl::load_dataset_unlabeled(o.manifest);
  if (!ds.classes.text_embeddings) throw svl::InvalidInputError("manifest has no class_text_embeddings");
  const svl::ProbabilityMatrix probs = svl::zero_shot_probs(ds.test.features, ds.classes, o.temperature);
  const svl::PseudoLabelSet set = svl::select_pseudolabels(probs, o.k);
  std::cout << "selected=" << set.total() << "\n";
  for (int c : set.empty_classes) std::cerr << "warning: no item predicted as class " << c << " (" << ds.classes.names[c] << ")\n";
  const std::string csv = svl::pseudolabels_csv(set, ds.test.features.ids);
  if (!o.out.empty()) {
    svl::io::write_file_atomic(o.out, csv);
  } else {
    std::cout << csv;
  }
  return 0;
}

int cmd_run(const Options& o) {
  const svl::ExperimentOutput out = svl::run_experiment(to_spec(o));
  print_warnings(out.warnings);
  std::cout << svl::emit_report(out.aggregates, svl::ReportFormat::kMarkdown);
  return 0;
}

int cmd_report(const Options& o) {
  const auto bytes = svl::io::read_file_bytes(o.runs);
  const std::vector<svl::RunResult> runs =
      svl::parse_runs_csv(std::string(bytes.begin(), bytes.end()), o.runs);
  svl::ReportFormat fmt;
  if (o.format == "csv") {
    fmt = svl::ReportFormat::kCsv;
  } else if (o.format == "markdown" || o.format == "md") {
    fmt = svl::ReportFormat::kMarkdown;
  } else {
    throw svl::ConfigError("--format must be csv or markdown");
  }
  const std::string doc = svl::emit_report(svl::aggregate_runs(runs), fmt);
  if (!o.out.empty()) {
    svl::io::write_file_atomic(o.out, doc);
  } else {
    std::cout << doc;
  }
  return 0;
}

// Splices "--key=value" for every config-file entry whose flag was not given
// on the command line, so explicit flags always win.
std::vector<std::string> merge_config(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  std::string config;
  for (std::size_t i = 1; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) config = args[i].substr(9);
  }
  if (config.empty()) return args;
  const svl::io::KeyValues kv = svl::io::read_key_values(config);
  for (const auto& [key, value] : kv) {
    const std::string flag = "--" + key;
    bool given = false;
    for (std::size_t i = 1; i < args.size(); ++i) {
      if (args[i] == flag || args[i].rfind(flag + "=", 0) == 0) given = true;
    }
    if (!given) args.push_back(flag + "=" + value);
  }
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Zero- and low-shot classification over precomputed embeddings"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "svl 0.1.0");
  Options o;

  auto* check = app.add_subcommand("extract-check", "validate embedding, label and manifest files");
  check->add_option("--manifest", o.manifest);
  check->add_option("files", o.files, "embedding or label files");
  add_config(check, o);

  auto* zs = app.add_subcommand("zeroshot", "zero-shot predictions, accuracy, lambda and confidence histogram");
  zs->add_option("--manifest", o.manifest)->required();
  zs->add_option("--temperature", o.temperature)->capture_default_str();
  zs->add_option("--bins", o.bins, "histogram bins")->capture_default_str();
  zs->add_option("--out", o.out, "output directory");
  add_config(zs, o);

  auto* adapt = app.add_subcommand("adapt", "train and evaluate one method for one (shots, seed) cell");
  adapt->add_option("--manifest", o.manifest)->required();
  adapt->add_option("--method", o.method)->capture_default_str();
  adapt->add_option("--shots", o.shot, "shots per class")->capture_default_str();
  adapt->add_option("--seed", o.seed)->capture_default_str();
  adapt->add_option("--out", o.out, "output directory");
  add_training(adapt, o);
  add_config(adapt, o);

  auto* lambda = app.add_subcommand("lambda", "estimate or sweep the blending weight");
  lambda->require_subcommand(1);
  auto* estimate = lambda->add_subcommand("estimate", "mean zero-shot confidence");
  estimate->add_option("--probs", o.probs, "probability matrix file");
  estimate->add_option("--manifest", o.manifest);
  estimate->add_option("--temperature", o.temperature)->capture_default_str();
  add_config(estimate, o);
  auto* sweep = lambda->add_subcommand("sweep", "validation sweep over the lambda grid");
  sweep->add_option("--pv", o.pv, "zero-shot validation probabilities")->required();
  sweep->add_option("--ps", o.ps, "adapter validation probabilities")->required();
  sweep->add_option("--labels", o.labels, "validation label file")->required();
  sweep->add_option("--out", o.out, "CSV output file");
  add_config(sweep, o);

  auto* pseudo = app.add_subcommand("pseudo", "select confident zero-shot pseudolabels");
  pseudo->add_option("--manifest", o.manifest)->required();
  pseudo->add_option("--k", o.k)->capture_default_str();
  pseudo->add_option("--temperature", o.temperature)->capture_default_str();
  pseudo->add_option("--out", o.out, "CSV output file");
  add_config(pseudo, o);

  auto* run = app.add_subcommand("run", "full (shots x seeds) grid for one method");
  run->add_option("--manifest", o.manifest)->required();
  run->add_option("--method", o.method)->capture_default_str();
  run->add_option("--shots", o.shots)->delimiter(',')->capture_default_str();
  run->add_option("--seeds", o.seeds)->delimiter(',')->capture_default_str();
  run->add_option("--out", o.out, "output directory");
  add_training(run, o);
  add_config(run, o);

  auto* report = app.add_subcommand("report", "aggregate a runs.csv into a report");
  report->add_option("--runs", o.runs)->required();
  report->add_option("--format", o.format, "csv | markdown")->capture_default_str();
  report->add_option("--out", o.out, "output file");
  add_config(report, o);

  try {
    std::vector<std::string> args = merge_config(argc, argv);
    std::vector<const char*> cargs;
    for (const auto& a : args) cargs.push_back(a.c_str());
    app.parse(static_cast<int>(cargs.size()), cargs.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const svl::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  }

  try {
    if (*check) return cmd_extract_check(o);
    if (*zs) return cmd_zeroshot(o);
    if (*adapt) return cmd_adapt(o);
    if (*estimate) return cmd_lambda_estimate(o);
    if (*sweep) return cmd_lambda_sweep(o);
    if (*pseudo) return cmd_pseudo(o);
    if (*run) return cmd_run(o);
    if (*report) return cmd_report(o);
  } catch (const svl::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>

#include "cli_config.hpp"
#include "precise/checkpoint.hpp"
#include "precise/errors.hpp"
#include "precise/experiment.hpp"
#include "precise/explain.hpp"
#include "precise/gradcheck.hpp"
#include "precise/random.hpp"
#include "precise/text.hpp"

namespace fs = std::filesystem;
using namespace precise;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

struct Invocation {
  std::string command;
  cli::ConfigMap config;
};

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

fs::path prepare_out(const Invocation& inv) {
  const fs::path dir = inv.config.get("out");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  open_output(dir / "effective_config.txt") << "# precise " << inv.command << "\n" << inv.config.render();
  return dir;
}

LabeledDataset load_data(const cli::ConfigMap& c, const std::string& source_key, const std::string& counts_key,
                         std::uint64_t stream) {
  const std::string& source = c.get(source_key);
  if (source == "synth") {
    const auto counts = c.get_sizes(counts_key);
    return gen_synthetic(counts, c.get_size("side"), derive_seed(c.get_size("data-seed"), stream));
  }
  return load_manifest(source, c.get("data-root"));
}

LabeledDataset train_data(const cli::ConfigMap& c) {
  return load_data(c, "data", "n-per-class", seed_stream::kSynthetic);
}
LabeledDataset test_data(const cli::ConfigMap& c) {
  return load_data(c, "test-data", "test-n-per-class", seed_stream::kSyntheticTest);
}

void write_metrics_csv(const fs::path& path, double value, const MetricsReport& report, std::size_t num_classes) {
  std::ofstream out = open_output(path);
  write_results_csv(out, {SweepRow{value, report, {}}}, num_classes);
}

void print_metrics(const Metrics& m) {
  std::cout << "accuracy " << format_double(m.accuracy) << "  macro_f1 " << format_double(m.macro_f1);
  for (std::size_t j = 0; j < m.class_accuracy.size(); ++j) {
    if (m.class_accuracy[j]) std::cout << "  class_" << j << ' ' << format_double(*m.class_accuracy[j]);
  }
  std::cout << '\n';
}

template <typename T>
int run_train(const Invocation& inv) {
  const TrainConfig config = cli::to_train_config(inv.config);
  const LabeledDataset full = train_data(inv.config);
  const LabeledDataset test = test_data(inv.config);
  const fs::path out = prepare_out(inv);

  const LabeledDataset subset =
      stratified_subset(full, SubsetSpec{config.fraction, derive_seed(config.seed, seed_stream::kSubset)});
  TrainResult<T> result = train<T>(subset, &test, config, config.seed);
  const Metrics metrics = evaluate(result.model, test);

  CheckpointMeta meta{config.lambda1, config.lambda2, std::string(to_string(config.mode)), config.seed, {}};
  meta.extra["epochs"] = std::to_string(config.epochs);
  meta.extra["fraction"] = format_double(config.fraction);
  save_checkpoint(out / "checkpoint.bin", result.model, meta);

  std::ofstream hist = open_output(out / "loss_history.csv");
  hist << "epoch,total,classification,ae,proto_term1,proto_term2,test_accuracy\n";
  for (std::size_t e = 0; e < result.history.epochs.size(); ++e) {
    const EpochRecord& r = result.history.epochs[e];
    hist << e + 1 << ',' << format_double(r.mean.total) << ',' << format_double(r.mean.classification) << ','
         << format_double(r.mean.ae) << ',' << format_double(r.mean.proto_term1) << ','
         << format_double(r.mean.proto_term2) << ',' << (r.val_accuracy ? format_double(*r.val_accuracy) : "")
         << '\n';
  }
  write_metrics_csv(out / "metrics.csv", config.fraction, make_report({config.seed}, {metrics}), test.num_classes());
  print_metrics(metrics);
  return 0;
}

template <typename T>
int run_eval(const Invocation& inv) {
  const std::string& ckpt = inv.config.get("checkpoint");
  if (ckpt.empty()) throw ConfigError("eval requires --checkpoint");
  const Checkpoint<T> loaded = load_checkpoint<T>(ckpt);
  const LabeledDataset test = test_data(inv.config);
  const fs::path out = prepare_out(inv);
  const Metrics metrics = evaluate(loaded.model, test);
  write_metrics_csv(out / "metrics.csv", inv.config.get_double("fraction"), make_report({loaded.meta.seed}, {metrics}),
                    test.num_classes());
  print_metrics(metrics);
  return 0;
}

template <typename T>
int run_explain(const Invocation& inv) {
  const std::string& ckpt = inv.config.get("checkpoint");
  if (ckpt.empty()) throw ConfigError("explain requires --checkpoint");
  const Checkpoint<T> loaded = load_checkpoint<T>(ckpt);
  const LabeledDataset test = test_data(inv.config);
  const std::string& queries_path = inv.config.get("queries");
  const LabeledDataset queries = queries_path.empty() ? test : load_manifest(queries_path, inv.config.get("data-root"));
  const fs::path out = prepare_out(inv);

  const auto images = export_prototypes(loaded.model, out / "prototypes");
  std::ofstream dist = open_output(out / "distances.csv");
  write_distance_csv(dist, distance_report(loaded.model, queries), loaded.model.reservation());
  std::ofstream avg = open_output(out / "class_average.csv");
  write_class_average_csv(avg, class_average_distances(loaded.model, test));
  std::cout << "wrote " << images.size() << " prototype images, " << queries.size() << " distance rows\n";
  return 0;
}

template <typename T>
int run_sweep(const Invocation& inv, bool prototypes) {
  const TrainConfig config = cli::to_train_config(inv.config);
  const LabeledDataset full = train_data(inv.config);
  const LabeledDataset test = test_data(inv.config);
  const fs::path out = prepare_out(inv);
  const std::vector<SweepRow> rows =
      prototypes ? sweep_prototypes<T>(config, inv.config.get_sizes("d-values"), full, test)
                 : sweep_subsets<T>(config, inv.config.get_doubles("fractions"), full, test);
  std::ofstream csv = open_output(out / (prototypes ? "sweep_prototypes.csv" : "sweep_subsets.csv"));
  write_results_csv(csv, rows, test.num_classes());
  for (const SweepRow& row : rows) {
    std::cout << (prototypes ? "d " : "fraction ") << format_double(row.value) << "  accuracy "
              << format_double(row.report.accuracy.mean) << " +- " << format_double(row.report.accuracy.std) << '\n';
  }
  return 0;
}

int run_gen_synthetic(const Invocation& inv) {
  const fs::path out = prepare_out(inv);
  const LabeledDataset ds = train_data(inv.config);
  export_dataset(ds, out);
  std::cout << "wrote " << ds.size() << " images and manifest.csv to " << out.string() << '\n';
  return 0;
}

int run_gradcheck(const Invocation& inv) {
  const fs::path out = prepare_out(inv);
  GradCheckOptions options;
  options.seed = inv.config.get_size("seed");
  options.instances = inv.config.get_size("instances");
  const auto outcomes = run_gradcheck_suite(options);
  print_gradcheck_report(std::cout, outcomes);
  std::ofstream report = open_output(out / "gradcheck.txt");
  print_gradcheck_report(report, outcomes);
  for (const auto& o : outcomes)
    if (!o.passed) return kExitFailure;
  return 0;
}

template <typename T>
int dispatch_typed(const Invocation& inv) {
  if (inv.command == "train") return run_train<T>(inv);
  if (inv.command == "eval") return run_eval<T>(inv);
  if (inv.command == "explain") return run_explain<T>(inv);
  if (inv.command == "sweep-subsets") return run_sweep<T>(inv, false);
  return run_sweep<T>(inv, true);
}

int dispatch(const Invocation& inv) {
  if (inv.command == "gen-synthetic") return run_gen_synthetic(inv);
  if (inv.command == "gradcheck") return run_gradcheck(inv);
  std::size_t bits = inv.config.get_size("precision");
  if ((inv.command == "eval" || inv.command == "explain") && !inv.config.get("checkpoint").empty()) {
    bits = 8 * checkpoint_scalar_width(inv.config.get("checkpoint"));
  }
  if (bits == 32) return dispatch_typed<float>(inv);
  if (bits == 64) return dispatch_typed<double>(inv);
  throw ConfigError("precision must be 32 or 64, got " + inv.config.get("precision"));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prototype-reserved explainable classifier: training, evaluation and explanation"};
  app.require_subcommand(1);

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"train", "train one model and evaluate it on the test data"},
      {"eval", "evaluate a checkpoint on the test data"},
      {"explain", "decode prototypes and write distance reports"},
      {"sweep-subsets", "multi-seed runs over training subset fractions"},
      {"sweep-prototypes", "multi-seed runs over prototypes per class"},
      {"gen-synthetic", "write a synthetic dataset as PGM images plus manifest"},
      {"gradcheck", "compare every gradient against finite differences"},
  };

  std::string config_path;
  std::map<std::string, std::string> overrides;
  std::map<std::string, std::vector<CLI::Option*>> options;
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "flat key=value config file");
    for (const cli::KeySpec& k : cli::config_keys()) {
      options[k.key].push_back(sub->add_option("--" + k.key, overrides[k.key], k.help));
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    Invocation inv{app.get_subcommands().front()->get_name(), {}};
    if (!config_path.empty()) cli::apply_config_file(inv.config, config_path);
    for (const auto& [key, opts] : options) {
      for (const CLI::Option* opt : opts)
        if (opt->count() > 0) inv.config.set(key, overrides[key]);
    }
    return dispatch(inv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const ShapeError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

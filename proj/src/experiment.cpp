#include "precise/experiment.hpp"

#include <atomic>
#include <exception>
#include <ostream>
#include <thread>

#include "precise/random.hpp"
#include "precise/text.hpp"

namespace precise {

template <typename T>
MultiSeedResult<T> run_multiseed(const TrainConfig& config, const LabeledDataset& train_set,
                                 const LabeledDataset& test_set, bool keep_models) {
  config.validate();
  MultiSeedResult<T> result;
  result.outcomes.resize(config.seeds);

  auto run_one = [&](std::size_t i) {
    SeedOutcome<T>& out = result.outcomes[i];
    out.seed = config.seed + i;
    const LabeledDataset subset =
        stratified_subset(train_set, SubsetSpec{config.fraction, derive_seed(out.seed, seed_stream::kSubset)});
    out.subset_counts = subset.class_counts();
    TrainResult<T> trained = train<T>(subset, nullptr, config, out.seed);
    out.metrics = evaluate(trained.model, test_set);
    out.history = std::move(trained.history);
    if (keep_models) out.model = std::move(trained.model);
  };

  const std::size_t workers = std::min(config.workers, config.seeds);
  if (workers <= 1) {
    for (std::size_t i = 0; i < config.seeds; ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(config.seeds);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < config.seeds;) {
          try {
            run_one(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  std::vector<std::uint64_t> seeds;
  std::vector<Metrics> per_seed;
  for (const auto& o : result.outcomes) {
    seeds.push_back(o.seed);
    per_seed.push_back(o.metrics);
  }
  result.report = make_report(std::move(seeds), std::move(per_seed));
  return result;
}

namespace {

template <typename T>
SweepRow to_row(double value, MultiSeedResult<T> r) {
  SweepRow row;
  row.value = value;
  row.report = std::move(r.report);
  for (const auto& o : r.outcomes) row.subset_counts.push_back(o.subset_counts);
  return row;
}

}  // namespace

template <typename T>
std::vector<SweepRow> sweep_subsets(const TrainConfig& config, const std::vector<double>& fractions,
                                    const LabeledDataset& train_set, const LabeledDataset& test_set) {
  std::vector<SweepRow> rows;
  for (double f : fractions) {
    TrainConfig c = config;
    c.fraction = f;
    rows.push_back(to_row(f, run_multiseed<T>(c, train_set, test_set, false)));
  }
  return rows;
}

template <typename T>
std::vector<SweepRow> sweep_prototypes(const TrainConfig& config, const std::vector<std::size_t>& per_class_values,
                                       const LabeledDataset& train_set, const LabeledDataset& test_set) {
  std::vector<SweepRow> rows;
  for (std::size_t d : per_class_values) {
    TrainConfig c = config;
    c.per_class = d;
    rows.push_back(to_row(static_cast<double>(d), run_multiseed<T>(c, train_set, test_set, false)));
  }
  return rows;
}

void write_results_csv(std::ostream& out, const std::vector<SweepRow>& rows, std::size_t num_classes) {
  out << "fraction_or_d,seed,accuracy,macro_f1";
  for (std::size_t j = 0; j < num_classes; ++j) out << ",acc_class_" << j;
  out << '\n';
  for (const SweepRow& row : rows) {
    const std::string value = format_double(row.value);
    const MetricsReport& r = row.report;
    for (std::size_t s = 0; s < r.per_seed.size(); ++s) {
      const Metrics& m = r.per_seed[s];
      out << value << ',' << r.seeds[s] << ',' << format_double(m.accuracy) << ',' << format_double(m.macro_f1);
      for (std::size_t j = 0; j < num_classes; ++j) {
        out << ',';
        if (j < m.class_accuracy.size() && m.class_accuracy[j]) out << format_double(*m.class_accuracy[j]);
      }
      out << '\n';
    }
    for (const bool is_mean : {true, false}) {
      auto pick = [&](const Aggregate& a) { return format_double(is_mean ? a.mean : a.std); };
      out << value << ',' << (is_mean ? "mean" : "std") << ',' << pick(r.accuracy) << ',' << pick(r.macro_f1);
      for (std::size_t j = 0; j < num_classes; ++j) {
        out << ',';
        if (j < r.class_accuracy.size() && r.class_accuracy[j]) out << pick(*r.class_accuracy[j]);
      }
      out << '\n';
    }
  }
}

#define PRECISE_INSTANTIATE(T)                                                                                 \
  template MultiSeedResult<T> run_multiseed<T>(const TrainConfig&, const LabeledDataset&, const LabeledDataset&, \
                                               bool);                                                          \
  template std::vector<SweepRow> sweep_subsets<T>(const TrainConfig&, const std::vector<double>&,              \
                                                  const LabeledDataset&, const LabeledDataset&);               \
  template std::vector<SweepRow> sweep_prototypes<T>(const TrainConfig&, const std::vector<std::size_t>&,      \
                                                     const LabeledDataset&, const LabeledDataset&);

PRECISE_INSTANTIATE(float)
PRECISE_INSTANTIATE(double)

}  // namespace precise

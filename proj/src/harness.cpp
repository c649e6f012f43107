#include "sur/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <thread>

#include "sur/error.hpp"
#include "sur/ncc.hpp"

namespace sur {

namespace {

std::vector<std::string> split_names(std::string_view list) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= list.size()) {
    const auto comma = list.find(',', start);
    const auto piece = list.substr(start, comma == std::string_view::npos ? comma : comma - start);
    if (piece.empty()) throw Error(ErrorKind::InvalidArgument, "empty extractor name in '" + std::string(list) + "'");
    out.emplace_back(piece);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string join(const std::vector<std::string>& names, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out += sep;
    out += names[i];
  }
  return out;
}

std::string bank_names(const FeatureBank& bank) {
  std::vector<std::string> names;
  for (const auto& e : bank.extractors()) names.push_back(e.name);
  return join(names, ", ");
}

template <typename Fn>
void parallel_for(std::size_t count, unsigned workers, Fn&& fn) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  std::vector<std::exception_ptr> errors(count);
  auto body = [&](unsigned w) {
    for (std::size_t i = w; i < count; i += workers) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    body(0);
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(body, w);
  }
  // Report the failure of the lowest episode index, independent of scheduling.
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

MethodSpec MethodSpec::single(std::string name) {
  MethodSpec m;
  m.kind = Kind::Single;
  m.names = {std::move(name)};
  return m;
}

MethodSpec MethodSpec::concat() {
  MethodSpec m;
  m.kind = Kind::Concat;
  return m;
}

MethodSpec MethodSpec::sur(SelectorConfig config) {
  MethodSpec m;
  m.kind = Kind::Sur;
  m.selector = config;
  return m;
}

MethodSpec MethodSpec::sur_subset(std::vector<std::string> names, SelectorConfig config) {
  if (names.empty()) throw Error(ErrorKind::InvalidArgument, "sur-subset needs at least one extractor");
  MethodSpec m;
  m.kind = Kind::SurSubset;
  m.names = std::move(names);
  m.selector = config;
  return m;
}

MethodSpec MethodSpec::parse(std::string_view text, SelectorConfig config) {
  const auto colon = text.find(':');
  const auto head = text.substr(0, colon);
  const auto tail = colon == std::string_view::npos ? std::string_view{} : text.substr(colon + 1);
  if (head == "concat" && colon == std::string_view::npos) return concat();
  if (head == "sur" && colon == std::string_view::npos) return sur(config);
  if (head == "single" && colon != std::string_view::npos && !tail.empty()) return single(std::string(tail));
  if ((head == "sur-subset" || head == "sur_subset") && colon != std::string_view::npos) {
    return sur_subset(split_names(tail), config);
  }
  throw Error(ErrorKind::InvalidArgument, "unknown method '" + std::string(text) +
                                              "' (expected single:NAME, concat, sur or sur-subset:A,B,...)");
}

std::string MethodSpec::label() const {
  switch (kind) {
    case Kind::Single: return "single:" + names.at(0);
    case Kind::Concat: return "concat";
    case Kind::Sur: return "sur";
    case Kind::SurSubset: return "sur-subset:" + join(names, ",");
  }
  return {};
}

void MethodSpec::check_against(const FeatureBank& bank) const {
  for (const auto& name : names) {
    if (!bank.index_of(name)) {
      throw Error(ErrorKind::UnknownExtractor, "'" + name + "' is not in bank '" + bank.dataset_name() +
                                                   "'; available: " + bank_names(bank));
    }
  }
}

Interval mean_ci95(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::EmptyInput, "cannot aggregate an empty list");
  const double t = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / t;
  if (values.size() == 1) return {mean, 0.0};
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  const double sd = std::sqrt(sq / (t - 1.0));
  return {mean, 1.96 * sd / std::sqrt(t)};
}

Interval aggregate_ci(std::span<const double> accuracies) {
  const auto raw = mean_ci95(accuracies);
  return {100.0 * raw.mean, 100.0 * raw.ci95};
}

EvalReport EvalReport::without_runtime() const {
  EvalReport copy = *this;
  for (auto& row : copy.methods) row.runtime_s = 0.0;
  return copy;
}

MethodOutcome run_method(const FeatureBank& bank, const MethodSpec& method, const SamplerConfig& sampler,
                         const RunOptions& options) {
  sampler.validate();
  method.check_against(bank);
  if (method.is_sur()) method.selector.validate();
  const auto start = std::chrono::steady_clock::now();

  // Single-block and subset methods run on a restricted copy; item indices
  // and labels are unchanged so every method sees the same episodes.
  std::optional<FeatureBank> restricted;
  if (method.kind == MethodSpec::Kind::Single || method.kind == MethodSpec::Kind::SurSubset) {
    restricted.emplace(subset_extractors(bank, method.names));
  }
  const FeatureBank& used = restricted ? *restricted : bank;
  const NormalizedView view(used);
  const std::size_t k_count = used.num_extractors();

  const std::size_t count = sampler.episodes;
  MethodOutcome out;
  out.accuracies.assign(count, 0.0);
  std::vector<std::vector<double>> lambdas(method.is_sur() ? count : 0);

  parallel_for(count, options.workers, [&](std::size_t i) {
    const Episode episode = sample_indexed_episode(bank, sampler, i);
    if (method.is_sur()) {
      const auto selection = optimize_selection(view, episode, method.selector);
      out.accuracies[i] = accuracy(view, episode, selection.lambda);
      lambdas[i] = selection.lambda.values();
    } else {
      out.accuracies[i] = accuracy(view, episode, SelectionVector::ones(k_count));
    }
  });

  const auto summary = aggregate_ci(out.accuracies);
  out.row = MethodRow{bank.dataset_name(), method.label(), count, summary.mean, summary.ci95,
                      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()};
  if (method.is_sur()) {
    LambdaTrace trace{bank.dataset_name(), method.label(), {}, std::move(lambdas)};
    for (const auto& e : used.extractors()) trace.extractors.push_back(e.name);
    out.trace = std::move(trace);
  }
  return out;
}

std::vector<LambdaRow> lambda_rows(const LambdaTrace& trace) {
  if (trace.episodes.empty()) {
    throw Error(ErrorKind::MissingLambdaTrace, "no episodes recorded for '" + trace.method + "' on '" +
                                                   trace.dataset + "'");
  }
  const std::string prefix = trace.method == "sur" ? "" : trace.method + "/";
  std::vector<LambdaRow> rows;
  std::vector<double> column(trace.episodes.size());
  for (std::size_t k = 0; k < trace.extractors.size(); ++k) {
    for (std::size_t e = 0; e < trace.episodes.size(); ++e) column[e] = trace.episodes[e].at(k);
    const auto stats = mean_ci95(column);
    rows.push_back({trace.dataset, prefix + trace.extractors[k], stats.mean, stats.ci95});
  }
  return rows;
}

Evaluation evaluate(std::span<const FeatureBank> banks, std::span<const MethodSpec> methods,
                    const SamplerConfig& sampler, const RunOptions& options) {
  Evaluation result;
  for (const auto& bank : banks) {
    for (const auto& method : methods) {
      auto outcome = run_method(bank, method, sampler, options);
      result.report.methods.push_back(outcome.row);
      if (outcome.trace) {
        auto rows = lambda_rows(*outcome.trace);
        result.report.lambdas.insert(result.report.lambdas.end(), rows.begin(), rows.end());
        result.traces.push_back(std::move(*outcome.trace));
      }
    }
  }
  return result;
}

LambdaHeatmap lambda_heatmap(std::span<const LambdaTrace> traces) {
  if (traces.empty()) throw Error(ErrorKind::MissingLambdaTrace, "no lambda traces given");
  LambdaHeatmap map;
  for (const auto& trace : traces) {
    if (trace.episodes.empty()) {
      throw Error(ErrorKind::MissingLambdaTrace, "trace for '" + trace.dataset + "' has no episodes");
    }
    for (const auto& name : trace.extractors) {
      if (std::find(map.extractors.begin(), map.extractors.end(), name) == map.extractors.end()) {
        map.extractors.push_back(name);
      }
    }
    map.datasets.push_back(trace.dataset);
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  map.cells.assign(map.extractors.size(), std::vector<Interval>(traces.size(), Interval{nan, nan}));
  std::vector<double> column;
  for (std::size_t j = 0; j < traces.size(); ++j) {
    const auto& trace = traces[j];
    for (std::size_t k = 0; k < trace.extractors.size(); ++k) {
      column.clear();
      for (const auto& lambda : trace.episodes) column.push_back(lambda.at(k));
      const auto row = static_cast<std::size_t>(
          std::find(map.extractors.begin(), map.extractors.end(), trace.extractors[k]) -
          map.extractors.begin());
      map.cells[row][j] = mean_ci95(column);
    }
  }
  return map;
}

std::vector<Ranking> rank_methods(const EvalReport& report) {
  std::vector<Ranking> out;
  std::map<std::string, std::vector<const MethodRow*>> by_dataset;
  std::vector<std::string> order;
  for (const auto& row : report.methods) {
    if (!by_dataset.contains(row.dataset)) order.push_back(row.dataset);
    by_dataset[row.dataset].push_back(&row);
  }
  for (const auto& dataset : order) {
    const auto& rows = by_dataset[dataset];
    const MethodRow* best = rows.front();
    for (const auto* row : rows) {
      if (row->mean_acc > best->mean_acc) best = row;
    }
    Ranking r{dataset, best->method, {}};
    for (const auto* row : rows) {
      if (row != best && row->mean_acc + row->ci95 >= best->mean_acc - best->ci95) {
        r.overlapping.push_back(row->method);
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace sur

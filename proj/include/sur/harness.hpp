#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sur/episodes.hpp"
#include "sur/feature_bank.hpp"
#include "sur/selector.hpp"

namespace sur {

/// How the selection vector is chosen per episode.
///   single:NAME         one block alone (lambda = 1)
///   concat              all blocks, lambda fixed to ones
///   sur                 lambda optimized on the support set
///   sur-subset:A,B,...  sur restricted to the named blocks
struct MethodSpec {
  enum class Kind { Single, Concat, Sur, SurSubset };

  Kind kind = Kind::Sur;
  std::vector<std::string> names;
  SelectorConfig selector;

  static MethodSpec single(std::string name);
  static MethodSpec concat();
  static MethodSpec sur(SelectorConfig config = {});
  static MethodSpec sur_subset(std::vector<std::string> names, SelectorConfig config = {});
  static MethodSpec parse(std::string_view text, SelectorConfig config = {});

  bool is_sur() const noexcept { return kind == Kind::Sur || kind == Kind::SurSubset; }
  /// Canonical text form, accepted by parse().
  std::string label() const;
  /// Throws UnknownExtractor, listing the bank's extractors, if a name is missing.
  void check_against(const FeatureBank& bank) const;

  bool operator==(const MethodSpec&) const = default;
};

struct Interval {
  double mean = 0.0;
  double ci95 = 0.0;  // 1.96 * sample sd / sqrt(T); 0 when T == 1
};

/// Mean and 95% half-width of raw values.
Interval mean_ci95(std::span<const double> values);
/// Same, for per-episode accuracies in [0, 1], reported in percent.
Interval aggregate_ci(std::span<const double> accuracies);

/// Final lambda of every episode of one SUR run.
struct LambdaTrace {
  std::string dataset;
  std::string method;
  std::vector<std::string> extractors;
  std::vector<std::vector<double>> episodes;

  bool operator==(const LambdaTrace&) const = default;
};

struct MethodRow {
  std::string dataset;
  std::string method;
  std::size_t episodes = 0;
  double mean_acc = 0.0;  // percent
  double ci95 = 0.0;      // percent
  double runtime_s = 0.0;

  bool operator==(const MethodRow&) const = default;
};

struct LambdaRow {
  std::string dataset;
  std::string extractor;
  double lambda_mean = 0.0;
  double lambda_ci95 = 0.0;

  bool operator==(const LambdaRow&) const = default;
};

struct EvalReport {
  std::vector<MethodRow> methods;
  std::vector<LambdaRow> lambdas;

  /// Copy with every runtime_s set to 0.
  EvalReport without_runtime() const;

  bool operator==(const EvalReport&) const = default;
};

struct RunOptions {
  unsigned workers = 1;
};

struct MethodOutcome {
  MethodRow row;
  std::vector<double> accuracies;     // per episode, in [0, 1]
  std::optional<LambdaTrace> trace;   // SUR variants only
};

/// Evaluates one method on the episode stream `sampler` draws from `bank`.
/// Episodes may run on several workers; results are gathered by episode
/// index, so they do not depend on the worker count.
MethodOutcome run_method(const FeatureBank& bank, const MethodSpec& method, const SamplerConfig& sampler,
                         const RunOptions& options = {});

/// Long-form lambda rows of a trace. Rows of the plain `sur` method use the
/// extractor name; other SUR variants prefix it with "<method>/".
std::vector<LambdaRow> lambda_rows(const LambdaTrace& trace);

struct Evaluation {
  EvalReport report;
  std::vector<LambdaTrace> traces;
};

/// Every method on every bank, in (bank, method) order.
Evaluation evaluate(std::span<const FeatureBank> banks, std::span<const MethodSpec> methods,
                    const SamplerConfig& sampler, const RunOptions& options = {});

/// cells[i][j]: mean and CI of lambda_i over the episodes of column j.
/// Extractors are listed in order of first appearance; a cell is NaN when
/// the column's trace lacks that extractor.
struct LambdaHeatmap {
  std::vector<std::string> extractors;
  std::vector<std::string> datasets;
  std::vector<std::vector<Interval>> cells;
};

LambdaHeatmap lambda_heatmap(std::span<const LambdaTrace> traces);

/// Best method per dataset and the methods whose CI overlaps it.
struct Ranking {
  std::string dataset;
  std::string best;
  std::vector<std::string> overlapping;
};
std::vector<Ranking> rank_methods(const EvalReport& report);

}  // namespace sur

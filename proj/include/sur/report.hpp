#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sur/harness.hpp"

namespace sur {

enum class ReportFormat { Csv, Json };

ReportFormat parse_report_format(std::string_view text);

inline constexpr std::string_view kMethodCsvHeader = "dataset,method,episodes,mean_acc,ci95,runtime_s";
inline constexpr std::string_view kLambdaCsvHeader = "dataset,extractor,lambda_mean,lambda_ci95";
inline constexpr std::string_view kLambdaDumpHeader = "dataset,method,episode,extractor,lambda";

/// CSV writes the method table to `path` and the lambda table next to it
/// (see lambda_table_path). JSON writes {"methods": [...], "lambdas": [...]}
/// with the same field names.
void write_report(const EvalReport& report, const std::filesystem::path& path, ReportFormat format);
std::filesystem::path lambda_table_path(const std::filesystem::path& report_path);

std::string report_methods_csv(const EvalReport& report);
std::string report_lambdas_csv(const EvalReport& report);
std::string report_json(const EvalReport& report);
EvalReport parse_report_json(std::string_view text);
EvalReport read_report_json(const std::filesystem::path& path);

/// Per-episode lambda dump, one row per (episode, extractor).
void write_lambda_dump(std::span<const LambdaTrace> traces, const std::filesystem::path& path);
std::vector<LambdaTrace> read_lambda_dump(const std::filesystem::path& path);

/// Wide matrix: one row per extractor, "<dataset>:mean,<dataset>:ci95" column pairs.
std::string heatmap_csv(const LambdaHeatmap& heatmap);
std::string heatmap_svg(const LambdaHeatmap& heatmap);

/// Aligned table for terminals; marks the best method per dataset with '*'
/// and methods whose CI overlaps it with '~'.
std::string format_summary(const EvalReport& report);

void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace sur

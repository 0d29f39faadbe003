#pragma once

#include <filesystem>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "zslgmm/experiments.hpp"

namespace zslgmm {

/// Config echo, toolkit version, per-trial results and aggregates. Contains
/// nothing that depends on timing or thread count.
nlohmann::json report_to_json(const ExperimentReport& report, std::span<const std::string> class_names);

/// trial,method,accuracy,accuracy_macro,em_iterations,em_converged
std::string trials_csv(const ExperimentReport& report);

/// method,count,mean,median,q25,q75,min,max
std::string boxplot_csv(const ExperimentReport& report);

enum class ReportFormat { Json, Csv, Both };
ReportFormat parse_report_format(std::string_view text);

/// Writes report.json and/or trials.csv + boxplot.csv into `directory`,
/// creating it if needed. A non-null `resolved` is stored under "resolved".
void write_report(const ExperimentReport& report, std::span<const std::string> class_names,
                  const std::filesystem::path& directory, ReportFormat format,
                  const nlohmann::json& resolved = nullptr);

}  // namespace zslgmm

#include "zslgmm/report.hpp"

#include <sstream>

#include "csv.hpp"
#include "zslgmm/error.hpp"
#include "zslgmm/rng.hpp"
#include "zslgmm/version.hpp"

namespace zslgmm {

namespace {

std::string class_name(std::span<const std::string> names, ClassId id) {
  const auto i = static_cast<std::size_t>(id);
  return i < names.size() ? names[i] : std::to_string(id);
}

nlohmann::json names_of(std::span<const ClassId> ids, std::span<const std::string> names) {
  nlohmann::json out = nlohmann::json::array();
  for (ClassId id : ids) out.push_back(class_name(names, id));
  return out;
}

nlohmann::json method_json(const MethodResult& r, Method method) {
  nlohmann::json doc{{"accuracy", r.accuracy}, {"accuracy_macro", r.accuracy_macro}};
  if (method == Method::Transductive || method == Method::Baseline) {
    doc["em_iterations"] = r.em_iterations;
    doc["em_converged"] = r.em_converged;
    doc["reseeded"] = r.reseeded;
  }
  return doc;
}

}  // namespace

nlohmann::json report_to_json(const ExperimentReport& report, std::span<const std::string> class_names) {
  nlohmann::json doc;
  doc["toolkit"] = "zslgmm " + std::string(kVersion);
  doc["rng"] = std::string(CounterRng::kVersion);
  doc["config"] = config_to_json(report.config);
  doc["split_seed"] = report.split_seed;
  nlohmann::json methods = nlohmann::json::array();
  for (Method m : report.methods) methods.push_back(std::string(to_string(m)));
  doc["methods"] = methods;
  doc["trial_count"] = report.trials.size();
  doc["failures"] = report.failures;
  doc["valid"] = report.valid;

  nlohmann::json aggregates = nlohmann::json::object();
  for (const auto& a : report.aggregates) {
    aggregates[std::string(to_string(a.method))] = {{"count", a.count}, {"mean", a.mean},   {"median", a.median},
                                                    {"q25", a.q25},     {"q75", a.q75},     {"min", a.min},
                                                    {"max", a.max}};
  }
  doc["aggregates"] = aggregates;

  nlohmann::json trials = nlohmann::json::array();
  for (const auto& t : report.trials) {
    nlohmann::json entry;
    entry["trial"] = t.trial;
    entry["unseen"] = names_of(t.unseen, class_names);
    if (t.failed) {
      entry["failed"] = true;
      entry["error"] = t.error;
      trials.push_back(entry);
      continue;
    }
    entry["covariance_mode"] = std::string(to_string(t.mode));
    for (Method m : report.methods) {
      if (const auto& r = t.result(m)) entry[std::string(to_string(m))] = method_json(*r, m);
    }
    if (!t.fallback_classes.empty()) entry["fallback"] = names_of(t.fallback_classes, class_names);
    if (!t.notes.empty()) entry["notes"] = t.notes;
    trials.push_back(entry);
  }
  doc["trials"] = trials;
  return doc;
}

std::string trials_csv(const ExperimentReport& report) {
  std::ostringstream out;
  out << "trial,method,accuracy,accuracy_macro,em_iterations,em_converged\n";
  for (const auto& t : report.trials) {
    if (t.failed) continue;
    for (Method m : report.methods) {
      const auto& r = t.result(m);
      if (!r) continue;
      out << t.trial << ',' << to_string(m) << ',' << detail::format_double(r->accuracy) << ','
          << detail::format_double(r->accuracy_macro) << ',' << r->em_iterations << ','
          << (r->em_converged ? "true" : "false") << '\n';
    }
  }
  return out.str();
}

std::string boxplot_csv(const ExperimentReport& report) {
  std::ostringstream out;
  out << "method,count,mean,median,q25,q75,min,max\n";
  for (const auto& a : report.aggregates) {
    out << to_string(a.method) << ',' << a.count << ',' << detail::format_double(a.mean) << ','
        << detail::format_double(a.median) << ',' << detail::format_double(a.q25) << ','
        << detail::format_double(a.q75) << ',' << detail::format_double(a.min) << ','
        << detail::format_double(a.max) << '\n';
  }
  return out.str();
}

ReportFormat parse_report_format(std::string_view text) {
  if (text == "json") return ReportFormat::Json;
  if (text == "csv") return ReportFormat::Csv;
  if (text == "both") return ReportFormat::Both;
  throw ConfigError("unknown report format '" + std::string(text) + "' (expected json, csv or both)");
}

void write_report(const ExperimentReport& report, std::span<const std::string> class_names,
                  const std::filesystem::path& directory, ReportFormat format, const nlohmann::json& resolved) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) throw Error(directory.string() + ": cannot create directory: " + ec.message());
  if (format != ReportFormat::Csv) {
    nlohmann::json doc = report_to_json(report, class_names);
    if (!resolved.is_null()) doc["resolved"] = resolved;
    detail::write_text_file(directory / "report.json", doc.dump(2) + "\n");
  }
  if (format != ReportFormat::Json) {
    detail::write_text_file(directory / "trials.csv", trials_csv(report));
    detail::write_text_file(directory / "boxplot.csv", boxplot_csv(report));
  }
}

}  // namespace zslgmm

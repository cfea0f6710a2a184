#pragma once

#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "driftbench/error.hpp"
#include "driftbench/orchestrator.hpp"

namespace driftbench {

enum class OutputFormat { MarkdownTable, Csv, PlotDataCsv };

inline OutputFormat parse_output_format(const std::string& name) {
  if (name == "md" || name == "markdown") {
    return OutputFormat::MarkdownTable;
  }
  if (name == "csv") {
    return OutputFormat::Csv;
  }
  if (name == "plot") {
    return OutputFormat::PlotDataCsv;
  }
  throw UsageError("unknown format \"" + name + "\" (expected md, csv, or plot)");
}

struct ReportSpec {
  OutputFormat format = OutputFormat::MarkdownTable;
  int metric_precision = 2;    // decimal places for H/PPL/TP means
  int accuracy_precision = 3;  // decimal places for accuracies and standard errors
};

namespace detail {

inline std::string fixed(double value, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", precision, value);
  return buf;
}

// Standard errors render without the leading zero: 0.006 -> ".006".
inline std::string se_string(double se, int precision) {
  std::string s = fixed(se, precision);
  if (s.size() > 1 && s[0] == '0' && s[1] == '.') {
    s.erase(0, 1);
  }
  return s;
}

inline std::string stat_cell(const std::optional<AggregateStat>& stat, int mean_precision,
                             int se_precision) {
  if (!stat) {
    return "--";
  }
  return fixed(stat->mean, mean_precision) + " ±" +
         se_string(stat->standard_error, se_precision);
}

inline std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) {
    return field;
  }
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') {
      out += "\"\"";
    } else {
      out.push_back(c);
    }
  }
  out.push_back('"');
  return out;
}

}  // namespace detail

inline std::string format_degradation(double percent) {
  return detail::fixed(percent, 1) + "%";
}

// Markdown tables in the layout of the published results: uncertainty per
// condition split by correctness, then per-condition accuracy with the
// "% FIPx10 vs. B" row when both conditions are present.
inline std::string emit_markdown_table(const Summary& summary, const ReportSpec& spec) {
  const int mp = spec.metric_precision;
  const int ap = spec.accuracy_precision;
  std::string out;
  out += "## Uncertainty by condition (" + summary.model + ")\n\n";
  out += "| Condition | H (correct) | PPL (correct) | TP (correct) | H (incorrect) | "
         "PPL (incorrect) | TP (incorrect) |\n";
  out += "|---|---|---|---|---|---|---|\n";

  std::map<PromptCondition, std::pair<const SummaryRow*, const SummaryRow*>,
           detail::ConditionOrder>
      by_condition;
  for (const SummaryRow& row : summary.rows) {
    auto& slot = by_condition[row.condition];
    (row.group == AnswerGroup::Correct ? slot.first : slot.second) = &row;
  }
  for (const auto& [condition, rows] : by_condition) {
    const auto* correct = rows.first;
    const auto* incorrect = rows.second;
    out += "| " + condition_name(condition);
    for (const SummaryRow* row : {correct, incorrect}) {
      if (row == nullptr) {
        out += " | -- | -- | --";
        continue;
      }
      out += " | " + detail::stat_cell(row->entropy, mp, ap);
      out += " | " + detail::stat_cell(row->perplexity, mp, ap);
      out += " | " + detail::stat_cell(row->token_probability, mp, ap);
    }
    out += " |\n";
  }

  out += "\n## Accuracy by condition\n\n";
  out += "| Condition | Accuracy |\n|---|---|\n";
  for (const auto& [condition, rows] : by_condition) {
    const SummaryRow* row = rows.first != nullptr ? rows.first : rows.second;
    if (row == nullptr) {
      continue;
    }
    out += "| " + condition_name(condition) + " | " +
           detail::stat_cell(row->accuracy, ap, ap) + " |\n";
  }
  if (summary.degradation_percent) {
    out += "| % FIPx10 vs. B | " + format_degradation(*summary.degradation_percent) +
           " |\n";
  }
  if (summary.failures > 0) {
    out += "\n" + std::to_string(summary.failures) +
           " failed generation(s) excluded from uncertainty aggregates.\n";
  }
  return out;
}

inline std::string emit_csv(const Summary& summary) {
  std::string out =
      "model,condition,variant,k,group,n_records,"
      "entropy_mean,entropy_se,perplexity_mean,perplexity_se,"
      "token_probability_mean,token_probability_se,accuracy_mean,accuracy_se\n";
  auto stat_fields = [](const std::optional<AggregateStat>& stat) {
    if (!stat) {
      return std::string(",");
    }
    return detail::fixed(stat->mean, 6) + "," + detail::fixed(stat->standard_error, 6);
  };
  for (const SummaryRow& row : summary.rows) {
    out += detail::csv_escape(row.model) + "," + condition_name(row.condition) + "," +
           variant_name(row.condition.variant) + "," +
           std::to_string(row.condition.repetitions) + "," +
           answer_group_name(row.group) + "," + std::to_string(row.n_records) + "," +
           stat_fields(row.entropy) + "," + stat_fields(row.perplexity) + "," +
           stat_fields(row.token_probability) + "," + stat_fields(row.accuracy) + "\n";
  }
  return out;
}

// Plot-ready data for the k-sweep figures: one row per (metric, group, k)
// over the false-info conditions, k ascending within each curve.
inline std::string emit_plot_data(const Summary& summary) {
  struct Curve {
    const char* metric;
    std::optional<AggregateStat> SummaryRow::* field;
  };
  static constexpr Curve kCurves[] = {
      {"H", &SummaryRow::entropy},
      {"PPL", &SummaryRow::perplexity},
      {"TP", &SummaryRow::token_probability},
  };

  std::vector<const SummaryRow*> fip_rows;
  for (const SummaryRow& row : summary.rows) {
    if (row.condition.kind == ConditionKind::FalseInfo) {
      fip_rows.push_back(&row);
    }
  }
  if (fip_rows.empty()) {
    throw Error("nothing to plot: no false-info k-sweep in the summary");
  }

  std::string out = "model,variant,metric,group,k,mean,se\n";
  for (const Curve& curve : kCurves) {
    for (AnswerGroup group : {AnswerGroup::Correct, AnswerGroup::Incorrect}) {
      std::vector<const SummaryRow*> rows;
      for (const SummaryRow* row : fip_rows) {
        if (row->group == group && (row->*curve.field).has_value()) {
          rows.push_back(row);
        }
      }
      std::sort(rows.begin(), rows.end(), [](const SummaryRow* a, const SummaryRow* b) {
        return a->condition.repetitions < b->condition.repetitions;
      });
      for (const SummaryRow* row : rows) {
        const AggregateStat& stat = *(row->*curve.field);
        out += detail::csv_escape(row->model) + "," +
               variant_name(row->condition.variant) + "," + curve.metric + "," +
               answer_group_name(group) + "," +
               std::to_string(row->condition.repetitions) + "," +
               detail::fixed(stat.mean, 6) + "," + detail::fixed(stat.standard_error, 6) +
               "\n";
      }
    }
  }
  return out;
}

inline std::string emit_table(const Summary& summary, const ReportSpec& spec) {
  switch (spec.format) {
    case OutputFormat::MarkdownTable:
      return emit_markdown_table(summary, spec);
    case OutputFormat::Csv:
      return emit_csv(summary);
    case OutputFormat::PlotDataCsv:
      return emit_plot_data(summary);
  }
  throw UsageError("unknown output format");
}

}  // namespace driftbench

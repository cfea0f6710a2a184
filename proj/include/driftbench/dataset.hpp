#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "driftbench/correctness.hpp"
#include "driftbench/error.hpp"
#include "driftbench/hash.hpp"

namespace driftbench {

// One QA corpus entry: a question, its accepted answers, and the paired
// false and random statements used to build perturbed prompts.
struct QAItem {
  std::string id;
  std::string question;
  AnswerKey answer_key;
  std::string false_fact;
  std::string random_fact;
  std::string source;  // optional provenance note
};

struct ValidationIssue {
  std::string item_id;
  std::string code;
  std::string message;
};

namespace detail {

inline std::string require_string_field(const nlohmann::json& obj, const char* field,
                                        int line) {
  if (!obj.contains(field) || !obj.at(field).is_string()) {
    throw ParseError(std::string("missing or non-string field \"") + field + "\"", line);
  }
  return obj.at(field).get<std::string>();
}

}  // namespace detail

// Parses a line-delimited corpus stream. Structural problems abort with the
// offending line number; semantic checks live in validate_corpus.
inline std::vector<QAItem> parse_corpus(std::istream& in) {
  std::vector<QAItem> items;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(std::string("invalid JSON record: ") + ex.what(), line_no);
    }
    if (!record.is_object()) {
      throw ParseError("record is not a JSON object", line_no);
    }
    QAItem item;
    item.id = detail::require_string_field(record, "id", line_no);
    item.question = detail::require_string_field(record, "question", line_no);
    if (!record.contains("answers") || !record.at("answers").is_array() ||
        record.at("answers").empty()) {
      throw ParseError("missing or empty \"answers\" array", line_no);
    }
    for (const auto& alias : record.at("answers")) {
      if (!alias.is_string()) {
        throw ParseError("\"answers\" entries must be strings", line_no);
      }
      item.answer_key.aliases.push_back(alias.get<std::string>());
    }
    item.false_fact = detail::require_string_field(record, "false_fact", line_no);
    item.random_fact = detail::require_string_field(record, "random_fact", line_no);
    if (record.contains("source")) {
      if (!record.at("source").is_string()) {
        throw ParseError("\"source\" must be a string", line_no);
      }
      item.source = record.at("source").get<std::string>();
    }
    items.push_back(std::move(item));
  }
  return items;
}

// Collects every invariant violation; an empty report means the corpus is
// usable. Order-independent: permuting items yields the same issue set.
inline std::vector<ValidationIssue> validate_corpus(std::span<const QAItem> items) {
  std::vector<ValidationIssue> issues;
  std::map<std::string, std::vector<std::size_t>> positions_by_id;
  for (std::size_t i = 0; i < items.size(); ++i) {
    positions_by_id[items[i].id].push_back(i);
  }
  for (const auto& [id, positions] : positions_by_id) {
    if (positions.size() > 1) {
      std::string where;
      for (std::size_t p : positions) {
        if (!where.empty()) {
          where += ", ";
        }
        where += std::to_string(p + 1);
      }
      issues.push_back({id, "duplicate-id",
                        "id \"" + id + "\" appears at records " + where});
    }
  }
  for (const QAItem& item : items) {
    const std::string label = item.id.empty() ? "<missing id>" : item.id;
    if (item.id.empty()) {
      issues.push_back({label, "empty-field", "empty id"});
    }
    if (item.question.empty()) {
      issues.push_back({label, "empty-field", "empty question"});
    }
    if (item.false_fact.empty()) {
      issues.push_back({label, "empty-field", "empty false_fact"});
    }
    if (item.random_fact.empty()) {
      issues.push_back({label, "empty-field", "empty random_fact"});
    }
    if (item.answer_key.aliases.empty()) {
      issues.push_back({label, "empty-field", "no answer aliases"});
    }
    const std::string norm_false = normalize(item.false_fact);
    for (const std::string& alias : item.answer_key.aliases) {
      const std::string norm_alias = normalize(alias);
      if (norm_alias.empty()) {
        issues.push_back({label, "empty-alias",
                          "alias \"" + alias + "\" is empty after normalization"});
        continue;
      }
      if (norm_false.find(norm_alias) != std::string::npos) {
        issues.push_back({label, "answer-leak",
                          "false_fact contains answer alias \"" + alias + "\""});
      }
    }
  }
  return issues;
}

inline std::string serialize_item(const QAItem& item) {
  nlohmann::ordered_json record;
  record["id"] = item.id;
  record["question"] = item.question;
  record["answers"] = item.answer_key.aliases;
  record["false_fact"] = item.false_fact;
  record["random_fact"] = item.random_fact;
  if (!item.source.empty()) {
    record["source"] = item.source;
  }
  return record.dump();
}

inline std::string serialize_corpus(std::span<const QAItem> items) {
  std::string out;
  for (const QAItem& item : items) {
    out += serialize_item(item);
    out.push_back('\n');
  }
  return out;
}

inline std::vector<QAItem> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open dataset file: " + path.string());
  }
  std::vector<QAItem> items = parse_corpus(in);
  const std::vector<ValidationIssue> issues = validate_corpus(items);
  if (!issues.empty()) {
    std::string msg = "corpus validation failed (" + std::to_string(issues.size()) +
                      " issue" + (issues.size() == 1 ? "" : "s") + "): ";
    msg += "[" + issues.front().item_id + "] " + issues.front().message;
    throw ValidationError(msg);
  }
  return items;
}

inline std::string file_sha256(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open file: " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

}  // namespace driftbench

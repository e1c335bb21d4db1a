#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace kedit {

struct NeighborhoodPrompt {
  std::string prompt;
  std::string subject;
  std::string expected;  // true object of the neighbor fact

  friend bool operator==(const NeighborhoodPrompt&, const NeighborhoodPrompt&) = default;
};

struct FactRecord {
  std::string case_id;
  std::string subject;
  std::string relation;
  std::string target_true;
  std::string target_new;
  std::string edit_prompt;
  std::vector<std::string> paraphrase_prompts;
  std::vector<NeighborhoodPrompt> neighborhood_prompts;
  std::vector<std::string> reference_texts;

  friend bool operator==(const FactRecord&, const FactRecord&) = default;
};

nlohmann::json to_json(const FactRecord& r);
FactRecord fact_from_json(const nlohmann::json& j);

// JSONL, one record per line.
void write_dataset(const std::filesystem::path& path, const std::vector<FactRecord>& records);
std::vector<FactRecord> read_dataset(const std::filesystem::path& path);
std::string dataset_to_jsonl(const std::vector<FactRecord>& records);

struct RelationSpec {
  std::string name;
  std::vector<std::string> templates;  // "{s}" marks the subject; the object follows the template
  std::vector<std::string> objects;
  std::vector<std::string> reference_templates;  // "{o}" marks the object
};

// Built-in relations usable by name from the CLI.
const std::vector<RelationSpec>& relation_catalog();
const RelationSpec& find_relation(const std::string& name);

struct SyntheticOptions {
  int n_subjects = 64;
  std::vector<std::string> relations = {"sport", "city"};
  int templates_per_relation = 4;
  int neighbors_per_record = 3;
  std::uint64_t seed = 0;
};

// One record per (subject, relation). Conflict-free by construction. Throws
// InsufficientPool when a relation has fewer than two objects and
// InvalidArgument when the request is out of range.
std::vector<FactRecord> gen_synthetic_dataset(const SyntheticOptions& options);

// Every prompt of every record completed with its true object and a full stop,
// plus three bio lines per subject listing its true objects.
std::vector<std::string> training_texts(const std::vector<FactRecord>& records);

}  // namespace kedit

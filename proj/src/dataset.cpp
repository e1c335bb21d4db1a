#include "kedit/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "kedit/error.hpp"
#include "kedit/rng.hpp"

namespace kedit {

namespace fs = std::filesystem;
using nlohmann::json;

json to_json(const FactRecord& r) {
  json neighbors = json::array();
  for (const auto& n : r.neighborhood_prompts) {
    neighbors.push_back(json{{"prompt", n.prompt}, {"subject", n.subject}, {"expected", n.expected}});
  }
  return json{{"case_id", r.case_id},
              {"subject", r.subject},
              {"relation", r.relation},
              {"target_true", r.target_true},
              {"target_new", r.target_new},
              {"edit_prompt", r.edit_prompt},
              {"paraphrase_prompts", r.paraphrase_prompts},
              {"neighborhood_prompts", neighbors},
              {"reference_texts", r.reference_texts}};
}

FactRecord fact_from_json(const json& j) {
  try {
    FactRecord r;
    r.case_id = j.at("case_id").get<std::string>();
    r.subject = j.at("subject").get<std::string>();
    r.relation = j.at("relation").get<std::string>();
    r.target_true = j.at("target_true").get<std::string>();
    r.target_new = j.at("target_new").get<std::string>();
    r.edit_prompt = j.at("edit_prompt").get<std::string>();
    r.paraphrase_prompts = j.value("paraphrase_prompts", std::vector<std::string>{});
    for (const auto& n : j.value("neighborhood_prompts", json::array())) {
      r.neighborhood_prompts.push_back(
          {n.at("prompt").get<std::string>(), n.at("subject").get<std::string>(), n.at("expected").get<std::string>()});
    }
    r.reference_texts = j.value("reference_texts", std::vector<std::string>{});
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("fact record: ") + e.what());
  }
}

std::string dataset_to_jsonl(const std::vector<FactRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

void write_dataset(const fs::path& path, const std::vector<FactRecord>& records) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << dataset_to_jsonl(records);
}

std::vector<FactRecord> read_dataset(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::vector<FactRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      records.push_back(fact_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kParse, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

const std::vector<RelationSpec>& relation_catalog() {
  static const std::vector<RelationSpec> catalog = {
      {"sport",
       {"{s} plays the sport of", "the sport played by {s} is", "everyone knows that {s} is a professional player of",
        "what sport does {s} play ? it is", "in the league , {s} competes in", "fans of {s} watch matches of"},
       {"football", "basketball", "tennis", "cricket", "hockey", "golf", "baseball", "rugby"},
       {"{o} is a sport played by many teams .", "a match of {o} draws a large crowd ."}},
      {"city",
       {"{s} was born in the city of", "the birthplace of {s} is", "people say that {s} came into the world in",
        "where was {s} born ? in", "the hometown of {s} is", "as a child , {s} lived in"},
       {"paris", "london", "tokyo", "berlin", "madrid", "rome", "cairo", "lima"},
       {"{o} is a large city with many streets .", "the old town of {o} attracts visitors ."}},
      {"language",
       {"{s} speaks the language", "the mother tongue of {s} is", "when at home , {s} talks in",
        "which language does {s} speak ? it is", "letters written by {s} are in", "the native language of {s} is"},
       {"french", "english", "japanese", "german", "spanish", "italian", "arabic", "russian"},
       {"{o} is a language spoken by millions .", "books written in {o} fill the library ."}},
      {"instrument",
       {"{s} plays the instrument", "the favorite instrument of {s} is the", "on stage , {s} performs on the",
        "which instrument does {s} play ? the", "critics praise how {s} plays the", "the instrument of {s} is the"},
       {"piano", "guitar", "violin", "drums", "flute", "cello", "trumpet", "harp"},
       {"the {o} is a musical instrument .", "a concert with the {o} fills the hall ."}},
  };
  return catalog;
}

const RelationSpec& find_relation(const std::string& name) {
  for (const auto& r : relation_catalog()) {
    if (r.name == name) return r;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown relation '" + name + "'");
}

namespace {

std::string replace_all(std::string text, const std::string& key, const std::string& value) {
  for (std::size_t pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos + value.size())) {
    text.replace(pos, key.size(), value);
  }
  return text;
}

std::string make_name(RngStream& rng, int syllables) {
  static constexpr const char* kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"};
  static constexpr const char* kVowels[] = {"a", "e", "i", "o", "u"};
  std::string name;
  for (int i = 0; i < syllables; ++i) {
    name += kOnsets[rng.index(std::size(kOnsets))];
    name += kVowels[rng.index(std::size(kVowels))];
  }
  name += kOnsets[rng.index(std::size(kOnsets))];
  return name;
}

// Distinct pronounceable names that do not collide with `taken`.
std::vector<std::string> make_names(RngStream& rng, std::size_t count, std::set<std::string>& taken) {
  std::vector<std::string> out;
  while (out.size() < count) {
    std::string n = make_name(rng, 2);
    if (taken.insert(n).second) out.push_back(std::move(n));
  }
  return out;
}

}  // namespace

std::vector<FactRecord> gen_synthetic_dataset(const SyntheticOptions& options) {
  if (options.n_subjects < 2) throw Error(ErrorCode::kInvalidArgument, "need at least 2 subjects");
  if (options.relations.empty()) throw Error(ErrorCode::kInvalidArgument, "need at least 1 relation");
  if (options.templates_per_relation < 2) throw Error(ErrorCode::kInvalidArgument, "need at least 2 templates");

  std::vector<const RelationSpec*> relations;
  for (const auto& name : options.relations) {
    const RelationSpec& rel = find_relation(name);
    if (rel.objects.size() < 2) throw Error(ErrorCode::kInsufficientPool, "relation '" + name + "' has < 2 objects");
    if (static_cast<std::size_t>(options.templates_per_relation) > rel.templates.size()) {
      throw Error(ErrorCode::kInvalidArgument, "relation '" + name + "' has only " +
                                                   std::to_string(rel.templates.size()) + " templates");
    }
    relations.push_back(&rel);
  }

  RngStream rng(options.seed, fnv1a64("gen-data"));

  // Words already used by templates and objects must not double as names.
  std::set<std::string> taken;
  for (const auto& rel : relation_catalog()) {
    for (const auto& t : rel.templates) {
      std::istringstream words(t);
      for (std::string w; words >> w;) taken.insert(w);
    }
    for (const auto& o : rel.objects) taken.insert(o);
  }

  const auto n = static_cast<std::size_t>(options.n_subjects);
  // Shared first names, unique last names: the last subject token identifies the subject.
  std::size_t pool = 1;
  while (pool * pool < n) ++pool;
  const auto first = make_names(rng, pool, taken);
  const auto last = make_names(rng, n, taken);
  std::vector<std::string> subjects(n);
  for (std::size_t s = 0; s < n; ++s) subjects[s] = first[rng.index(pool)] + " " + last[s];

  std::vector<FactRecord> records;
  for (const RelationSpec* rel : relations) {
    std::vector<std::string> truth(n);
    for (auto& t : truth) t = rel->objects[rng.index(rel->objects.size())];

    for (std::size_t s = 0; s < n; ++s) {
      FactRecord r;
      r.case_id = rel->name + "-" + std::to_string(s);
      r.subject = subjects[s];
      r.relation = rel->name;
      r.target_true = truth[s];
      do {
        r.target_new = rel->objects[rng.index(rel->objects.size())];
      } while (r.target_new == r.target_true);

      r.edit_prompt = replace_all(rel->templates[0], "{s}", r.subject);
      for (int t = 1; t < options.templates_per_relation; ++t) {
        r.paraphrase_prompts.push_back(replace_all(rel->templates[static_cast<std::size_t>(t)], "{s}", r.subject));
      }

      std::vector<std::size_t> others;
      for (std::size_t o = 0; o < n; ++o) {
        if (o != s) others.push_back(o);
      }
      const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(options.neighbors_per_record), others.size());
      for (std::size_t i = 0; i < k; ++i) {
        const std::size_t pick = i + rng.index(others.size() - i);
        std::swap(others[i], others[pick]);
        const std::size_t o = others[i];
        r.neighborhood_prompts.push_back(
            {replace_all(rel->templates[0], "{s}", subjects[o]), subjects[o], truth[o]});
      }
      for (const auto& ref : rel->reference_templates) r.reference_texts.push_back(replace_all(ref, "{o}", r.target_new));
      records.push_back(std::move(r));
    }
  }
  return records;
}

std::vector<std::string> training_texts(const std::vector<FactRecord>& records) {
  std::vector<std::string> out;
  std::vector<std::string> subjects;
  std::map<std::string, std::vector<std::string>> objects;
  for (const auto& r : records) {
    out.push_back(r.edit_prompt + " " + r.target_true + " .");
    for (const auto& p : r.paraphrase_prompts) out.push_back(p + " " + r.target_true + " .");
    auto [it, fresh] = objects.try_emplace(r.subject);
    if (fresh) subjects.push_back(r.subject);
    it->second.push_back(r.target_true);
  }
  // Bio lines put the subject's objects right after its name, in both orders.
  for (const auto& s : subjects) {
    const auto& objs = objects[s];
    std::string forward = s, backward = s, known = s + " is known for";
    for (std::size_t i = 0; i < objs.size(); ++i) {
      forward += " " + objs[i];
      backward += " " + objs[objs.size() - 1 - i];
      known += " " + objs[i];
    }
    out.push_back(forward + " .");
    out.push_back(backward + " .");
    out.push_back(known + " .");
  }
  return out;
}

}  // namespace kedit

#include "consol/corpus.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/spdlog.h>

#include "consol/error.hpp"

namespace consol {

namespace fs = std::filesystem;

std::string_view to_string(Role role) {
  switch (role) {
    case Role::kUser: return "user";
    case Role::kAssistant: return "assistant";
    case Role::kSystem: return "system";
  }
  return "user";
}

std::optional<Role> parse_role(std::string_view text) {
  if (text == "user") return Role::kUser;
  if (text == "assistant") return Role::kAssistant;
  if (text == "system") return Role::kSystem;
  return std::nullopt;
}

std::string_view to_string(MemoryType type) {
  switch (type) {
    case MemoryType::kSemantic: return "semantic";
    case MemoryType::kProcedural: return "procedural";
    case MemoryType::kEpisodic: return "episodic";
  }
  return "episodic";
}

std::optional<MemoryType> parse_memory_type(std::string_view text) {
  if (text == "semantic") return MemoryType::kSemantic;
  if (text == "procedural") return MemoryType::kProcedural;
  if (text == "episodic") return MemoryType::kEpisodic;
  return std::nullopt;
}

std::string_view to_string(Style style) {
  switch (style) {
    case Style::kDirect: return "direct";
    case Style::kHowTo: return "how_to";
    case Style::kRecall: return "recall";
    case Style::kScenario: return "scenario";
    case Style::kNegation: return "negation";
    case Style::kTaskOriented: return "task_oriented";
  }
  return "direct";
}

std::optional<Style> parse_style(std::string_view text) {
  for (Style s : kStyles) {
    if (to_string(s) == text) return s;
  }
  return std::nullopt;
}

std::int64_t count_tokens(std::string_view text) {
  return static_cast<std::int64_t>((text.size() + 3) / 4);
}

std::string render_transcript(std::span<const Turn> turns) {
  std::string out;
  for (std::size_t i = 0; i < turns.size(); ++i) {
    if (i > 0) out += "\n\n";
    switch (turns[i].role) {
      case Role::kUser: out += "[USER]\n"; break;
      case Role::kAssistant: out += "[ASSISTANT]\n"; break;
      case Role::kSystem: out += "[SYSTEM]\n"; break;
    }
    out += turns[i].content;
  }
  return out;
}

Conversation Conversation::make(std::string id, std::string scenario, std::vector<Turn> turns) {
  Conversation c;
  c.id = std::move(id);
  c.scenario = std::move(scenario);
  c.turns = std::move(turns);
  c.token_count = count_tokens(c.transcript());
  return c;
}

void validate_conversation(const Conversation& conversation, std::string_view where) {
  if (conversation.id.empty()) {
    throw Error(ErrorKind::kSchema, fmt::format("{}: field 'id': empty", where));
  }
  if (conversation.turns.empty()) {
    throw Error(ErrorKind::kSchema, fmt::format("{}: field 'turns': empty", where));
  }
  std::size_t i = 0;
  while (i < conversation.turns.size() && conversation.turns[i].role == Role::kSystem) ++i;
  if (i == conversation.turns.size()) {
    throw Error(ErrorKind::kSchema,
                fmt::format("{}: field 'turns': turn order: no user/assistant turns", where));
  }
  Role expected = Role::kUser;
  for (std::size_t k = 0; k < conversation.turns.size(); ++k) {
    const Turn& t = conversation.turns[k];
    if (t.content.empty()) {
      throw Error(ErrorKind::kSchema,
                  fmt::format("{}: field 'turns[{}].content': empty content", where, k));
    }
    if (k < i) continue;
    if (t.role != expected) {
      throw Error(ErrorKind::kSchema,
                  fmt::format("{}: field 'turns[{}].role': turn order: expected {}, got {}",
                              where, k, to_string(expected), to_string(t.role)));
    }
    expected = expected == Role::kUser ? Role::kAssistant : Role::kUser;
  }
  if (conversation.token_count != count_tokens(conversation.transcript())) {
    throw Error(ErrorKind::kSchema,
                fmt::format("{}: field 'token_count': does not match transcript", where));
  }
}

bool is_two_message_exchange(std::span<const Turn> messages) {
  return messages.size() == 2 && messages[0].role == Role::kUser &&
         messages[1].role == Role::kAssistant && !messages[0].content.empty() &&
         !messages[1].content.empty();
}

// --- JSON mapping ---------------------------------------------------------

json to_json(const Turn& turn) {
  return json{{"role", to_string(turn.role)}, {"content", turn.content}};
}

Turn turn_from_json(const json& j, std::string_view where) {
  if (!j.is_object()) throw Error(ErrorKind::kSchema, fmt::format("{}: expected object", where));
  auto role_text = require_string(j, "role", where);
  auto role = parse_role(role_text);
  if (!role) {
    throw Error(ErrorKind::kSchema,
                fmt::format("{}: field 'role': unknown role '{}'", where, role_text));
  }
  return Turn{*role, require_string(j, "content", where)};
}

json to_json(const Conversation& conversation) {
  json turns = json::array();
  for (const auto& t : conversation.turns) turns.push_back(to_json(t));
  return json{{"id", conversation.id}, {"scenario", conversation.scenario}, {"turns", turns}};
}

Conversation conversation_from_json(const json& j, std::string_view where) {
  if (!j.is_object()) throw Error(ErrorKind::kSchema, fmt::format("{}: expected object", where));
  std::vector<Turn> turns;
  const auto& arr = require_array(j, "turns", where);
  for (std::size_t i = 0; i < arr.size(); ++i) {
    turns.push_back(turn_from_json(arr[i], fmt::format("{}: turns[{}]", where, i)));
  }
  return Conversation::make(require_string(j, "id", where), require_string(j, "scenario", where),
                            std::move(turns));
}

namespace {

MemoryType memory_type_field(const json& j, std::string_view where) {
  auto text = require_string(j, "type", where);
  auto type = parse_memory_type(text);
  if (!type) {
    throw Error(ErrorKind::kSchema,
                fmt::format("{}: field 'type': unknown memory type '{}'", where, text));
  }
  return *type;
}

void require_non_empty(const std::string& value, std::string_view field, std::string_view where) {
  if (value.empty()) {
    throw Error(ErrorKind::kSchema, fmt::format("{}: field '{}': empty", where, field));
  }
}

}  // namespace

json to_json(const Fact& fact) {
  return json{{"id", fact.id},
              {"name", fact.name},
              {"type", to_string(fact.type)},
              {"content", fact.content},
              {"source_conversation_id", fact.source_conversation_id},
              {"extraction_pass", fact.extraction_pass}};
}

Fact fact_from_json(const json& j, std::string_view where) {
  Fact f;
  f.id = require_string(j, "id", where);
  f.name = require_string(j, "name", where);
  f.type = memory_type_field(j, where);
  f.content = require_string(j, "content", where);
  f.source_conversation_id = require_string(j, "source_conversation_id", where);
  f.extraction_pass = static_cast<int>(require_int(j, "extraction_pass", where));
  require_non_empty(f.name, "name", where);
  require_non_empty(f.content, "content", where);
  if (f.extraction_pass < 1 || f.extraction_pass > 3) {
    throw Error(ErrorKind::kSchema,
                fmt::format("{}: field 'extraction_pass': must be 1..3", where));
  }
  return f;
}

json to_json(const TestQuestion& q) {
  return json{{"id", q.id},
              {"conversation_id", q.conversation_id},
              {"type", to_string(q.type)},
              {"question", q.question},
              {"expected_answer", q.expected_answer}};
}

TestQuestion question_from_json(const json& j, std::string_view where) {
  TestQuestion q;
  q.id = require_string(j, "id", where);
  q.conversation_id = require_string(j, "conversation_id", where);
  q.type = memory_type_field(j, where);
  q.question = require_string(j, "question", where);
  q.expected_answer = require_string(j, "expected_answer", where);
  require_non_empty(q.id, "id", where);
  require_non_empty(q.question, "question", where);
  return q;
}

json to_json(const SyntheticExample& ex) {
  json messages = json::array();
  for (const auto& t : ex.messages) messages.push_back(to_json(t));
  return json{{"fact_id", ex.fact_id}, {"style", to_string(ex.style)}, {"messages", messages}};
}

SyntheticExample example_from_json(const json& j, std::string_view where) {
  SyntheticExample ex;
  ex.fact_id = require_string(j, "fact_id", where);
  auto style_text = require_string(j, "style", where);
  auto style = parse_style(style_text);
  if (!style) {
    throw Error(ErrorKind::kSchema,
                fmt::format("{}: field 'style': unknown style '{}'", where, style_text));
  }
  ex.style = *style;
  const auto& arr = require_array(j, "messages", where);
  for (std::size_t i = 0; i < arr.size(); ++i) {
    ex.messages.push_back(turn_from_json(arr[i], fmt::format("{}: messages[{}]", where, i)));
  }
  if (!is_two_message_exchange(ex.messages)) {
    throw Error(ErrorKind::kSchema,
                fmt::format("{}: field 'messages': expected [user, assistant]", where));
  }
  return ex;
}

json to_json(const Manifest& m) {
  return json{{"base_model_tag", m.base_model_tag},
              {"lora_rank", m.lora_rank},
              {"lora_alpha", m.lora_alpha},
              {"target_modules", m.target_modules},
              {"learning_rate", m.learning_rate},
              {"optimizer", m.optimizer},
              {"warmup_fraction", m.warmup_fraction},
              {"batch_size", m.batch_size},
              {"epochs", m.epochs},
              {"checkpoint_every_epoch", m.checkpoint_every_epoch},
              {"seed", m.seed}};
}

Manifest manifest_from_json(const json& j, std::string_view where) {
  if (!j.is_object()) throw Error(ErrorKind::kSchema, fmt::format("{}: expected object", where));
  // Missing keys keep their defaults; present keys must have the right type.
  Manifest m;
  try {
    if (j.contains("base_model_tag")) m.base_model_tag = j.at("base_model_tag").get<std::string>();
    if (j.contains("lora_rank")) m.lora_rank = j.at("lora_rank").get<int>();
    if (j.contains("lora_alpha")) m.lora_alpha = j.at("lora_alpha").get<int>();
    if (j.contains("target_modules"))
      m.target_modules = j.at("target_modules").get<std::vector<std::string>>();
    if (j.contains("learning_rate")) m.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("optimizer")) m.optimizer = j.at("optimizer").get<std::string>();
    if (j.contains("warmup_fraction")) m.warmup_fraction = j.at("warmup_fraction").get<double>();
    if (j.contains("batch_size")) m.batch_size = j.at("batch_size").get<int>();
    if (j.contains("epochs")) m.epochs = j.at("epochs").get<int>();
    if (j.contains("checkpoint_every_epoch"))
      m.checkpoint_every_epoch = j.at("checkpoint_every_epoch").get<bool>();
    if (j.contains("seed")) m.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kSchema, fmt::format("{}: manifest: {}", where, e.what()));
  }
  if (m.epochs < 1 || m.lora_rank < 1 || m.batch_size < 1) {
    throw Error(ErrorKind::kSchema,
                fmt::format("{}: manifest: epochs, lora_rank and batch_size must be positive",
                            where));
  }
  return m;
}

// --- Files ----------------------------------------------------------------

void store_conversation(const fs::path& path, const Conversation& conversation) {
  write_json_file(path, to_json(conversation));
}

Conversation load_conversation(const fs::path& path) {
  const std::string where = path.string();
  Conversation c = conversation_from_json(read_json_file(path), where);
  validate_conversation(c, where);
  return c;
}

std::vector<Conversation> load_corpus(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw Error(ErrorKind::kIo, fmt::format("corpus directory {} does not exist", dir.string()));
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<Conversation> out;
  std::map<std::string, fs::path> seen;
  for (const auto& file : files) {
    Conversation c = load_conversation(file);
    auto [it, inserted] = seen.emplace(c.id, file);
    if (!inserted) {
      throw Error(ErrorKind::kConflict,
                  fmt::format("duplicate conversation id '{}' in {} and {}", c.id,
                              it->second.string(), file.string()));
    }
    out.push_back(std::move(c));
  }
  std::sort(out.begin(), out.end(),
            [](const Conversation& a, const Conversation& b) { return a.id < b.id; });
  return out;
}

void store_facts(const fs::path& path, std::span<const Fact> facts) {
  std::vector<json> records;
  records.reserve(facts.size());
  for (const auto& f : facts) records.push_back(to_json(f));
  write_records(path, kFactSchema, records);
}

std::vector<Fact> load_facts(const fs::path& path) {
  std::vector<Fact> out;
  auto records = read_records(path, kFactSchema);
  for (std::size_t i = 0; i < records.size(); ++i) {
    out.push_back(fact_from_json(records[i], fmt::format("{}: record {}", path.string(), i + 1)));
  }
  return out;
}

void store_questions(const fs::path& path, std::span<const TestQuestion> questions) {
  std::vector<json> records;
  records.reserve(questions.size());
  for (const auto& q : questions) records.push_back(to_json(q));
  write_records(path, kQuestionSchema, records);
}

std::vector<TestQuestion> load_questions(const fs::path& path) {
  std::vector<TestQuestion> out;
  auto records = read_records(path, kQuestionSchema);
  for (std::size_t i = 0; i < records.size(); ++i) {
    out.push_back(
        question_from_json(records[i], fmt::format("{}: record {}", path.string(), i + 1)));
  }
  return out;
}

void store_training_set(const fs::path& dir, const TrainingSet& set) {
  std::vector<json> records;
  records.reserve(set.examples.size());
  for (const auto& ex : set.examples) records.push_back(to_json(ex));
  write_records(dir / "training_set.jsonl", kExampleSchema, records);
  json manifest = to_json(set.manifest);
  write_json_file(dir / "manifest.json", manifest);
  json counts = json::object();
  for (const auto& [fact_id, n] : set.per_fact_counts) counts[fact_id] = n;
  write_json_file(dir / "example_counts.json",
                  json{{"conversation_id", set.conversation_id}, {"per_fact", counts}});
}

TrainingSet load_training_set(const fs::path& dir) {
  TrainingSet set;
  auto records = read_records(dir / "training_set.jsonl", kExampleSchema);
  for (std::size_t i = 0; i < records.size(); ++i) {
    set.examples.push_back(example_from_json(
        records[i], fmt::format("{}: record {}", (dir / "training_set.jsonl").string(), i + 1)));
  }
  set.manifest = manifest_from_json(read_json_file(dir / "manifest.json"),
                                    (dir / "manifest.json").string());
  json counts = read_json_file(dir / "example_counts.json");
  const std::string where = (dir / "example_counts.json").string();
  set.conversation_id = require_string(counts, "conversation_id", where);
  if (!counts.contains("per_fact") || !counts["per_fact"].is_object()) {
    throw Error(ErrorKind::kSchema, fmt::format("{}: field 'per_fact': expected object", where));
  }
  for (const auto& [fact_id, n] : counts["per_fact"].items()) {
    set.per_fact_counts[fact_id] = n.get<int>();
  }
  return set;
}

// --- Validation -----------------------------------------------------------

int& TypeCounts::operator[](MemoryType type) {
  switch (type) {
    case MemoryType::kSemantic: return semantic;
    case MemoryType::kProcedural: return procedural;
    case MemoryType::kEpisodic: return episodic;
  }
  return episodic;
}

int TypeCounts::operator[](MemoryType type) const {
  return const_cast<TypeCounts&>(*this)[type];
}

ValidationReport validate_run_inputs(std::span<const Conversation> conversations,
                                     std::span<const TestQuestion> questions) {
  ValidationReport report;
  for (const auto& c : conversations) report.per_conversation[c.id];
  std::set<std::string> dangling;
  for (const auto& q : questions) {
    auto it = report.per_conversation.find(q.conversation_id);
    if (it == report.per_conversation.end()) {
      dangling.insert(q.conversation_id);
      continue;
    }
    it->second[q.type] += 1;
    report.totals[q.type] += 1;
  }
  if (!dangling.empty()) {
    throw Error(ErrorKind::kIntegrity,
                fmt::format("test questions reference unknown conversation ids: {}",
                            fmt::join(dangling, ", ")));
  }
  if (questions.empty()) {
    report.warnings.push_back("question list is empty");
  }
  for (const auto& [id, counts] : report.per_conversation) {
    if (counts.total() == 0 && !questions.empty()) {
      report.warnings.push_back(fmt::format("conversation '{}' has no test questions", id));
    }
  }
  for (const auto& w : report.warnings) spdlog::warn("validate_run_inputs: {}", w);
  return report;
}

json to_json(const ValidationReport& report) {
  auto counts_json = [](const TypeCounts& c) {
    return json{{"semantic", c.semantic},
                {"procedural", c.procedural},
                {"episodic", c.episodic},
                {"total", c.total()}};
  };
  json per = json::object();
  for (const auto& [id, c] : report.per_conversation) per[id] = counts_json(c);
  return json{{"per_conversation", per},
              {"totals", counts_json(report.totals)},
              {"warnings", report.warnings}};
}

}  // namespace consol

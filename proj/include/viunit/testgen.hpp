#pragma once

#include <optional>
#include <string>
#include <vector>

#include "viunit/chat_client.hpp"
#include "viunit/dsl/program.hpp"
#include "viunit/scene_graph.hpp"

namespace viunit {

// A (caption, expected answer) pair; candidate until an image is attached.
struct CandidateTest {
  std::string caption;
  std::string expected;
  int source_sequence = 0;
};

// A concrete unit test: candidate plus synthesized input image.
struct UnitTest {
  std::string caption;
  std::string expected;
  ImageHandle image;
};

enum class GenMode { query_only, query_plus_implementation };
enum class TaskKind { vqa, itm };

struct GenSpec {
  GenMode mode = GenMode::query_only;
  TaskKind task = TaskKind::vqa;
  int num_sequences = 3;
  double temperature = 0.7;
  std::string model = "default";
  // Prompt template text with INSERT_QUERY_HERE (and INSERT_PROGRAM_HERE in
  // implementation-conditioned mode) placeholders.
  std::string template_text;
  std::string system_prompt;
};

// Extracts every `Image Caption: "..." Answer: ...` line; tolerates list
// numbering, stray whitespace, and a missing closing quote skips that line.
std::vector<CandidateTest> parse_test_lines(const std::string& raw);

// Prompts the chat service, concatenates parses across sequences, dedupes on
// (normalized caption, normalized answer) keeping first-seen order, and drops
// answers longer than five words.
std::vector<CandidateTest> generate_candidates(
    const std::string& query, const std::optional<dsl::ProgramSource>& program,
    const GenSpec& spec, ChatClient& llm);

// Fills template placeholders; exposed for prompt-asset tests.
std::string render_test_prompt(const std::string& template_text,
                               const std::string& query,
                               const std::optional<dsl::ProgramSource>& program);

}  // namespace viunit

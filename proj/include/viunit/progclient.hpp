#pragma once

#include <string>
#include <vector>

#include "viunit/chat_client.hpp"
#include "viunit/dsl/program.hpp"

namespace viunit {

struct ProgramPrompt {
  std::string template_text;  // API + in-context examples + query slot
  std::string system_prompt;
  std::string model = "default";
  double temperature = 0.7;
};

// Renders the prompt; exactly one INSERT_QUERY_HERE must resolve.
std::string render_program_prompt(const ProgramPrompt& prompt,
                                  const std::string& query);

// Pulls every `def execute_command` block (fenced or bare) out of a
// completion, dedented to column 0.
std::vector<std::string> extract_program_blocks(const std::string& text);

// Chat call with n samples; one ProgramSource per extracted block, indexed
// densely in arrival order.
std::vector<dsl::ProgramSource> generate_programs(const std::string& query,
                                                  int n, ChatClient& llm,
                                                  const ProgramPrompt& prompt);

// Same extraction over an already-rendered prompt (re-prompting path).
std::vector<dsl::ProgramSource> request_programs(const std::string& prompt,
                                                 int n, ChatClient& llm,
                                                 const std::string& model,
                                                 double temperature);

}  // namespace viunit

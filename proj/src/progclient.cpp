#include "viunit/progclient.hpp"

#include <sstream>

#include "viunit/text.hpp"

namespace viunit {

std::string render_program_prompt(const ProgramPrompt& prompt,
                                  const std::string& query) {
  const std::string placeholder = "INSERT_QUERY_HERE";
  std::size_t pos = prompt.template_text.find(placeholder);
  if (pos == std::string::npos)
    throw std::invalid_argument(
        "program prompt template lacks INSERT_QUERY_HERE");
  std::string out = prompt.template_text;
  out.replace(pos, placeholder.size(), query);
  if (out.find(placeholder) != std::string::npos)
    throw std::invalid_argument(
        "program prompt template has multiple INSERT_QUERY_HERE placeholders");
  return out;
}

namespace {

std::size_t indent_width(const std::string& line) {
  std::size_t w = 0;
  for (char c : line) {
    if (c == ' ') ++w;
    else if (c == '\t') w += 8;
    else break;
  }
  return w;
}

bool is_blank(const std::string& line) { return trim(line).empty(); }

bool is_fence(const std::string& line) {
  return trim(line).rfind("```", 0) == 0;
}

bool starts_block(const std::string& line) {
  std::string t = trim(line);
  return t.rfind("def execute_command", 0) == 0;
}

}  // namespace

std::vector<std::string> extract_program_blocks(const std::string& text) {
  std::vector<std::string> lines;
  {
    std::istringstream stream(text);
    std::string line;
    while (std::getline(stream, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      lines.push_back(line);
    }
  }

  std::vector<std::string> blocks;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (!starts_block(lines[i])) continue;
    std::size_t base = indent_width(lines[i]);
    std::vector<std::string> body{lines[i].substr(
        std::min(lines[i].size(), lines[i].find("def")))};
    std::size_t j = i + 1;
    for (; j < lines.size(); ++j) {
      const std::string& line = lines[j];
      if (is_fence(line)) break;
      if (is_blank(line)) {
        body.push_back("");
        continue;
      }
      if (indent_width(line) <= base) break;
      body.push_back(line.substr(std::min(line.size(), base)));
    }
    while (!body.empty() && body.back().empty()) body.pop_back();
    std::string block;
    for (const auto& line : body) {
      block += line;
      block += '\n';
    }
    blocks.push_back(std::move(block));
    i = j - 1;
  }
  return blocks;
}

namespace {

std::vector<dsl::ProgramSource> collect_programs(
    const std::vector<std::string>& sequences) {
  std::vector<dsl::ProgramSource> out;
  for (const std::string& sequence : sequences) {
    for (std::string& block : extract_program_blocks(sequence)) {
      dsl::ProgramSource source;
      source.text = std::move(block);
      source.origin = dsl::ProgramOrigin::llm;
      source.index = static_cast<int>(out.size());
      out.push_back(std::move(source));
    }
  }
  if (out.empty())
    throw EmptyGeneration("no execute_command definition in any sample");
  return out;
}

}  // namespace

std::vector<dsl::ProgramSource> request_programs(const std::string& prompt,
                                                 int n, ChatClient& llm,
                                                 const std::string& model,
                                                 double temperature) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  ChatRequest request;
  request.model = model;
  request.temperature = temperature;
  request.n = n;
  request.messages.push_back({"user", prompt});
  return collect_programs(llm.complete(request));
}

std::vector<dsl::ProgramSource> generate_programs(const std::string& query,
                                                  int n, ChatClient& llm,
                                                  const ProgramPrompt& prompt) {
  if (n < 1) throw std::invalid_argument("n must be >= 1");
  ChatRequest request;
  request.model = prompt.model;
  request.temperature = prompt.temperature;
  request.n = n;
  if (!prompt.system_prompt.empty())
    request.messages.push_back({"system", prompt.system_prompt});
  request.messages.push_back({"user", render_program_prompt(prompt, query)});
  return collect_programs(llm.complete(request));
}

}  // namespace viunit

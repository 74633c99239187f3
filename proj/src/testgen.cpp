#include "viunit/testgen.hpp"

#include <regex>
#include <set>
#include <sstream>

#include "viunit/text.hpp"

namespace viunit {

std::vector<CandidateTest> parse_test_lines(const std::string& raw) {
  static const std::regex line_re(
      R"re(Image\s+Caption:\s*"([^"]+)"\s*,?\s*Answer:\s*(.+))re",
      std::regex::icase);
  std::vector<CandidateTest> out;
  std::istringstream stream(raw);
  std::string line;
  while (std::getline(stream, line)) {
    std::smatch m;
    if (!std::regex_search(line, m, line_re)) continue;
    std::string caption = trim(m[1].str());
    std::string answer = strip_quotes_punct(m[2].str());
    if (caption.empty() || answer.empty()) continue;
    out.push_back(CandidateTest{caption, answer, 0});
  }
  return out;
}

std::string render_test_prompt(
    const std::string& template_text, const std::string& query,
    const std::optional<dsl::ProgramSource>& program) {
  std::string out = template_text;
  auto replace_all = [&](const std::string& from, const std::string& to) {
    std::size_t pos = 0;
    while ((pos = out.find(from, pos)) != std::string::npos) {
      out.replace(pos, from.size(), to);
      pos += to.size();
    }
  };
  replace_all("INSERT_QUERY_HERE", query);
  if (program) replace_all("INSERT_PROGRAM_HERE", program->text);
  return out;
}

std::vector<CandidateTest> generate_candidates(
    const std::string& query, const std::optional<dsl::ProgramSource>& program,
    const GenSpec& spec, ChatClient& llm) {
  if (spec.num_sequences < 1)
    throw std::invalid_argument("num_sequences must be >= 1");
  if (spec.mode == GenMode::query_plus_implementation && !program)
    throw std::invalid_argument(
        "implementation-conditioned generation requires a program");

  ChatRequest request;
  request.model = spec.model;
  request.temperature = spec.temperature;
  request.n = spec.num_sequences;
  if (!spec.system_prompt.empty())
    request.messages.push_back({"system", spec.system_prompt});
  request.messages.push_back(
      {"user", render_test_prompt(spec.template_text, query, program)});

  std::vector<std::string> sequences = llm.complete(request);

  std::vector<CandidateTest> out;
  std::set<std::pair<std::string, std::string>> seen;
  for (std::size_t seq = 0; seq < sequences.size(); ++seq) {
    for (CandidateTest cand : parse_test_lines(sequences[seq])) {
      if (word_count(cand.expected) > 5) continue;
      auto key = std::make_pair(normalize_answer(cand.caption),
                                normalize_answer(cand.expected));
      if (!seen.insert(key).second) continue;
      cand.source_sequence = static_cast<int>(seq);
      out.push_back(std::move(cand));
    }
  }
  if (out.empty())
    throw EmptyGeneration("no parsable unit test in any sequence for query: " +
                          query);
  return out;
}

}  // namespace viunit

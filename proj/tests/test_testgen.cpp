#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <set>

#include "viunit/errors.hpp"
#include "viunit/progclient.hpp"
#include "viunit/testgen.hpp"
#include "viunit/text.hpp"

using namespace viunit;

TEST_CASE("parse_test_lines reads the numbered caption format") {
  const std::string raw = R"(1. Image Caption: "A grey tabby cat" Answer: yes
2. Image Caption: "A golden retriever in a park" Answer: yes
3. Image Caption: "An empty modern living room" Answer: no
)";
  auto tests = parse_test_lines(raw);
  REQUIRE(tests.size() == 3);
  CHECK(tests[0].caption == "A grey tabby cat");
  CHECK(tests[0].expected == "yes");
  CHECK(tests[2].expected == "no");
}

TEST_CASE("parse_test_lines tolerates formatting drift") {
  const std::string raw =
      "Image Caption: \"no numbering\" Answer: left\n"
      "  7)  image caption:   \"case and spacing vary\" ,  Answer:  Two words\n"
      "Image Caption: \"missing closing quote Answer: skipped\n"
      "Some prose line without the pattern.\n"
      "Image Caption: \"trailing text\" Answer: blue\n";
  auto tests = parse_test_lines(raw);
  REQUIRE(tests.size() == 3);
  CHECK(tests[0].expected == "left");
  CHECK(tests[1].caption == "case and spacing vary");
  CHECK(tests[1].expected == "Two words");
  CHECK(tests[2].expected == "blue");
}

TEST_CASE("parse_test_lines of arbitrary text never throws (property)") {
  std::mt19937 rng(11);
  const std::string alphabet = "abc\"\n:., AI mageCaption Answer";
  for (int trial = 0; trial < 200; ++trial) {
    std::string junk;
    for (int i = 0; i < 80; ++i) junk += alphabet[rng() % alphabet.size()];
    auto tests = parse_test_lines(junk);
    for (const auto& t : tests) {
      CHECK_FALSE(t.caption.empty());
      CHECK_FALSE(trim(t.expected).empty());
    }
  }
}

TEST_CASE("generate_candidates dedupes and filters long answers") {
  ScriptedChatClient llm;
  llm.set_default({R"(1. Image Caption: "A red ball" Answer: yes
2. Image Caption: "a red ball." Answer: YES
3. Image Caption: "A blue ball" Answer: no
4. Image Caption: "A crowd" Answer: far too many words in this answer
)"});
  GenSpec spec;
  spec.num_sequences = 1;
  spec.template_text = "Make tests.\nQuery: INSERT_QUERY_HERE\nTests:\n";
  auto out = generate_candidates("Is there a red ball?", std::nullopt, spec, llm);
  REQUIRE(out.size() == 2);
  CHECK(out[0].caption == "A red ball");
  CHECK(out[0].expected == "yes");
  CHECK(out[1].caption == "A blue ball");
}

TEST_CASE("generate_candidates merges multiple sequences in order") {
  ScriptedChatClient llm;
  llm.set_default({
      "1. Image Caption: \"first sequence\" Answer: yes\n",
      "1. Image Caption: \"second sequence\" Answer: no\n"
      "2. Image Caption: \"first sequence\" Answer: yes\n",
  });
  GenSpec spec;
  spec.num_sequences = 2;
  spec.template_text = "Query: INSERT_QUERY_HERE\n";
  auto out = generate_candidates("q", std::nullopt, spec, llm);
  REQUIRE(out.size() == 2);
  CHECK(out[0].caption == "first sequence");
  CHECK(out[0].source_sequence == 0);
  CHECK(out[1].caption == "second sequence");
  CHECK(out[1].source_sequence == 1);
}

TEST_CASE("generate_candidates fails loudly on unusable output") {
  ScriptedChatClient llm;
  llm.set_default({"I cannot produce test cases right now."});
  GenSpec spec;
  spec.template_text = "Query: INSERT_QUERY_HERE\n";
  CHECK_THROWS_AS(
      generate_candidates("q", std::nullopt, spec, llm), EmptyGeneration);
}

TEST_CASE("render_test_prompt fills both placeholders") {
  const std::string tpl =
      "Query: INSERT_QUERY_HERE\nProgram:\nINSERT_PROGRAM_HERE\nTests:\n";
  dsl::ProgramSource prog{"def execute_command(image):\n    return 'yes'\n"};
  auto rendered = render_test_prompt(tpl, "Is it day?", prog);
  CHECK(rendered.find("Is it day?") != std::string::npos);
  CHECK(rendered.find("return 'yes'") != std::string::npos);
  CHECK(rendered.find("INSERT_") == std::string::npos);
}

TEST_CASE("dedupe keys use normalized caption and answer (property)") {
  std::mt19937 rng(5);
  const std::vector<std::string> caps = {"A red ball", "a RED ball.",
                                         "A blue cube", "the blue cube"};
  const std::vector<std::string> answers = {"yes", "Yes.", "no"};
  for (int trial = 0; trial < 100; ++trial) {
    std::string raw;
    int n = 2 + rng() % 8;
    for (int i = 0; i < n; ++i)
      raw += "Image Caption: \"" + caps[rng() % caps.size()] +
             "\" Answer: " + answers[rng() % answers.size()] + "\n";
    ScriptedChatClient llm;
    llm.set_default({raw});
    GenSpec spec;
    spec.num_sequences = 1;
    spec.template_text = "Query: INSERT_QUERY_HERE\n";
    std::vector<CandidateTest> out;
    try {
      out = generate_candidates("q", std::nullopt, spec, llm);
    } catch (const EmptyGeneration&) {
      continue;
    }
    std::set<std::pair<std::string, std::string>> keys;
    for (const auto& t : out) {
      auto key = std::make_pair(normalize_answer(t.caption),
                                normalize_answer(t.expected));
      CHECK(!keys.count(key));
      keys.insert(key);
      CHECK(word_count(t.expected) <= 5);
    }
  }
}

TEST_CASE("extract_program_blocks handles fenced and bare completions") {
  const std::string fenced = R"(Here is the program:
```python
def execute_command(image):
    image_patch = ImagePatch(image)
    return bool_to_yesno(image_patch.exists("cat"))
```
Hope this helps!)";
  auto blocks = extract_program_blocks(fenced);
  REQUIRE(blocks.size() == 1);
  CHECK(blocks[0].rfind("def execute_command", 0) == 0);
  CHECK(blocks[0].find("```") == std::string::npos);
  CHECK(blocks[0].find("Hope this") == std::string::npos);

  const std::string bare =
      "def execute_command(image):\n    return 'left'\n\n"
      "def execute_command(image):\n    return 'right'\n";
  auto two = extract_program_blocks(bare);
  REQUIRE(two.size() == 2);
  CHECK(two[0].find("'left'") != std::string::npos);
  CHECK(two[1].find("'right'") != std::string::npos);
}

TEST_CASE("extract_program_blocks dedents indented blocks") {
  const std::string indented =
      "Sure:\n    def execute_command(image):\n        return 'yes'\n";
  auto blocks = extract_program_blocks(indented);
  REQUIRE(blocks.size() == 1);
  CHECK(blocks[0] == "def execute_command(image):\n    return 'yes'\n");
}

TEST_CASE("program extraction across five completion shapes") {
  ScriptedChatClient llm;
  llm.set_default({
      "def execute_command(image):\n    return '0'\n",
      "```\ndef execute_command(image):\n    return '1'\n```\n",
      "Sure thing.\n\ndef execute_command(image):\n    return '2'\n\nDone.",
      "no code here at all",
      "Prefix\n```python\ndef execute_command(image):\n    return '4'\n```",
  });
  ProgramPrompt prompt;
  prompt.template_text = "Query: INSERT_QUERY_HERE\nProgram:\n";
  auto programs = generate_programs("q", 5, llm, prompt);
  REQUIRE(programs.size() == 4);
  // Indices are dense and follow arrival order even when one completion
  // contributes nothing.
  for (int i = 0; i < 4; ++i) CHECK(programs[i].index == i);
  CHECK(programs[0].text.find("'0'") != std::string::npos);
  CHECK(programs[3].text.find("'4'") != std::string::npos);
  for (const auto& p : programs) CHECK(p.origin == dsl::ProgramOrigin::llm);
}

TEST_CASE("prose-only completions raise EmptyGeneration") {
  ScriptedChatClient llm;
  llm.set_default({"I am unable to help with that.", "Still no code."});
  ProgramPrompt prompt;
  prompt.template_text = "Query: INSERT_QUERY_HERE\n";
  CHECK_THROWS_AS(generate_programs("q", 2, llm, prompt), EmptyGeneration);
}

TEST_CASE("render_program_prompt requires exactly one query slot") {
  ProgramPrompt prompt;
  prompt.template_text = "Q: INSERT_QUERY_HERE\n";
  CHECK(render_program_prompt(prompt, "hi") == "Q: hi\n");
  prompt.template_text = "no placeholder";
  CHECK_THROWS_AS(render_program_prompt(prompt, "hi"), std::invalid_argument);
  prompt.template_text = "INSERT_QUERY_HERE INSERT_QUERY_HERE";
  CHECK_THROWS_AS(render_program_prompt(prompt, "hi"), std::invalid_argument);
}

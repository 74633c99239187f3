#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>
#include <sstream>

#include "json.hpp"

#include "scene_fixtures.hpp"
#include "viunit/errors.hpp"
#include "viunit/imagegen.hpp"
#include "viunit/policies.hpp"

using namespace viunit;
using namespace viunit::dsl;
using fixtures::image_of;
using fixtures::obj;
using fixtures::scene;

namespace {

ProgramSource constant_program(const std::string& text, int index) {
  return ProgramSource{
      "def execute_command(image):\n    return \"" + text + "\"\n",
      ProgramOrigin::fixture, index};
}

const std::string kBallProgram = R"(def execute_command(image):
    image_patch = ImagePatch(image)
    return bool_to_yesno(len(image_patch.find("ball")) > 0)
)";

std::vector<UnitTest> ball_suite() {
  std::vector<UnitTest> suite;
  SynthSpec spec;
  for (const auto& [caption, expected] :
       std::vector<std::pair<std::string, std::string>>{
           {"a red ball", "yes"},
           {"a blue ball", "yes"},
           {"a table", "no"},
           {"a lamp near a sofa", "no"},
           {"two balls", "yes"}}) {
    suite.push_back(UnitTest{caption, expected,
                             synthesize(caption, spec, nullptr, nullptr).image});
  }
  return suite;
}

const std::string kReprompTemplate =
    "Query: INSERT_QUERY_HERE\nIncorrect Program:\nINSERT_CODE_HERE\n"
    "Test Cases:\nINSERT_UNIT_TEST_OUTPUTS_HERE\nCorrected Program:\n";

}  // namespace

TEST_CASE("selection runs the winner on the target image") {
  auto suite = ball_suite();
  auto target = image_of(scene({obj("ball", {50, 50, 110, 110})}));
  std::vector<ProgramSource> pool = {
      constant_program("no", 0),
      ProgramSource{kBallProgram, ProgramOrigin::fixture, 1}};
  ScriptedBackend backend;
  ScoreConfig cfg;
  auto result = run_selection(pool, suite, target, backend, cfg);
  CHECK(result.winner.program.index == 1);
  CHECK(result.winner.aggregate == doctest::Approx(1.0));
  CHECK(result.final_outcome.answer == "yes");
  REQUIRE(result.pool_scores.size() == 2);
  CHECK(result.pool_scores[0] == doctest::Approx(0.4));
  CHECK(result.pool_scores[1] == doctest::Approx(1.0));
}

TEST_CASE("refusal triggers strictly below theta") {
  auto suite = ball_suite();
  // Target scene carries a VQA fact so the fallback has something to say.
  auto g = scene({obj("ball", {50, 50, 110, 110})});
  g.qa_facts["is there a ball?"] = "yes";
  auto target = image_of(g);
  ScriptedBackend backend;
  ScoreConfig cfg;

  // Constant "yes" scores exactly 0.6 on the suite (3 of 5 match).
  std::vector<ProgramSource> pool = {constant_program("yes", 0)};
  RefusalConfig refusal;

  refusal.theta = 0.6;  // S == theta: keep the program
  auto kept = run_refusal("Is there a ball?", pool, suite, target, backend,
                          cfg, refusal);
  CHECK_FALSE(kept.refused);
  CHECK(kept.winner_score == doctest::Approx(0.6));
  CHECK(kept.answer == "yes");

  refusal.theta = 0.7;  // S < theta: refuse, answer via the VQA fallback
  auto refused = run_refusal("Is there a ball?", pool, suite, target, backend,
                             cfg, refusal);
  CHECK(refused.refused);
  CHECK(refused.answer == "yes");

  refusal.theta = 0.8;
  CHECK(run_refusal("Is there a ball?", pool, suite, target, backend, cfg,
                    refusal)
            .refused);

  // theta below every attainable score never refuses.
  refusal.theta = -1.0;
  CHECK_FALSE(run_refusal("Is there a ball?", pool, suite, target, backend,
                          cfg, refusal)
                  .refused);
}

TEST_CASE("refusals are monotone in theta (property)") {
  auto suite = ball_suite();
  auto target = image_of(scene({obj("ball", {50, 50, 110, 110})}));
  ScriptedBackend backend;
  ScoreConfig cfg;
  const std::vector<std::string> constants = {"yes", "no", "maybe", "2"};
  for (const auto& text : constants) {
    std::vector<ProgramSource> pool = {constant_program(text, 0)};
    bool previous = false;
    for (double theta : {0.0, 0.2, 0.4, 0.6, 0.7, 0.8, 1.0, 1.2}) {
      RefusalConfig refusal;
      refusal.theta = theta;
      bool refused = run_refusal("q", pool, suite, target, backend, cfg,
                                 refusal)
                         .refused;
      // Raising theta can only turn keeps into refusals, never back.
      if (previous) CHECK(refused);
      previous = refused;
    }
  }
}

TEST_CASE("itm fallback thresholds the match score") {
  SynthSpec spec;
  std::vector<UnitTest> suite = {
      UnitTest{"a cat", "yes", synthesize("a cat", spec, nullptr, nullptr).image}};
  auto g = scene({obj("dog", {0, 0, 100, 100})});
  g.match_facts["a cat on a mat"] = true;
  g.match_facts["a parked car"] = false;
  auto target = image_of(g);
  ScriptedBackend backend;
  ScoreConfig cfg;
  std::vector<ProgramSource> pool = {constant_program("no", 0)};
  RefusalConfig refusal;
  refusal.theta = 2.0;  // force refusal
  refusal.fallback = FallbackKind::itm_threshold;

  refusal.itm_statement = "a cat on a mat";
  CHECK(run_refusal("q", pool, suite, target, backend, cfg, refusal).answer ==
        "yes");
  refusal.itm_statement = "a parked car";
  CHECK(run_refusal("q", pool, suite, target, backend, cfg, refusal).answer ==
        "no");
  // Unknown statements score 0.5, below the 0.8 yes-threshold.
  refusal.itm_statement = "a spaceship";
  CHECK(run_refusal("q", pool, suite, target, backend, cfg, refusal).answer ==
        "no");
}

TEST_CASE("refusal F1 against hand-computed tables") {
  // Pairs are (refused, would_have_failed).
  using Table = std::vector<std::pair<bool, bool>>;
  // tp=2 fp=1 fn=1 -> f1 = 2*2/(2*2+1+1) = 2/3.
  CHECK(refusal_f1(Table{{true, true},
                         {true, true},
                         {true, false},
                         {false, true},
                         {false, false}}) == doctest::Approx(2.0 / 3));
  // Perfect refusals.
  CHECK(refusal_f1(Table{{true, true}, {false, false}}) == 1.0);
  // No true positives and no mistakes about positives -> 0 by convention.
  CHECK(refusal_f1(Table{{false, false}, {false, false}}) == 0.0);
  // Only false positives: tp=0 fp=2 fn=0 -> 0.
  CHECK(refusal_f1(Table{{true, false}, {true, false}}) == 0.0);
  // tp=1 fp=0 fn=3 -> 2/(2+3) = 0.4.
  CHECK(refusal_f1(Table{{true, true},
                         {false, true},
                         {false, true},
                         {false, true}}) == doctest::Approx(0.4));
  CHECK_THROWS_AS(refusal_f1({}), EmptyResults);
}

TEST_CASE("feedback blocks quote caption, expectation, and output") {
  ScoredProgram scored;
  scored.program = constant_program("no", 0);
  SynthSpec spec;
  auto img = synthesize("a red ball", spec, nullptr, nullptr).image;
  TestResult pass;
  pass.test = UnitTest{"a red ball", "yes", img};
  pass.outcome.kind = OutcomeKind::answer;
  pass.outcome.answer = "no";
  TestResult crash;
  crash.test = UnitTest{"a table", "no", img};
  crash.outcome.kind = OutcomeKind::runtime_error;
  crash.outcome.diagnostic = "'list' object has no attribute 'left'";
  scored.per_test = {pass, crash};

  auto rows = test_feedback(scored);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].predicted == "no");
  CHECK(rows[1].predicted == "Error: 'list' object has no attribute 'left'");

  auto block = render_feedback_block(rows);
  CHECK(block.find("Test A\n") != std::string::npos);
  CHECK(block.find("Test B\n") != std::string::npos);
  CHECK(block.find("Image Content: \"a red ball\"") != std::string::npos);
  CHECK(block.find("Ground Truth Answer: \"yes\"") != std::string::npos);
  CHECK(block.find("Program Output: \"no\"") != std::string::npos);
  CHECK(block.find(
            "Program Output: \"Error: 'list' object has no attribute "
            "'left'\"") != std::string::npos);
}

TEST_CASE("render_reprompt fills all three slots") {
  auto text = render_reprompt(kReprompTemplate, "Is it red?", "def ...",
                              "Test A\n...");
  CHECK(text.find("Query: Is it red?") != std::string::npos);
  CHECK(text.find("def ...") != std::string::npos);
  CHECK(text.find("INSERT_") == std::string::npos);
  CHECK_THROWS_AS(render_reprompt("no slots", "q", "p", "f"),
                  std::invalid_argument);
}

TEST_CASE("reprompting exits immediately when the pool already clears theta") {
  auto suite = ball_suite();
  auto target = image_of(scene({obj("ball", {50, 50, 110, 110})}));
  std::vector<ProgramSource> initial = {
      ProgramSource{kBallProgram, ProgramOrigin::fixture, 0}};
  ScriptedBackend backend;
  ScriptedChatClient llm;  // must never be called
  ScoreConfig cfg;
  RepromptConfig rc;
  rc.theta = 0.7;
  auto result = run_reprompt("Is there a ball?", initial, suite, target,
                             backend, llm, cfg, rc, kReprompTemplate);
  CHECK(result.trace.empty());
  CHECK(result.llm_calls == 0);
  CHECK(llm.calls() == 0);
  CHECK(result.best.aggregate == doctest::Approx(1.0));
  CHECK(result.final_outcome.answer == "yes");
}

TEST_CASE("reprompting repairs a failing program using test feedback") {
  auto suite = ball_suite();
  auto target = image_of(scene({obj("table", {50, 50, 200, 150})}));
  std::vector<ProgramSource> initial = {constant_program("maybe", 0)};
  ScriptedChatClient llm;
  llm.enqueue("Incorrect Program", {kBallProgram});
  ScriptedBackend backend;
  ScoreConfig cfg;
  RepromptConfig rc;
  rc.theta = 0.7;
  rc.max_iterations = 3;
  auto result = run_reprompt("Is there a ball?", initial, suite, target,
                             backend, llm, cfg, rc, kReprompTemplate);
  REQUIRE(result.trace.size() == 1);
  CHECK(result.trace[0].index == 1);
  CHECK(result.trace[0].best_score == doctest::Approx(1.0));
  CHECK(result.best.aggregate == doctest::Approx(1.0));
  CHECK(result.final_outcome.answer == "no");
  CHECK(result.llm_calls == 1);
}

TEST_CASE("non-improving rounds keep the best program seen so far") {
  auto suite = ball_suite();
  auto target = image_of(scene({obj("ball", {50, 50, 110, 110})}));
  // Constant "yes" scores 0.6; both corrections are worse.
  std::vector<ProgramSource> initial = {constant_program("yes", 0)};
  ScriptedChatClient llm;
  llm.enqueue("Incorrect Program",
              {constant_program("no", 0).text});
  llm.enqueue("Incorrect Program",
              {constant_program("maybe", 0).text});
  ScriptedBackend backend;
  ScoreConfig cfg;
  RepromptConfig rc;
  rc.theta = 0.8;
  rc.max_iterations = 2;
  auto result = run_reprompt("Is there a ball?", initial, suite, target,
                             backend, llm, cfg, rc, kReprompTemplate);
  REQUIRE(result.trace.size() == 2);
  CHECK(result.trace[0].best_score == doctest::Approx(0.4));
  CHECK(result.trace[1].best_score == doctest::Approx(0.0));
  // Best-so-far carries the original 0.6 program to the end.
  CHECK(result.best.aggregate == doctest::Approx(0.6));
  CHECK(result.final_outcome.answer == "yes");
  CHECK(result.llm_calls == 2);
}

TEST_CASE("suite-clearing reward grid") {
  const double theta = 0.8;
  CHECK(viunit_reward(1.0, theta) == 1.0);
  CHECK(viunit_reward(0.9, theta) == 1.0);
  CHECK(viunit_reward(0.8, theta) == 1.0);  // boundary: S == theta clears
  CHECK(viunit_reward(0.79, theta) == 0.79);
  CHECK(viunit_reward(0.6, theta) == 0.6);
  CHECK(viunit_reward(0.0, theta) == 0.0);
  CHECK(viunit_reward(-0.1, theta) == -0.1);
  CHECK(viunit_reward(0.7, 0.7) == 1.0);
  CHECK(viunit_reward(0.69, 0.7) == 0.69);
}

TEST_CASE("correctness reward is an exact-match indicator") {
  ExecutionOutcome good;
  good.kind = OutcomeKind::answer;
  good.answer = "Yes.";
  CHECK(correctness_reward(good, "yes") == 1.0);
  good.answer = "no";
  CHECK(correctness_reward(good, "yes") == 0.0);
  ExecutionOutcome bad;
  bad.kind = OutcomeKind::runtime_error;
  bad.diagnostic = "boom";
  CHECK(correctness_reward(bad, "yes") == 0.0);
}

TEST_CASE("reward dataset emission clamps training weights") {
  ScriptedBackend backend;
  auto suite = ball_suite();
  SynthSpec spec;
  auto img = synthesize("a red ball", spec, nullptr, nullptr).image;

  RewardExample clears;
  clears.id = "r1";
  clears.query = "Is there a ball?";
  clears.image = img;
  clears.program = ProgramSource{kBallProgram, ProgramOrigin::fixture, 0};
  clears.suite = suite;

  RewardExample crashes;
  crashes.id = "r2";
  crashes.query = "Is there a ball?";
  crashes.image = img;
  crashes.program =
      ProgramSource{"def execute_command(image):\n    return 1 / 0\n",
                    ProgramOrigin::fixture, 0};
  crashes.suite = suite;

  auto records = emit_reward_dataset({clears, crashes}, backend,
                                     RewardKind::viunit, 0.8);
  REQUIRE(records.size() == 2);
  CHECK(records[0].raw_reward == doctest::Approx(1.0));
  CHECK(records[0].training_weight == doctest::Approx(1.0));
  // Every test errors: S = -0.1, clamped to zero for training.
  CHECK(records[1].raw_reward == doctest::Approx(-0.1));
  CHECK(records[1].training_weight == 0.0);

  RewardExample gold = clears;
  gold.gold = "yes";
  auto correctness = emit_reward_dataset({gold}, backend,
                                         RewardKind::correctness, 0.8);
  CHECK(correctness[0].raw_reward == 1.0);

  auto line = records[0].to_jsonl();
  auto parsed = nlohmann::json::parse(line);
  CHECK(parsed["id"] == "r1");
  CHECK(parsed["raw_reward"] == 1.0);
}

TEST_CASE("stop rule halts only on a strict decline at the end") {
  CHECK_FALSE(stop_rule({0.5}));
  CHECK_FALSE(stop_rule({0.5, 0.5}));
  CHECK_FALSE(stop_rule({0.5, 0.6}));
  CHECK(stop_rule({0.5, 0.6, 0.55}));
  CHECK_FALSE(stop_rule({0.6, 0.5, 0.5}));
  CHECK(stop_rule({0.2, 0.1}));
  CHECK_THROWS_AS(stop_rule({}), EmptyResults);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>
#include <variant>

#include "scene_fixtures.hpp"
#include "viunit/dsl/program.hpp"
#include "viunit/perception.hpp"

using namespace viunit;
using namespace viunit::dsl;
using fixtures::image_of;
using fixtures::obj;
using fixtures::scene;

namespace {

bool parses(const std::string& text) {
  return std::holds_alternative<std::shared_ptr<ProgramAst>>(
      parse_program(ProgramSource{text}));
}

CompileError error_of(const std::string& text) {
  auto result = parse_program(ProgramSource{text});
  REQUIRE(std::holds_alternative<CompileError>(result));
  return std::get<CompileError>(result);
}

ExecutionOutcome run(const std::string& text, const ImageHandle& img,
                     PerceptionBackend& backend,
                     const ExecutionLimits& limits = {}) {
  return run_source(ProgramSource{text}, img, backend, limits);
}

const std::string kGuardedColor = R"(def execute_command(image) -> str:
    image_patch = ImagePatch(image)
    car_patches = image_patch.find("car")
    if not car_patches:
        return "no cars found"
    car_patches.sort(key=lambda x: x.area, reverse=True)
    largest = car_patches[0]
    return largest.simple_query("What is the color?")
)";

}  // namespace

TEST_CASE("well-formed programs parse") {
  CHECK(parses("def execute_command(image):\n    return 'yes'\n"));
  CHECK(parses(kGuardedColor));
  CHECK(parses(R"(def execute_command(image):
    image_patch = ImagePatch(image)
    cats = image_patch.find("cat")
    dogs = image_patch.find("dog")
    return bool_to_yesno(len(cats) > 0 or len(dogs) > 0)
)"));
  // Comprehensions, chained comparison, f-strings, while/for.
  CHECK(parses(R"(def execute_command(image):
    xs = [i * 2 for i in range(10) if i % 2 == 0]
    total = 0
    for x in xs:
        if 0 < x < 10:
            total += x
    while total > 100:
        total -= 1
    return f"total {total}"
)"));
  // Generator expressions as sole call argument, multi-for clauses.
  CHECK(parses(R"(def execute_command(image):
    ok = any(a == b for a in range(3) for b in range(3) if a + b > 1)
    return bool_to_yesno(ok)
)"));
}

TEST_CASE("forbidden constructs are compile errors wherever they appear") {
  CHECK_FALSE(parses("import os\ndef execute_command(image):\n    return 'x'\n"));
  CHECK_FALSE(parses(
      "def execute_command(image):\n    import os\n    return 'x'\n"));
  CHECK_FALSE(parses("class A:\n    pass\n"));
  CHECK_FALSE(parses(
      "def execute_command(image):\n    try:\n        pass\n    except:\n"
      "        pass\n    return 'x'\n"));
  CHECK_FALSE(parses(
      "def execute_command(image):\n    with open('f') as f:\n        pass\n"));
  CHECK_FALSE(
      parses("def execute_command(image):\n    x = image is None\n    return 'x'\n"));
  CHECK_FALSE(parses(
      "def execute_command(image):\n    yield 'x'\n"));
  // Nested function definitions stay out of the subset.
  CHECK_FALSE(parses(
      "def execute_command(image):\n    def helper():\n        return 1\n"
      "    return 'x'\n"));
  // Exactly one parameter.
  CHECK_FALSE(parses("def execute_command(image, extra):\n    return 'x'\n"));
  CHECK_FALSE(parses("def execute_command():\n    return 'x'\n"));
  // Wrong entry-point name.
  CHECK_FALSE(parses("def run(image):\n    return 'x'\n"));
  // Trailing top-level code after the function.
  CHECK_FALSE(parses(
      "def execute_command(image):\n    return 'x'\nprint('hi')\n"));
  // Two functions.
  CHECK_FALSE(parses(
      "def execute_command(image):\n    return 'x'\n"
      "def execute_command(image):\n    return 'y'\n"));
}

TEST_CASE("compile errors carry position information") {
  auto err = error_of(
      "def execute_command(image):\n    import os\n    return 'x'\n");
  CHECK(err.line == 2);
  CHECK_FALSE(err.message.empty());
  CHECK(err.format().find("2") != std::string::npos);
}

TEST_CASE("existence query against a scene") {
  ScriptedBackend backend;
  auto with_cat = image_of(scene({obj("cat", {10, 10, 110, 110})}));
  auto without = image_of(scene({obj("table", {10, 10, 110, 110})}));
  const std::string prog = R"(def execute_command(image):
    image_patch = ImagePatch(image)
    return bool_to_yesno(len(image_patch.find("cat")) > 0)
)";
  CHECK(run(prog, with_cat, backend).answer == "yes");
  CHECK(run(prog, without, backend).answer == "no");
}

TEST_CASE("attribute query over the largest object") {
  ScriptedBackend backend;
  auto o1 = obj("car", {0, 0, 50, 50}, {{"color", "blue"}});
  o1.qa_facts["what is the color?"] = "blue";
  auto o2 = obj("car", {100, 100, 300, 300}, {{"color", "green"}});
  o2.qa_facts["what is the color?"] = "green";
  auto img = image_of(scene({o1, o2}));
  CHECK(run(kGuardedColor, img, backend).answer == "green");
  auto empty = image_of(scene({obj("tree", {0, 0, 60, 60})}));
  CHECK(run(kGuardedColor, empty, backend).answer == "no cars found");
}

TEST_CASE("spatial predicates respect the bottom-left origin") {
  ScriptedBackend backend;
  // Bird occupies the top half (larger y), fence the bottom.
  auto img = image_of(scene({obj("bird", {100, 400, 160, 460}),
                             obj("fence", {0, 10, 512, 100})}));
  const std::string prog = R"(def execute_command(image):
    image_patch = ImagePatch(image)
    bird = image_patch.find("bird")[0]
    if bird.vertical_center > image_patch.vertical_center:
        return "top"
    return "bottom"
)";
  CHECK(run(prog, img, backend).answer == "top");

  const std::string above = R"(def execute_command(image):
    image_patch = ImagePatch(image)
    bird = image_patch.find("bird")[0]
    fence = image_patch.find("fence")[0]
    return bool_to_yesno(bird.lower > fence.upper)
)";
  CHECK(run(above, img, backend).answer == "yes");
}

TEST_CASE("counting and comparison across detections") {
  ScriptedBackend backend;
  auto img = image_of(scene({obj("sheep", {0, 0, 40, 40}),
                             obj("sheep", {50, 0, 90, 40}),
                             obj("sheep", {100, 0, 140, 40}),
                             obj("dog", {200, 0, 240, 40})}));
  const std::string prog = R"(def execute_command(image):
    image_patch = ImagePatch(image)
    sheep = image_patch.find("sheep")
    dogs = image_patch.find("dog")
    if len(sheep) > len(dogs):
        return str(len(sheep))
    return "fewer"
)";
  CHECK(run(prog, img, backend).answer == "3");
}

TEST_CASE("verify_property and sorting by position") {
  ScriptedBackend backend;
  auto img = image_of(
      scene({obj("mug", {300, 0, 360, 60}, {{"color", "red"}}),
             obj("mug", {10, 0, 70, 60}, {{"color", "blue"}})}));
  const std::string prog = R"(def execute_command(image):
    image_patch = ImagePatch(image)
    mugs = sorted(image_patch.find("mug"), key=lambda m: m.left)
    leftmost = mugs[0]
    return bool_to_yesno(leftmost.verify_property("mug", "blue"))
)";
  CHECK(run(prog, img, backend).answer == "yes");
}

TEST_CASE("best_image_match picks the highest-scoring patch") {
  ScriptedBackend backend;
  auto g = scene({obj("cat", {0, 0, 100, 100}), obj("dog", {200, 0, 300, 100})});
  g.match_facts["a sleeping cat"] = false;
  auto img = image_of(g);
  // Scripted itm over sub-boxes with no facts scores 0.5 everywhere except
  // the scene-level fact; ties resolve to the first patch.
  const std::string prog = R"(def execute_command(image):
    image_patch = ImagePatch(image)
    patches = image_patch.find("cat") + image_patch.find("dog")
    best = best_image_match(patches, "a sleeping cat")
    return best.category
)";
  CHECK(run(prog, img, backend).answer == "cat");
}

TEST_CASE("directional crops stay inside the parent with minimum extent") {
  Box parent{0, 0, 512, 512};
  Box target{200, 200, 300, 300};
  auto left = crop_directional(parent, CropSide::left, target);
  CHECK(left.right == 200);
  CHECK(left.left == 0);
  auto above = crop_directional(parent, CropSide::above, target);
  CHECK(above.lower == 300);
  CHECK(above.upper == 512);
  // Degenerate direction collapses to the 1-pixel minimum, still valid.
  Box flush{0, 0, 100, 512};
  auto none_left = crop_directional(parent, CropSide::left, flush);
  CHECK(none_left.width() >= 1.0);
  CHECK(none_left.left >= parent.left);
  CHECK(none_left.right <= parent.right + 1.0);
}

TEST_CASE("crop methods narrow subsequent finds") {
  ScriptedBackend backend;
  auto img = image_of(scene({obj("lamp", {10, 10, 60, 60}),
                             obj("lamp", {400, 400, 460, 460}),
                             obj("sofa", {200, 200, 320, 320})}));
  const std::string prog = R"(def execute_command(image):
    image_patch = ImagePatch(image)
    sofa = image_patch.find("sofa")[0]
    left_region = image_patch.crop_left_of_bbox(sofa.left, sofa.lower, sofa.right, sofa.upper)
    return str(len(left_region.find("lamp")))
)";
  CHECK(run(prog, img, backend).answer == "1");
}

TEST_CASE("runtime faults become runtime_error outcomes with diagnostics") {
  ScriptedBackend backend;
  auto img = image_of(scene({obj("table", {0, 0, 100, 100})}));

  auto indexed = run(R"(def execute_command(image):
    image_patch = ImagePatch(image)
    return image_patch.find("cat")[0].category
)",
                     img, backend);
  CHECK(indexed.kind == OutcomeKind::runtime_error);
  CHECK(indexed.diagnostic == "list index out of range");
  CHECK(indexed.display() == "Error: list index out of range");

  auto attr = run(R"(def execute_command(image):
    image_patch = ImagePatch(image)
    patches = image_patch.find("table")
    return patches.left
)",
                  img, backend);
  CHECK(attr.kind == OutcomeKind::runtime_error);
  CHECK(attr.diagnostic == "'list' object has no attribute 'left'");

  auto name = run("def execute_command(image):\n    return missing_var\n", img,
                  backend);
  CHECK(name.kind == OutcomeKind::runtime_error);
  CHECK(name.diagnostic == "name 'missing_var' is not defined");

  auto div = run("def execute_command(image):\n    return str(1 / 0)\n", img,
                 backend);
  CHECK(div.kind == OutcomeKind::runtime_error);
  CHECK(div.diagnostic == "division by zero");

  // No host escape hatch is defined: reflective names fail at runtime.
  auto reflect = run(
      "def execute_command(image):\n    x = __import__('os')\n    return x\n",
      img, backend);
  CHECK(reflect.kind == OutcomeKind::runtime_error);
  CHECK(reflect.diagnostic == "name '__import__' is not defined");
}

TEST_CASE("infinite loops hit the step budget as timeouts") {
  ScriptedBackend backend;
  auto img = image_of(scene({obj("table", {0, 0, 100, 100})}));
  ExecutionLimits limits;
  limits.budget_s = 5.0;
  limits.max_steps = 20000;
  auto out = run("def execute_command(image):\n    while True:\n        pass\n",
                 img, backend, limits);
  CHECK(out.kind == OutcomeKind::timeout);
  CHECK(out.is_error());
}

TEST_CASE("wall-clock budget exhaustion is a timeout") {
  ScriptedBackend backend;
  auto img = image_of(scene({obj("table", {0, 0, 100, 100})}));
  ExecutionLimits limits;
  limits.budget_s = 0.05;
  limits.max_steps = 2'000'000'000;
  auto out = run(R"(def execute_command(image):
    total = 0
    while True:
        total += 1
)",
                 img, backend, limits);
  CHECK(out.kind == OutcomeKind::timeout);
  // A run that exceeds its budget never surfaces an answer.
  CHECK(out.answer.empty());
}

TEST_CASE("answers coerce to canonical text") {
  ScriptedBackend backend;
  auto img = image_of(scene({obj("table", {0, 0, 100, 100})}));
  auto one = [&](const std::string& expr) {
    return run("def execute_command(image):\n    return " + expr + "\n", img,
               backend);
  };
  CHECK(one("True").answer == "yes");
  CHECK(one("False").answer == "no");
  CHECK(one("3").answer == "3");
  CHECK(one("4.0").answer == "4");
  CHECK(one("2.5").answer == "2.5");
  CHECK(one("['a', 'b', 'c']").answer == "a, b, c");
  CHECK(one("None").answer == "none");
  CHECK(one("len('abc') + 1").answer == "4");
}

TEST_CASE("execution is deterministic") {
  ScriptedBackend backend;
  auto img = image_of(scene({obj("cat", {0, 0, 90, 90}, {{"color", "gray"}}),
                             obj("dog", {100, 0, 190, 90})}));
  const std::string prog = R"(def execute_command(image):
    image_patch = ImagePatch(image)
    names = sorted([p.category for p in image_patch.find("cat") + image_patch.find("dog")])
    return ", ".join(names)
)";
  auto first = run(prog, img, backend);
  REQUIRE(first.kind == OutcomeKind::answer);
  for (int i = 0; i < 10; ++i) {
    auto again = run(prog, img, backend);
    CHECK(again.kind == first.kind);
    CHECK(again.answer == first.answer);
  }
}

TEST_CASE("builtin utilities behave like their Python counterparts") {
  ScriptedBackend backend;
  auto img = image_of(scene({obj("table", {0, 0, 100, 100})}));
  auto one = [&](const std::string& body) {
    return run("def execute_command(image):\n" + body, img, backend);
  };
  CHECK(one("    return str(sum([1, 2, 3]))\n").answer == "6");
  CHECK(one("    return str(max(3, 1, 2))\n").answer == "3");
  CHECK(one("    return str(min([4, 2, 9]))\n").answer == "2");
  CHECK(one("    return str(abs(-7))\n").answer == "7");
  CHECK(one("    return str(round(2.675, 2))\n").answer == "2.68");
  CHECK(one("    return str(len([x for x in range(10) if x % 3 == 0]))\n")
            .answer == "4");
  CHECK(one("    return str([1, 2, 3][1:][0])\n").answer == "2");
  CHECK(one("    return str(sorted([1, 2, 3], reverse=True)[0])\n").answer ==
        "3");
  CHECK(one("    xs = [5, 1, 4]\n    xs.sort()\n    return str(xs[0])\n")
            .answer == "1");
  CHECK(one("    return 'yes' if 'a' in ['a', 'b'] else 'no'\n").answer ==
        "yes");
  CHECK(one("    a, b = [1, 2]\n    return str(a + b)\n").answer == "3");
  CHECK(one("    return str(int('12') + int(3.9))\n").answer == "15");
  CHECK(one("    return '-'.join([str(i) for i, _ in enumerate(range(3))])\n")
            .answer == "0-1-2");
}

TEST_CASE("patch attributes derive from the box") {
  ScriptedBackend backend;
  auto img = image_of(scene({obj("rug", {100, 50, 300, 150})}));
  const std::string prog = R"(def execute_command(image):
    rug = ImagePatch(image).find("rug")[0]
    parts = [rug.left, rug.lower, rug.right, rug.upper, rug.width, rug.height, rug.horizontal_center, rug.vertical_center]
    return ", ".join([str(int(p)) for p in parts])
)";
  CHECK(run(prog, img, backend).answer ==
        "100, 50, 300, 150, 200, 100, 200, 100");
}

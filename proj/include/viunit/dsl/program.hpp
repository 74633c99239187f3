#pragma once

#include <memory>
#include <optional>
#include <string>
#include <variant>

#include "viunit/dsl/ast.hpp"
#include "viunit/perception.hpp"
#include "viunit/scene_graph.hpp"

namespace viunit::dsl {

enum class ProgramOrigin { llm, fixture };

struct ProgramSource {
  std::string text;
  ProgramOrigin origin = ProgramOrigin::fixture;
  int index = 0;  // generation order within its pool
};

struct CompileError {
  std::string message;
  int line = 0;
  int col = 0;

  std::string format() const;
};

enum class OutcomeKind { answer, compile_error, runtime_error, timeout };

const char* to_string(OutcomeKind k);

struct ExecutionOutcome {
  OutcomeKind kind = OutcomeKind::answer;
  std::string answer;      // populated when kind == answer
  std::string diagnostic;  // populated otherwise
  double elapsed_s = 0;

  bool is_error() const { return kind != OutcomeKind::answer; }
  // The text a test-feedback block shows for this outcome.
  std::string display() const;
};

// Parses the restricted DSL; anything outside the whitelisted grammar is a
// CompileError with line/column.
std::variant<std::shared_ptr<ProgramAst>, CompileError> parse_program(
    const ProgramSource& source);

struct ExecutionLimits {
  double budget_s = 120.0;      // wall clock cap
  long max_steps = 1'000'000;   // interpreter step cap
};

// Runs the program against the backend. All failures are data: runtime
// faults and budget exhaustion come back as outcome kinds, never throws.
ExecutionOutcome execute(const ProgramAst& ast, const ImageHandle& image,
                         PerceptionBackend& backend,
                         const ExecutionLimits& limits = {});

// Parse + execute convenience; compile errors become outcomes.
ExecutionOutcome run_source(const ProgramSource& source,
                            const ImageHandle& image,
                            PerceptionBackend& backend,
                            const ExecutionLimits& limits = {});

enum class CropSide { left, right, above, below };

// Sub-region strictly on the named side of the box, clamped to the parent
// patch with a 1-pixel minimum extent.
Box crop_directional(const Box& patch, CropSide side, const Box& box);

}  // namespace viunit::dsl

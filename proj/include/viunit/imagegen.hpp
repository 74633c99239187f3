#pragma once

#include <optional>
#include <string>
#include <vector>

#include "viunit/chat_client.hpp"
#include "viunit/scene_graph.hpp"
#include "viunit/services.hpp"

namespace viunit {

inline constexpr double kCanvasSize = 512.0;

// Phrase/box pairs in the layout service convention: [x, y, w, h] with the
// origin at the top-left corner of a 512x512 canvas.
struct LayoutObject {
  std::string phrase;
  double x = 0, y = 0, w = 0, h = 0;
};

struct LayoutPlan {
  std::vector<LayoutObject> objects;
  std::string background_prompt;
  std::optional<std::string> negative_prompt;
};

enum class SynthStrategy { plain_diffusion, hires_diffusion, lm_grounded,
                           mock_scene };

struct SynthSpec {
  SynthStrategy strategy = SynthStrategy::mock_scene;
  long seed = 0;
  double guidance = 16.0;
  int steps = 50;
  int nsfw_retries = 10;
};

struct SynthResult {
  ImageHandle image;
  int nsfw_retries_used = 0;
  long final_seed = 0;
};

// Caption -> test image. Mock strategy compiles the caption into a
// SceneGraph; diffusion strategies call the image service, bumping the seed
// by one on each NSFW flag and accepting the last image once retries run out.
SynthResult synthesize(const std::string& caption, const SynthSpec& spec,
                       ImageService* service, ChatClient* layout_llm,
                       const std::string& layout_template = "");

// Parses `Objects: [('phrase', [x, y, w, h]), ...]` plus Background/Negative
// prompt lines from one completion.
std::optional<LayoutPlan> parse_layout(const std::string& raw);

// Requests several candidate sequences and returns the first parse with a
// non-empty object list.
LayoutPlan plan_layout(const std::string& caption, ChatClient& llm,
                       const std::string& template_text,
                       int num_sequences = 5);

// Converts a layout box to scene coordinates (origin bottom-left, y up).
Box layout_box_to_scene(const LayoutObject& obj);

// Compiles a caption in the controlled grammar
//   [count] [attribute]* noun ([relation] [attribute]* noun)*
// into a SceneGraph whose geometry satisfies every stated relation.
SceneGraph compile_mock_scene(const std::string& caption);

// Words guaranteed absent when the caption says "no X"/"without X".
std::vector<std::string> absence_expansion(const std::string& noun);

}  // namespace viunit

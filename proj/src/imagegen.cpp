#include "viunit/imagegen.hpp"

#include <algorithm>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "json.hpp"
#include "viunit/hash.hpp"
#include "viunit/text.hpp"

namespace viunit {

namespace {

const std::map<std::string, std::string> kAttributeTable = {
    {"red", "color"},     {"blue", "color"},    {"green", "color"},
    {"yellow", "color"},  {"black", "color"},   {"white", "color"},
    {"gray", "color"},    {"grey", "color"},    {"orange", "color"},
    {"purple", "color"},  {"brown", "color"},   {"pink", "color"},
    {"small", "size"},    {"big", "size"},      {"large", "size"},
    {"tiny", "size"},     {"huge", "size"},     {"wooden", "material"},
    {"metal", "material"}, {"plastic", "material"}, {"glass", "material"}};

const std::map<std::string, int> kCountWords = {
    {"one", 1}, {"two", 2}, {"three", 3}, {"four", 4}, {"five", 5}};

struct Clause {
  int count = 1;
  std::vector<std::pair<std::string, std::string>> attributes;
  std::string noun;
  bool absent = false;  // introduced by "no"/"without"
};

struct ParsedCaption {
  std::vector<Clause> clauses;
  // relations[i] links clauses[i] (subject) to clauses[i+1] (object); empty
  // for the link into an absence clause.
  std::vector<std::string> relations;
};

ParsedCaption parse_caption(const std::string& caption) {
  std::vector<std::string> tokens;
  for (const std::string& raw : split_words(to_lower(caption))) {
    std::string w = strip_quotes_punct(raw);
    if (w.empty() || w == "a" || w == "an" || w == "the") continue;
    tokens.push_back(w);
  }
  if (tokens.empty()) throw GrammarError("empty caption");

  ParsedCaption out;
  std::size_t i = 0;
  auto parse_clause = [&](bool absent) {
    Clause clause;
    clause.absent = absent;
    if (i < tokens.size()) {
      auto cw = kCountWords.find(tokens[i]);
      if (cw != kCountWords.end()) {
        clause.count = cw->second;
        ++i;
      } else if (tokens[i].size() == 1 && std::isdigit(tokens[i][0])) {
        clause.count = tokens[i][0] - '0';
        ++i;
      }
    }
    while (i < tokens.size()) {
      auto at = kAttributeTable.find(tokens[i]);
      if (at == kAttributeTable.end()) break;
      clause.attributes.emplace_back(at->second, at->first);
      ++i;
    }
    if (i >= tokens.size())
      throw GrammarError("caption ends where a noun was expected");
    clause.noun = normalize_label(tokens[i]);
    ++i;
    out.clauses.push_back(std::move(clause));
  };

  parse_clause(false);
  while (i < tokens.size()) {
    const std::string& w = tokens[i];
    std::string relation;
    bool absent = false;
    if (w == "left" || w == "right") {
      if (i + 1 >= tokens.size() || tokens[i + 1] != "of")
        throw GrammarError("expected 'of' after '" + w + "'");
      relation = w + " of";
      i += 2;
    } else if (w == "above" || w == "below" || w == "on" || w == "near") {
      relation = w;
      ++i;
    } else if (w == "no" || w == "without") {
      absent = true;
      ++i;
    } else {
      throw GrammarError("unexpected token '" + w + "'");
    }
    out.relations.push_back(relation);
    parse_clause(absent);
  }
  return out;
}

constexpr double kObjSize = 60;
constexpr double kGap = 20;
constexpr double kMargin = 8;

Box group_bounds(const std::vector<Box>& boxes) {
  Box b = boxes.front();
  for (const Box& x : boxes) {
    b.left = std::min(b.left, x.left);
    b.lower = std::min(b.lower, x.lower);
    b.right = std::max(b.right, x.right);
    b.upper = std::max(b.upper, x.upper);
  }
  return b;
}

// Lay the clause's objects in a row whose bounding box starts at (left,
// lower).
std::vector<Box> place_group(int count, double left, double lower) {
  std::vector<Box> boxes;
  for (int j = 0; j < count; ++j) {
    double l = left + j * (kObjSize + 10);
    boxes.push_back(Box{l, lower, l + kObjSize, lower + kObjSize});
  }
  return boxes;
}

}  // namespace

std::vector<std::string> absence_expansion(const std::string& noun) {
  std::string n = normalize_label(noun);
  if (n == "pet") return {"pet", "cat", "dog"};
  if (n == "animal") return {"animal", "cat", "dog", "bird", "horse"};
  if (n == "person" || n == "people")
    return {"person", "people", "man", "woman", "child"};
  return {n};
}

SceneGraph compile_mock_scene(const std::string& caption) {
  ParsedCaption parsed = parse_caption(caption);

  // Sequential constructive placement: each present clause is positioned
  // relative to the previous present clause's bounding box.
  std::vector<std::vector<Box>> groups(parsed.clauses.size());
  int prev = -1;
  for (std::size_t c = 0; c < parsed.clauses.size(); ++c) {
    const Clause& clause = parsed.clauses[c];
    if (clause.absent) continue;
    double gw = clause.count * kObjSize + (clause.count - 1) * 10;
    if (prev < 0) {
      groups[c] = place_group(clause.count, 0, 0);
    } else {
      Box p = group_bounds(groups[prev]);
      const std::string& rel = parsed.relations[c - 1];
      double left, lower;
      if (rel == "left of") {
        // subject (prev) left of object (this)
        left = p.right + kGap;
        lower = p.lower;
      } else if (rel == "right of") {
        left = p.left - kGap - gw;
        lower = p.lower;
      } else if (rel == "above") {
        // subject above object: object strictly lower
        left = p.left;
        lower = p.lower - kGap - kObjSize;
      } else if (rel == "below") {
        left = p.left;
        lower = p.upper + kGap;
      } else if (rel == "on") {
        // subject rests on object: contact at subject's lower edge
        left = p.horizontal_center() - gw / 2;
        lower = p.lower - kObjSize;
      } else if (rel == "near") {
        left = p.right + 10;
        lower = p.lower;
      } else {
        throw GrammarError("relation into an absent clause");
      }
      groups[c] = place_group(clause.count, left, lower);
    }
    prev = static_cast<int>(c);
  }

  // Translate everything into the canvas.
  std::vector<Box*> all;
  for (auto& g : groups)
    for (Box& b : g) all.push_back(&b);
  SceneGraph scene;
  scene.width = kCanvasSize;
  scene.height = kCanvasSize;
  if (!all.empty()) {
    Box bounds = *all.front();
    for (Box* b : all) {
      bounds.left = std::min(bounds.left, b->left);
      bounds.lower = std::min(bounds.lower, b->lower);
      bounds.right = std::max(bounds.right, b->right);
      bounds.upper = std::max(bounds.upper, b->upper);
    }
    if (bounds.width() > kCanvasSize - 2 * kMargin ||
        bounds.height() > kCanvasSize - 2 * kMargin)
      throw GrammarError("caption layout exceeds canvas");
    double dx = kMargin - bounds.left;
    double dy = kMargin - bounds.lower;
    // Center the composition when there is room.
    dx += std::floor((kCanvasSize - 2 * kMargin - bounds.width()) / 2);
    dy += std::floor((kCanvasSize - 2 * kMargin - bounds.height()) / 2);
    for (Box* b : all) {
      b->left += dx;
      b->right += dx;
      b->lower += dy;
      b->upper += dy;
    }
  }

  // Absence guarantees and contradiction checks.
  std::set<std::string> banned;
  for (const Clause& clause : parsed.clauses)
    if (clause.absent)
      for (const std::string& n : absence_expansion(clause.noun))
        banned.insert(n);

  std::map<std::string, int> counts;
  std::map<std::string, std::set<std::string>> colors;
  for (std::size_t c = 0; c < parsed.clauses.size(); ++c) {
    const Clause& clause = parsed.clauses[c];
    if (clause.absent) continue;
    if (banned.count(clause.noun))
      throw GrammarError("caption both places and bans '" + clause.noun + "'");
    for (const Box& box : groups[c]) {
      SceneObject obj;
      obj.name = clause.noun;
      obj.box = box;
      obj.attributes = clause.attributes;
      scene.objects.push_back(std::move(obj));
    }
    counts[clause.noun] += clause.count;
    for (const auto& [prop, value] : clause.attributes)
      if (prop == "color") colors[clause.noun].insert(value);
  }

  for (const auto& [noun, n] : counts)
    scene.qa_facts["how many " + noun + "s are there?"] = std::to_string(n);
  for (const auto& [noun, cs] : colors)
    if (cs.size() == 1)
      scene.qa_facts["what color is the " + noun + "?"] = *cs.begin();
  scene.match_facts[caption] = true;

  scene.validate();
  return scene;
}

Box layout_box_to_scene(const LayoutObject& obj) {
  return Box{obj.x, kCanvasSize - (obj.y + obj.h), obj.x + obj.w,
             kCanvasSize - obj.y};
}

std::optional<LayoutPlan> parse_layout(const std::string& raw) {
  static const std::regex tuple_re(
      R"re(\(\s*'([^']+)'\s*,\s*\[\s*(-?\d+(?:\.\d+)?)\s*,\s*(-?\d+(?:\.\d+)?)\s*,\s*(-?\d+(?:\.\d+)?)\s*,\s*(-?\d+(?:\.\d+)?)\s*\]\s*\))re");
  LayoutPlan plan;
  bool saw_objects = false;
  std::istringstream stream(raw);
  std::string line;
  while (std::getline(stream, line)) {
    std::string t = trim(line);
    if (t.rfind("Objects:", 0) == 0) {
      saw_objects = true;
      auto begin = std::sregex_iterator(t.begin(), t.end(), tuple_re);
      for (auto it = begin; it != std::sregex_iterator(); ++it) {
        LayoutObject obj;
        obj.phrase = (*it)[1].str();
        obj.x = std::stod((*it)[2].str());
        obj.y = std::stod((*it)[3].str());
        obj.w = std::stod((*it)[4].str());
        obj.h = std::stod((*it)[5].str());
        plan.objects.push_back(std::move(obj));
      }
    } else if (t.rfind("Background prompt:", 0) == 0) {
      plan.background_prompt = trim(t.substr(std::string("Background prompt:").size()));
    } else if (t.rfind("Negative prompt:", 0) == 0) {
      std::string neg = trim(t.substr(std::string("Negative prompt:").size()));
      if (!neg.empty() && to_lower(neg) != "none") plan.negative_prompt = neg;
    }
  }
  if (!saw_objects || plan.objects.empty()) return std::nullopt;
  return plan;
}

LayoutPlan plan_layout(const std::string& caption, ChatClient& llm,
                       const std::string& template_text, int num_sequences) {
  std::string prompt = template_text;
  std::size_t pos = prompt.find("INSERT_PROMPT_HERE");
  if (pos != std::string::npos)
    prompt.replace(pos, std::string("INSERT_PROMPT_HERE").size(), caption);

  ChatRequest request;
  request.n = num_sequences;
  request.messages.push_back({"user", prompt});
  for (const std::string& sequence : llm.complete(request)) {
    if (auto plan = parse_layout(sequence)) return *plan;
  }
  throw LayoutUnparsable("no sequence yielded a non-empty Objects list for: " +
                         caption);
}

SynthResult synthesize(const std::string& caption, const SynthSpec& spec,
                       ImageService* service, ChatClient* layout_llm,
                       const std::string& layout_template) {
  if (spec.steps < 1) throw std::invalid_argument("steps must be >= 1");
  if (spec.nsfw_retries < 0)
    throw std::invalid_argument("nsfw_retries must be >= 0");

  SynthResult result;
  if (spec.strategy == SynthStrategy::mock_scene) {
    result.image = ImageHandle::from_scene(compile_mock_scene(caption));
    result.final_seed = spec.seed;
    return result;
  }

  if (!service) throw ServiceError("image service required for this strategy");
  std::string layout_json;
  if (spec.strategy == SynthStrategy::lm_grounded) {
    if (!layout_llm)
      throw ServiceError("layout planning requires a chat client");
    LayoutPlan plan = plan_layout(caption, *layout_llm, layout_template);
    nlohmann::json objs = nlohmann::json::array();
    for (const auto& o : plan.objects)
      objs.push_back({{"phrase", o.phrase},
                      {"box", nlohmann::json::array({o.x, o.y, o.w, o.h})}});
    nlohmann::json layout = {{"objects", objs},
                             {"background_prompt", plan.background_prompt}};
    if (plan.negative_prompt) layout["negative_prompt"] = *plan.negative_prompt;
    layout_json = layout.dump();
  }

  long seed = spec.seed;
  GeneratedImage image;
  for (int attempt = 0;; ++attempt) {
    image = service->generate(caption, seed, spec.guidance, spec.steps,
                              layout_json);
    if (!image.nsfw_flag || attempt >= spec.nsfw_retries) break;
    ++seed;  // flagged: bump the seed and try again
    ++result.nsfw_retries_used;
  }
  result.image.id = "img:" + content_hash(image.image_b64);
  result.image.image_b64 = image.image_b64;
  result.final_seed = seed;
  return result;
}

}  // namespace viunit

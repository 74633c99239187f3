#include <set>
#include <sstream>

#include "viunit/harness.hpp"
#include "viunit/text.hpp"

namespace viunit {

namespace {

const std::set<std::string> kColors = {
    "red",    "blue",  "green", "yellow", "black", "white",
    "gray",   "grey",  "orange", "purple", "brown", "pink"};

const std::set<std::string> kStopWords = {
    "is",    "are",   "there", "a",     "an",     "the",   "in",   "on",
    "of",    "image", "picture", "photo", "this",  "any",   "does", "do",
    "contain", "contains", "matches", "match", "verify", "text",  "what",
    "color", "how",   "many",  "show",  "shows",  "with"};

struct QueryFacts {
  std::string noun = "object";
  std::string color;        // empty when the query names none
  bool what_color = false;  // "What color is the ...?" shape
};

std::string last_line_after(const std::string& text,
                            const std::string& prefix) {
  std::string found;
  std::istringstream stream(text);
  std::string line;
  while (std::getline(stream, line)) {
    std::string t = trim(line);
    if (t.rfind(prefix, 0) == 0) found = trim(t.substr(prefix.size()));
  }
  return found;
}

QueryFacts analyze_query(const std::string& raw_query) {
  std::string query = raw_query;
  if (auto stmt = itm_statement(raw_query)) query = *stmt;
  QueryFacts facts;
  facts.what_color = to_lower(query).rfind("what color", 0) == 0;
  for (const std::string& raw : split_words(to_lower(query))) {
    std::string w = strip_quotes_punct(raw);
    if (w.empty() || kStopWords.count(w)) continue;
    if (kColors.count(w)) {
      if (facts.color.empty()) facts.color = w;
      continue;
    }
    facts.noun = normalize_label(w);  // last content word wins
  }
  return facts;
}

std::string described(const QueryFacts& f, const std::string& color) {
  return color.empty() ? f.noun : color + " " + f.noun;
}

std::string tests_block(const QueryFacts& f) {
  std::string other = f.color == "blue" ? "red" : "blue";
  std::ostringstream out;
  if (f.what_color) {
    std::string c = f.color.empty() ? "red" : f.color;
    out << "1. Image Caption: \"a " << c << " " << f.noun
        << "\" Answer: " << c << "\n";
    out << "2. Image Caption: \"a " << other << " " << f.noun
        << "\" Answer: " << other << "\n";
    out << "3. Image Caption: \"two " << c << " " << f.noun
        << "s\" Answer: " << c << "\n";
    out << "4. Image Caption: \"a room without " << f.noun
        << "s\" Answer: unknown\n";
    out << "5. Image Caption: \"a " << c << " " << f.noun
        << " near a " << other << " box\" Answer: " << c << "\n";
    out << "6. Image Caption: \"a " << c << " " << f.noun
        << "\" Answer: " << c << "\n";
    return out.str();
  }
  out << "1. Image Caption: \"a " << described(f, f.color)
      << "\" Answer: yes\n";
  out << "2. Image Caption: \"a " << described(f, other)
      << "\" Answer: " << (f.color.empty() ? "yes" : "no") << "\n";
  out << "3. Image Caption: \"two " << described(f, f.color)
      << "s\" Answer: yes\n";
  out << "4. Image Caption: \"a room without " << f.noun
      << "s\" Answer: no\n";
  out << "5. Image Caption: \"a " << described(f, f.color) << " near a "
      << other << " box\" Answer: yes\n";
  out << "6. Image Caption: \"a " << described(f, f.color)
      << "\" Answer: yes\n";
  return out.str();
}

std::string good_program(const QueryFacts& f) {
  std::ostringstream out;
  out << "def execute_command(image):\n";
  out << "    image_patch = ImagePatch(image)\n";
  out << "    patches = image_patch.find(\"" << f.noun << "\")\n";
  if (f.what_color) {
    out << "    if not patches:\n";
    out << "        return \"unknown\"\n";
    out << "    return patches[0].simple_query(\"What color is the "
        << f.noun << "?\")\n";
  } else if (f.color.empty()) {
    out << "    return bool_to_yesno(len(patches) > 0)\n";
  } else {
    out << "    if not patches:\n";
    out << "        return \"no\"\n";
    out << "    has_property = any([p.verify_property(\"" << f.noun
        << "\", \"" << f.color << "\") for p in patches])\n";
    out << "    return bool_to_yesno(has_property)\n";
  }
  return out.str();
}

std::string variant_program(const QueryFacts& f, int variant) {
  switch (variant % 5) {
    case 0:
      return good_program(f);
    case 1:
      return f.what_color
                 ? "def execute_command(image):\n    return \"red\"\n"
                 : "def execute_command(image):\n    return \"yes\"\n";
    case 2: {
      // No emptiness guard: errors on scenes lacking the object.
      std::ostringstream out;
      out << "def execute_command(image):\n";
      out << "    image_patch = ImagePatch(image)\n";
      out << "    first = image_patch.find(\"" << f.noun << "\")[0]\n";
      if (f.what_color)
        out << "    return first.simple_query(\"What color is the " << f.noun
            << "?\")\n";
      else if (f.color.empty())
        out << "    return bool_to_yesno(first.area > 0)\n";
      else
        out << "    return bool_to_yesno(first.verify_property(\"" << f.noun
            << "\", \"" << f.color << "\"))\n";
      return out.str();
    }
    case 3: {
      // Same logic as the good program, different surface form.
      std::ostringstream out;
      out << "def execute_command(image):\n";
      out << "    patches = ImagePatch(image).find(\"" << f.noun << "\")\n";
      if (f.what_color) {
        out << "    if len(patches) == 0:\n";
        out << "        return \"unknown\"\n";
        out << "    return patches[0].simple_query(\"What color is the "
            << f.noun << "?\")\n";
      } else if (f.color.empty()) {
        out << "    return \"yes\" if len(patches) > 0 else \"no\"\n";
      } else {
        out << "    for p in patches:\n";
        out << "        if p.verify_property(\"" << f.noun << "\", \""
            << f.color << "\"):\n";
        out << "            return \"yes\"\n";
        out << "    return \"no\"\n";
      }
      return out.str();
    }
    default:
      return f.what_color
                 ? "def execute_command(image):\n    return \"blue\"\n"
                 : "def execute_command(image):\n    return \"no\"\n";
  }
}

}  // namespace

std::vector<std::string> MockChatClient::complete(const ChatRequest& request) {
  std::string prompt;
  for (auto it = request.messages.rbegin(); it != request.messages.rend();
       ++it) {
    if (it->role == "user") {
      prompt = it->content;
      break;
    }
  }
  if (prompt.empty()) throw ServiceError("mock chat got no user message");

  int n = std::max(1, request.n);
  std::vector<std::string> out;

  if (prompt.find("Incorrect Program") != std::string::npos) {
    QueryFacts facts = analyze_query(last_line_after(prompt, "Query:"));
    for (int i = 0; i < n; ++i) out.push_back(good_program(facts));
    return out;
  }
  if (prompt.find("generate the bounding boxes") != std::string::npos) {
    QueryFacts facts = analyze_query(last_line_after(prompt, "Caption:"));
    std::string seq = "Objects: [('a " + facts.noun +
                      "', [100, 100, 150, 150])]\n"
                      "Background prompt: A realistic scene\n"
                      "Negative prompt: None\n";
    for (int i = 0; i < n; ++i) out.push_back(seq);
    return out;
  }
  if (prompt.find("Image Caption:") != std::string::npos ||
      prompt.find("unit tests") != std::string::npos) {
    QueryFacts facts = analyze_query(last_line_after(prompt, "Query:"));
    std::string block = tests_block(facts);
    for (int i = 0; i < n; ++i) out.push_back(block);
    return out;
  }
  if (prompt.find("Query:") != std::string::npos) {
    QueryFacts facts = analyze_query(last_line_after(prompt, "Query:"));
    for (int i = 0; i < n; ++i) out.push_back(variant_program(facts, i));
    return out;
  }
  throw ServiceError("mock chat cannot classify prompt");
}

}  // namespace viunit

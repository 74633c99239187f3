#include "viunit/scene_graph.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "viunit/hash.hpp"
#include "viunit/text.hpp"

namespace viunit {

using nlohmann::json;

std::optional<Box> Box::intersect(const Box& b) const {
  Box r{std::max(left, b.left), std::max(lower, b.lower),
        std::min(right, b.right), std::min(upper, b.upper)};
  if (!r.valid()) return std::nullopt;
  return r;
}

double iou(const Box& a, const Box& b) {
  auto inter = a.intersect(b);
  if (!inter) return 0.0;
  double i = inter->area();
  double u = a.area() + b.area() - i;
  return u > 0 ? i / u : 0.0;
}

void SceneGraph::validate() const {
  if (width <= 0 || height <= 0)
    throw std::invalid_argument("scene graph canvas must be positive");
  Box canvas{0, 0, width, height};
  std::map<std::string, std::string> seen;
  for (const auto& obj : objects) {
    if (obj.name.empty())
      throw std::invalid_argument("scene object with empty name");
    if (!obj.box.valid())
      throw std::invalid_argument("scene object '" + obj.name +
                                  "' has a degenerate box");
    if (!canvas.contains(obj.box))
      throw std::invalid_argument("scene object '" + obj.name +
                                  "' lies outside the canvas");
  }
  for (const auto& [q, a] : qa_facts) {
    std::string key = normalize_answer(q);
    auto it = seen.find(key);
    if (it != seen.end())
      throw std::invalid_argument("duplicate qa fact after normalization: " +
                                  key);
    seen.emplace(key, a);
  }
}

static json box_to_json(const Box& b) {
  return json::array({b.left, b.lower, b.right, b.upper});
}

static Box box_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4)
    throw std::invalid_argument("box must be [left, lower, right, upper]");
  return Box{j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
             j[3].get<double>()};
}

std::string SceneGraph::to_json() const {
  json j;
  j["width"] = width;
  j["height"] = height;
  j["objects"] = json::array();
  for (const auto& obj : objects) {
    json o;
    o["name"] = obj.name;
    o["box"] = box_to_json(obj.box);
    o["attributes"] = json::array();
    for (const auto& [k, v] : obj.attributes)
      o["attributes"].push_back(json::array({k, v}));
    o["qa_facts"] = obj.qa_facts;
    j["objects"].push_back(std::move(o));
  }
  j["qa_facts"] = qa_facts;
  j["match_facts"] = match_facts;
  return canonical_json(j);
}

SceneGraph SceneGraph::from_json(const std::string& text) {
  json j = json::parse(text);
  SceneGraph g;
  g.width = j.at("width").get<double>();
  g.height = j.at("height").get<double>();
  if (j.contains("objects")) {
    for (const auto& o : j.at("objects")) {
      SceneObject obj;
      obj.name = o.at("name").get<std::string>();
      obj.box = box_from_json(o.at("box"));
      if (o.contains("attributes"))
        for (const auto& a : o.at("attributes"))
          obj.attributes.emplace_back(a.at(0).get<std::string>(),
                                      a.at(1).get<std::string>());
      if (o.contains("qa_facts"))
        obj.qa_facts =
            o.at("qa_facts").get<std::map<std::string, std::string>>();
      g.objects.push_back(std::move(obj));
    }
  }
  if (j.contains("qa_facts"))
    g.qa_facts = j.at("qa_facts").get<std::map<std::string, std::string>>();
  if (j.contains("match_facts"))
    g.match_facts = j.at("match_facts").get<std::map<std::string, bool>>();
  g.validate();
  return g;
}

SceneGraph SceneGraph::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scene graph: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

void SceneGraph::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write scene graph: " + path);
  out << to_json();
}

ImageHandle ImageHandle::from_scene(SceneGraph scene) {
  auto shared = std::make_shared<const SceneGraph>(std::move(scene));
  ImageHandle h;
  // Content-addressed id so identical scenes share cache keys.
  h.id = "scene:" + content_hash(shared->to_json());
  h.scene = shared;
  return h;
}

}  // namespace viunit

#include "viunit/perception.hpp"

#include "viunit/text.hpp"

namespace viunit {

const SceneGraph& ScriptedBackend::resolve(const ImageHandle& image) {
  if (!image.scene)
    throw UnresolvableImage("no scene graph attached to image '" + image.id +
                            "'");
  return *image.scene;
}

std::vector<Detection> ScriptedBackend::detect(const ImageHandle& image,
                                               const std::string& object_name) {
  const SceneGraph& scene = resolve(image);
  const std::string wanted = normalize_label(object_name);
  std::vector<Detection> out;
  for (const auto& obj : scene.objects) {
    if (normalize_label(obj.name) == wanted)
      out.push_back(Detection{obj.box, obj.name});
  }
  return out;
}

const SceneObject* ScriptedBackend::best_overlap(const SceneGraph& scene,
                                                 const Box& box) {
  const SceneObject* best = nullptr;
  double best_iou = 0.0;
  for (const auto& obj : scene.objects) {
    double v = iou(box, obj.box);
    if (v > best_iou) {
      best_iou = v;
      best = &obj;
    }
  }
  return best;  // null when nothing overlaps
}

bool ScriptedBackend::verify_property(const ImageHandle& image, const Box& box,
                                      const std::string& /*object_name*/,
                                      const std::string& property) {
  const SceneGraph& scene = resolve(image);
  const SceneObject* obj = best_overlap(scene, box);
  if (!obj) return false;
  const std::string wanted = normalize_answer(property);
  for (const auto& [name, value] : obj->attributes) {
    if (normalize_answer(value) == wanted || normalize_answer(name) == wanted)
      return true;
  }
  // A property stated in the object's own name counts as verified
  // ("wooden chair" verifies "wooden").
  for (const std::string& word : split_words(normalize_answer(obj->name)))
    if (word == wanted) return true;
  return false;
}

std::string ScriptedBackend::simple_query(const ImageHandle& image,
                                          const Box& box,
                                          const std::string& question) {
  const SceneGraph& scene = resolve(image);
  const std::string key = normalize_answer(question);
  if (const SceneObject* obj = best_overlap(scene, box)) {
    for (const auto& [q, a] : obj->qa_facts)
      if (normalize_answer(q) == key) return a;
  }
  for (const auto& [q, a] : scene.qa_facts)
    if (normalize_answer(q) == key) return a;
  return kUnknownAnswer;
}

double ScriptedBackend::itm_score(const ImageHandle& image, const Box& /*box*/,
                                  const std::string& statement) {
  const SceneGraph& scene = resolve(image);
  const std::string key = normalize_answer(statement);
  for (const auto& [s, truth] : scene.match_facts)
    if (normalize_answer(s) == key) return truth ? 1.0 : 0.0;
  return 0.5;  // unlisted statements stay threshold-neutral
}

}  // namespace viunit

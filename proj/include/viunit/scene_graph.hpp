#pragma once

#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace viunit {

// Axis-aligned box in pixel coordinates. Origin is the bottom-left corner
// of the canvas and y increases upward, so lower < upper.
struct Box {
  double left = 0;
  double lower = 0;
  double right = 0;
  double upper = 0;

  double width() const { return right - left; }
  double height() const { return upper - lower; }
  double area() const { return width() * height(); }
  double horizontal_center() const { return (left + right) / 2.0; }
  double vertical_center() const { return (upper + lower) / 2.0; }

  bool valid() const { return left < right && lower < upper; }
  bool contains(const Box& b) const {
    return b.left >= left && b.right <= right && b.lower >= lower &&
           b.upper <= upper;
  }
  std::optional<Box> intersect(const Box& b) const;

  bool operator==(const Box&) const = default;
};

double iou(const Box& a, const Box& b);

struct SceneObject {
  std::string name;
  Box box;
  // (property-name, value) pairs; colors imply property "color".
  std::vector<std::pair<std::string, std::string>> attributes;
  // Question -> answer, scoped to this object.
  std::map<std::string, std::string> qa_facts;
};

// Structured stand-in for an image: a sized canvas plus attributed,
// positioned objects. Drives the scripted perception backend.
struct SceneGraph {
  double width = 0;
  double height = 0;
  std::vector<SceneObject> objects;
  std::map<std::string, std::string> qa_facts;   // scene-level
  std::map<std::string, bool> match_facts;       // statement -> truth

  void validate() const;  // throws std::invalid_argument on violation

  std::string to_json() const;  // canonical serialization
  static SceneGraph from_json(const std::string& text);
  static SceneGraph load(const std::string& path);
  void save(const std::string& path) const;
};

// Opaque reference to a test image. Scripted backends resolve the scene
// pointer; remote backends forward the id or raw bytes.
struct ImageHandle {
  std::string id;
  std::shared_ptr<const SceneGraph> scene;  // set in mock mode
  std::string image_b64;                    // set for remote images

  static ImageHandle from_scene(SceneGraph scene);
};

}  // namespace viunit

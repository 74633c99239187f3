// Hand-built scene graphs shared across test binaries.
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "viunit/scene_graph.hpp"

namespace viunit::fixtures {

inline SceneObject obj(
    std::string name, Box box,
    std::vector<std::pair<std::string, std::string>> attrs = {}) {
  SceneObject o;
  o.name = std::move(name);
  o.box = box;
  o.attributes = std::move(attrs);
  return o;
}

// 512x512 canvas with the given objects.
inline SceneGraph scene(std::vector<SceneObject> objects) {
  SceneGraph g;
  g.width = 512;
  g.height = 512;
  g.objects = std::move(objects);
  return g;
}

inline ImageHandle image_of(SceneGraph g) {
  return ImageHandle::from_scene(std::move(g));
}

}  // namespace viunit::fixtures

#include "soorl/oomdp.hpp"

namespace soorl {

bool bounding_box_overlap(const ObjectState& a, const ObjectState& b) {
  return a.x <= b.x + b.w && b.x <= a.x + a.w && a.y <= b.y + b.h && b.y <= a.y + a.h;
}

std::vector<InteractionPair> detect_interactions(const FactoredState& state) {
  std::vector<InteractionPair> pairs;
  const auto& objs = state.objects;
  for (std::size_t i = 0; i < objs.size(); ++i) {
    if (!objs[i].alive) continue;
    for (std::size_t j = i + 1; j < objs.size(); ++j) {
      if (objs[j].alive && bounding_box_overlap(objs[i], objs[j])) pairs.push_back({i, j});
    }
  }
  return pairs;
}

std::size_t hash_ints(const std::int32_t* data, std::size_t n, std::size_t seed) {
  std::uint64_t h = 1469598103934665603ULL ^ seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<std::uint32_t>(data[i]);
    h *= 1099511628211ULL;
    h ^= h >> 29;
  }
  return static_cast<std::size_t>(h);
}

StateKey::StateKey(const FactoredState& state) {
  words_.reserve(1 + state.objects.size() * 6);
  words_.push_back(static_cast<std::int32_t>(state.objects.size()));
  for (const auto& o : state.objects) {
    words_.insert(words_.end(), {o.class_id, o.x, o.y, o.w, o.h, o.alive ? 1 : 0});
  }
  hash_ = hash_ints(words_.data(), words_.size());
}

void to_json(nlohmann::json& j, const ObjectState& o) {
  j = nlohmann::json{{"class", o.class_id}, {"x", o.x}, {"y", o.y},
                     {"w", o.w},            {"h", o.h}, {"alive", o.alive}};
}

void from_json(const nlohmann::json& j, ObjectState& o) {
  o.class_id = j.at("class").get<int>();
  o.x = j.at("x").get<int>();
  o.y = j.at("y").get<int>();
  o.w = j.at("w").get<int>();
  o.h = j.at("h").get<int>();
  o.alive = j.value("alive", true);
}

void to_json(nlohmann::json& j, const FactoredState& s) {
  j = nlohmann::json{{"step", s.step}, {"objects", s.objects}};
}

void from_json(const nlohmann::json& j, FactoredState& s) {
  s.step = j.at("step").get<int>();
  s.objects = j.at("objects").get<std::vector<ObjectState>>();
}

}  // namespace soorl

#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

namespace soorl {

using ClassId = int;

/// An object class. Every class shares the attribute schema {x, y, w, h}.
struct ObjectClass {
  ClassId id = 0;
  std::string name;
};

/// One detected object: class, grid position and bounding-box extent.
struct ObjectState {
  ClassId class_id = 0;
  int x = 0;
  int y = 0;
  int w = 1;
  int h = 1;
  bool alive = true;

  auto operator<=>(const ObjectState&) const = default;
};

/// The MDP state as the union of its object states.
struct FactoredState {
  std::vector<ObjectState> objects;
  int step = 0;

  // step_index is bookkeeping, not part of state identity.
  bool same_objects(const FactoredState& other) const { return objects == other.objects; }
  bool operator==(const FactoredState&) const = default;
};

struct InteractionPair {
  std::size_t first = 0;
  std::size_t second = 0;

  auto operator<=>(const InteractionPair&) const = default;
};

/// Closed-interval box test: touching edges collide.
bool bounding_box_overlap(const ObjectState& a, const ObjectState& b);

/// Every pair i<j of alive objects whose boxes overlap, in lexicographic order.
std::vector<InteractionPair> detect_interactions(const FactoredState& state);

/// Hashable identity of a FactoredState (ignores the step index).
class StateKey {
 public:
  StateKey() = default;
  explicit StateKey(const FactoredState& state);

  bool operator==(const StateKey&) const = default;
  std::size_t hash() const { return hash_; }

 private:
  std::vector<std::int32_t> words_;
  std::size_t hash_ = 0;
};

inline StateKey state_key(const FactoredState& state) { return StateKey(state); }

void to_json(nlohmann::json& j, const ObjectState& o);
void from_json(const nlohmann::json& j, ObjectState& o);
void to_json(nlohmann::json& j, const FactoredState& s);
void from_json(const nlohmann::json& j, FactoredState& s);

/// FNV-1a style mixing over a range of ints.
std::size_t hash_ints(const std::int32_t* data, std::size_t n, std::size_t seed = 0);

}  // namespace soorl

template <>
struct std::hash<soorl::StateKey> {
  std::size_t operator()(const soorl::StateKey& k) const noexcept { return k.hash(); }
};

#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace agentry {

// 128-bit random identifier. Rendered as a lowercase dashed-hex UUID.
struct Uuid128 {
    std::array<uint8_t, 16> data{};

    static Uuid128 random();
    static Uuid128 zero() { return Uuid128{}; }

    std::string to_string() const;
    static std::optional<Uuid128> parse(std::string_view text);

    auto operator<=>(const Uuid128&) const = default;
};

enum class EntityRole : uint8_t {
    Agent = 0,
    Client = 1,
};

// Address of an entity's mailbox. Canonical text form is the lowercase hex
// UUID prefixed "a:" (agent) or "c:" (client); parse(render(x)) == x.
struct EntityId {
    Uuid128 uuid;
    EntityRole role = EntityRole::Agent;

    static EntityId random(EntityRole role) { return EntityId{Uuid128::random(), role}; }

    std::string to_string() const;
    static std::optional<EntityId> parse(std::string_view text);

    auto operator<=>(const EntityId&) const = default;
};

struct Uuid128Hash {
    size_t operator()(const Uuid128& u) const noexcept;
};

struct EntityIdHash {
    size_t operator()(const EntityId& id) const noexcept;
};

}  // namespace agentry

template <>
struct std::hash<agentry::Uuid128> {
    size_t operator()(const agentry::Uuid128& u) const noexcept {
        return agentry::Uuid128Hash{}(u);
    }
};

template <>
struct std::hash<agentry::EntityId> {
    size_t operator()(const agentry::EntityId& id) const noexcept {
        return agentry::EntityIdHash{}(id);
    }
};

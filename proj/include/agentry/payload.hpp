#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "agentry/bytes.hpp"
#include "agentry/ids.hpp"

namespace agentry {

// Location hint for fetching a proxied object, tried in order.
struct ProxyLocation {
    enum class Kind : uint8_t {
        Peer = 0,      // text is "host:port" of a peer serving the object
        StoreKey = 1,  // text is an object-store key
    };
    Kind kind = Kind::Peer;
    std::string text;

    bool operator==(const ProxyLocation&) const = default;
};

// By-reference payload descriptor. Small and fixed-bounded on the wire
// (encoding <= kMaxEncodedSize) no matter how large the object is.
struct ProxyRef {
    static constexpr size_t kMaxEncodedSize = 512;

    Uuid128 object_id;
    uint64_t size = 0;
    EntityId origin;
    std::array<uint8_t, 32> checksum{};
    std::vector<ProxyLocation> locations;

    bool operator==(const ProxyRef&) const = default;
};

// Action argument/result: either inline bytes or a reference descriptor
// resolved out-of-band.
class Payload {
public:
    Payload() : value_(Bytes{}) {}

    static Payload inline_bytes(Bytes b) { return Payload(std::move(b)); }
    static Payload inline_text(std::string_view s) { return Payload(to_bytes(s)); }
    static Payload reference(ProxyRef ref) { return Payload(std::move(ref)); }

    bool is_inline() const { return std::holds_alternative<Bytes>(value_); }
    bool is_reference() const { return !is_inline(); }

    const Bytes& bytes() const { return std::get<Bytes>(value_); }
    const ProxyRef& ref() const { return std::get<ProxyRef>(value_); }

    // Inline byte count or the referenced object's size.
    uint64_t object_size() const {
        return is_inline() ? bytes().size() : ref().size;
    }

    bool operator==(const Payload&) const = default;

private:
    explicit Payload(Bytes b) : value_(std::move(b)) {}
    explicit Payload(ProxyRef r) : value_(std::move(r)) {}

    std::variant<Bytes, ProxyRef> value_;
};

}  // namespace agentry

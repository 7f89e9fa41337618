#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "agentry/behavior.hpp"
#include "agentry/bytes.hpp"
#include "agentry/envelope.hpp"

namespace agentry {

// Wire protocol version accepted by every decoder in this build.
inline constexpr uint8_t kWireVersion = 0x01;

// Serialization cursor. All writes are big-endian.
class ByteWriter {
public:
    void u8(uint8_t v) { out_.push_back(v); }
    void u32(uint32_t v);
    void u64(uint64_t v);
    void raw(const uint8_t* data, size_t len);
    void raw(const Bytes& b) { raw(b.data(), b.size()); }
    // Length-prefixed byte string (4-byte big-endian length).
    void bstr(const uint8_t* data, size_t len);
    void bstr(const Bytes& b) { bstr(b.data(), b.size()); }
    void bstr(std::string_view s) { bstr(reinterpret_cast<const uint8_t*>(s.data()), s.size()); }
    void uuid(const Uuid128& u) { raw(u.data.data(), u.data.size()); }
    void entity(const EntityId& id);

    size_t size() const { return out_.size(); }
    Bytes take() { return std::move(out_); }
    const Bytes& bytes() const { return out_; }

private:
    Bytes out_;
};

// Bounds-checked deserialization cursor; throws CodecError with the byte
// offset of the first violation. Never reads past the given span.
class ByteReader {
public:
    explicit ByteReader(std::span<const uint8_t> data) : data_(data) {}

    uint8_t u8();
    uint32_t u32();
    uint64_t u64();
    Bytes raw(size_t len);
    Bytes bstr(size_t max_len = SIZE_MAX);
    std::string str(size_t max_len = SIZE_MAX);
    Uuid128 uuid();
    EntityId entity();

    size_t offset() const { return offset_; }
    size_t remaining() const { return data_.size() - offset_; }
    void expect_end() const;

private:
    void need(size_t n) const;

    std::span<const uint8_t> data_;
    size_t offset_ = 0;
};

// Envelope frame: 4-byte big-endian body length, then
//   version(1) kind(1) src(16+1 role) dest(16+1 role) message_id(16) body.
// Deterministic: equal envelopes encode identically.
Bytes encode_envelope(const Envelope& e);

// Inverse of encode_envelope. `frame` must be one complete frame including
// the 4-byte length prefix; anything malformed raises CodecError with the
// offending offset.
Envelope decode_envelope(std::span<const uint8_t> frame);

// Payload and ProxyRef composites, reused by the relay protocol.
void write_payload(ByteWriter& w, const Payload& p);
Payload read_payload(ByteReader& r);
Bytes encode_proxy_ref(const ProxyRef& ref);
ProxyRef decode_proxy_ref(std::span<const uint8_t> data);

void write_behavior_spec(ByteWriter& w, const BehaviorSpec& spec);
BehaviorSpec read_behavior_spec(ByteReader& r);

}  // namespace agentry

#include "agentry/codec.hpp"

#include <limits>

namespace agentry {

namespace {

constexpr uint32_t kMaxU32 = std::numeric_limits<uint32_t>::max();

constexpr uint8_t kPayloadInline = 0x00;
constexpr uint8_t kPayloadReference = 0x01;
constexpr uint8_t kOutcomeOk = 0x00;
constexpr uint8_t kOutcomeErr = 0x01;

EntityRole role_from_byte(uint8_t b, size_t offset) {
    switch (b) {
        case 0: return EntityRole::Agent;
        case 1: return EntityRole::Client;
        default: throw CodecError("unknown role byte", offset);
    }
}

ErrorKind error_kind_from_byte(uint8_t b, size_t offset) {
    if (b > static_cast<uint8_t>(ErrorKind::TransportFailure)) {
        throw CodecError("unknown error kind byte", offset);
    }
    return static_cast<ErrorKind>(b);
}

void write_error_info(ByteWriter& w, const ErrorInfo& e) {
    w.u8(static_cast<uint8_t>(e.kind));
    w.bstr(e.detail);
}

ErrorInfo read_error_info(ByteReader& r) {
    size_t at = r.offset();
    ErrorInfo e;
    e.kind = error_kind_from_byte(r.u8(), at);
    e.detail = r.str();
    return e;
}

}  // namespace

std::string_view message_kind_name(MessageKind k) {
    switch (k) {
        case MessageKind::ActionRequest: return "action-request";
        case MessageKind::ActionResponse: return "action-response";
        case MessageKind::Ping: return "ping";
        case MessageKind::PingResponse: return "ping-response";
        case MessageKind::Shutdown: return "shutdown";
    }
    return "unknown";
}

std::string_view error_kind_name(ErrorKind k) {
    switch (k) {
        case ErrorKind::ActionRaised: return "action-raised";
        case ErrorKind::UnknownAction: return "unknown-action";
        case ErrorKind::MailboxClosed: return "mailbox-closed";
        case ErrorKind::Timeout: return "timeout";
        case ErrorKind::TransportFailure: return "transport-failure";
    }
    return "unknown";
}

std::string ErrorInfo::to_string() const {
    std::string out(error_kind_name(kind));
    if (!detail.empty()) {
        out += ": ";
        out += detail;
    }
    return out;
}

ErrorInfo error_info_from_exception(const std::exception& e) {
    if (auto* mc = dynamic_cast<const MailboxClosedError*>(&e)) {
        return {ErrorKind::MailboxClosed, mc->what()};
    }
    if (auto* to = dynamic_cast<const TimeoutError*>(&e)) {
        return {ErrorKind::Timeout, to->what()};
    }
    if (auto* tr = dynamic_cast<const TransportError*>(&e)) {
        return {ErrorKind::TransportFailure, tr->what()};
    }
    return {ErrorKind::ActionRaised, e.what()};
}

void ByteWriter::u32(uint32_t v) {
    out_.push_back(static_cast<uint8_t>(v >> 24));
    out_.push_back(static_cast<uint8_t>(v >> 16));
    out_.push_back(static_cast<uint8_t>(v >> 8));
    out_.push_back(static_cast<uint8_t>(v));
}

void ByteWriter::u64(uint64_t v) {
    u32(static_cast<uint32_t>(v >> 32));
    u32(static_cast<uint32_t>(v));
}

void ByteWriter::raw(const uint8_t* data, size_t len) {
    out_.insert(out_.end(), data, data + len);
}

void ByteWriter::bstr(const uint8_t* data, size_t len) {
    if (len > kMaxU32) throw CodecError("byte string exceeds 2^32-1 bytes");
    u32(static_cast<uint32_t>(len));
    raw(data, len);
}

void ByteWriter::entity(const EntityId& id) {
    uuid(id.uuid);
    u8(static_cast<uint8_t>(id.role));
}

void ByteReader::need(size_t n) const {
    if (data_.size() - offset_ < n) {
        throw CodecError("truncated field", offset_);
    }
}

uint8_t ByteReader::u8() {
    need(1);
    return data_[offset_++];
}

uint32_t ByteReader::u32() {
    need(4);
    uint32_t v = (static_cast<uint32_t>(data_[offset_]) << 24) |
                 (static_cast<uint32_t>(data_[offset_ + 1]) << 16) |
                 (static_cast<uint32_t>(data_[offset_ + 2]) << 8) |
                 static_cast<uint32_t>(data_[offset_ + 3]);
    offset_ += 4;
    return v;
}

uint64_t ByteReader::u64() {
    uint64_t hi = u32();
    return (hi << 32) | u32();
}

Bytes ByteReader::raw(size_t len) {
    need(len);
    Bytes out(data_.begin() + static_cast<ptrdiff_t>(offset_),
              data_.begin() + static_cast<ptrdiff_t>(offset_ + len));
    offset_ += len;
    return out;
}

Bytes ByteReader::bstr(size_t max_len) {
    size_t at = offset_;
    uint32_t len = u32();
    if (len > max_len) throw CodecError("byte string too long", at);
    return raw(len);
}

std::string ByteReader::str(size_t max_len) {
    Bytes b = bstr(max_len);
    return std::string(b.begin(), b.end());
}

Uuid128 ByteReader::uuid() {
    need(16);
    Uuid128 u;
    std::copy(data_.begin() + static_cast<ptrdiff_t>(offset_),
              data_.begin() + static_cast<ptrdiff_t>(offset_ + 16), u.data.begin());
    offset_ += 16;
    return u;
}

EntityId ByteReader::entity() {
    EntityId id;
    id.uuid = uuid();
    size_t at = offset_;
    id.role = role_from_byte(u8(), at);
    return id;
}

void ByteReader::expect_end() const {
    if (offset_ != data_.size()) {
        throw CodecError("trailing bytes after message", offset_);
    }
}

void write_payload(ByteWriter& w, const Payload& p) {
    if (p.is_inline()) {
        w.u8(kPayloadInline);
        w.bstr(p.bytes());
    } else {
        w.u8(kPayloadReference);
        w.bstr(encode_proxy_ref(p.ref()));
    }
}

Payload read_payload(ByteReader& r) {
    size_t at = r.offset();
    uint8_t tag = r.u8();
    if (tag == kPayloadInline) {
        return Payload::inline_bytes(r.bstr());
    }
    if (tag == kPayloadReference) {
        Bytes enc = r.bstr(ProxyRef::kMaxEncodedSize);
        return Payload::reference(decode_proxy_ref(enc));
    }
    throw CodecError("unknown payload tag", at);
}

Bytes encode_proxy_ref(const ProxyRef& ref) {
    ByteWriter w;
    w.uuid(ref.object_id);
    w.u64(ref.size);
    w.entity(ref.origin);
    w.raw(ref.checksum.data(), ref.checksum.size());
    if (ref.locations.size() > 255) throw CodecError("too many proxy locations");
    w.u8(static_cast<uint8_t>(ref.locations.size()));
    for (const auto& loc : ref.locations) {
        w.u8(static_cast<uint8_t>(loc.kind));
        w.bstr(loc.text);
    }
    if (w.size() > ProxyRef::kMaxEncodedSize) {
        throw CodecError("proxy reference encoding exceeds " +
                         std::to_string(ProxyRef::kMaxEncodedSize) + " bytes");
    }
    return w.take();
}

ProxyRef decode_proxy_ref(std::span<const uint8_t> data) {
    if (data.size() > ProxyRef::kMaxEncodedSize) {
        throw CodecError("proxy reference encoding exceeds limit", 0);
    }
    ByteReader r(data);
    ProxyRef ref;
    ref.object_id = r.uuid();
    ref.size = r.u64();
    ref.origin = r.entity();
    Bytes sum = r.raw(ref.checksum.size());
    std::copy(sum.begin(), sum.end(), ref.checksum.begin());
    uint8_t n = r.u8();
    for (uint8_t i = 0; i < n; ++i) {
        size_t at = r.offset();
        uint8_t kind = r.u8();
        if (kind > static_cast<uint8_t>(ProxyLocation::Kind::StoreKey)) {
            throw CodecError("unknown proxy location kind", at);
        }
        ProxyLocation loc;
        loc.kind = static_cast<ProxyLocation::Kind>(kind);
        loc.text = r.str();
        ref.locations.push_back(std::move(loc));
    }
    r.expect_end();
    return ref;
}

void write_behavior_spec(ByteWriter& w, const BehaviorSpec& spec) {
    w.bstr(spec.name);
    w.u32(static_cast<uint32_t>(spec.ancestry.size()));
    for (const auto& a : spec.ancestry) w.bstr(a);
    w.u32(static_cast<uint32_t>(spec.actions.size()));
    for (const auto& a : spec.actions) w.bstr(a);
    w.u32(static_cast<uint32_t>(spec.loops.size()));
    for (const auto& l : spec.loops) w.bstr(l);
    w.u64(spec.max_action_concurrency);
    w.u8(spec.internally_synchronized ? 1 : 0);
}

BehaviorSpec read_behavior_spec(ByteReader& r) {
    constexpr uint32_t kMaxNames = 1 << 16;
    BehaviorSpec spec;
    spec.name = r.str();
    size_t at = r.offset();
    uint32_t n = r.u32();
    if (n > kMaxNames) throw CodecError("ancestry list too long", at);
    for (uint32_t i = 0; i < n; ++i) spec.ancestry.push_back(r.str());
    at = r.offset();
    n = r.u32();
    if (n > kMaxNames) throw CodecError("action list too long", at);
    for (uint32_t i = 0; i < n; ++i) spec.actions.push_back(r.str());
    at = r.offset();
    n = r.u32();
    if (n > kMaxNames) throw CodecError("loop list too long", at);
    for (uint32_t i = 0; i < n; ++i) spec.loops.push_back(r.str());
    spec.max_action_concurrency = r.u64();
    spec.internally_synchronized = r.u8() != 0;
    return spec;
}

Bytes encode_envelope(const Envelope& e) {
    ByteWriter body;
    body.u8(kWireVersion);
    body.u8(static_cast<uint8_t>(e.kind()));
    body.entity(e.src);
    body.entity(e.dest);
    body.uuid(e.message_id);

    std::visit(
        [&](const auto& b) {
            using T = std::decay_t<decltype(b)>;
            if constexpr (std::is_same_v<T, ActionRequestBody>) {
                body.bstr(b.action);
                write_payload(body, b.payload);
            } else if constexpr (std::is_same_v<T, ActionResponseBody>) {
                body.uuid(b.request_id);
                if (b.ok()) {
                    body.u8(kOutcomeOk);
                    write_payload(body, std::get<Payload>(b.outcome));
                } else {
                    body.u8(kOutcomeErr);
                    write_error_info(body, std::get<ErrorInfo>(b.outcome));
                }
            } else if constexpr (std::is_same_v<T, PingResponseBody>) {
                body.uuid(b.request_id);
            } else if constexpr (std::is_same_v<T, ShutdownBody>) {
                body.u8(b.terminal ? 1 : 0);
            }
        },
        e.body);

    if (body.size() > kMaxU32) {
        throw CodecError("envelope body exceeds 2^32-1 bytes; use a reference payload");
    }
    ByteWriter frame;
    frame.u32(static_cast<uint32_t>(body.size()));
    frame.raw(body.bytes());
    return frame.take();
}

Envelope decode_envelope(std::span<const uint8_t> frame) {
    // One reader over the whole frame so error offsets are frame-absolute.
    ByteReader r(frame);
    size_t at = r.offset();
    uint32_t body_len = r.u32();
    if (frame.size() < 4 || body_len != frame.size() - 4) {
        throw CodecError("frame length prefix does not match body size", at);
    }
    at = r.offset();
    uint8_t version = r.u8();
    if (version != kWireVersion) {
        throw CodecError("unsupported version", at);
    }
    at = r.offset();
    uint8_t kind = r.u8();

    Envelope e;
    e.src = r.entity();
    e.dest = r.entity();
    e.message_id = r.uuid();

    switch (kind) {
        case static_cast<uint8_t>(MessageKind::ActionRequest): {
            ActionRequestBody b;
            b.action = r.str();
            b.payload = read_payload(r);
            e.body = std::move(b);
            break;
        }
        case static_cast<uint8_t>(MessageKind::ActionResponse): {
            ActionResponseBody b;
            b.request_id = r.uuid();
            size_t tag_at = r.offset();
            uint8_t tag = r.u8();
            if (tag == kOutcomeOk) {
                b.outcome = read_payload(r);
            } else if (tag == kOutcomeErr) {
                b.outcome = read_error_info(r);
            } else {
                throw CodecError("unknown outcome tag", tag_at);
            }
            e.body = std::move(b);
            break;
        }
        case static_cast<uint8_t>(MessageKind::Ping):
            e.body = PingBody{};
            break;
        case static_cast<uint8_t>(MessageKind::PingResponse): {
            PingResponseBody b;
            b.request_id = r.uuid();
            e.body = b;
            break;
        }
        case static_cast<uint8_t>(MessageKind::Shutdown): {
            ShutdownBody b;
            b.terminal = r.u8() != 0;
            e.body = b;
            break;
        }
        default:
            throw CodecError("unknown message kind byte", at);
    }
    r.expect_end();
    return e;
}

Envelope make_action_request(const EntityId& src, const EntityId& dest, std::string action,
                             Payload payload) {
    Envelope e;
    e.src = src;
    e.dest = dest;
    e.message_id = Uuid128::random();
    e.body = ActionRequestBody{std::move(action), std::move(payload)};
    return e;
}

Envelope make_action_response(const EntityId& src, const EntityId& dest, const Uuid128& request_id,
                              std::variant<Payload, ErrorInfo> outcome) {
    Envelope e;
    e.src = src;
    e.dest = dest;
    e.message_id = Uuid128::random();
    e.body = ActionResponseBody{request_id, std::move(outcome)};
    return e;
}

Envelope make_ping(const EntityId& src, const EntityId& dest) {
    Envelope e;
    e.src = src;
    e.dest = dest;
    e.message_id = Uuid128::random();
    e.body = PingBody{};
    return e;
}

Envelope make_ping_response(const Envelope& request) {
    Envelope e;
    e.src = request.dest;
    e.dest = request.src;
    e.message_id = Uuid128::random();
    e.body = PingResponseBody{request.message_id};
    return e;
}

Envelope make_shutdown(const EntityId& src, const EntityId& dest, bool terminal) {
    Envelope e;
    e.src = src;
    e.dest = dest;
    e.message_id = Uuid128::random();
    e.body = ShutdownBody{terminal};
    return e;
}

}  // namespace agentry

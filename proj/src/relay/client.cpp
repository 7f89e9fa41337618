#include "agentry/relay/client.hpp"

namespace agentry::relay {

namespace {

constexpr std::chrono::milliseconds kDefaultReadTimeout{15000};

[[noreturn]] void raise_error_status(Status st, ByteReader& r) {
    switch (st) {
        case Status::Closed: throw MailboxClosedError();
        case Status::UnknownEntity: throw UnknownEntityError("unknown entity at store");
        case Status::Error: throw TransportError("store error: " + r.str());
        default: throw TransportError("unexpected store status: " + std::string(status_name(st)));
    }
}

}  // namespace

RelayClient::RelayClient(net::Endpoint store, std::chrono::milliseconds connect_timeout)
    : store_(std::move(store)), connect_timeout_(connect_timeout) {}

void RelayClient::ensure_connected() {
    if (!conn_.valid()) {
        conn_ = net::Socket::connect(store_, connect_timeout_);
    }
}

RelayClient::Reply RelayClient::roundtrip(const Bytes& request,
                                          std::chrono::milliseconds read_timeout) {
    std::lock_guard lock(mu_);
    ops_.fetch_add(1, std::memory_order_relaxed);
    for (int attempt = 0;; ++attempt) {
        try {
            ensure_connected();
            net::write_frame(conn_, request);
            bytes_sent_.fetch_add(request.size() + 4, std::memory_order_relaxed);
            auto frame = net::read_frame(conn_, read_timeout);
            if (!frame) throw TimeoutError("store did not respond in time");
            bytes_received_.fetch_add(frame->size() + 4, std::memory_order_relaxed);

            ByteReader r(*frame);
            size_t at = r.offset();
            if (r.u8() != kWireVersion) throw CodecError("unsupported version", at);
            Status st = static_cast<Status>(r.u8());
            Reply reply;
            reply.status = st;
            reply.frame = std::move(*frame);
            reply.body_offset = r.offset();
            return reply;
        } catch (const TransportError&) {
            // One reconnect per call: a stale pooled connection is expected
            // after a store restart.
            conn_.close();
            if (attempt >= 1) throw;
        }
    }
}

Status RelayClient::register_entity(const EntityId& id, const std::optional<BehaviorSpec>& spec) {
    ByteWriter w = begin_request(Opcode::Register);
    w.entity(id);
    w.u8(spec ? 1 : 0);
    if (spec) write_behavior_spec(w, *spec);
    Reply reply = roundtrip(w.take(), kDefaultReadTimeout);
    if (reply.status == Status::Ok || reply.status == Status::AlreadyExists) return reply.status;
    ByteReader r(std::span<const uint8_t>(reply.frame).subspan(reply.body_offset));
    raise_error_status(reply.status, r);
}

void RelayClient::advertise(const EntityId& id, const std::string& endpoint) {
    ByteWriter w = begin_request(Opcode::Advertise);
    w.entity(id);
    w.bstr(endpoint);
    Reply reply = roundtrip(w.take(), kDefaultReadTimeout);
    if (reply.status == Status::Ok) return;
    ByteReader r(std::span<const uint8_t>(reply.frame).subspan(reply.body_offset));
    raise_error_status(reply.status, r);
}

RelayClient::LocateResult RelayClient::locate(const EntityId& id) {
    ByteWriter w = begin_request(Opcode::Locate);
    w.entity(id);
    Reply reply = roundtrip(w.take(), kDefaultReadTimeout);
    ByteReader r(std::span<const uint8_t>(reply.frame).subspan(reply.body_offset));
    LocateResult result;
    if (reply.status == Status::Closed) {
        result.closed = true;
        return result;
    }
    if (reply.status != Status::Ok) raise_error_status(reply.status, r);
    if (r.u8() != 0) result.endpoint = r.str();
    return result;
}

void RelayClient::put_msg(const EntityId& dest, const Bytes& envelope_frame) {
    ByteWriter w = begin_request(Opcode::PutMsg);
    w.entity(dest);
    w.bstr(envelope_frame);
    put_msgs_.fetch_add(1, std::memory_order_relaxed);
    put_msg_bytes_.fetch_add(envelope_frame.size(), std::memory_order_relaxed);
    Reply reply = roundtrip(w.take(), kDefaultReadTimeout);
    if (reply.status == Status::Ok) return;
    ByteReader r(std::span<const uint8_t>(reply.frame).subspan(reply.body_offset));
    raise_error_status(reply.status, r);
}

std::vector<Bytes> RelayClient::poll_msgs(const EntityId& id, uint32_t max,
                                          std::chrono::milliseconds wait) {
    ByteWriter w = begin_request(Opcode::PollMsgs);
    w.entity(id);
    w.u32(max);
    w.u32(static_cast<uint32_t>(wait.count()));
    polls_.fetch_add(1, std::memory_order_relaxed);
    Reply reply = roundtrip(w.take(), wait + kDefaultReadTimeout);
    ByteReader r(std::span<const uint8_t>(reply.frame).subspan(reply.body_offset));
    if (reply.status != Status::Ok) raise_error_status(reply.status, r);
    uint32_t n = r.u32();
    std::vector<Bytes> out;
    out.reserve(n);
    for (uint32_t i = 0; i < n; ++i) out.push_back(r.bstr());
    return out;
}

void RelayClient::close_entity(const EntityId& id) {
    ByteWriter w = begin_request(Opcode::Close);
    w.entity(id);
    Reply reply = roundtrip(w.take(), kDefaultReadTimeout);
    if (reply.status == Status::Ok) return;
    ByteReader r(std::span<const uint8_t>(reply.frame).subspan(reply.body_offset));
    raise_error_status(reply.status, r);
}

std::vector<EntityId> RelayClient::discover(const std::string& behavior_name) {
    ByteWriter w = begin_request(Opcode::Discover);
    w.bstr(behavior_name);
    Reply reply = roundtrip(w.take(), kDefaultReadTimeout);
    ByteReader r(std::span<const uint8_t>(reply.frame).subspan(reply.body_offset));
    if (reply.status != Status::Ok) raise_error_status(reply.status, r);
    uint32_t n = r.u32();
    std::vector<EntityId> out;
    out.reserve(n);
    for (uint32_t i = 0; i < n; ++i) out.push_back(r.entity());
    return out;
}

void RelayClient::obj_put(const std::string& key, const Bytes& bytes,
                          std::optional<std::chrono::milliseconds> ttl) {
    ByteWriter w = begin_request(Opcode::ObjPut);
    w.bstr(key);
    w.bstr(bytes);
    w.u64(ttl ? static_cast<uint64_t>(ttl->count()) : 0);
    obj_puts_.fetch_add(1, std::memory_order_relaxed);
    // Injected store-link emulation can stretch large uploads well past the
    // default read deadline.
    Reply reply = roundtrip(w.take(), std::chrono::minutes(5));
    if (reply.status == Status::Ok) return;
    ByteReader r(std::span<const uint8_t>(reply.frame).subspan(reply.body_offset));
    raise_error_status(reply.status, r);
}

std::optional<Bytes> RelayClient::obj_get(const std::string& key) {
    ByteWriter w = begin_request(Opcode::ObjGet);
    w.bstr(key);
    obj_gets_.fetch_add(1, std::memory_order_relaxed);
    Reply reply = roundtrip(w.take(), std::chrono::minutes(5));
    if (reply.status == Status::NotFound) return std::nullopt;
    ByteReader r(std::span<const uint8_t>(reply.frame).subspan(reply.body_offset));
    if (reply.status != Status::Ok) raise_error_status(reply.status, r);
    return r.bstr();
}

bool RelayClient::obj_del(const std::string& key) {
    ByteWriter w = begin_request(Opcode::ObjDel);
    w.bstr(key);
    Reply reply = roundtrip(w.take(), kDefaultReadTimeout);
    if (reply.status == Status::Ok) return true;
    if (reply.status == Status::NotFound) return false;
    ByteReader r(std::span<const uint8_t>(reply.frame).subspan(reply.body_offset));
    raise_error_status(reply.status, r);
}

std::string RelayClient::stats_json() {
    ByteWriter w = begin_request(Opcode::Stats);
    Reply reply = roundtrip(w.take(), kDefaultReadTimeout);
    ByteReader r(std::span<const uint8_t>(reply.frame).subspan(reply.body_offset));
    if (reply.status != Status::Ok) raise_error_status(reply.status, r);
    return r.str();
}

RelayClient::Counters RelayClient::counters() const {
    Counters c;
    c.ops = ops_.load();
    c.bytes_sent = bytes_sent_.load();
    c.bytes_received = bytes_received_.load();
    c.put_msgs = put_msgs_.load();
    c.put_msg_bytes = put_msg_bytes_.load();
    c.polls = polls_.load();
    c.obj_gets = obj_gets_.load();
    c.obj_puts = obj_puts_.load();
    return c;
}

}  // namespace agentry::relay

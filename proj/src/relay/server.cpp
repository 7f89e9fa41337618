#include "agentry/relay/server.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <thread>

#include <nlohmann/json.hpp>

#include "agentry/log.hpp"

namespace agentry::relay {

namespace {

// Persistence record types.
constexpr uint8_t kRecRegister = 1;
constexpr uint8_t kRecClose = 2;
constexpr uint8_t kRecPut = 3;
constexpr uint8_t kRecConsume = 4;
constexpr uint8_t kRecObjPut = 5;
constexpr uint8_t kRecObjDel = 6;

int64_t unix_ms_now() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

Bytes simple_response(Status st, const std::string& detail = {}) {
    ByteWriter w = begin_response(st);
    if (st == Status::Error) w.bstr(detail);
    return w.take();
}

void write_optional_spec(ByteWriter& w, const std::optional<BehaviorSpec>& spec) {
    w.u8(spec ? 1 : 0);
    if (spec) write_behavior_spec(w, *spec);
}

std::optional<BehaviorSpec> read_optional_spec(ByteReader& r) {
    if (r.u8() == 0) return std::nullopt;
    return read_behavior_spec(r);
}

}  // namespace

RelayServer::RelayServer(RelayServerOptions options) : options_(std::move(options)) {}

RelayServer::~RelayServer() {
    stop();
}

void RelayServer::start() {
    listener_ = net::Listener::bind(options_.host, options_.port);
    port_ = listener_.port();
    started_at_ = std::chrono::steady_clock::now();
    if (options_.data_dir) {
        std::filesystem::create_directories(*options_.data_dir);
        load();
        log_fd_ = ::open((*options_.data_dir / "log.bin").c_str(),
                         O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    }
    acceptor_ = std::thread([this] { accept_loop(); });
}

void RelayServer::stop() {
    bool was = stopping_.exchange(true);
    if (was) return;
    listener_.close();
    if (acceptor_.joinable()) acceptor_.join();
    {
        // Wake long-pollers so sessions can notice the stop flag.
        std::lock_guard lock(mu_);
        for (auto& [_, rec] : entities_) rec.cv->notify_all();
    }
    for (;;) {
        std::list<std::thread> taken;
        {
            std::lock_guard lock(sessions_mu_);
            taken.swap(sessions_);
        }
        if (taken.empty()) break;
        for (auto& t : taken) t.join();
    }
    std::lock_guard lock(mu_);
    if (log_fd_ >= 0) {
        write_snapshot_locked();
        ::close(log_fd_);
        log_fd_ = -1;
    }
}

void RelayServer::accept_loop() {
    while (!stopping_.load()) {
        std::optional<net::Socket> sock;
        try {
            sock = listener_.accept(std::chrono::milliseconds(200));
        } catch (const std::exception&) {
            break;  // listener closed
        }
        if (!sock) continue;
        std::lock_guard lock(sessions_mu_);
        sessions_.emplace_back(
            [this, s = std::make_shared<net::Socket>(std::move(*sock))]() mutable {
                session(std::move(*s));
            });
    }
}

void RelayServer::session(net::Socket sock) {
    open_sessions_.fetch_add(1);
    while (!stopping_.load()) {
        std::optional<Bytes> frame;
        try {
            frame = net::read_frame(sock, std::chrono::milliseconds(250));
        } catch (const std::exception&) {
            break;
        }
        if (!frame) continue;  // idle poll for the stop flag
        bytes_in_.fetch_add(frame->size() + 4, std::memory_order_relaxed);
        Outcome outcome;
        try {
            outcome = handle_request(*frame);
        } catch (const std::exception& e) {
            outcome.response = simple_response(Status::Error, e.what());
        }
        bool delivered = true;
        try {
            net::write_frame(sock, outcome.response);
            bytes_out_.fetch_add(outcome.response.size() + 4, std::memory_order_relaxed);
        } catch (const std::exception&) {
            delivered = false;
        }
        if (outcome.after) outcome.after(delivered);
        if (!delivered) break;
    }
    open_sessions_.fetch_sub(1);
}

std::chrono::milliseconds RelayServer::transit_delay(size_t bytes) const {
    if (options_.inject_latency_ms <= 0) return std::chrono::milliseconds(0);
    double ms = options_.inject_latency_ms;
    if (options_.inject_bandwidth_mbps > 0) {
        double bytes_per_ms = options_.inject_bandwidth_mbps * 1e6 / 8.0 / 1000.0;
        ms += static_cast<double>(bytes) / bytes_per_ms;
    }
    return std::chrono::milliseconds(static_cast<int64_t>(ms));
}

RelayServer::Outcome RelayServer::handle_request(const Bytes& request) {
    ByteReader r(request);
    size_t at = r.offset();
    if (r.u8() != kWireVersion) throw CodecError("unsupported version", at);
    at = r.offset();
    uint8_t op = r.u8();
    if (op >= 0x01 && op <= 0x0B) {
        op_counts_[op].fetch_add(1, std::memory_order_relaxed);
    }
    switch (static_cast<Opcode>(op)) {
        case Opcode::Register: return {op_register(r), nullptr};
        case Opcode::Advertise: return {op_advertise(r), nullptr};
        case Opcode::Locate: return {op_locate(r), nullptr};
        case Opcode::PutMsg: return {op_put_msg(r), nullptr};
        case Opcode::PollMsgs: return op_poll_msgs(r);
        case Opcode::Close: return {op_close(r), nullptr};
        case Opcode::Discover: return {op_discover(r), nullptr};
        case Opcode::ObjPut: return {op_obj_put(r), nullptr};
        case Opcode::ObjGet: return {op_obj_get(r), nullptr};
        case Opcode::ObjDel: return {op_obj_del(r), nullptr};
        case Opcode::Stats: {
            ByteWriter w = begin_response(Status::Ok);
            w.bstr(stats_json());
            return {w.take(), nullptr};
        }
        default:
            throw CodecError("unknown opcode", at);
    }
}

Bytes RelayServer::op_register(ByteReader& r) {
    EntityId id = r.entity();
    std::optional<BehaviorSpec> spec = read_optional_spec(r);

    std::lock_guard lock(mu_);
    if (entities_.count(id)) {
        return simple_response(Status::AlreadyExists);
    }
    EntityRec rec;
    rec.spec = spec;
    entities_.emplace(id, std::move(rec));

    if (log_fd_ >= 0) {
        ByteWriter w;
        w.u8(kRecRegister);
        w.entity(id);
        write_optional_spec(w, spec);
        log_append(w.take(), /*sync=*/true);
        maybe_snapshot_locked();
    }
    return simple_response(Status::Ok);
}

Bytes RelayServer::op_advertise(ByteReader& r) {
    EntityId id = r.entity();
    std::string endpoint = r.str();

    std::lock_guard lock(mu_);
    auto it = entities_.find(id);
    if (it == entities_.end()) return simple_response(Status::UnknownEntity);
    if (it->second.closed) return simple_response(Status::Closed);
    // Re-advertising overwrites; endpoints are never persisted.
    it->second.endpoint = std::move(endpoint);
    return simple_response(Status::Ok);
}

Bytes RelayServer::op_locate(ByteReader& r) {
    EntityId id = r.entity();

    std::lock_guard lock(mu_);
    auto it = entities_.find(id);
    if (it == entities_.end()) return simple_response(Status::UnknownEntity);
    if (it->second.closed) return simple_response(Status::Closed);
    ByteWriter w = begin_response(Status::Ok);
    w.u8(it->second.endpoint ? 1 : 0);
    if (it->second.endpoint) w.bstr(*it->second.endpoint);
    return w.take();
}

Bytes RelayServer::op_put_msg(ByteReader& r) {
    EntityId dest = r.entity();
    Bytes frame = r.bstr();

    std::lock_guard lock(mu_);
    auto it = entities_.find(dest);
    if (it == entities_.end()) return simple_response(Status::UnknownEntity);
    EntityRec& rec = it->second;
    if (rec.closed) return simple_response(Status::Closed);

    // Injected transit delay; visibility stays monotone per mailbox so
    // delays never reorder a queue.
    auto now = std::chrono::steady_clock::now();
    auto visible = now + transit_delay(frame.size());
    if (visible < rec.last_visible) visible = rec.last_visible;
    rec.last_visible = visible;
    rec.msgs_in += 1;
    rec.bytes_in += frame.size();

    if (log_fd_ >= 0) {
        ByteWriter w;
        w.u8(kRecPut);
        w.entity(dest);
        w.bstr(frame);
        log_append(w.take(), /*sync=*/false);
        maybe_snapshot_locked();
    }

    rec.queue.push_back(PendingMsg{std::move(frame), visible});
    rec.cv->notify_all();
    return simple_response(Status::Ok);
}

RelayServer::Outcome RelayServer::op_poll_msgs(ByteReader& r) {
    EntityId id = r.entity();
    uint32_t max = r.u32();
    uint32_t wait_ms = r.u32();
    if (max == 0) max = 1;
    auto wait = std::min<std::chrono::milliseconds>(std::chrono::milliseconds(wait_ms),
                                                    options_.poll_wait_ceiling);
    auto deadline = std::chrono::steady_clock::now() + wait;

    auto collected = std::make_shared<std::vector<Bytes>>();
    {
        std::unique_lock lock(mu_);
        auto it = entities_.find(id);
        if (it == entities_.end()) return {simple_response(Status::UnknownEntity), nullptr};
        auto cv = it->second.cv;

        for (;;) {
            it = entities_.find(id);
            if (it == entities_.end()) return {simple_response(Status::UnknownEntity), nullptr};
            EntityRec& rec = it->second;

            auto now = std::chrono::steady_clock::now();
            while (!rec.queue.empty() && collected->size() < max &&
                   rec.queue.front().visible_at <= now) {
                collected->push_back(std::move(rec.queue.front().frame));
                rec.queue.pop_front();
            }
            if (!collected->empty()) break;
            if (rec.closed && rec.queue.empty()) {
                return {simple_response(Status::Closed), nullptr};
            }
            if (stopping_.load() || now >= deadline) break;

            auto wake = deadline;
            if (!rec.queue.empty()) wake = std::min(wake, rec.queue.front().visible_at);
            cv->wait_until(lock, wake);
        }
    }

    ByteWriter w = begin_response(Status::Ok);
    w.u32(static_cast<uint32_t>(collected->size()));
    for (const auto& frame : *collected) w.bstr(frame);

    Outcome outcome;
    outcome.response = w.take();
    if (!collected->empty()) {
        // Dequeues commit only once the response reaches the client; a dead
        // poller's messages go back to the front of the queue in order.
        outcome.after = [this, id, collected](bool delivered) {
            std::lock_guard lock(mu_);
            if (delivered) {
                if (log_fd_ >= 0) {
                    ByteWriter rec;
                    rec.u8(kRecConsume);
                    rec.entity(id);
                    rec.u32(static_cast<uint32_t>(collected->size()));
                    log_append(rec.take(), /*sync=*/false);
                    maybe_snapshot_locked();
                }
                return;
            }
            auto it = entities_.find(id);
            if (it == entities_.end()) return;
            auto now = std::chrono::steady_clock::now();
            for (auto frame = collected->rbegin(); frame != collected->rend(); ++frame) {
                it->second.queue.push_front(PendingMsg{std::move(*frame), now});
            }
            it->second.cv->notify_all();
        };
    }
    return outcome;
}

Bytes RelayServer::op_close(ByteReader& r) {
    EntityId id = r.entity();

    std::lock_guard lock(mu_);
    auto it = entities_.find(id);
    if (it == entities_.end()) return simple_response(Status::UnknownEntity);
    it->second.closed = true;
    it->second.endpoint.reset();
    it->second.cv->notify_all();
    if (log_fd_ >= 0) {
        ByteWriter w;
        w.u8(kRecClose);
        w.entity(id);
        log_append(w.take(), /*sync=*/true);
        maybe_snapshot_locked();
    }
    return simple_response(Status::Ok);
}

Bytes RelayServer::op_discover(ByteReader& r) {
    std::string name = r.str();

    std::lock_guard lock(mu_);
    std::vector<EntityId> found;
    for (const auto& [id, rec] : entities_) {
        if (id.role == EntityRole::Agent && rec.spec && !rec.closed &&
            behavior_is_a(*rec.spec, name)) {
            found.push_back(id);
        }
    }
    ByteWriter w = begin_response(Status::Ok);
    w.u32(static_cast<uint32_t>(found.size()));
    for (const auto& id : found) w.entity(id);
    return w.take();
}

Bytes RelayServer::op_obj_put(ByteReader& r) {
    std::string key = r.str();
    Bytes bytes = r.bstr();
    uint64_t ttl_ms = r.u64();

    auto delay = transit_delay(bytes.size());
    {
        std::lock_guard lock(mu_);
        StoredObject obj;
        obj.bytes = bytes;
        if (ttl_ms > 0) obj.expires_unix_ms = unix_ms_now() + static_cast<int64_t>(ttl_ms);
        objects_[key] = std::move(obj);
        if (log_fd_ >= 0) {
            ByteWriter w;
            w.u8(kRecObjPut);
            w.bstr(key);
            w.bstr(bytes);
            w.u64(ttl_ms);
            log_append(w.take(), /*sync=*/false);
            maybe_snapshot_locked();
        }
    }
    // Upload hop pays the emulated link cost.
    if (delay.count() > 0) std::this_thread::sleep_for(delay);
    return simple_response(Status::Ok);
}

Bytes RelayServer::op_obj_get(ByteReader& r) {
    std::string key = r.str();

    Bytes bytes;
    {
        std::lock_guard lock(mu_);
        auto it = objects_.find(key);
        if (it != objects_.end() && it->second.expires_unix_ms &&
            *it->second.expires_unix_ms <= unix_ms_now()) {
            objects_.erase(it);
            it = objects_.end();
        }
        if (it == objects_.end()) return simple_response(Status::NotFound);
        bytes = it->second.bytes;
    }
    // Download hop.
    auto delay = transit_delay(bytes.size());
    if (delay.count() > 0) std::this_thread::sleep_for(delay);
    ByteWriter w = begin_response(Status::Ok);
    w.bstr(bytes);
    return w.take();
}

Bytes RelayServer::op_obj_del(ByteReader& r) {
    std::string key = r.str();

    std::lock_guard lock(mu_);
    bool existed = objects_.erase(key) > 0;
    if (existed && log_fd_ >= 0) {
        ByteWriter w;
        w.u8(kRecObjDel);
        w.bstr(key);
        log_append(w.take(), /*sync=*/false);
        maybe_snapshot_locked();
    }
    return simple_response(existed ? Status::Ok : Status::NotFound);
}

void RelayServer::log_append(const Bytes& record, bool sync) {
    if (log_fd_ < 0) return;
    Bytes framed;
    framed.reserve(record.size() + 4);
    framed.push_back(static_cast<uint8_t>(record.size() >> 24));
    framed.push_back(static_cast<uint8_t>(record.size() >> 16));
    framed.push_back(static_cast<uint8_t>(record.size() >> 8));
    framed.push_back(static_cast<uint8_t>(record.size()));
    framed.insert(framed.end(), record.begin(), record.end());
    size_t off = 0;
    while (off < framed.size()) {
        ssize_t n = ::write(log_fd_, framed.data() + off, framed.size() - off);
        if (n <= 0) break;
        off += static_cast<size_t>(n);
    }
    // Durability point: registrations and closures fsync; message traffic
    // rides on the page cache.
    if (sync) ::fsync(log_fd_);
    ++mutations_since_snapshot_;
}

void RelayServer::maybe_snapshot_locked() {
    if (log_fd_ < 0 || mutations_since_snapshot_ < options_.snapshot_every) return;
    write_snapshot_locked();
}

void RelayServer::write_snapshot_locked() {
    if (!options_.data_dir) return;
    ByteWriter w;
    w.u32(static_cast<uint32_t>(entities_.size()));
    for (const auto& [id, rec] : entities_) {
        w.entity(id);
        write_optional_spec(w, rec.spec);
        w.u8(rec.closed ? 1 : 0);
        w.u32(static_cast<uint32_t>(rec.queue.size()));
        for (const auto& m : rec.queue) w.bstr(m.frame);
    }
    w.u32(static_cast<uint32_t>(objects_.size()));
    for (const auto& [key, obj] : objects_) {
        w.bstr(key);
        w.bstr(obj.bytes);
        w.u64(obj.expires_unix_ms ? static_cast<uint64_t>(*obj.expires_unix_ms) : 0);
    }

    auto tmp = *options_.data_dir / "snapshot.tmp";
    auto final_path = *options_.data_dir / "snapshot.bin";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        Bytes b = w.take();
        out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
        out.flush();
    }
    std::filesystem::rename(tmp, final_path);
    // Snapshot covers everything: restart the log.
    if (log_fd_ >= 0) {
        ::close(log_fd_);
        log_fd_ = ::open((*options_.data_dir / "log.bin").c_str(),
                         O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    }
    mutations_since_snapshot_ = 0;
}

void RelayServer::load() {
    auto snapshot_path = *options_.data_dir / "snapshot.bin";
    if (std::filesystem::exists(snapshot_path)) {
        std::ifstream in(snapshot_path, std::ios::binary);
        Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        try {
            ByteReader r(data);
            uint32_t n = r.u32();
            for (uint32_t i = 0; i < n; ++i) {
                EntityId id = r.entity();
                EntityRec rec;
                rec.spec = read_optional_spec(r);
                rec.closed = r.u8() != 0;
                uint32_t q = r.u32();
                for (uint32_t j = 0; j < q; ++j) {
                    rec.queue.push_back(PendingMsg{r.bstr(), std::chrono::steady_clock::now()});
                }
                entities_.emplace(id, std::move(rec));
            }
            uint32_t objs = r.u32();
            for (uint32_t i = 0; i < objs; ++i) {
                std::string key = r.str();
                StoredObject obj;
                obj.bytes = r.bstr();
                uint64_t exp = r.u64();
                if (exp > 0) obj.expires_unix_ms = static_cast<int64_t>(exp);
                objects_.emplace(std::move(key), std::move(obj));
            }
        } catch (const CodecError&) {
            // Torn snapshot: ignore the rest.
        }
    }

    auto log_path = *options_.data_dir / "log.bin";
    if (std::filesystem::exists(log_path)) {
        std::ifstream in(log_path, std::ios::binary);
        Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        size_t off = 0;
        while (off + 4 <= data.size()) {
            size_t len = (static_cast<size_t>(data[off]) << 24) |
                         (static_cast<size_t>(data[off + 1]) << 16) |
                         (static_cast<size_t>(data[off + 2]) << 8) |
                         static_cast<size_t>(data[off + 3]);
            if (off + 4 + len > data.size()) break;  // torn tail record
            ByteReader r(std::span<const uint8_t>(data.data() + off + 4, len));
            try {
                apply_record(r);
            } catch (const CodecError&) {
                break;
            }
            off += 4 + len;
        }
    }
}

void RelayServer::apply_record(ByteReader& r) {
    switch (r.u8()) {
        case kRecRegister: {
            EntityId id = r.entity();
            EntityRec rec;
            rec.spec = read_optional_spec(r);
            entities_.emplace(id, std::move(rec));
            break;
        }
        case kRecClose: {
            EntityId id = r.entity();
            auto it = entities_.find(id);
            if (it != entities_.end()) it->second.closed = true;
            break;
        }
        case kRecPut: {
            EntityId id = r.entity();
            Bytes frame = r.bstr();
            auto it = entities_.find(id);
            if (it != entities_.end()) {
                it->second.queue.push_back(
                    PendingMsg{std::move(frame), std::chrono::steady_clock::now()});
            }
            break;
        }
        case kRecConsume: {
            EntityId id = r.entity();
            uint32_t n = r.u32();
            auto it = entities_.find(id);
            if (it != entities_.end()) {
                for (uint32_t i = 0; i < n && !it->second.queue.empty(); ++i) {
                    it->second.queue.pop_front();
                }
            }
            break;
        }
        case kRecObjPut: {
            std::string key = r.str();
            StoredObject obj;
            obj.bytes = r.bstr();
            uint64_t ttl = r.u64();
            if (ttl > 0) obj.expires_unix_ms = unix_ms_now() + static_cast<int64_t>(ttl);
            objects_[key] = std::move(obj);
            break;
        }
        case kRecObjDel: {
            objects_.erase(r.str());
            break;
        }
        default:
            throw CodecError("unknown log record");
    }
}

std::string RelayServer::stats_json() {
    nlohmann::json j;
    j["uptime_ms"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - started_at_)
                         .count();
    j["bytes_in"] = bytes_in_.load();
    j["bytes_out"] = bytes_out_.load();
    j["open_sessions"] = open_sessions_.load();
    static const char* names[] = {"",      "register", "advertise", "locate",  "put_msg",
                                  "poll",  "close",    "discover",  "obj_put", "obj_get",
                                  "obj_del"};
    nlohmann::json ops;
    for (int i = 1; i <= 10; ++i) ops[names[i]] = op_counts_[i].load();
    j["ops"] = ops;

    std::lock_guard lock(mu_);
    nlohmann::json ents = nlohmann::json::object();
    for (const auto& [id, rec] : entities_) {
        nlohmann::json e;
        e["pending"] = rec.queue.size();
        e["msgs_in"] = rec.msgs_in;
        e["bytes_in"] = rec.bytes_in;
        e["closed"] = rec.closed;
        if (rec.endpoint) e["endpoint"] = *rec.endpoint;
        if (rec.spec) e["behavior"] = rec.spec->name;
        ents[id.to_string()] = std::move(e);
    }
    j["entities"] = std::move(ents);
    j["objects"] = objects_.size();
    return j.dump();
}

}  // namespace agentry::relay

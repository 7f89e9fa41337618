#include "agentry/dist_exchange.hpp"

#include <nlohmann/json.hpp>

#include "agentry/codec.hpp"
#include "agentry/log.hpp"

namespace agentry {

using relay::Opcode;
using relay::Status;

DistExchange::DistExchange(const net::Endpoint& store, EntityId id, DistOptions options)
    : id_(id), options_(std::move(options)), store_(store) {
    control_ = std::make_unique<relay::RelayClient>(store_);
    poller_client_ = std::make_unique<relay::RelayClient>(store_);
}

std::unique_ptr<DistExchange> DistExchange::connect(const net::Endpoint& store, EntityRole role,
                                                    std::optional<BehaviorSpec> spec,
                                                    DistOptions options) {
    auto ex = std::unique_ptr<DistExchange>(
        new DistExchange(store, EntityId::random(role), std::move(options)));
    ex->start(spec, /*fresh=*/true);
    return ex;
}

std::unique_ptr<DistExchange> DistExchange::attach(const net::Endpoint& store, const EntityId& id,
                                                   DistOptions options) {
    auto ex = std::unique_ptr<DistExchange>(new DistExchange(store, id, std::move(options)));
    ex->start(std::nullopt, /*fresh=*/false);
    return ex;
}

void DistExchange::start(const std::optional<BehaviorSpec>& spec, bool fresh) {
    Status st = control_->register_entity(id_, spec);
    if (fresh && st == Status::AlreadyExists) {
        throw AgentryError("id collision at store: " + id_.to_string());
    }

    DepotRemote remote;
    remote.self = id_;
    remote.peer_fetch = [this](const std::string& ep_text, const Uuid128& object_id) {
        auto ep = net::Endpoint::parse(ep_text);
        if (!ep) return std::optional<Bytes>{};
        net::Socket sock = net::Socket::connect(*ep, std::chrono::seconds(5));
        ByteWriter w = relay::begin_request(Opcode::Fetch);
        w.uuid(object_id);
        net::write_frame(sock, w.take());
        auto frame = net::read_frame(sock, std::chrono::minutes(2));
        if (!frame) throw TimeoutError("peer fetch timed out");
        ByteReader r(*frame);
        size_t at = r.offset();
        if (r.u8() != kWireVersion) throw CodecError("unsupported version", at);
        Status status = static_cast<Status>(r.u8());
        if (status == Status::NotFound) return std::optional<Bytes>{};
        if (status != Status::Ok) throw TransportError("peer fetch failed");
        return std::optional<Bytes>(r.bstr());
    };
    remote.store_put = [this](const std::string& key, const Bytes& bytes) {
        data_client().obj_put(key, bytes, options_.depot.ref_ttl);
    };
    remote.store_get = [this](const std::string& key) { return data_client().obj_get(key); };
    remote.serve_endpoint = [this] { return direct_endpoint(); };
    depot_ = std::make_unique<ObjectDepot>(options_.depot, std::move(remote));

    if (options_.direct_listen) {
        listener_ = net::Listener::bind(options_.listen_host, 0);
        acceptor_ = std::thread([this] { accept_loop(); });
        control_->advertise(
            id_, net::Endpoint{options_.advertise_host, listener_.port()}.to_string());
    }
    poller_ = std::thread([this] { poll_loop(); });
}

DistExchange::~DistExchange() {
    stopping_ = true;
    depot_->detach_remote();
    listener_.close();
    if (acceptor_.joinable()) acceptor_.join();
    {
        std::lock_guard lock(sessions_mu_);
        // Sessions poll the stop flag on a short deadline.
    }
    if (poller_.joinable()) poller_.join();
    for (;;) {
        std::list<std::thread> taken;
        {
            std::lock_guard lock(sessions_mu_);
            taken.swap(sessions_);
        }
        if (taken.empty()) break;
        for (auto& t : taken) t.join();
    }
}

std::optional<std::string> DistExchange::direct_endpoint() const {
    if (!options_.direct_listen || !listener_.valid()) return std::nullopt;
    return net::Endpoint{options_.advertise_host, listener_.port()}.to_string();
}

relay::RelayClient& DistExchange::data_client() {
    std::call_once(data_once_, [this] {
        data_client_ = std::make_unique<relay::RelayClient>(store_);
    });
    return *data_client_;
}

bool DistExchange::try_direct(const net::Endpoint& ep, const Bytes& frame) {
    std::shared_ptr<PooledConn> conn;
    {
        std::lock_guard lock(pool_mu_);
        auto& slot = conns_[ep.to_string()];
        if (!slot) {
            slot = std::make_shared<PooledConn>();
            slot->endpoint = ep;
        }
        conn = slot;
    }
    std::lock_guard lock(conn->mu);
    try {
        if (!conn->socket.valid()) {
            conn->socket = net::Socket::connect(ep, std::chrono::seconds(2));
        }
        ByteWriter w = relay::begin_request(Opcode::DirectMsg);
        w.bstr(frame);
        net::write_frame(conn->socket, w.take());
        // Per-message acknowledgment: a kernel-buffered write is not
        // delivery, and the relay fallback needs a reliable failure signal.
        auto ack = net::read_frame(conn->socket, std::chrono::seconds(10));
        if (!ack) throw TimeoutError("no direct-send ack");
        ByteReader r(*ack);
        r.u8();  // version
        Status st = static_cast<Status>(r.u8());
        if (st == Status::Closed) throw MailboxClosedError();
        if (st != Status::Ok) throw TransportError("direct send rejected");
        conn->last_used = std::chrono::steady_clock::now();
        return true;
    } catch (const MailboxClosedError&) {
        throw;
    } catch (const std::exception&) {
        conn->socket.close();
        return false;
    }
}

void DistExchange::send(const Envelope& e) {
    Bytes frame = encode_envelope(e);

    if (!options_.relay_only_messaging) {
        // 1) Cached direct route.
        std::optional<net::Endpoint> cached;
        bool relay_cached = false;
        {
            std::lock_guard lock(routes_mu_);
            auto it = routes_.find(e.dest);
            if (it != routes_.end()) {
                if (it->second.kind == Route::Kind::Direct) {
                    cached = it->second.endpoint;
                } else if (std::chrono::steady_clock::now() - it->second.demoted_at <
                           options_.reprobe_interval) {
                    relay_cached = true;  // demoted recently; skip the probe
                }
            }
        }
        if (cached) {
            if (try_direct(*cached, frame)) {
                direct_sends_.fetch_add(1, std::memory_order_relaxed);
                return;
            }
            direct_failures_.fetch_add(1, std::memory_order_relaxed);
            std::lock_guard lock(routes_mu_);
            routes_[e.dest] = {Route::Kind::Relay, {}, std::chrono::steady_clock::now()};
            relay_cached = true;
        }

        // 2) LOCATE, then attempt direct.
        if (!relay_cached) {
            auto located = control_->locate(e.dest);
            if (located.closed) {
                throw MailboxClosedError("mailbox closed: " + e.dest.to_string());
            }
            if (located.endpoint) {
                auto ep = net::Endpoint::parse(*located.endpoint);
                if (ep && try_direct(*ep, frame)) {
                    direct_sends_.fetch_add(1, std::memory_order_relaxed);
                    std::lock_guard lock(routes_mu_);
                    routes_[e.dest] = {Route::Kind::Direct, *ep, {}};
                    return;
                }
                direct_failures_.fetch_add(1, std::memory_order_relaxed);
                std::lock_guard lock(routes_mu_);
                routes_[e.dest] = {Route::Kind::Relay, {}, std::chrono::steady_clock::now()};
            }
        }
    }

    // 3) Relay fallback.
    try {
        control_->put_msg(e.dest, frame);
        relay_sends_.fetch_add(1, std::memory_order_relaxed);
    } catch (const MailboxClosedError&) {
        throw;
    } catch (const UnknownEntityError&) {
        throw;
    } catch (const std::exception& ex) {
        throw TransportError(std::string("both direct and relay paths failed: ") + ex.what());
    }
}

void DistExchange::enqueue_incoming(Envelope e) {
    {
        std::lock_guard lock(in_mu_);
        auto& window = dedup_[e.src];
        if (window.seen.count(e.message_id)) {
            duplicates_dropped_.fetch_add(1, std::memory_order_relaxed);
            return;
        }
        window.seen.insert(e.message_id);
        window.order.push_back(e.message_id);
        if (window.order.size() > options_.dedup_window) {
            window.seen.erase(window.order.front());
            window.order.pop_front();
        }
        incoming_.push_back(std::move(e));
    }
    in_cv_.notify_one();
}

Envelope DistExchange::recv(std::chrono::milliseconds timeout) {
    std::unique_lock lock(in_mu_);
    bool ready = in_cv_.wait_for(lock, timeout, [&] { return !incoming_.empty() || own_closed_; });
    if (!incoming_.empty()) {
        Envelope e = std::move(incoming_.front());
        incoming_.pop_front();
        return e;
    }
    if (own_closed_) throw MailboxClosedError("mailbox closed: " + id_.to_string());
    (void)ready;
    throw TimeoutError();
}

void DistExchange::close(const EntityId& target) {
    control_->close_entity(target);
    if (target == id_) {
        {
            std::lock_guard lock(in_mu_);
            own_closed_ = true;
        }
        in_cv_.notify_all();
    }
}

std::vector<EntityId> DistExchange::discover(std::string_view behavior_name) {
    return control_->discover(std::string(behavior_name));
}

void DistExchange::poll_loop() {
    uint32_t backoff_ms = 200;
    while (!stopping_.load()) {
        std::vector<Bytes> frames;
        try {
            frames = poller_client_->poll_msgs(id_, 64, options_.poll_wait);
            backoff_ms = 200;
        } catch (const MailboxClosedError&) {
            {
                std::lock_guard lock(in_mu_);
                own_closed_ = true;
            }
            in_cv_.notify_all();
            break;
        } catch (const std::exception& ex) {
            // Store flap; retry with backoff (messages persist server-side).
            logging::emit({{"event", "poll-error"}, {"agent", id_.to_string()}, {"error", ex.what()}});
            if (interruptible_sleep(backoff_ms)) break;
            backoff_ms = std::min<uint32_t>(backoff_ms * 2, 5000);
            continue;
        }
        for (const auto& frame : frames) {
            try {
                enqueue_incoming(decode_envelope(frame));
            } catch (const CodecError& ex) {
                logging::emit({{"event", "drop-malformed"}, {"error", ex.what()}});
            }
        }
        sweep_idle_connections();
    }
}

bool DistExchange::interruptible_sleep(uint32_t ms) {
    auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(ms);
    while (std::chrono::steady_clock::now() < deadline) {
        if (stopping_.load()) return true;
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    return stopping_.load();
}

void DistExchange::sweep_idle_connections() {
    std::lock_guard lock(pool_mu_);
    auto now = std::chrono::steady_clock::now();
    for (auto it = conns_.begin(); it != conns_.end();) {
        auto conn = it->second;
        if (conn->mu.try_lock()) {
            bool idle = conn->socket.valid() && now - conn->last_used > options_.idle_close;
            if (idle) conn->socket.close();
            bool erase = !conn->socket.valid();
            conn->mu.unlock();
            if (erase) {
                it = conns_.erase(it);
                continue;
            }
        }
        ++it;
    }
}

void DistExchange::accept_loop() {
    while (!stopping_.load()) {
        std::optional<net::Socket> sock;
        try {
            sock = listener_.accept(std::chrono::milliseconds(200));
        } catch (const std::exception&) {
            break;
        }
        if (!sock) continue;
        std::lock_guard lock(sessions_mu_);
        sessions_.emplace_back(
            [this, s = std::make_shared<net::Socket>(std::move(*sock))]() mutable {
                peer_session(std::move(*s));
            });
    }
}

void DistExchange::peer_session(net::Socket sock) {
    while (!stopping_.load()) {
        std::optional<Bytes> frame;
        try {
            frame = net::read_frame(sock, std::chrono::milliseconds(250));
        } catch (const std::exception&) {
            break;
        }
        if (!frame) continue;

        Bytes response;
        try {
            ByteReader r(*frame);
            size_t at = r.offset();
            if (r.u8() != kWireVersion) throw CodecError("unsupported version", at);
            at = r.offset();
            Opcode op = static_cast<Opcode>(r.u8());
            if (op == Opcode::DirectMsg) {
                Bytes env_frame = r.bstr();
                Envelope e = decode_envelope(env_frame);
                bool closed;
                {
                    std::lock_guard lock(in_mu_);
                    closed = own_closed_;
                }
                if (closed) {
                    response = relay::begin_response(Status::Closed).take();
                } else {
                    if (e.dest == id_) {
                        enqueue_incoming(std::move(e));
                    } else {
                        logging::emit({{"event", "drop-misrouted"},
                                       {"dest", e.dest.to_string()},
                                       {"agent", id_.to_string()}});
                    }
                    response = relay::begin_response(Status::Ok).take();
                }
            } else if (op == Opcode::Fetch) {
                Uuid128 object_id = r.uuid();
                auto bytes = depot_->serve_lookup(object_id);
                if (bytes) {
                    ByteWriter w = relay::begin_response(Status::Ok);
                    w.bstr(*bytes);
                    response = w.take();
                } else {
                    response = relay::begin_response(Status::NotFound).take();
                }
            } else {
                throw CodecError("unknown peer opcode", at);
            }
        } catch (const std::exception& ex) {
            ByteWriter w = relay::begin_response(Status::Error);
            w.bstr(std::string(ex.what()));
            response = w.take();
        }
        try {
            net::write_frame(sock, response);
        } catch (const std::exception&) {
            break;
        }
    }
}

DistExchange::Counters DistExchange::counters() const {
    Counters c;
    c.direct_sends = direct_sends_.load();
    c.relay_sends = relay_sends_.load();
    c.direct_failures = direct_failures_.load();
    c.duplicates_dropped = duplicates_dropped_.load();
    c.control = control_->counters();
    c.poller = poller_client_->counters();
    if (data_client_) c.data = data_client_->counters();
    return c;
}

DistHub::DistHub(net::Endpoint store, DistOptions options)
    : store_(store), options_(std::move(options)), control_(store) {}

EntityId DistHub::register_entity(EntityRole role, std::optional<BehaviorSpec> spec) {
    std::lock_guard lock(mu_);
    EntityId id = EntityId::random(role);
    Status st = control_.register_entity(id, spec);
    if (st == Status::AlreadyExists) {
        throw AgentryError("id collision at store: " + id.to_string());
    }
    return id;
}

std::unique_ptr<ExchangeClient> DistHub::bind(const EntityId& id) {
    return DistExchange::attach(store_, id, options_);
}

void DistHub::close(const EntityId& id) {
    std::lock_guard lock(mu_);
    control_.close_entity(id);
}

std::vector<EntityId> DistHub::discover(std::string_view behavior_name) {
    std::lock_guard lock(mu_);
    return control_.discover(std::string(behavior_name));
}

}  // namespace agentry

#include "agentry/local_exchange.hpp"

#include "agentry/dataplane.hpp"

namespace agentry {

namespace {

class LocalClient : public ExchangeClient {
public:
    LocalClient(std::shared_ptr<LocalExchange> ex, EntityId id)
        : exchange_(std::move(ex)), id_(id), depot_(DepotOptions{}) {}

    const EntityId& id() const override { return id_; }
    void send(const Envelope& e) override { exchange_->send(e); }
    Envelope recv(std::chrono::milliseconds timeout) override {
        return exchange_->recv(id_, timeout);
    }
    void close(const EntityId& target) override { exchange_->close(target); }
    std::vector<EntityId> discover(std::string_view name) override {
        return exchange_->discover(name);
    }
    ObjectDepot* depot() override { return &depot_; }

private:
    std::shared_ptr<LocalExchange> exchange_;
    EntityId id_;
    ObjectDepot depot_;
};

}  // namespace

EntityId LocalExchange::register_entity(EntityRole role, std::optional<BehaviorSpec> spec) {
    std::lock_guard lock(mu_);
    EntityId id = EntityId::random(role);
    // 128-bit collisions are negligible, but uniqueness is a contract.
    while (mailboxes_.count(id)) id = EntityId::random(role);
    mailboxes_.emplace(id, std::make_shared<Mailbox>());
    if (spec) specs_.emplace(id, std::move(*spec));
    return id;
}

std::unique_ptr<ExchangeClient> LocalExchange::bind(const EntityId& id) {
    find(id);  // existence check
    return std::make_unique<LocalClient>(shared_from_this(), id);
}

std::shared_ptr<LocalExchange::Mailbox> LocalExchange::find(const EntityId& id) {
    std::lock_guard lock(mu_);
    auto it = mailboxes_.find(id);
    if (it == mailboxes_.end()) {
        throw UnknownEntityError("unknown entity " + id.to_string());
    }
    return it->second;
}

void LocalExchange::send(const Envelope& e) {
    auto box = find(e.dest);
    {
        std::lock_guard lock(box->mu);
        if (box->state == MailboxState::Closed) {
            throw MailboxClosedError("mailbox closed: " + e.dest.to_string());
        }
        box->queue.push_back(e);
    }
    box->cv.notify_one();
}

Envelope LocalExchange::recv(const EntityId& id, std::chrono::milliseconds timeout) {
    auto box = find(id);
    std::unique_lock lock(box->mu);
    bool ready = box->cv.wait_for(lock, timeout, [&] {
        return !box->queue.empty() || box->state == MailboxState::Closed;
    });
    if (!box->queue.empty()) {
        Envelope e = std::move(box->queue.front());
        box->queue.pop_front();
        return e;
    }
    if (box->state == MailboxState::Closed) {
        // Closed and drained.
        throw MailboxClosedError("mailbox closed: " + id.to_string());
    }
    (void)ready;
    throw TimeoutError();
}

void LocalExchange::close(const EntityId& id) {
    auto box = find(id);
    {
        std::lock_guard lock(box->mu);
        box->state = MailboxState::Closed;
        // Queued envelopes stay drainable by the owner until empty.
    }
    box->cv.notify_all();
}

std::vector<EntityId> LocalExchange::discover(std::string_view behavior_name) {
    std::lock_guard lock(mu_);
    std::vector<EntityId> out;
    for (const auto& [id, spec] : specs_) {
        if (id.role == EntityRole::Agent && behavior_is_a(spec, behavior_name)) {
            out.push_back(id);
        }
    }
    return out;
}

MailboxState LocalExchange::state(const EntityId& id) {
    auto box = find(id);
    std::lock_guard lock(box->mu);
    return box->state;
}

size_t LocalExchange::registered_count() {
    std::lock_guard lock(mu_);
    return mailboxes_.size();
}

}  // namespace agentry

#pragma once

#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <unordered_map>

#include "agentry/exchange.hpp"

namespace agentry {

// In-process exchange: mailboxes are in-memory FIFO queues. Suitable for
// tests and single-process deployments; fully internally synchronized.
class LocalExchange : public ExchangeHub,
                      public std::enable_shared_from_this<LocalExchange> {
public:
    static std::shared_ptr<LocalExchange> create() {
        return std::shared_ptr<LocalExchange>(new LocalExchange());
    }

    EntityId register_entity(EntityRole role,
                             std::optional<BehaviorSpec> spec = std::nullopt) override;
    std::unique_ptr<ExchangeClient> bind(const EntityId& id) override;
    void close(const EntityId& id) override;
    std::vector<EntityId> discover(std::string_view behavior_name) override;

    // Sender never blocks: queues are unbounded while the mailbox is open.
    void send(const Envelope& e);
    Envelope recv(const EntityId& id, std::chrono::milliseconds timeout);

    MailboxState state(const EntityId& id);
    size_t registered_count();

private:
    LocalExchange() = default;

    struct Mailbox {
        std::mutex mu;
        std::condition_variable cv;
        MailboxState state = MailboxState::Open;
        std::deque<Envelope> queue;
    };

    std::shared_ptr<Mailbox> find(const EntityId& id);

    std::mutex mu_;
    std::unordered_map<EntityId, std::shared_ptr<Mailbox>> mailboxes_;
    std::unordered_map<EntityId, BehaviorSpec> specs_;
};

}  // namespace agentry

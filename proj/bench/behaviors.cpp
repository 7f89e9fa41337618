#include "behaviors.hpp"

#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cstring>
#include <mutex>
#include <thread>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "agentry/dataplane.hpp"
#include "agentry/launch/registry.hpp"
#include "agentry/launch/state_store.hpp"
#include "agentry/runtime.hpp"

namespace agentry::bench {

namespace {

using nlohmann::json;

json parse_args(const std::string& args) {
    if (args.empty()) return json::object();
    return json::parse(args);
}

class ExampleBehavior : public Behavior {
public:
    ExampleBehavior() : Behavior("Example") {
        action("square", [this](const Bytes& arg) {
            double value = json::parse(to_string(arg)).get<double>();
            return to_bytes(json(value * value).dump());
        });
        loop("count", [this](ShutdownSignal& shutdown) {
            while (!shutdown.wait_for(std::chrono::seconds(1))) {
                ++count_;
            }
        });
    }

private:
    std::atomic<uint64_t> count_{0};
};

class EchoBehavior : public Behavior {
public:
    EchoBehavior() : Behavior("Echo") {
        set_internally_synchronized(true);
        // Raw passthrough: a reference payload is forwarded, never fetched.
        action_raw("noop", [](const Payload& p) { return p; });
        // Materializing echo: the agent reads the data (resolving references)
        // and the result is re-wrapped by payload policy on the way out.
        action("echo", [](const Bytes& b) { return b; });
    }
};

class SleeperBehavior : public Behavior {
public:
    explicit SleeperBehavior(const std::string& args) : Behavior("Sleeper") {
        json a = parse_args(args);
        set_max_action_concurrency(a.value("concurrency", 1));
        set_internally_synchronized(true);
        action("sleep", [](const Bytes& arg) {
            json req = json::parse(to_string(arg));
            std::this_thread::sleep_for(std::chrono::milliseconds(req.value("ms", 1000)));
            return to_bytes("{}");
        });
    }
};

class WorkerBehavior : public Behavior {
public:
    WorkerBehavior() : Behavior("Worker") {
        set_internally_synchronized(true);
        action_raw("work", [](const Payload&) { return Payload{}; });
    }
};

class ProteinFolderBehavior : public Behavior {
public:
    ProteinFolderBehavior() : Behavior("ProteinFolder") {
        action("fold", [](const Bytes& b) { return b; });
    }

protected:
    ProteinFolderBehavior(std::string name, std::vector<std::string> parents)
        : Behavior(std::move(name), std::move(parents)) {
        action("fold", [](const Bytes& b) { return b; });
    }
};

class OpenProteinFolderBehavior : public ProteinFolderBehavior {
public:
    OpenProteinFolderBehavior()
        : ProteinFolderBehavior("OpenProteinFolder", {"ProteinFolder"}) {}
};

// One link of an action chain: forwards the payload to the next stage
// untouched (references are never materialized mid-chain) or, at the tail,
// resolves it once and echoes the original payload back.
class ChainStageBehavior : public Behavior {
public:
    explicit ChainStageBehavior(const std::string& args) : Behavior("ChainStage") {
        json a = parse_args(args);
        if (a.contains("next") && !a["next"].is_null()) {
            next_ = EntityId::parse(a["next"].get<std::string>());
        }
        set_internally_synchronized(true);
        action_raw("relay", [this](const Payload& p) {
            if (next_) {
                auto result =
                    ctx().handle_to(*next_).call("relay", p, std::chrono::minutes(5));
                if (!result.ok()) {
                    throw AgentryError("downstream relay failed: " + result.error().to_string());
                }
                return result.payload();
            }
            consumed_bytes_ += ctx().materialize(p).size();
            return p;
        });
        action("stats", [this](const Bytes&) {
            json out;
            out["consumed_bytes"] = consumed_bytes_.load();
            if (ObjectDepot* depot = ctx().depot()) {
                auto c = depot->counters();
                out["fetches"] = c.fetches;
                out["peer_fetches"] = c.peer_fetches;
                out["store_fetches"] = c.store_fetches;
                out["cache_hits"] = c.cache_hits;
            }
            return to_bytes(out.dump());
        });
    }

private:
    std::optional<EntityId> next_;
    std::atomic<uint64_t> consumed_bytes_{0};
};

class ChatterBehavior : public Behavior {
public:
    ChatterBehavior() : Behavior("Chatter") {
        set_internally_synchronized(true);
        action_raw("chat", [](const Payload& p) { return p; });
        action("converse", [this](const Bytes& arg) {
            json req = json::parse(to_string(arg));
            auto peer = EntityId::parse(req.at("peer").get<std::string>());
            if (!peer) throw AgentryError("bad peer id");
            int rounds = req.value("rounds", 10);
            size_t size = req.value("size", size_t{1024});
            Bytes message(size, 0x5a);
            Handle h = ctx().handle_to(*peer);
            auto started = std::chrono::steady_clock::now();
            for (int i = 0; i < rounds; ++i) {
                auto result = h.call("chat", Payload::inline_bytes(message),
                                     std::chrono::minutes(2));
                if (!result.ok()) {
                    throw AgentryError("chat round failed: " + result.error().to_string());
                }
                if (result.payload().object_size() != size) {
                    throw AgentryError("chat reply size mismatch");
                }
            }
            auto elapsed = std::chrono::duration_cast<std::chrono::microseconds>(
                std::chrono::steady_clock::now() - started);
            return to_bytes(json{{"elapsed_us", elapsed.count()}}.dump());
        });
    }
};

// Checkpointed counter: on_setup restores, every bump persists.
class CounterBehavior : public Behavior {
public:
    explicit CounterBehavior(const std::string& args) : Behavior("Counter") {
        json a = parse_args(args);
        state_root_ = a.value("state_root", std::string{});
        action("bump", [this](const Bytes&) {
            std::lock_guard lock(mu_);
            ++count_;
            persist();
            return to_bytes(json(count_).dump());
        });
        action("read", [this](const Bytes&) {
            std::lock_guard lock(mu_);
            return to_bytes(json(count_).dump());
        });
    }

    void on_setup() override {
        if (state_root_.empty()) return;
        StateStore store = scoped_store();
        if (auto v = store.get_text("count")) count_ = std::stoull(*v);
    }

private:
    StateStore scoped_store() const {
        return StateStore(state_root_, ctx().self_id().to_string());
    }

    void persist() {
        if (state_root_.empty()) return;
        scoped_store().set_text("count", std::to_string(count_));
    }

    std::string state_root_;
    std::mutex mu_;
    uint64_t count_ = 0;
};

class CrashyBehavior : public Behavior {
public:
    CrashyBehavior() : Behavior("Crashy") {
        action("beat", [](const Bytes&) { return to_bytes("ok"); });
        action("die", [](const Bytes&) -> Bytes {
            // Abnormal exit, as if the process was killed.
            _exit(7);
        });
    }
};

// Pipeline item layout: 8-byte big-endian item id, then payload filler.
uint64_t item_id_of(const Bytes& data) {
    if (data.size() < 8) return UINT64_MAX;
    uint64_t id = 0;
    for (int i = 0; i < 8; ++i) id = (id << 8) | data[i];
    return id;
}

Bytes make_item(uint64_t id, size_t total_size) {
    Bytes data(std::max<size_t>(total_size, 8), 0x33);
    for (int i = 7; i >= 0; --i) {
        data[static_cast<size_t>(i)] = static_cast<uint8_t>(id & 0xff);
        id >>= 8;
    }
    return data;
}

// Head of the pipeline: produces `count` items and pushes each through the
// chain with end-to-end retries; the recorder's dedup keeps replays from
// double-counting.
class PipeGeneratorBehavior : public Behavior {
public:
    explicit PipeGeneratorBehavior(const std::string& args) : Behavior("PipeGenerator") {
        json a = parse_args(args);
        next_ = EntityId::parse(a.at("next").get<std::string>());
        count_ = a.value("count", 100);
        item_bytes_ = a.value("item_bytes", size_t{4096});
        set_internally_synchronized(true);
        loop("produce", [this](ShutdownSignal& shutdown) {
            if (!next_) return;
            Handle h = ctx().handle_to(*next_);
            for (uint64_t i = 0; i < count_ && !shutdown.is_set(); ++i) {
                Payload item = ctx().wrap(make_item(i, item_bytes_));
                bool delivered = false;
                for (int attempt = 0; attempt < 8 && !shutdown.is_set(); ++attempt) {
                    auto result = h.call("submit", item, std::chrono::seconds(10));
                    if (result.ok()) {
                        delivered = true;
                        break;
                    }
                    if (result.error().kind == ErrorKind::MailboxClosed) return;
                    shutdown.wait_for(std::chrono::milliseconds(250));
                }
                if (delivered) ++produced_;
            }
        });
        action("produced", [this](const Bytes&) {
            return to_bytes(json(produced_.load()).dump());
        });
    }

private:
    std::optional<EntityId> next_;
    uint64_t count_ = 0;
    size_t item_bytes_ = 4096;
    std::atomic<uint64_t> produced_{0};
};

// Middle pipeline stage: sanity-checks the item and forwards the payload
// without materializing it.
class PipeStageBehavior : public Behavior {
public:
    explicit PipeStageBehavior(const std::string& args, std::string name)
        : Behavior(std::move(name), {"PipeStage"}) {
        json a = parse_args(args);
        next_ = EntityId::parse(a.at("next").get<std::string>());
        set_internally_synchronized(true);
        action_raw("submit", [this](const Payload& p) {
            if (p.object_size() < 8) throw AgentryError("runt pipeline item");
            if (!next_) throw AgentryError("stage has no downstream");
            auto result = ctx().handle_to(*next_).call("submit", p, std::chrono::seconds(8));
            if (!result.ok()) {
                throw AgentryError("downstream submit failed: " + result.error().to_string());
            }
            ++forwarded_;
            return result.payload();
        });
        action("forwarded", [this](const Bytes&) {
            return to_bytes(json(forwarded_.load()).dump());
        });
    }

private:
    std::optional<EntityId> next_;
    std::atomic<uint64_t> forwarded_{0};
};

// Sink: materializes each item (the single transfer in by-ref mode) and
// records it exactly once by item id.
class PipeRecorderBehavior : public Behavior {
public:
    PipeRecorderBehavior() : Behavior("PipeRecorder") {
        action_raw("submit", [this](const Payload& p) {
            Bytes data = ctx().materialize(p);
            uint64_t id = item_id_of(data);
            std::lock_guard lock(mu_);
            ++received_;
            ids_.insert(id);
            return Payload::inline_bytes(to_bytes("ok"));
        });
        action("report", [this](const Bytes&) {
            std::lock_guard lock(mu_);
            json out;
            out["received"] = received_;
            out["unique"] = ids_.size();
            return to_bytes(out.dump());
        });
    }

private:
    std::mutex mu_;
    uint64_t received_ = 0;
    std::unordered_set<uint64_t> ids_;
};

}  // namespace

void register_bench_behaviors() {
    static std::once_flag once;
    std::call_once(once, [] {
        auto& reg = BehaviorRegistry::instance();
        reg.add("Example", [](const std::string&) { return std::make_unique<ExampleBehavior>(); });
        reg.add("Echo", [](const std::string&) { return std::make_unique<EchoBehavior>(); });
        reg.add("Sleeper",
                [](const std::string& a) { return std::make_unique<SleeperBehavior>(a); });
        reg.add("Worker", [](const std::string&) { return std::make_unique<WorkerBehavior>(); });
        reg.add("ProteinFolder",
                [](const std::string&) { return std::make_unique<ProteinFolderBehavior>(); });
        reg.add("OpenProteinFolder",
                [](const std::string&) { return std::make_unique<OpenProteinFolderBehavior>(); });
        reg.add("ChainStage",
                [](const std::string& a) { return std::make_unique<ChainStageBehavior>(a); });
        reg.add("Chatter", [](const std::string&) { return std::make_unique<ChatterBehavior>(); });
        reg.add("Counter",
                [](const std::string& a) { return std::make_unique<CounterBehavior>(a); });
        reg.add("Crashy", [](const std::string&) { return std::make_unique<CrashyBehavior>(); });
        reg.add("PipeGenerator",
                [](const std::string& a) { return std::make_unique<PipeGeneratorBehavior>(a); });
        reg.add("PipeAssembler", [](const std::string& a) {
            return std::make_unique<PipeStageBehavior>(a, "PipeAssembler");
        });
        reg.add("PipeValidator", [](const std::string& a) {
            return std::make_unique<PipeStageBehavior>(a, "PipeValidator");
        });
        reg.add("PipeRecorder",
                [](const std::string&) { return std::make_unique<PipeRecorderBehavior>(); });
    });
}

}  // namespace agentry::bench

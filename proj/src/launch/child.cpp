#include "agentry/launch/child.hpp"

#include <cstdio>
#include <cstdlib>

#include <nlohmann/json.hpp>

#include "agentry/dist_exchange.hpp"
#include "agentry/launch/registry.hpp"
#include "agentry/log.hpp"
#include "agentry/runtime.hpp"

namespace agentry {

namespace {

const char* require_env(const char* name) {
    const char* v = std::getenv(name);
    if (!v || *v == '\0') {
        std::fprintf(stderr, "agentry child: missing %s\n", name);
        return nullptr;
    }
    return v;
}

}  // namespace

int run_child_from_env() {
    const char* store_text = require_env("AGENTRY_STORE_ENDPOINT");
    const char* id_text = require_env("AGENTRY_AGENT_ID");
    const char* behavior_name = require_env("AGENTRY_BEHAVIOR");
    if (!store_text || !id_text || !behavior_name) return 3;
    const char* args = std::getenv("AGENTRY_BEHAVIOR_ARGS");
    const char* direct = std::getenv("AGENTRY_DIRECT");
    const char* relay_only = std::getenv("AGENTRY_RELAY_ONLY");
    const char* inline_threshold = std::getenv("AGENTRY_INLINE_THRESHOLD");

    auto store = net::Endpoint::parse(store_text);
    auto id = EntityId::parse(id_text);
    if (!store || !id) {
        std::fprintf(stderr, "agentry child: malformed endpoint or agent id\n");
        return 3;
    }

    try {
        auto behavior =
            BehaviorRegistry::instance().make(behavior_name, args ? args : std::string());

        DistOptions options;
        options.direct_listen = !direct || std::string_view(direct) != "0";
        options.relay_only_messaging = relay_only && std::string_view(relay_only) == "1";
        if (inline_threshold) {
            options.depot.inline_threshold = std::strtoull(inline_threshold, nullptr, 10);
        }
        auto binding = DistExchange::attach(*store, *id, options);

        RunStatus status = run_agent(std::move(behavior), std::move(binding));
        return status.clean() ? 0 : 1;
    } catch (const SetupError& e) {
        std::fprintf(stderr, "agentry child: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "agentry child: %s\n", e.what());
        return 3;
    }
}

}  // namespace agentry

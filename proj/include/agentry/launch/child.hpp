#pragma once

namespace agentry {

// Entry point for subprocess agent hosts. Reads AGENTRY_STORE_ENDPOINT,
// AGENTRY_AGENT_ID, AGENTRY_BEHAVIOR, AGENTRY_BEHAVIOR_ARGS and
// AGENTRY_DIRECT, attaches to the agent's existing mailbox on the
// distributed exchange, builds the behavior from the registry, and runs it
// until shutdown. Returns the process exit code:
//   0 clean shutdown, 1 loop failure, 2 setup failure, 3 configuration or
//   transport error.
int run_child_from_env();

}  // namespace agentry

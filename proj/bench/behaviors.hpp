#pragma once

#include <string>

#include "agentry/behavior.hpp"

namespace agentry::bench {

// Installs the benchmark/test behaviors into the global registry. Safe to
// call more than once. Registered names:
//   Example          square(json number) -> squared; count loop
//   Echo             noop(payload) -> same payload
//   Sleeper          sleep(json {"ms": n}); concurrency 1
//   Worker           work() -> empty
//   ProteinFolder    fold(bytes) -> bytes
//   OpenProteinFolder (inherits ProteinFolder)
//   ChainStage       relay(payload) across a chain; consumes at the tail
//   Chatter          chat(payload) echo; converse(json) drives rounds
//   Counter          bump()/read(); checkpointed via a state store
//   Crashy           beat() -> "ok"; die() exits the process abnormally
//   PipeGenerator / PipeStage / PipeRecorder   4-stage pipeline exemplar
void register_bench_behaviors();

}  // namespace agentry::bench

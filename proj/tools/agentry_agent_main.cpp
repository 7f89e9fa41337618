// Subprocess agent host: built-in behaviors are constructed by name from
// environment variables set by the subprocess launcher.

#include "../bench/behaviors.hpp"
#include "agentry/launch/child.hpp"

int main() {
    agentry::bench::register_bench_behaviors();
    return agentry::run_child_from_env();
}

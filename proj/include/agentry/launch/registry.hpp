#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "agentry/behavior.hpp"

namespace agentry {

// Name-indexed behavior factories. Subprocess launching cannot ship live
// objects across the process boundary, so the parent passes a registered
// name plus an opaque argument string and the child binary constructs the
// behavior from its own copy of the registry. Factories must be cheap and
// side-effect-free (resource acquisition belongs in on_setup).
class BehaviorRegistry {
public:
    using Factory = std::function<std::unique_ptr<Behavior>(const std::string& args)>;

    static BehaviorRegistry& instance();

    void add(const std::string& name, Factory factory);
    bool contains(const std::string& name) const;
    std::unique_ptr<Behavior> make(const std::string& name, const std::string& args) const;
    std::vector<std::string> names() const;

private:
    mutable std::mutex mu_;
    std::map<std::string, Factory> factories_;
};

}  // namespace agentry

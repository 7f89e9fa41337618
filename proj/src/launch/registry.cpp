#include "agentry/launch/registry.hpp"

#include <stdexcept>

namespace agentry {

BehaviorRegistry& BehaviorRegistry::instance() {
    static BehaviorRegistry registry;
    return registry;
}

void BehaviorRegistry::add(const std::string& name, Factory factory) {
    std::lock_guard lock(mu_);
    factories_[name] = std::move(factory);
}

bool BehaviorRegistry::contains(const std::string& name) const {
    std::lock_guard lock(mu_);
    return factories_.count(name) > 0;
}

std::unique_ptr<Behavior> BehaviorRegistry::make(const std::string& name,
                                                 const std::string& args) const {
    Factory factory;
    {
        std::lock_guard lock(mu_);
        auto it = factories_.find(name);
        if (it == factories_.end()) {
            throw std::invalid_argument("behavior not registered: " + name);
        }
        factory = it->second;
    }
    return factory(args);
}

std::vector<std::string> BehaviorRegistry::names() const {
    std::lock_guard lock(mu_);
    std::vector<std::string> out;
    for (const auto& [name, _] : factories_) out.push_back(name);
    return out;
}

}  // namespace agentry

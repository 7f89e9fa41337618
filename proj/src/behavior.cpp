#include "agentry/behavior.hpp"

#include <algorithm>
#include <stdexcept>
#include <unordered_set>

namespace agentry {

namespace {

bool valid_identifier(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s) {
        bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                  c == '_' || c == '-' || c == '.';
        if (!ok) return false;
    }
    return true;
}

}  // namespace

void BehaviorSpec::validate() const {
    if (ancestry.empty() || ancestry.front() != name) {
        throw std::invalid_argument("behavior ancestry must start with the behavior's own name");
    }
    std::unordered_set<std::string> seen;
    for (const auto& a : ancestry) {
        if (!valid_identifier(a)) throw std::invalid_argument("invalid behavior name: " + a);
        if (!seen.insert(a).second) {
            throw std::invalid_argument("duplicate name in ancestry: " + a);
        }
    }
    std::unordered_set<std::string> action_names;
    for (const auto& a : actions) {
        if (!valid_identifier(a)) throw std::invalid_argument("invalid action name: " + a);
        action_names.insert(a);
    }
    for (const auto& l : loops) {
        if (!valid_identifier(l)) throw std::invalid_argument("invalid loop name: " + l);
        if (action_names.count(l)) {
            throw std::invalid_argument("name used as both action and loop: " + l);
        }
    }
}

bool behavior_is_a(const BehaviorSpec& spec, std::string_view name) {
    return std::find(spec.ancestry.begin(), spec.ancestry.end(), name) != spec.ancestry.end();
}

Behavior::Behavior(std::string name, std::vector<std::string> parents)
    : name_(std::move(name)), parents_(std::move(parents)) {}

const BehaviorSpec& Behavior::spec() const {
    if (!frozen_) {
        BehaviorSpec s;
        s.name = name_;
        s.ancestry.push_back(name_);
        s.ancestry.insert(s.ancestry.end(), parents_.begin(), parents_.end());
        for (const auto& [n, _] : actions_) s.actions.push_back(n);
        for (const auto& [n, _] : loops_) s.loops.push_back(n);
        s.max_action_concurrency = max_concurrency_;
        s.internally_synchronized = internally_synchronized_;
        s.validate();
        frozen_ = std::move(s);
    }
    return *frozen_;
}

void Behavior::check_name(const std::string& name) const {
    if (frozen_) throw std::logic_error("behavior tables are frozen once spec() is taken");
    if (actions_.count(name) || loops_.count(name)) {
        throw std::invalid_argument("duplicate behavior entry: " + name);
    }
}

void Behavior::action(std::string name, BytesAction fn) {
    check_name(name);
    ActionEntry e;
    e.raw = false;
    e.bytes_fn = std::move(fn);
    actions_.emplace(std::move(name), std::move(e));
}

void Behavior::action_raw(std::string name, PayloadAction fn) {
    check_name(name);
    ActionEntry e;
    e.raw = true;
    e.payload_fn = std::move(fn);
    actions_.emplace(std::move(name), std::move(e));
}

void Behavior::loop(std::string name, LoopFn fn) {
    check_name(name);
    LoopEntry e;
    e.kind = LoopEntry::Kind::Plain;
    e.plain = std::move(fn);
    loops_.emplace(std::move(name), std::move(e));
}

void Behavior::timer(std::string name, std::chrono::milliseconds interval, BodyFn body) {
    if (interval <= std::chrono::milliseconds(0)) {
        throw std::invalid_argument("timer interval must be positive");
    }
    check_name(name);
    LoopEntry e;
    e.kind = LoopEntry::Kind::Timer;
    e.interval = interval;
    e.body = std::move(body);
    loops_.emplace(std::move(name), std::move(e));
}

void Behavior::event(std::string name, std::string event_name, BodyFn body) {
    check_name(name);
    LoopEntry e;
    e.kind = LoopEntry::Kind::Event;
    e.event_name = std::move(event_name);
    e.body = std::move(body);
    loops_.emplace(std::move(name), std::move(e));
}

}  // namespace agentry

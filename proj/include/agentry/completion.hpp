#pragma once

#include <chrono>
#include <condition_variable>
#include <mutex>
#include <optional>
#include <utility>

namespace agentry {

// One-shot completion cell. Resolves exactly once; the first resolve wins
// and every waiter (blocking or polling) observes the same terminal value.
template <typename T>
class Completion {
public:
    // Returns true when this call resolved the cell.
    bool resolve(T value) {
        {
            std::lock_guard lock(mu_);
            if (value_) return false;
            value_ = std::move(value);
        }
        cv_.notify_all();
        return true;
    }

    bool resolved() const {
        std::lock_guard lock(mu_);
        return value_.has_value();
    }

    std::optional<T> poll() const {
        std::lock_guard lock(mu_);
        return value_;
    }

    const T& wait() const {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return value_.has_value(); });
        return *value_;
    }

    // nullopt on timeout.
    std::optional<T> wait_for(std::chrono::milliseconds d) const {
        std::unique_lock lock(mu_);
        if (!cv_.wait_for(lock, d, [&] { return value_.has_value(); })) return std::nullopt;
        return value_;
    }

private:
    mutable std::mutex mu_;
    mutable std::condition_variable cv_;
    std::optional<T> value_;
};

}  // namespace agentry

#pragma once

#include <chrono>
#include <condition_variable>
#include <memory>
#include <mutex>

namespace agentry {

// Latching one-way flag: transitions Open -> Set exactly once and never
// resets. Copies share the underlying state; safe to observe and set from
// any thread.
class ShutdownSignal {
public:
    ShutdownSignal() : state_(std::make_shared<State>()) {}

    void set() {
        {
            std::lock_guard lock(state_->mu);
            if (state_->set) return;
            state_->set = true;
        }
        state_->cv.notify_all();
    }

    bool is_set() const {
        std::lock_guard lock(state_->mu);
        return state_->set;
    }

    // Returns true when the signal fired, false on timeout.
    bool wait_for(std::chrono::milliseconds d) const {
        std::unique_lock lock(state_->mu);
        return state_->cv.wait_for(lock, d, [&] { return state_->set; });
    }

    void wait() const {
        std::unique_lock lock(state_->mu);
        state_->cv.wait(lock, [&] { return state_->set; });
    }

private:
    struct State {
        mutable std::mutex mu;
        std::condition_variable cv;
        bool set = false;
    };
    std::shared_ptr<State> state_;
};

}  // namespace agentry

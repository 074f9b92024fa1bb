#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <thread>

namespace ampf {

// Injectable clock so evaluation runs complete in seconds while live runs
// track wall time. Timestamps are unix seconds.
class Clock {
public:
    virtual ~Clock() = default;
    virtual std::int64_t now() const = 0;
    virtual void wait_until(std::int64_t ts) = 0;
};

// Instant simulation clock; wait_until jumps forward. Reads are atomic so a
// mock server thread can observe the loop's position safely.
class SimulatedClock : public Clock {
public:
    explicit SimulatedClock(std::int64_t start) : now_(start) {}

    std::int64_t now() const override { return now_.load(std::memory_order_acquire); }

    void wait_until(std::int64_t ts) override {
        std::int64_t cur = now_.load(std::memory_order_relaxed);
        while (cur < ts && !now_.compare_exchange_weak(cur, ts, std::memory_order_release)) {
        }
    }

private:
    std::atomic<std::int64_t> now_;
};

class WallClock : public Clock {
public:
    std::int64_t now() const override {
        return std::chrono::duration_cast<std::chrono::seconds>(
                   std::chrono::system_clock::now().time_since_epoch())
            .count();
    }

    void wait_until(std::int64_t ts) override {
        while (now() < ts) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
};

} // namespace ampf

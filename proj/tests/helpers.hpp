#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "agentry/codec.hpp"
#include "agentry/envelope.hpp"

namespace agentry::testing {

// Deterministic envelope generator for property tests.
class EnvelopeGen {
public:
    explicit EnvelopeGen(uint64_t seed) : rng_(seed) {}

    uint64_t u64() { return rng_(); }

    Uuid128 uuid() {
        Uuid128 u;
        for (auto& b : u.data) b = static_cast<uint8_t>(rng_());
        return u;
    }

    EntityId entity() {
        return EntityId{uuid(), rng_() % 2 == 0 ? EntityRole::Agent : EntityRole::Client};
    }

    Bytes bytes(size_t max_len) {
        Bytes out(rng_() % (max_len + 1));
        for (auto& b : out) b = static_cast<uint8_t>(rng_());
        return out;
    }

    std::string ident(size_t max_len = 12) {
        static constexpr char alphabet[] = "abcdefghijklmnopqrstuvwxyz_0123456789";
        std::string s;
        size_t len = 1 + rng_() % max_len;
        for (size_t i = 0; i < len; ++i) s.push_back(alphabet[rng_() % (sizeof(alphabet) - 1)]);
        return s;
    }

    ProxyRef proxy_ref() {
        ProxyRef ref;
        ref.object_id = uuid();
        ref.size = rng_();
        ref.origin = entity();
        for (auto& b : ref.checksum) b = static_cast<uint8_t>(rng_());
        size_t locs = rng_() % 3;
        for (size_t i = 0; i < locs; ++i) {
            ProxyLocation loc;
            loc.kind = rng_() % 2 == 0 ? ProxyLocation::Kind::Peer : ProxyLocation::Kind::StoreKey;
            loc.text = ident(32);
            ref.locations.push_back(std::move(loc));
        }
        return ref;
    }

    Payload payload(size_t max_inline = 256) {
        if (rng_() % 3 == 0) return Payload::reference(proxy_ref());
        return Payload::inline_bytes(bytes(max_inline));
    }

    ErrorInfo error_info() {
        ErrorInfo e;
        e.kind = static_cast<ErrorKind>(rng_() % 5);
        e.detail = ident(24);
        return e;
    }

    Envelope envelope() {
        Envelope e;
        e.src = entity();
        e.dest = entity();
        e.message_id = uuid();
        switch (rng_() % 5) {
            case 0:
                e.body = ActionRequestBody{ident(), payload()};
                break;
            case 1: {
                ActionResponseBody b;
                b.request_id = uuid();
                if (rng_() % 2 == 0) {
                    b.outcome = payload();
                } else {
                    b.outcome = error_info();
                }
                e.body = std::move(b);
                break;
            }
            case 2:
                e.body = PingBody{};
                break;
            case 3:
                e.body = PingResponseBody{uuid()};
                break;
            default:
                e.body = ShutdownBody{rng_() % 2 == 0};
                break;
        }
        return e;
    }

private:
    std::mt19937_64 rng_;
};

// Unique scratch directory, removed on destruction.
struct TempDir {
    std::filesystem::path path;

    TempDir() {
        path = std::filesystem::temp_directory_path() /
               ("agentry-test-" + std::to_string(std::random_device{}()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
};

}  // namespace agentry::testing

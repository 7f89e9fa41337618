#include "agentry/ids.hpp"

#include <chrono>
#include <cstring>
#include <random>

#include "agentry/bytes.hpp"

namespace agentry {

namespace {

std::mt19937_64& thread_rng() {
    thread_local std::mt19937_64 rng = [] {
        std::random_device rd;
        std::seed_seq seq{rd(), rd(), rd(), rd(),
                          static_cast<unsigned>(
                              std::chrono::steady_clock::now().time_since_epoch().count()),
                          static_cast<unsigned>(reinterpret_cast<uintptr_t>(&rng))};
        return std::mt19937_64(seq);
    }();
    return rng;
}

int hex_digit(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
}

}  // namespace

Uuid128 Uuid128::random() {
    Uuid128 u;
    auto& rng = thread_rng();
    uint64_t hi = rng();
    uint64_t lo = rng();
    std::memcpy(u.data.data(), &hi, 8);
    std::memcpy(u.data.data() + 8, &lo, 8);
    // RFC 4122 version/variant bits; purely cosmetic for the text form.
    u.data[6] = static_cast<uint8_t>((u.data[6] & 0x0f) | 0x40);
    u.data[8] = static_cast<uint8_t>((u.data[8] & 0x3f) | 0x80);
    return u;
}

std::string Uuid128::to_string() const {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(36);
    for (size_t i = 0; i < 16; ++i) {
        if (i == 4 || i == 6 || i == 8 || i == 10) out.push_back('-');
        out.push_back(digits[data[i] >> 4]);
        out.push_back(digits[data[i] & 0x0f]);
    }
    return out;
}

std::optional<Uuid128> Uuid128::parse(std::string_view text) {
    if (text.size() != 36) return std::nullopt;
    Uuid128 u;
    size_t byte = 0;
    for (size_t i = 0; i < 36;) {
        if (i == 8 || i == 13 || i == 18 || i == 23) {
            if (text[i] != '-') return std::nullopt;
            ++i;
            continue;
        }
        int hi = hex_digit(text[i]);
        int lo = hex_digit(text[i + 1]);
        if (hi < 0 || lo < 0) return std::nullopt;
        u.data[byte++] = static_cast<uint8_t>((hi << 4) | lo);
        i += 2;
    }
    return u;
}

std::string EntityId::to_string() const {
    std::string out = role == EntityRole::Agent ? "a:" : "c:";
    out += uuid.to_string();
    return out;
}

std::optional<EntityId> EntityId::parse(std::string_view text) {
    if (text.size() < 2 || text[1] != ':') return std::nullopt;
    EntityRole role;
    if (text[0] == 'a') {
        role = EntityRole::Agent;
    } else if (text[0] == 'c') {
        role = EntityRole::Client;
    } else {
        return std::nullopt;
    }
    auto uuid = Uuid128::parse(text.substr(2));
    if (!uuid) return std::nullopt;
    return EntityId{*uuid, role};
}

size_t Uuid128Hash::operator()(const Uuid128& u) const noexcept {
    // FNV-1a over the 16 bytes.
    uint64_t h = 1469598103934665603ull;
    for (uint8_t b : u.data) {
        h ^= b;
        h *= 1099511628211ull;
    }
    return static_cast<size_t>(h);
}

size_t EntityIdHash::operator()(const EntityId& id) const noexcept {
    return Uuid128Hash{}(id.uuid) ^ (static_cast<size_t>(id.role) << 1);
}

std::string hex_encode(const uint8_t* data, size_t len) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (size_t i = 0; i < len; ++i) {
        out.push_back(digits[data[i] >> 4]);
        out.push_back(digits[data[i] & 0x0f]);
    }
    return out;
}

std::string hex_encode(const Bytes& b) {
    return hex_encode(b.data(), b.size());
}

bool hex_decode(std::string_view hex, Bytes& out) {
    if (hex.size() % 2 != 0) return false;
    out.clear();
    out.reserve(hex.size() / 2);
    for (size_t i = 0; i < hex.size(); i += 2) {
        int hi = hex_digit(hex[i]);
        int lo = hex_digit(hex[i + 1]);
        if (hi < 0 || lo < 0) return false;
        out.push_back(static_cast<uint8_t>((hi << 4) | lo));
    }
    return true;
}

}  // namespace agentry

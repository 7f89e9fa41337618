#include "agentry/launch/state_store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <fstream>
#include <stdexcept>

#include "agentry/errors.hpp"
#include "agentry/ids.hpp"

namespace agentry {

namespace {

bool key_char_ok(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
           c == '_' || c == '-' || c == '.' || c == ':';
}

}  // namespace

void StateStore::check_key(const std::string& key) {
    if (key.empty() || key == "." || key == "..") {
        throw std::invalid_argument("invalid state key: '" + key + "'");
    }
    for (char c : key) {
        if (!key_char_ok(c)) {
            throw std::invalid_argument("invalid character in state key: '" + key + "'");
        }
    }
}

StateStore::StateStore(std::filesystem::path root, std::string scope) : dir_(std::move(root)) {
    if (!scope.empty()) dir_ /= scope;
    std::filesystem::create_directories(dir_);
}

StateStore StateStore::scoped(const std::string& scope) const {
    return StateStore(dir_, scope);
}

void StateStore::set(const std::string& key, const Bytes& value) {
    check_key(key);
    auto tmp = dir_ / (key + ".tmp." + std::to_string(::getpid()));
    auto final_path = dir_ / key;

    int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) throw AgentryError("cannot open " + tmp.string());
    size_t off = 0;
    while (off < value.size()) {
        ssize_t n = ::write(fd, value.data() + off, value.size() - off);
        if (n <= 0) {
            ::close(fd);
            ::unlink(tmp.c_str());
            throw AgentryError("short write to " + tmp.string());
        }
        off += static_cast<size_t>(n);
    }
    ::fsync(fd);
    ::close(fd);
    std::error_code ec;
    std::filesystem::rename(tmp, final_path, ec);
    if (ec) {
        ::unlink(tmp.c_str());
        throw AgentryError("rename failed: " + ec.message());
    }
}

void StateStore::set_text(const std::string& key, std::string_view value) {
    set(key, to_bytes(value));
}

std::optional<Bytes> StateStore::get(const std::string& key) const {
    check_key(key);
    std::ifstream in(dir_ / key, std::ios::binary);
    if (!in.is_open()) return std::nullopt;
    return Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::optional<std::string> StateStore::get_text(const std::string& key) const {
    auto b = get(key);
    if (!b) return std::nullopt;
    return to_string(*b);
}

bool StateStore::remove(const std::string& key) {
    check_key(key);
    std::error_code ec;
    return std::filesystem::remove(dir_ / key, ec);
}

std::vector<std::string> StateStore::keys() const {
    std::vector<std::string> out;
    std::error_code ec;
    for (const auto& entry : std::filesystem::directory_iterator(dir_, ec)) {
        if (!entry.is_regular_file()) continue;
        std::string name = entry.path().filename().string();
        if (name.find(".tmp.") != std::string::npos) continue;
        out.push_back(std::move(name));
    }
    return out;
}

}  // namespace agentry

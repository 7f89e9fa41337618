#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "agentry/bytes.hpp"

namespace agentry {

// Dictionary-style checkpoint storage persisted to the local file system,
// one file per key under <root>/<scope>/<key>. Writes are atomic
// (tmp + fsync + rename): a crash at any point leaves each key readable
// with either the old or the new value. Concurrent writers to distinct
// keys are safe; per key, last writer wins.
class StateStore {
public:
    explicit StateStore(std::filesystem::path root, std::string scope = {});

    // Scoped view, e.g. per agent id.
    StateStore scoped(const std::string& scope) const;

    void set(const std::string& key, const Bytes& value);
    void set_text(const std::string& key, std::string_view value);
    std::optional<Bytes> get(const std::string& key) const;
    std::optional<std::string> get_text(const std::string& key) const;
    bool remove(const std::string& key);
    std::vector<std::string> keys() const;

    const std::filesystem::path& dir() const { return dir_; }

private:
    static void check_key(const std::string& key);

    std::filesystem::path dir_;
};

}  // namespace agentry

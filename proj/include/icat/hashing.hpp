#pragma once

#include <memory>
#include <string>
#include <string_view>

namespace icat {

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

/// Incremental SHA-256 for hashing many fields without concatenating them.
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256&) = delete;
    Sha256& operator=(const Sha256&) = delete;

    Sha256& update(std::string_view data);
    /// Feeds `data` followed by a separator byte so field boundaries are unambiguous.
    Sha256& field(std::string_view data);
    std::string hex_digest();

private:
    struct State;
    std::unique_ptr<State> state_;
};

}  // namespace icat

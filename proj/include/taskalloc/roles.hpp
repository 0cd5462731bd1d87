#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace taskalloc {

/// Generalized team role. The integer value is the stable class index used by
/// every model, label vector and report.
enum class Role : std::uint8_t {
    FrontEndDeveloper = 0,
    BackEndDeveloper = 1,
    Developer = 2,
    ProductOwner = 3,
    TeamCatalyst = 4,
    Content = 5,
    Stakeholder = 6,
};

inline constexpr std::size_t kRoleCount = 7;

inline constexpr std::array<Role, kRoleCount> kAllRoles = {
    Role::FrontEndDeveloper, Role::BackEndDeveloper, Role::Developer, Role::ProductOwner,
    Role::TeamCatalyst,      Role::Content,          Role::Stakeholder,
};

constexpr std::size_t role_index(Role r) noexcept { return static_cast<std::size_t>(r); }

/// Throws std::out_of_range for indices >= kRoleCount.
Role role_from_index(std::size_t index);

/// Canonical identifier, e.g. "FrontEndDeveloper".
std::string_view role_name(Role r) noexcept;

/// Parses a canonical identifier (exact match).
std::optional<Role> parse_role_name(std::string_view name) noexcept;

/// Small value-type set of roles backed by a bit mask.
class RoleSet {
public:
    constexpr RoleSet() = default;
    RoleSet(std::initializer_list<Role> roles) {
        for (Role r : roles) insert(r);
    }

    static constexpr RoleSet all() noexcept {
        RoleSet s;
        s.mask_ = (1u << kRoleCount) - 1u;
        return s;
    }

    constexpr void insert(Role r) noexcept { mask_ |= static_cast<std::uint8_t>(1u << role_index(r)); }
    constexpr void erase(Role r) noexcept { mask_ &= static_cast<std::uint8_t>(~(1u << role_index(r))); }
    constexpr bool contains(Role r) const noexcept { return (mask_ >> role_index(r)) & 1u; }
    constexpr bool empty() const noexcept { return mask_ == 0; }
    std::size_t size() const noexcept;
    constexpr std::uint8_t mask() const noexcept { return mask_; }

    /// Members in ascending role index order.
    std::vector<Role> members() const;

    friend constexpr bool operator==(RoleSet, RoleSet) = default;

private:
    std::uint8_t mask_ = 0;
};

}  // namespace taskalloc

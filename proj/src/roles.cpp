#include "taskalloc/roles.hpp"

#include <bit>
#include <stdexcept>

namespace taskalloc {

namespace {
constexpr std::array<std::string_view, kRoleCount> kNames = {
    "FrontEndDeveloper", "BackEndDeveloper", "Developer", "ProductOwner",
    "TeamCatalyst",      "Content",          "Stakeholder",
};
}  // namespace

Role role_from_index(std::size_t index) {
    if (index >= kRoleCount) throw std::out_of_range("role index " + std::to_string(index));
    return static_cast<Role>(index);
}

std::string_view role_name(Role r) noexcept { return kNames[role_index(r)]; }

std::optional<Role> parse_role_name(std::string_view name) noexcept {
    for (std::size_t i = 0; i < kRoleCount; ++i) {
        if (kNames[i] == name) return static_cast<Role>(i);
    }
    return std::nullopt;
}

std::size_t RoleSet::size() const noexcept { return static_cast<std::size_t>(std::popcount(mask_)); }

std::vector<Role> RoleSet::members() const {
    std::vector<Role> out;
    for (Role r : kAllRoles) {
        if (contains(r)) out.push_back(r);
    }
    return out;
}

}  // namespace taskalloc

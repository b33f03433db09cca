#pragma once

#include <algorithm>
#include <string>
#include <string_view>
#include <vector>

#include "bivcal/errors.hpp"

namespace bivcal {

/// Exchangeable group of ensemble members (0-based member indices).
struct Group {
    std::string id;
    std::vector<std::size_t> members;
};

/// Partition of the M ensemble members into exchangeable groups. Members of
/// a group share one weight and one parameter set.
class GroupSpec {
public:
    GroupSpec() = default;

    explicit GroupSpec(std::vector<Group> groups) : groups_(std::move(groups)) {
        std::size_t total = 0;
        for (const auto& g : groups_) {
            if (g.members.empty()) throw InvalidArgument("group '" + g.id + "' is empty");
            total += g.members.size();
        }
        group_of_.assign(total, total);
        for (std::size_t k = 0; k < groups_.size(); ++k) {
            for (std::size_t m : groups_[k].members) {
                if (m >= total || group_of_[m] != total) {
                    throw InvalidArgument("group member indices do not partition 0..M-1");
                }
                group_of_[m] = k;
            }
        }
    }

    /// M singleton groups (non-exchangeable members).
    static GroupSpec individual(std::size_t m) {
        std::vector<Group> groups;
        for (std::size_t i = 0; i < m; ++i) groups.push_back({"m" + std::to_string(i + 1), {i}});
        return GroupSpec(std::move(groups));
    }

    /// One group holding all M members.
    static GroupSpec exchangeable(std::size_t m) {
        Group g{"all", {}};
        for (std::size_t i = 0; i < m; ++i) g.members.push_back(i);
        return GroupSpec({std::move(g)});
    }

    std::size_t group_count() const noexcept { return groups_.size(); }
    std::size_t member_count() const noexcept { return group_of_.size(); }
    const std::vector<Group>& groups() const noexcept { return groups_; }
    const Group& group(std::size_t k) const { return groups_.at(k); }
    std::size_t group_size(std::size_t k) const { return groups_.at(k).members.size(); }
    std::size_t group_of(std::size_t member) const { return group_of_.at(member); }

    bool operator==(const GroupSpec& other) const {
        if (groups_.size() != other.groups_.size()) return false;
        for (std::size_t k = 0; k < groups_.size(); ++k) {
            if (groups_[k].members != other.groups_[k].members) return false;
        }
        return true;
    }

private:
    std::vector<Group> groups_;
    std::vector<std::size_t> group_of_;
};

enum class GroupingKind { uwme8, ah_two_group, ah_three_group, individual, exchangeable };

inline std::string_view to_string(GroupingKind kind) {
    switch (kind) {
        case GroupingKind::uwme8: return "uwme8";
        case GroupingKind::ah_two_group: return "ah_two_group";
        case GroupingKind::ah_three_group: return "ah_three_group";
        case GroupingKind::individual: return "individual";
        case GroupingKind::exchangeable: return "exchangeable";
    }
    return "";
}

inline GroupingKind parse_grouping(std::string_view name) {
    for (auto kind : {GroupingKind::uwme8, GroupingKind::ah_two_group, GroupingKind::ah_three_group,
                      GroupingKind::individual, GroupingKind::exchangeable}) {
        if (to_string(kind) == name) return kind;
    }
    throw InvalidArgument("unknown grouping '" + std::string(name) + "'");
}

/// Group structures of the eight-member UWME (all members distinguishable)
/// and the eleven-member ALADIN-HUNEPS ensemble (control + 10 perturbed,
/// optionally split into odd/even perturbations). Member 0 is the control.
/// `individual` and `exchangeable` need the member count `m`.
inline GroupSpec make_group_model(GroupingKind kind, std::size_t m = 0) {
    switch (kind) {
        case GroupingKind::uwme8:
            return GroupSpec::individual(8);
        case GroupingKind::ah_two_group:
            return GroupSpec({{"control", {0}}, {"perturbed", {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}}});
        case GroupingKind::ah_three_group:
            return GroupSpec({{"control", {0}}, {"odd", {1, 3, 5, 7, 9}}, {"even", {2, 4, 6, 8, 10}}});
        case GroupingKind::individual:
            if (m == 0) throw InvalidArgument("individual grouping needs a member count");
            return GroupSpec::individual(m);
        case GroupingKind::exchangeable:
            if (m == 0) throw InvalidArgument("exchangeable grouping needs a member count");
            return GroupSpec::exchangeable(m);
    }
    throw InvalidArgument("unknown grouping");
}

/// Member count implied by a fixed-size grouping, 0 for the size-generic kinds.
inline std::size_t grouping_member_count(GroupingKind kind) {
    switch (kind) {
        case GroupingKind::uwme8: return 8;
        case GroupingKind::ah_two_group:
        case GroupingKind::ah_three_group: return 11;
        default: return 0;
    }
}

}  // namespace bivcal

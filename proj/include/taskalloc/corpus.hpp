#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "taskalloc/roles.hpp"

namespace taskalloc::corpus {

struct TaskRecord {
    std::string project_id;
    std::string project_name;
    std::string title;
    std::string description;
    Role role = Role::Developer;

    friend bool operator==(const TaskRecord&, const TaskRecord&) = default;
};

struct ProjectMeta {
    std::string project_id;
    std::uint64_t task_count = 0;
    std::uint64_t member_count = 0;
    std::uint64_t sprint_count = 0;
    std::uint64_t role_count = 0;
};

/// Raw role label -> generalized role lookup. Labels are normalized
/// (trimmed, lowercased, inner whitespace collapsed) on both insert and lookup.
class RoleTable {
public:
    /// Built-in synonym table; has no default role.
    static RoleTable builtin();

    /// Reads "label,RoleName" lines. Blank lines and lines starting with '#'
    /// are ignored; a label of "*" sets the default role for unmatched labels.
    static RoleTable from_file(const std::filesystem::path& path);
    static RoleTable parse(std::istream& in, std::string_view source = "<stream>");

    void add(std::string_view raw_label, Role role);
    void set_default(std::optional<Role> role) { default_ = role; }
    std::optional<Role> default_role() const { return default_; }

    std::optional<Role> lookup(std::string_view raw_label) const;

private:
    std::unordered_map<std::string, Role> entries_;
    std::optional<Role> default_;
};

/// Lowercase, trim and collapse inner whitespace runs to one space.
std::string normalize_label(std::string_view raw);

/// Throws Error(UnknownRole) when the label matches no entry and no default is set.
Role generalize_role(std::string_view raw_label, const RoleTable& table = RoleTable::builtin());

/// Immutable, ordered collection of task records grouped by project.
class Corpus {
public:
    Corpus() = default;
    explicit Corpus(std::vector<TaskRecord> records);

    const std::vector<TaskRecord>& records() const noexcept { return records_; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }
    const TaskRecord& operator[](std::size_t i) const { return records_[i]; }

    /// project_id -> record positions, ascending.
    const std::map<std::string, std::vector<std::size_t>>& project_index() const noexcept {
        return project_index_;
    }
    /// Project ids in first-appearance order.
    std::vector<std::string> project_ids() const;
    bool has_project(std::string_view project_id) const;

    /// Sub-corpus made of the given positions, in the given order.
    Corpus subset(const std::vector<std::size_t>& positions) const;

    std::vector<std::string> titles() const;
    std::vector<Role> roles() const;

    friend bool operator==(const Corpus& a, const Corpus& b) { return a.records_ == b.records_; }

private:
    std::vector<TaskRecord> records_;
    std::map<std::string, std::vector<std::size_t>> project_index_;
};

inline constexpr std::string_view kCsvHeader = "ProjectId,ProjectName,Title,Description,Role";

Corpus load_csv(const std::filesystem::path& path, const RoleTable& table = RoleTable::builtin());
Corpus parse_csv(std::istream& in, const RoleTable& table = RoleTable::builtin(),
                 std::string_view source = "<stream>");

/// Loads a single CSV file, or every *.csv in a directory (sorted by file name)
/// concatenated into one corpus.
Corpus load_corpus(const std::filesystem::path& path, const RoleTable& table = RoleTable::builtin());

/// Writes the corpus with the canonical role names in the Role column.
void write_csv(std::ostream& out, const Corpus& corpus);

std::vector<ProjectMeta> load_project_meta(const std::filesystem::path& path);
std::vector<ProjectMeta> parse_project_meta(std::istream& in, std::string_view source = "<stream>");

/// True when the project satisfies the selection thresholds
/// (>= 100 tasks, >= 5 members, >= 5 sprints, > 3 roles).
bool meets_selection_criteria(const ProjectMeta& meta) noexcept;

/// Throws Error(MissingMeta) when a corpus project has no meta entry.
Corpus filter_projects(const Corpus& corpus, const std::vector<ProjectMeta>& meta);

/// Seeded uniform shuffle, first round(train_fraction * n) records go to train.
std::pair<Corpus, Corpus> split_train_validation(const Corpus& corpus, double train_fraction,
                                                 std::uint64_t seed);

/// Same permutation as split_train_validation, as record positions.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_positions(
    std::size_t n, double train_fraction, std::uint64_t seed);

RoleSet project_role_set(const Corpus& corpus, std::string_view project_id);

/// Role -> record count for one project (or the whole corpus when id is empty).
std::array<std::size_t, kRoleCount> role_distribution(const Corpus& corpus,
                                                      std::string_view project_id = {});

/// Every project's role set, keyed by project id.
std::map<std::string, RoleSet> all_project_roles(const Corpus& corpus);

bool is_valid_utf8(std::string_view bytes) noexcept;

}  // namespace taskalloc::corpus

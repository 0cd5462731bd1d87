#include "taskalloc/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "taskalloc/errors.hpp"
#include "taskalloc/random.hpp"

namespace taskalloc::corpus {

namespace {

std::string_view trim(std::string_view s) {
    const auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!s.empty() && is_space(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && is_space(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// RFC 4180 style: comma separated, double-quote quoting with "" escapes,
// quoted fields may span lines. Returns rows of fields.
std::vector<std::vector<std::string>> parse_csv_rows(std::string_view text, std::string_view source) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t line = 1;

    const auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    const auto end_row = [&] {
        end_field();
        // A completely blank line is not a record.
        if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
        row.clear();
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (field_started && !field.empty()) {
                    throw Error(ErrorCode::MalformedCsv,
                                std::string(source) + ":" + std::to_string(line) + ": stray quote");
                }
                in_quotes = true;
                field_started = true;
                break;
            case ',':
                end_field();
                break;
            case '\r':
                if (i + 1 < text.size() && text[i + 1] == '\n') break;
                field.push_back(c);
                break;
            case '\n':
                ++line;
                end_row();
                break;
            default:
                field.push_back(c);
                field_started = true;
        }
    }
    if (in_quotes) {
        throw Error(ErrorCode::MalformedCsv, std::string(source) + ": unterminated quoted field");
    }
    if (field_started || !field.empty() || !row.empty()) end_row();
    return rows;
}

std::string quote_csv(std::string_view s) {
    const bool needs = s.find_first_of(",\"\r\n") != std::string_view::npos;
    if (!needs) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::uint64_t parse_count(std::string_view field, std::string_view what, std::string_view where) {
    field = trim(field);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size()) {
        throw Error(ErrorCode::InvalidArgument,
                    std::string(where) + ": " + std::string(what) + " is not a non-negative integer: '" +
                        std::string(field) + "'");
    }
    return v;
}

}  // namespace

// ---------------------------------------------------------------------------
// Role mapping

std::string normalize_label(std::string_view raw) {
    std::string out;
    bool pending_space = false;
    for (unsigned char c : trim(raw)) {
        if (std::isspace(c)) {
            pending_space = true;
            continue;
        }
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

RoleTable RoleTable::builtin() {
    static const RoleTable table = [] {
        RoleTable t;
        const std::pair<std::string_view, Role> entries[] = {
            {"front", Role::FrontEndDeveloper},
            {"front-end", Role::FrontEndDeveloper},
            {"frontend", Role::FrontEndDeveloper},
            {"front end", Role::FrontEndDeveloper},
            {"front-end developer", Role::FrontEndDeveloper},
            {"frontend developer", Role::FrontEndDeveloper},
            {"front end developer", Role::FrontEndDeveloper},
            {"ux", Role::FrontEndDeveloper},
            {"ui", Role::FrontEndDeveloper},
            {"ui/ux", Role::FrontEndDeveloper},
            {"ux/ui", Role::FrontEndDeveloper},
            {"ui designer", Role::FrontEndDeveloper},
            {"ux designer", Role::FrontEndDeveloper},
            {"design", Role::FrontEndDeveloper},
            {"designer", Role::FrontEndDeveloper},
            {"back", Role::BackEndDeveloper},
            {"back-end", Role::BackEndDeveloper},
            {"backend", Role::BackEndDeveloper},
            {"back end", Role::BackEndDeveloper},
            {"back-end developer", Role::BackEndDeveloper},
            {"backend developer", Role::BackEndDeveloper},
            {"back end developer", Role::BackEndDeveloper},
            {"db", Role::BackEndDeveloper},
            {"dba", Role::BackEndDeveloper},
            {"database", Role::BackEndDeveloper},
            {"developer", Role::Developer},
            {"dev", Role::Developer},
            {"developers", Role::Developer},
            {"full stack", Role::Developer},
            {"full-stack", Role::Developer},
            {"fullstack", Role::Developer},
            {"full stack developer", Role::Developer},
            {"programmer", Role::Developer},
            {"product owner", Role::ProductOwner},
            {"product-owner", Role::ProductOwner},
            {"po", Role::ProductOwner},
            {"product manager", Role::ProductOwner},
            {"scrum master", Role::TeamCatalyst},
            {"manager", Role::TeamCatalyst},
            {"project manager", Role::TeamCatalyst},
            {"team catalyst", Role::TeamCatalyst},
            {"team lead", Role::TeamCatalyst},
            {"coordinator", Role::TeamCatalyst},
            {"writer", Role::Content},
            {"content", Role::Content},
            {"content writer", Role::Content},
            {"content creator", Role::Content},
            {"copywriter", Role::Content},
            {"stakeholder", Role::Stakeholder},
            {"stakeholders", Role::Stakeholder},
            {"client", Role::Stakeholder},
            {"customer", Role::Stakeholder},
            {"external", Role::Stakeholder},
        };
        for (const auto& [label, role] : entries) t.add(label, role);
        return t;
    }();
    return table;
}

RoleTable RoleTable::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open role table " + path.string());
    return parse(in, path.string());
}

RoleTable RoleTable::parse(std::istream& in, std::string_view source) {
    RoleTable t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto body = trim(line);
        if (body.empty() || body.front() == '#') continue;
        const auto comma = body.rfind(',');
        if (comma == std::string_view::npos) {
            throw Error(ErrorCode::InvalidArgument,
                        std::string(source) + ":" + std::to_string(lineno) + ": expected 'label,Role'");
        }
        const auto label = trim(body.substr(0, comma));
        const auto target = trim(body.substr(comma + 1));
        const auto role = parse_role_name(target);
        if (!role) {
            throw Error(ErrorCode::InvalidArgument, std::string(source) + ":" + std::to_string(lineno) +
                                                        ": unknown target role '" + std::string(target) + "'");
        }
        if (label == "*") {
            t.set_default(*role);
        } else {
            t.add(label, *role);
        }
    }
    return t;
}

void RoleTable::add(std::string_view raw_label, Role role) { entries_[normalize_label(raw_label)] = role; }

std::optional<Role> RoleTable::lookup(std::string_view raw_label) const {
    const auto key = normalize_label(raw_label);
    if (const auto it = entries_.find(key); it != entries_.end()) return it->second;
    // Canonical names always resolve so written corpora reload under any table.
    for (Role r : kAllRoles) {
        if (normalize_label(role_name(r)) == key) return r;
    }
    return default_;
}

Role generalize_role(std::string_view raw_label, const RoleTable& table) {
    if (trim(raw_label).empty()) throw Error(ErrorCode::UnknownRole, "empty role label");
    if (const auto r = table.lookup(raw_label)) return *r;
    throw Error(ErrorCode::UnknownRole, "no mapping for role label '" + std::string(raw_label) + "'");
}

// ---------------------------------------------------------------------------
// Corpus

Corpus::Corpus(std::vector<TaskRecord> records) : records_(std::move(records)) {
    for (std::size_t i = 0; i < records_.size(); ++i) project_index_[records_[i].project_id].push_back(i);
}

std::vector<std::string> Corpus::project_ids() const {
    std::vector<std::string> ids;
    for (const auto& r : records_) {
        if (std::find(ids.begin(), ids.end(), r.project_id) == ids.end()) ids.push_back(r.project_id);
    }
    return ids;
}

bool Corpus::has_project(std::string_view project_id) const {
    return project_index_.find(std::string(project_id)) != project_index_.end();
}

Corpus Corpus::subset(const std::vector<std::size_t>& positions) const {
    std::vector<TaskRecord> out;
    out.reserve(positions.size());
    for (auto p : positions) out.push_back(records_.at(p));
    return Corpus(std::move(out));
}

std::vector<std::string> Corpus::titles() const {
    std::vector<std::string> out;
    out.reserve(records_.size());
    for (const auto& r : records_) out.push_back(r.title);
    return out;
}

std::vector<Role> Corpus::roles() const {
    std::vector<Role> out;
    out.reserve(records_.size());
    for (const auto& r : records_) out.push_back(r.role);
    return out;
}

bool is_valid_utf8(std::string_view bytes) noexcept {
    std::size_t i = 0;
    while (i < bytes.size()) {
        const auto c = static_cast<unsigned char>(bytes[i]);
        std::size_t len;
        std::uint32_t cp;
        if (c < 0x80) {
            ++i;
            continue;
        } else if ((c & 0xE0) == 0xC0) {
            len = 2;
            cp = c & 0x1F;
        } else if ((c & 0xF0) == 0xE0) {
            len = 3;
            cp = c & 0x0F;
        } else if ((c & 0xF8) == 0xF0) {
            len = 4;
            cp = c & 0x07;
        } else {
            return false;
        }
        if (i + len > bytes.size()) return false;
        for (std::size_t k = 1; k < len; ++k) {
            const auto cc = static_cast<unsigned char>(bytes[i + k]);
            if ((cc & 0xC0) != 0x80) return false;
            cp = (cp << 6) | (cc & 0x3F);
        }
        // Overlong forms, surrogates and out-of-range code points.
        if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000)) return false;
        if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
        i += len;
    }
    return true;
}

Corpus parse_csv(std::istream& in, const RoleTable& table, std::string_view source) {
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    if (!is_valid_utf8(text)) throw Error(ErrorCode::InvalidEncoding, std::string(source) + ": not valid UTF-8");
    if (text.starts_with("\xEF\xBB\xBF")) text.erase(0, 3);

    const auto rows = parse_csv_rows(text, source);
    if (rows.empty()) throw Error(ErrorCode::MissingHeader, std::string(source) + ": empty file");
    const auto& header = rows.front();
    std::string joined;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) joined += ',';
        joined += header[i];
    }
    if (joined != kCsvHeader) {
        throw Error(ErrorCode::MissingHeader,
                    std::string(source) + ": expected header '" + std::string(kCsvHeader) + "', got '" + joined + "'");
    }

    std::vector<TaskRecord> records;
    records.reserve(rows.size() - 1);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        const std::string where = std::string(source) + ": row " + std::to_string(r);
        if (row.size() != 5) {
            throw Error(ErrorCode::MalformedCsv, where + ": expected 5 fields, got " + std::to_string(row.size()));
        }
        if (trim(row[2]).empty()) throw Error(ErrorCode::EmptyTitle, where);
        TaskRecord rec;
        rec.project_id = std::string(trim(row[0]));
        rec.project_name = row[1];
        rec.title = row[2];
        rec.description = row[3];
        const auto role = table.lookup(row[4]);
        if (!role || trim(row[4]).empty()) {
            throw Error(ErrorCode::UnknownRole, where + ": no mapping for role label '" + row[4] + "'");
        }
        rec.role = *role;
        records.push_back(std::move(rec));
    }
    return Corpus(std::move(records));
}

Corpus load_csv(const std::filesystem::path& path, const RoleTable& table) {
    std::istringstream in(read_file(path));
    return parse_csv(in, table, path.string());
}

Corpus load_corpus(const std::filesystem::path& path, const RoleTable& table) {
    if (!std::filesystem::is_directory(path)) return load_csv(path, table);
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(path)) {
        if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw Error(ErrorCode::Io, "no .csv files in " + path.string());
    std::vector<TaskRecord> all;
    for (const auto& f : files) {
        const auto part = load_csv(f, table);
        all.insert(all.end(), part.records().begin(), part.records().end());
    }
    return Corpus(std::move(all));
}

void write_csv(std::ostream& out, const Corpus& corpus) {
    out << kCsvHeader << '\n';
    for (const auto& r : corpus.records()) {
        out << quote_csv(r.project_id) << ',' << quote_csv(r.project_name) << ',' << quote_csv(r.title) << ','
            << quote_csv(r.description) << ',' << role_name(r.role) << '\n';
    }
}

// ---------------------------------------------------------------------------
// Project metadata and selection

std::vector<ProjectMeta> parse_project_meta(std::istream& in, std::string_view source) {
    std::vector<ProjectMeta> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto body = trim(line);
        if (body.empty() || body.front() == '#') continue;
        std::vector<std::string_view> fields;
        std::size_t start = 0;
        while (true) {
            const auto comma = body.find(',', start);
            fields.push_back(trim(body.substr(start, comma == std::string_view::npos ? body.npos : comma - start)));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (fields.size() != 5) {
            throw Error(ErrorCode::InvalidArgument,
                        std::string(source) + ":" + std::to_string(lineno) + ": expected 5 fields");
        }
        if (lineno == 1 && fields[0] == "project_id") continue;
        const std::string where = std::string(source) + ":" + std::to_string(lineno);
        ProjectMeta m;
        m.project_id = std::string(fields[0]);
        m.task_count = parse_count(fields[1], "task_count", where);
        m.member_count = parse_count(fields[2], "member_count", where);
        m.sprint_count = parse_count(fields[3], "sprint_count", where);
        m.role_count = parse_count(fields[4], "role_count", where);
        if (m.role_count > kRoleCount) {
            throw Error(ErrorCode::InvalidArgument, where + ": role_count exceeds " + std::to_string(kRoleCount));
        }
        out.push_back(std::move(m));
    }
    return out;
}

std::vector<ProjectMeta> load_project_meta(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open project metadata " + path.string());
    return parse_project_meta(in, path.string());
}

bool meets_selection_criteria(const ProjectMeta& meta) noexcept {
    return meta.task_count >= 100 && meta.member_count >= 5 && meta.sprint_count >= 5 && meta.role_count > 3;
}

Corpus filter_projects(const Corpus& corpus, const std::vector<ProjectMeta>& meta) {
    std::map<std::string, bool> keep;
    for (const auto& [id, positions] : corpus.project_index()) {
        const auto it = std::find_if(meta.begin(), meta.end(), [&](const ProjectMeta& m) { return m.project_id == id; });
        if (it == meta.end()) throw Error(ErrorCode::MissingMeta, "no metadata for project '" + id + "'");
        keep[id] = meets_selection_criteria(*it);
    }
    std::vector<TaskRecord> out;
    for (const auto& r : corpus.records()) {
        if (keep[r.project_id]) out.push_back(r);
    }
    return Corpus(std::move(out));
}

// ---------------------------------------------------------------------------
// Splitting and role sets

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_positions(std::size_t n, double train_fraction,
                                                                              std::uint64_t seed) {
    if (n == 0) throw Error(ErrorCode::EmptyCorpus, "cannot split an empty corpus");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "train fraction must lie in (0, 1)");
    }
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    Rng rng(seed);
    rng.shuffle(std::span<std::size_t>(perm));
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
    std::vector<std::size_t> train(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<std::size_t> valid(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
    return {std::move(train), std::move(valid)};
}

std::pair<Corpus, Corpus> split_train_validation(const Corpus& corpus, double train_fraction, std::uint64_t seed) {
    const auto [train, valid] = split_positions(corpus.size(), train_fraction, seed);
    return {corpus.subset(train), corpus.subset(valid)};
}

RoleSet project_role_set(const Corpus& corpus, std::string_view project_id) {
    const auto it = corpus.project_index().find(std::string(project_id));
    if (it == corpus.project_index().end()) {
        throw Error(ErrorCode::UnknownProject, "unknown project '" + std::string(project_id) + "'");
    }
    RoleSet s;
    for (auto p : it->second) s.insert(corpus[p].role);
    return s;
}

std::array<std::size_t, kRoleCount> role_distribution(const Corpus& corpus, std::string_view project_id) {
    std::array<std::size_t, kRoleCount> counts{};
    for (const auto& r : corpus.records()) {
        if (project_id.empty() || r.project_id == project_id) ++counts[role_index(r.role)];
    }
    return counts;
}

std::map<std::string, RoleSet> all_project_roles(const Corpus& corpus) {
    std::map<std::string, RoleSet> out;
    for (const auto& r : corpus.records()) out[r.project_id].insert(r.role);
    return out;
}

}  // namespace taskalloc::corpus

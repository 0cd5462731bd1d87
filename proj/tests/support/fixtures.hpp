#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "taskalloc/corpus.hpp"

namespace taskalloc::testing {

std::filesystem::path data_path(const std::string& name);
/// tests/data/fixture_tasks.csv
corpus::Corpus fixture_corpus();

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& text);

}  // namespace taskalloc::testing

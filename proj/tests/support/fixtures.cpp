#include "fixtures.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace taskalloc::testing {

namespace fs = std::filesystem;

fs::path data_path(const std::string& name) { return fs::path(TASKALLOC_TEST_DATA) / name; }

corpus::Corpus fixture_corpus() { return corpus::load_csv(data_path("fixture_tasks.csv")); }

TempDir::TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("taskalloc-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
}

}  // namespace taskalloc::testing

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <mrta/manual.hpp>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>

#include <unistd.h>

namespace mrta::testing
{

inline std::filesystem::path data_dir()
{
    return MRTA_DATA_DIR;
}

inline std::filesystem::path golden_dir()
{
    return MRTA_GOLDEN_DIR;
}

inline std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& content)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << content;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir
{
  public:
    TempDir()
    {
        static std::atomic<int> counter {0};
        _path = std::filesystem::temp_directory_path()
                / ("mrta-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(_path);
        std::filesystem::create_directories(_path);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(_path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    [[nodiscard]] const std::filesystem::path& path() const noexcept { return _path; }
    std::filesystem::path operator/(const std::string& name) const { return _path / name; }

  private:
    std::filesystem::path _path;
};

inline std::vector<InstructionManual> fixture_manuals()
{
    return load_manual_directory(data_dir() / "manuals").manuals;
}

inline bool eventually(const std::function<bool()>& predicate, std::chrono::milliseconds timeout = std::chrono::seconds(10))
{
    auto const deadline = std::chrono::steady_clock::now() + timeout;
    while (std::chrono::steady_clock::now() < deadline)
    {
        if (predicate())
            return true;
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    return predicate();
}

} // namespace mrta::testing

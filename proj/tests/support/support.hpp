#pragma once

#include "checkguard/subprocess.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace testing {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

void write_text(const fs::path& path, const std::string& content);
std::string read_text(const fs::path& path);

fs::path test_dir();
fs::path source_dir();
std::string golden(const std::string& name);

/// Runs the checkguard executable.
checkguard::ProcessResult run_cli(const std::vector<std::string>& args);

/// Scratch git repository with deterministic identities and dates.
class GitRepo {
public:
    explicit GitRepo(fs::path dir);

    /// Writes `files` (path -> content) and commits them with the given
    /// author/committer date. Returns the commit sha.
    std::string commit(const std::map<std::string, std::string>& files, const std::string& message,
                       const std::string& date);
    const fs::path& dir() const { return dir_; }

private:
    void git(const std::vector<std::string>& args);
    fs::path dir_;
};

struct JaxFixture {
    std::size_t checker_commits = 0;
    std::size_t other_commits = 0;
    std::size_t changes = 0;
    std::size_t planted = 0;
    fs::path script;
};

/// Repository shaped like the JAX study: 87 keyword-matched commits with
/// 493 file changes (118 of them planted checker bugs), plus unrelated
/// commits and an initial import that the keyword filter drops. The
/// scripted-backend file answers YES exactly for planted changes.
JaxFixture build_jax_fixture(const fs::path& repo_dir, const fs::path& script_path);

} // namespace testing

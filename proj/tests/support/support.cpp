#include "support.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace testing {

TempDir::TempDir()
{
    std::string tmpl = (fs::temp_directory_path() / "checkguard-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data()))
        throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
}

TempDir::~TempDir()
{
    std::error_code ec;
    fs::remove_all(path_, ec);
}

void write_text(const fs::path& path, const std::string& content)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << content;
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
}

std::string read_text(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path test_dir() { return CHECKGUARD_TEST_DIR; }
fs::path source_dir() { return CHECKGUARD_SOURCE_DIR; }
std::string golden(const std::string& name) { return read_text(test_dir() / "golden" / name); }

checkguard::ProcessResult run_cli(const std::vector<std::string>& args)
{
    std::vector<std::string> argv{CHECKGUARD_CLI};
    argv.insert(argv.end(), args.begin(), args.end());
    return checkguard::run_process(argv);
}

GitRepo::GitRepo(fs::path dir)
    : dir_(std::move(dir))
{
    fs::create_directories(dir_);
    git({"init", "-q"});
}

void GitRepo::git(const std::vector<std::string>& args)
{
    std::vector<std::string> argv{"git", "-C", dir_.string(), "-c", "user.name=Fixture", "-c",
                                  "user.email=fixture@example.com", "-c", "commit.gpgsign=false"};
    argv.insert(argv.end(), args.begin(), args.end());
    auto r = checkguard::run_process(argv);
    if (r.exit_code != 0)
        throw std::runtime_error("git command failed: " + args.front());
}

std::string GitRepo::commit(const std::map<std::string, std::string>& files, const std::string& message,
                            const std::string& date)
{
    for (const auto& [path, content] : files)
        write_text(dir_ / path, content);
    git({"add", "-A"});
    setenv("GIT_COMMITTER_DATE", date.c_str(), 1);
    git({"commit", "-q", "--no-verify", "-m", message, "--date", date});
    auto r = checkguard::run_process({"git", "-C", dir_.string(), "rev-parse", "HEAD"});
    std::string sha = r.out;
    while (!sha.empty() && (sha.back() == '\n' || sha.back() == '\r'))
        sha.pop_back();
    return sha;
}

JaxFixture build_jax_fixture(const fs::path& repo_dir, const fs::path& script_path)
{
    constexpr std::size_t kCommits = 87;
    constexpr std::size_t kChanges = 493;
    constexpr std::size_t kPlanted = 118;
    constexpr std::size_t kFiles = 8;

    GitRepo repo(repo_dir);
    std::vector<std::string> contents(kFiles);
    std::map<std::string, std::string> initial;
    for (std::size_t f = 0; f < kFiles; ++f) {
        contents[f] = "def op_" + std::to_string(f) + "(x):\n    y = x\n";
        initial["jax/_src/op_" + std::to_string(f) + ".py"] = contents[f];
    }
    JaxFixture fx;
    repo.commit(initial, "Initial import of primitives", "2023-01-01T00:00:00Z");
    ++fx.other_commits;

    // 493 = 58 commits of 6 changes + 29 commits of 5.
    std::vector<std::size_t> per_commit(kCommits, 5);
    for (std::size_t i = 0; i < kChanges - 5 * kCommits; ++i)
        per_commit[i * kCommits / (kChanges - 5 * kCommits)] = 6;

    std::vector<bool> planted(kChanges, false);
    std::fill(planted.begin(), planted.begin() + kPlanted, true);
    std::mt19937_64 rng(20240601);
    for (std::size_t i = kChanges - 1; i > 0; --i)
        std::swap(planted[i], planted[rng() % (i + 1)]);

    std::size_t change = 0;
    int minute = 0;
    for (std::size_t c = 0; c < kCommits; ++c) {
        std::map<std::string, std::string> files;
        for (std::size_t k = 0; k < per_commit[c]; ++k, ++change) {
            std::size_t f = k;
            std::string id = std::to_string(change);
            std::string line = planted[change] ? "    if not planted_guard_" + id + "(y): raise ValueError(\"bad\")\n"
                                               : "    y = transform_" + id + "(y)\n";
            contents[f] += line;
            files["jax/_src/op_" + std::to_string(f) + ".py"] = contents[f];
        }
        char date[32];
        ++minute;
        std::snprintf(date, sizeof date, "2023-02-%02dT%02d:%02d:00Z", 1 + minute / 600, (minute / 60) % 10,
                      minute % 60);
        repo.commit(files, "Add shape check to primitive batch " + std::to_string(c), date);
        ++fx.checker_commits;

        if (c % 10 == 0) {
            ++minute;
            std::snprintf(date, sizeof date, "2023-02-%02dT%02d:%02d:00Z", 1 + minute / 600, (minute / 60) % 10,
                          minute % 60);
            repo.commit({{"docs/notes_" + std::to_string(c) + ".md", "Release notes entry " + std::to_string(c) + "\n"}},
                        "Update release notes " + std::to_string(c), date);
            ++fx.other_commits;
        }
    }
    fx.changes = change;
    fx.planted = static_cast<std::size_t>(std::count(planted.begin(), planted.end(), true));

    std::vector<nlohmann::json> rules{
        {{"contains", "Please describe the root cause of the bug"},
         {"response", "The primitive does not validate the shape of its input before use."}},
        {{"contains", "You are given a bug explanation"},
         {"response", "The input must be checked first.\n```\nif not valid_shape(y): raise ValueError(\"bad\")\n```"}},
        {{"contains", {"You are an AI trained to detect bugs", "planted_guard_"}}, {"response", "YES"}},
        {{"default", true}, {"response", "NO"}},
    };
    std::string script;
    for (const auto& r : rules)
        script += r.dump() + "\n";
    write_text(script_path, script);
    fx.script = script_path;
    return fx;
}

} // namespace testing

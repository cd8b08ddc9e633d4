#pragma once

#include "checkguard/diff.hpp"
#include "checkguard/text.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace checkguard::miner {

struct Commit {
    std::string sha;
    std::string message;
    text::TimePoint authored_at{};
    std::string repo;
    std::vector<diff::CodeChange> changes;
    std::size_t file_count = 0;
    /// Set when the commit's diff could not be parsed; changes is then empty.
    std::optional<std::string> diff_error;
};

/// Distinct file paths across changes.
std::size_t count_files(const std::vector<diff::CodeChange>& changes);

class RepoUnreadable : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidDateRange : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Lists non-merge commits of a local git repository (bare or working
/// clone) whose author timestamp lies in [since, until], oldest first.
/// Each commit carries its parsed per-file changes. `repo_id` defaults to
/// the repository directory name.
std::vector<Commit> mine_commits(const std::filesystem::path& repo_path, text::TimePoint since,
                                 text::TimePoint until, std::string repo_id = {});

/// Mines several repositories concurrently; results are concatenated in
/// the order of `repo_paths`.
std::vector<Commit> mine_repositories(const std::vector<std::filesystem::path>& repo_paths,
                                      text::TimePoint since, text::TimePoint until);

struct KeywordSet {
    std::set<std::string> keywords;
    int round = 0;

    /// Lowercases, trims and de-duplicates. Empty entries are dropped.
    static KeywordSet from_list(const std::vector<std::string>& words, int round = 0);
    bool contains(const std::string& k) const { return keywords.contains(k); }
};

/// One keyword per line; '#' starts a comment.
KeywordSet load_keyword_file(const std::filesystem::path& path);
std::set<std::string> load_word_list(const std::filesystem::path& path);

enum class MatchLocation { Message, Diff, Both };

struct MatchResult {
    std::string commit_sha;
    std::vector<std::string> matched_keywords;
    MatchLocation matched_in = MatchLocation::Message;
};

/// A keyword matches when its word tokens occur as a contiguous run of the
/// text's word tokens (see text::word_tokens). Searched in the commit
/// message and in removed/added diff lines. Throws std::invalid_argument for
/// an empty keyword set.
std::optional<MatchResult> match_keywords(const Commit& commit, const KeywordSet& keywords);

struct KeywordCandidate {
    std::string token;
    std::size_t document_frequency = 0;

    bool operator==(const KeywordCandidate&) const = default;
};

/// Frequency-ranked new keyword candidates from matched commit messages.
/// Only tokens appearing in at least two messages qualify; existing
/// keywords and stoplist entries never do. Suggestions only: callers must
/// not add them to the keyword file automatically.
std::vector<KeywordCandidate> snowball_suggest(const std::vector<Commit>& matched, const KeywordSet& keywords,
                                               const std::set<std::string>& stoplist, std::size_t top_n);

struct EvalThresholds {
    std::size_t max_files = 10;
    std::size_t max_loc = 15;
};

/// Keeps commits touching at most max_files files whose every change has
/// at most max_loc removed+added lines. Order is preserved.
std::vector<Commit> filter_for_eval(const std::vector<Commit>& commits, EvalThresholds thresholds = {});

std::string to_string(MatchLocation loc);

void to_json(nlohmann::json& j, const Commit& c);
void from_json(const nlohmann::json& j, Commit& c);

std::vector<Commit> read_commits(const std::filesystem::path& path);
void write_commits(const std::filesystem::path& path, const std::vector<Commit>& commits);

} // namespace checkguard::miner

#include "checkguard/miner.hpp"

#include "checkguard/io.hpp"
#include "checkguard/subprocess.hpp"

#include <algorithm>
#include <future>
#include <map>

namespace checkguard::miner {

namespace {

std::vector<std::string> git(const std::filesystem::path& repo, std::vector<std::string> args)
{
    std::vector<std::string> argv{"git", "-c", "core.quotepath=false", "-C", repo.string()};
    argv.insert(argv.end(), std::make_move_iterator(args.begin()), std::make_move_iterator(args.end()));
    return argv;
}

std::string strip_comment(std::string_view line)
{
    auto hash = line.find('#');
    if (hash != std::string_view::npos)
        line = line.substr(0, hash);
    return text::to_lower(text::trim(line));
}

} // namespace

std::size_t count_files(const std::vector<diff::CodeChange>& changes)
{
    std::set<std::string> paths;
    for (const auto& c : changes)
        paths.insert(c.file_path);
    return paths.size();
}

std::vector<Commit> mine_commits(const std::filesystem::path& repo_path, text::TimePoint since,
                                 text::TimePoint until, std::string repo_id)
{
    if (since > until)
        throw InvalidDateRange("since " + text::format_iso8601(since) + " is after until "
                               + text::format_iso8601(until));

    std::error_code ec;
    if (!std::filesystem::is_directory(repo_path, ec))
        throw RepoUnreadable("not a directory: " + repo_path.string());
    if (run_process(git(repo_path, {"rev-parse", "--git-dir"})).exit_code != 0)
        throw RepoUnreadable("not a git repository: " + repo_path.string());

    if (repo_id.empty()) {
        auto p = std::filesystem::weakly_canonical(repo_path, ec);
        repo_id = (ec ? repo_path : p).filename().string();
        if (repo_id.size() > 4 && repo_id.ends_with(".git"))
            repo_id.resize(repo_id.size() - 4);
    }

    // An empty repository has no HEAD; that is an empty history, not an error.
    if (run_process(git(repo_path, {"rev-parse", "--verify", "--quiet", "HEAD"})).exit_code != 0)
        return {};

    auto log = run_process(git(repo_path, {"log", "--no-merges", "--format=%H%x1f%at%x1f%B%x1e"}));
    if (log.exit_code != 0)
        throw RepoUnreadable("git log failed in " + repo_path.string());

    std::vector<Commit> commits;
    std::size_t start = 0;
    while (start < log.out.size()) {
        auto end = log.out.find('\x1e', start);
        if (end == std::string::npos)
            end = log.out.size();
        std::string_view rec(log.out.data() + start, end - start);
        start = end + 1;
        rec = text::trim(rec);
        if (rec.empty())
            continue;
        auto f1 = rec.find('\x1f');
        auto f2 = rec.find('\x1f', f1 == std::string_view::npos ? rec.size() : f1 + 1);
        if (f1 == std::string_view::npos || f2 == std::string_view::npos)
            throw RepoUnreadable("unexpected git log output in " + repo_path.string());
        Commit c;
        c.sha = std::string(rec.substr(0, f1));
        c.authored_at = text::TimePoint{std::chrono::seconds{std::stoll(std::string(rec.substr(f1 + 1, f2 - f1 - 1)))}};
        c.message = text::sanitize_utf8(text::trim(rec.substr(f2 + 1)));
        c.repo = repo_id;
        if (c.authored_at < since || c.authored_at > until)
            continue;
        commits.push_back(std::move(c));
    }

    // Oldest first; equal timestamps keep topological order.
    std::reverse(commits.begin(), commits.end());
    std::stable_sort(commits.begin(), commits.end(),
                     [](const Commit& a, const Commit& b) { return a.authored_at < b.authored_at; });

    for (auto& c : commits) {
        auto show = run_process(git(repo_path, {"show", "--format=", "--no-color", "--no-ext-diff", "--no-textconv",
                                                "-p", c.sha}));
        if (show.exit_code != 0) {
            c.diff_error = "git show failed";
            continue;
        }
        try {
            c.changes = diff::parse_diff(show.out);
        } catch (const diff::MalformedDiff& e) {
            c.changes.clear();
            c.diff_error = e.what();
        }
        c.file_count = count_files(c.changes);
    }
    return commits;
}

std::vector<Commit> mine_repositories(const std::vector<std::filesystem::path>& repo_paths, text::TimePoint since,
                                      text::TimePoint until)
{
    std::vector<std::future<std::vector<Commit>>> jobs;
    jobs.reserve(repo_paths.size());
    for (const auto& p : repo_paths)
        jobs.push_back(std::async(std::launch::async, [p, since, until] { return mine_commits(p, since, until); }));
    std::vector<Commit> all;
    for (auto& j : jobs) {
        auto part = j.get();
        all.insert(all.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
    return all;
}

KeywordSet KeywordSet::from_list(const std::vector<std::string>& words, int round)
{
    KeywordSet ks;
    ks.round = round;
    for (const auto& w : words) {
        auto k = text::to_lower(text::trim(w));
        if (!k.empty())
            ks.keywords.insert(std::move(k));
    }
    return ks;
}

std::set<std::string> load_word_list(const std::filesystem::path& path)
{
    std::set<std::string> out;
    const auto content = io::read_file(path);
    for (auto line : text::split_lines(content)) {
        auto w = strip_comment(line);
        if (!w.empty())
            out.insert(std::move(w));
    }
    return out;
}

KeywordSet load_keyword_file(const std::filesystem::path& path)
{
    KeywordSet ks;
    ks.keywords = load_word_list(path);
    return ks;
}

std::optional<MatchResult> match_keywords(const Commit& commit, const KeywordSet& keywords)
{
    if (keywords.keywords.empty())
        throw std::invalid_argument("match_keywords: empty keyword set");

    const auto message_tokens = text::word_tokens(commit.message);
    std::vector<std::vector<std::string>> diff_lines;
    for (const auto& ch : commit.changes) {
        for (const auto& l : ch.removed_lines)
            diff_lines.push_back(text::word_tokens(l));
        for (const auto& l : ch.added_lines)
            diff_lines.push_back(text::word_tokens(l));
    }

    MatchResult r;
    r.commit_sha = commit.sha;
    bool in_message = false;
    bool in_diff = false;
    for (const auto& kw : keywords.keywords) {
        const auto needle = text::word_tokens(kw);
        bool m = text::contains_token_run(message_tokens, needle);
        bool d = std::any_of(diff_lines.begin(), diff_lines.end(),
                             [&](const auto& toks) { return text::contains_token_run(toks, needle); });
        if (m || d)
            r.matched_keywords.push_back(kw);
        in_message = in_message || m;
        in_diff = in_diff || d;
    }
    if (r.matched_keywords.empty())
        return std::nullopt;
    r.matched_in = in_message && in_diff ? MatchLocation::Both : in_message ? MatchLocation::Message : MatchLocation::Diff;
    return r;
}

std::vector<KeywordCandidate> snowball_suggest(const std::vector<Commit>& matched, const KeywordSet& keywords,
                                               const std::set<std::string>& stoplist, std::size_t top_n)
{
    if (top_n < 1)
        throw std::invalid_argument("snowball_suggest: top_n must be >= 1");

    std::map<std::string, std::size_t> df;
    for (const auto& c : matched) {
        auto toks = text::word_tokens(c.message);
        std::set<std::string> uniq(toks.begin(), toks.end());
        for (const auto& t : uniq)
            ++df[t];
    }

    std::vector<KeywordCandidate> out;
    for (const auto& [tok, n] : df) {
        if (n < 2 || keywords.contains(tok) || stoplist.contains(tok))
            continue;
        out.push_back({tok, n});
    }
    std::stable_sort(out.begin(), out.end(), [](const KeywordCandidate& a, const KeywordCandidate& b) {
        if (a.document_frequency != b.document_frequency)
            return a.document_frequency > b.document_frequency;
        return a.token < b.token;
    });
    if (out.size() > top_n)
        out.resize(top_n);
    return out;
}

std::vector<Commit> filter_for_eval(const std::vector<Commit>& commits, EvalThresholds thresholds)
{
    if (thresholds.max_files < 1 || thresholds.max_loc < 1)
        throw std::invalid_argument("filter_for_eval: thresholds must be >= 1");
    std::vector<Commit> out;
    for (const auto& c : commits) {
        if (c.file_count > thresholds.max_files)
            continue;
        bool small = std::all_of(c.changes.begin(), c.changes.end(),
                                 [&](const diff::CodeChange& ch) { return ch.changed_loc() <= thresholds.max_loc; });
        if (small)
            out.push_back(c);
    }
    return out;
}

std::string to_string(MatchLocation loc)
{
    switch (loc) {
    case MatchLocation::Message:
        return "message";
    case MatchLocation::Diff:
        return "diff";
    case MatchLocation::Both:
        break;
    }
    return "both";
}

void to_json(nlohmann::json& j, const Commit& c)
{
    j = {{"sha", c.sha},
         {"repo", c.repo},
         {"authored_at", text::format_iso8601(c.authored_at)},
         {"message", c.message},
         {"file_count", c.file_count},
         {"changes", c.changes}};
    if (c.diff_error)
        j["diff_error"] = *c.diff_error;
}

void from_json(const nlohmann::json& j, Commit& c)
{
    c.sha = j.at("sha").get<std::string>();
    if (c.sha.empty())
        throw std::invalid_argument("commit record with empty sha");
    c.repo = j.value("repo", std::string{});
    c.authored_at = text::parse_iso8601(j.at("authored_at").get<std::string>());
    c.message = j.value("message", std::string{});
    c.changes = j.value("changes", std::vector<diff::CodeChange>{});
    c.file_count = count_files(c.changes);
    if (j.contains("diff_error"))
        c.diff_error = j.at("diff_error").get<std::string>();
}

std::vector<Commit> read_commits(const std::filesystem::path& path)
{
    std::vector<Commit> out;
    std::set<std::string> seen;
    for (auto& rec : io::read_jsonl(path)) {
        try {
            out.push_back(rec.value.get<Commit>());
        } catch (const std::exception& e) {
            throw io::RecordParseError(e.what(), rec.line);
        }
        if (!seen.insert(out.back().sha).second)
            throw io::RecordParseError("duplicate sha " + out.back().sha, rec.line);
    }
    return out;
}

void write_commits(const std::filesystem::path& path, const std::vector<Commit>& commits)
{
    std::vector<nlohmann::json> recs(commits.begin(), commits.end());
    io::write_file_atomic(path, io::dump_jsonl(recs));
}

} // namespace checkguard::miner

#include "checkguard/diff.hpp"

#include "checkguard/text.hpp"

#include <cctype>
#include <limits>
#include <optional>

namespace checkguard::diff {

namespace {

// Text is UTF-8 sanitized; offset is a byte position in the raw input.
struct Line {
    std::string text;
    std::size_t offset;
};

std::vector<Line> index_lines(std::string_view s)
{
    std::vector<Line> out;
    std::size_t start = 0;
    while (start < s.size()) {
        auto nl = s.find('\n', start);
        if (nl == std::string_view::npos) {
            out.push_back({text::sanitize_utf8(s.substr(start)), start});
            break;
        }
        out.push_back({text::sanitize_utf8(s.substr(start, nl - start)), start});
        start = nl + 1;
    }
    return out;
}

bool starts_with(std::string_view s, std::string_view p) { return s.substr(0, p.size()) == p; }

// Parses an unsigned decimal at s[pos...]; advances pos.
std::optional<long> parse_number(std::string_view s, std::size_t& pos)
{
    std::size_t begin = pos;
    long v = 0;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) {
        if (v > (std::numeric_limits<int>::max() - 9) / 10)
            return std::nullopt;
        v = v * 10 + (s[pos] - '0');
        ++pos;
    }
    if (pos == begin)
        return std::nullopt;
    return v;
}

// "@@ -a[,b] +c[,d] @@[ section]"
std::optional<Hunk> parse_hunk_header(std::string_view line)
{
    Hunk h;
    std::size_t pos = 0;
    if (!starts_with(line, "@@ -"))
        return std::nullopt;
    pos = 4;
    auto a = parse_number(line, pos);
    if (!a)
        return std::nullopt;
    h.old_start = *a;
    h.old_len = 1;
    if (pos < line.size() && line[pos] == ',') {
        ++pos;
        auto b = parse_number(line, pos);
        if (!b)
            return std::nullopt;
        h.old_len = *b;
    }
    if (line.substr(pos, 2) != " +")
        return std::nullopt;
    pos += 2;
    auto c = parse_number(line, pos);
    if (!c)
        return std::nullopt;
    h.new_start = *c;
    h.new_len = 1;
    if (pos < line.size() && line[pos] == ',') {
        ++pos;
        auto d = parse_number(line, pos);
        if (!d)
            return std::nullopt;
        h.new_len = *d;
    }
    if (line.substr(pos, 3) != " @@")
        return std::nullopt;
    h.header = std::string(line);
    return h;
}

std::string unquote(std::string_view p)
{
    if (p.size() >= 2 && p.front() == '"' && p.back() == '"')
        p = p.substr(1, p.size() - 2);
    return std::string(p);
}

// Path from a "--- x" / "+++ x" line; empty for /dev/null.
std::string marker_path(std::string_view rest)
{
    auto tab = rest.find('\t');
    if (tab != std::string_view::npos)
        rest = rest.substr(0, tab);
    rest = text::trim(rest);
    std::string p = unquote(rest);
    if (p == "/dev/null")
        return {};
    if (starts_with(p, "a/") || starts_with(p, "b/"))
        p = p.substr(2);
    return p;
}

// "diff --git a/X b/Y" -> Y. Ambiguous for paths containing " b/", where the
// last occurrence is taken.
std::string git_header_path(std::string_view rest)
{
    auto pos = rest.rfind(" b/");
    if (pos == std::string_view::npos) {
        pos = rest.rfind(" \"b/");
        if (pos == std::string_view::npos)
            return {};
        return unquote(rest.substr(pos + 1)).substr(2);
    }
    return std::string(rest.substr(pos + 3));
}

struct Section {
    std::string header_path;
    std::string old_path;
    std::string new_path;
    bool binary = false;
    std::vector<Hunk> hunks;
    std::size_t offset = 0;

    std::string path() const
    {
        if (!new_path.empty())
            return new_path;
        if (!old_path.empty())
            return old_path;
        return header_path;
    }
};

} // namespace

CodeChange make_change(std::string file_path, std::vector<Hunk> hunks, bool binary)
{
    CodeChange c;
    c.file_path = std::move(file_path);
    c.binary = binary;
    c.hunks = std::move(hunks);
    for (const auto& h : c.hunks) {
        for (const auto& l : h.lines) {
            if (l.tag == LineTag::Removed)
                c.removed_lines.push_back(l.text);
            else if (l.tag == LineTag::Added)
                c.added_lines.push_back(l.text);
        }
    }
    return c;
}

std::vector<CodeChange> parse_diff(std::string_view raw)
{
    const auto lines = index_lines(raw);

    std::vector<CodeChange> out;
    std::optional<Section> cur;

    auto flush = [&] {
        if (!cur)
            return;
        std::string path = cur->path();
        if (path.empty())
            throw MalformedDiff("file section without a path", cur->offset);
        out.push_back(make_change(std::move(path), std::move(cur->hunks), cur->binary));
        cur.reset();
    };

    std::size_t i = 0;
    while (i < lines.size()) {
        const auto& line = lines[i];
        std::string_view t = line.text;

        if (starts_with(t, "diff --git ")) {
            flush();
            cur.emplace();
            cur->offset = line.offset;
            cur->header_path = git_header_path(t.substr(11));
            ++i;
            continue;
        }

        // Plain unified diff: a "---"/"+++" pair opens a section unless it is
        // the marker pair of a git section that has no hunks yet.
        if (starts_with(t, "--- ") && i + 1 < lines.size() && starts_with(lines[i + 1].text, "+++ ")) {
            bool belongs_to_git_header = cur && cur->hunks.empty() && !cur->header_path.empty()
                && cur->old_path.empty() && cur->new_path.empty();
            if (!belongs_to_git_header) {
                flush();
                cur.emplace();
                cur->offset = line.offset;
            }
            cur->old_path = marker_path(t.substr(4));
            cur->new_path = marker_path(lines[i + 1].text.substr(4));
            if (cur->old_path.empty() && cur->new_path.empty())
                throw MalformedDiff("both sides are /dev/null", line.offset);
            i += 2;
            continue;
        }

        if (!cur) {
            // Preamble (commit headers, mail text) before the first file.
            ++i;
            continue;
        }

        if (starts_with(t, "Binary files ") || t == "GIT binary patch") {
            cur->binary = true;
            ++i;
            continue;
        }

        if (starts_with(t, "rename to ") && cur->new_path.empty()) {
            cur->header_path = std::string(t.substr(10));
            ++i;
            continue;
        }

        if (starts_with(t, "@@")) {
            auto hunk = parse_hunk_header(t);
            if (!hunk)
                throw MalformedDiff("unrecognized hunk header", line.offset);
            ++i;
            long old_left = hunk->old_len;
            long new_left = hunk->new_len;
            while (old_left > 0 || new_left > 0) {
                if (i >= lines.size())
                    throw MalformedDiff("hunk truncated", raw.size());
                std::string_view body = lines[i].text;
                char tag = body.empty() ? ' ' : body.front();
                std::string content(body.empty() ? body : body.substr(1));
                if (tag == ' ' && old_left > 0 && new_left > 0) {
                    hunk->lines.push_back({LineTag::Context, std::move(content)});
                    --old_left;
                    --new_left;
                } else if (tag == '-' && old_left > 0) {
                    hunk->lines.push_back({LineTag::Removed, std::move(content)});
                    --old_left;
                } else if (tag == '+' && new_left > 0) {
                    hunk->lines.push_back({LineTag::Added, std::move(content)});
                    --new_left;
                } else if (tag == '\\') {
                    // "\ No newline at end of file"
                } else {
                    throw MalformedDiff("hunk body does not match header counts", lines[i].offset);
                }
                ++i;
            }
            while (i < lines.size() && starts_with(lines[i].text, "\\"))
                ++i;
            cur->hunks.push_back(std::move(*hunk));
            continue;
        }

        // index, mode, similarity and other extended header lines.
        ++i;
    }
    flush();
    return out;
}

std::string render_change(const CodeChange& change)
{
    std::string out;
    bool first = true;
    auto emit = [&](char prefix, const std::string& l) {
        if (!first)
            out.push_back('\n');
        first = false;
        out.push_back(prefix);
        out.append(l);
    };
    for (const auto& l : change.removed_lines)
        emit('-', l);
    for (const auto& l : change.added_lines)
        emit('+', l);
    return out;
}

char tag_char(LineTag tag)
{
    switch (tag) {
    case LineTag::Removed:
        return '-';
    case LineTag::Added:
        return '+';
    case LineTag::Context:
        break;
    }
    return ' ';
}

std::string serialize_hunk(const Hunk& hunk)
{
    std::string out = hunk.header;
    out.push_back('\n');
    for (const auto& l : hunk.lines) {
        out.push_back(tag_char(l.tag));
        out.append(l.text);
        out.push_back('\n');
    }
    return out;
}

void to_json(nlohmann::json& j, const CodeChange& c)
{
    auto hunks = nlohmann::json::array();
    for (const auto& h : c.hunks) {
        auto lines = nlohmann::json::array();
        for (const auto& l : h.lines)
            lines.push_back(std::string(1, tag_char(l.tag)) + l.text);
        hunks.push_back({{"header", h.header},
                         {"old_start", h.old_start},
                         {"old_len", h.old_len},
                         {"new_start", h.new_start},
                         {"new_len", h.new_len},
                         {"lines", std::move(lines)}});
    }
    j = {{"file_path", c.file_path}, {"binary", c.binary}, {"hunks", std::move(hunks)}};
}

void from_json(const nlohmann::json& j, CodeChange& c)
{
    std::vector<Hunk> hunks;
    for (const auto& jh : j.value("hunks", nlohmann::json::array())) {
        Hunk h;
        h.header = jh.at("header").get<std::string>();
        h.old_start = jh.at("old_start").get<long>();
        h.old_len = jh.at("old_len").get<long>();
        h.new_start = jh.at("new_start").get<long>();
        h.new_len = jh.at("new_len").get<long>();
        for (const auto& jl : jh.at("lines")) {
            auto s = jl.get<std::string>();
            if (s.empty())
                throw std::invalid_argument("empty hunk line in change record");
            LineTag tag = s[0] == '-' ? LineTag::Removed : s[0] == '+' ? LineTag::Added : LineTag::Context;
            h.lines.push_back({tag, s.substr(1)});
        }
        hunks.push_back(std::move(h));
    }
    c = make_change(j.at("file_path").get<std::string>(), std::move(hunks), j.value("binary", false));
}

} // namespace checkguard::diff

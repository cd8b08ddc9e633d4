#pragma once

#include <json.hpp>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace checkguard::diff {

enum class LineTag { Context, Removed, Added };

struct HunkLine {
    LineTag tag = LineTag::Context;
    std::string text;

    bool operator==(const HunkLine&) const = default;
};

struct Hunk {
    long old_start = 0;
    long old_len = 0;
    long new_start = 0;
    long new_len = 0;
    /// The "@@ ... @@" line as it appeared, kept so hunks re-serialize exactly.
    std::string header;
    std::vector<HunkLine> lines;

    bool operator==(const Hunk&) const = default;
};

/// Per-file removed/added lines of one diff section.
struct CodeChange {
    std::string file_path;
    bool binary = false;
    std::vector<Hunk> hunks;
    std::vector<std::string> removed_lines;
    std::vector<std::string> added_lines;

    /// Removed plus added lines. Context lines and hunk headers do not count.
    std::size_t changed_loc() const { return removed_lines.size() + added_lines.size(); }

    bool operator==(const CodeChange&) const = default;
};

/// Builds a CodeChange from hunks, deriving removed_lines/added_lines.
CodeChange make_change(std::string file_path, std::vector<Hunk> hunks, bool binary = false);

class MalformedDiff : public std::runtime_error {
public:
    MalformedDiff(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " at byte " + std::to_string(offset))
        , offset_(offset)
    {
    }

    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

/// Parses git-style or plain unified diff text into one CodeChange per file
/// section. Text before the first file header is ignored, "\ No newline at
/// end of file" markers are dropped, binary sections yield an empty change
/// with binary = true. Invalid UTF-8 is replaced with U+FFFD.
///
/// Throws MalformedDiff for an unparseable "@@" header or a hunk body that
/// does not match its header counts.
std::vector<CodeChange> parse_diff(std::string_view raw);

/// Canonical text: each removed line prefixed '-', then each added line
/// prefixed '+', joined with '\n' and no trailing newline.
std::string render_change(const CodeChange& change);

/// Re-serializes a hunk as header line plus tagged body lines, each
/// newline-terminated.
std::string serialize_hunk(const Hunk& hunk);

char tag_char(LineTag tag);

void to_json(nlohmann::json& j, const CodeChange& c);
void from_json(const nlohmann::json& j, CodeChange& c);

} // namespace checkguard::diff

#pragma once

#include <json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace checkguard::io {

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A record file line that is not valid JSON. `line` is 1-based.
class RecordParseError : public std::runtime_error {
public:
    RecordParseError(const std::string& what, std::size_t line)
        : std::runtime_error("line " + std::to_string(line) + ": " + what)
        , line_(line)
    {
    }

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

std::string read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view data);

struct NumberedRecord {
    std::size_t line = 0;
    nlohmann::json value;
};

/// Line-delimited JSON. Blank lines are skipped.
std::vector<NumberedRecord> read_jsonl(const std::filesystem::path& path);
std::string dump_jsonl(const std::vector<nlohmann::json>& records);

} // namespace checkguard::io

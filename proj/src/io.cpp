#include "checkguard/io.hpp"

#include "checkguard/text.hpp"

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace checkguard::io {

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view data)
{
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw IoError("cannot write " + tmp.string() + ": " + std::strerror(errno));
        out.write(data.data(), static_cast<std::streamsize>(data.size()));
        out.flush();
        if (!out) {
            int err = errno;
            std::error_code ec;
            std::filesystem::remove(tmp, ec);
            throw IoError("write failed for " + path.string() + ": " + std::strerror(err));
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec)
        throw IoError("cannot replace " + path.string() + ": " + ec.message());
}

std::vector<NumberedRecord> read_jsonl(const std::filesystem::path& path)
{
    const std::string content = read_file(path);
    std::vector<NumberedRecord> out;
    std::size_t lineno = 0;
    for (auto line : text::split_lines(content)) {
        ++lineno;
        if (text::trim(line).empty())
            continue;
        try {
            out.push_back({lineno, nlohmann::json::parse(line)});
        } catch (const nlohmann::json::parse_error& e) {
            throw RecordParseError(e.what(), lineno);
        }
    }
    return out;
}

std::string dump_jsonl(const std::vector<nlohmann::json>& records)
{
    std::string out;
    for (const auto& r : records) {
        out.append(r.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace));
        out.push_back('\n');
    }
    return out;
}

} // namespace checkguard::io

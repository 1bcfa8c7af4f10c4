#include "roverad/io.hpp"

#include <fstream>
#include <sstream>

#include "roverad/error.hpp"

namespace roverad {

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open " + path.string() + " for writing");
    }
    out << contents;
    if (!out) {
        throw IoError("write failed for " + path.string());
    }
}

}  // namespace roverad

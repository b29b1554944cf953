#pragma once

#include "cadet/ast.hpp"
#include "cadet/matcher.hpp"
#include "cadet/template.hpp"

#include <filesystem>
#include <string>

namespace cadet::testing {

std::filesystem::path fixture(const std::string& name);
std::string read_file(const std::filesystem::path& p);

// Aborts the test binary on failure; fixtures are known to parse.
SourceUnit parse_fixture(const std::string& name);
SourceUnit parse_text(const std::string& php, const std::string& path = "inline.php");

Template derive_lines(const SourceUnit& unit, int first, int last, SymbolPolicy policy = SymbolPolicy::Preserve);
Template derive_all(const SourceUnit& unit, SymbolPolicy policy = SymbolPolicy::Preserve);

// Fresh scratch directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& stem = "cadet");
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
};

} // namespace cadet::testing

#include "support.hpp"

#include "cadet/php_parser.hpp"

#include <atomic>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unistd.h>

namespace cadet::testing {

namespace fs = std::filesystem;

fs::path fixture(const std::string& name)
{
    return fs::path(CADET_FIXTURE_DIR) / name;
}

std::string read_file(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {

[[noreturn]] void die(const std::string& what, const Error& e)
{
    std::cerr << what << ": " << e.describe() << '\n';
    std::abort();
}

} // namespace

SourceUnit parse_fixture(const std::string& name)
{
    auto unit = parse_source(read_file(fixture(name)), name);
    if (!unit.ok())
        die(name, unit.error());
    return std::move(*unit);
}

SourceUnit parse_text(const std::string& php, const std::string& path)
{
    auto unit = parse_source(php, path);
    if (!unit.ok())
        die("inline source", unit.error());
    return std::move(*unit);
}

Template derive_lines(const SourceUnit& unit, int first, int last, SymbolPolicy policy)
{
    auto slice = slice_statements(unit, first, last);
    if (!slice.ok())
        die("slice", slice.error());
    auto t = derive_template(unit, slice->statements, QueryMode::Strict, policy);
    if (!t.ok())
        die("derive", t.error());
    return std::move(*t);
}

Template derive_all(const SourceUnit& unit, SymbolPolicy policy)
{
    auto t = derive_template(unit, whole_unit(unit).statements, QueryMode::Normal, policy);
    if (!t.ok())
        die("derive", t.error());
    return std::move(*t);
}

TempDir::TempDir(const std::string& stem)
{
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            (stem + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
}

TempDir::~TempDir()
{
    std::error_code ec;
    fs::remove_all(path_, ec);
}

} // namespace cadet::testing

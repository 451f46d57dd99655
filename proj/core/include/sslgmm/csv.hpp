#pragma once

#include <initializer_list>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace sslgmm {

std::string_view library_version();

// Shortest round-trip decimal representation; nan/inf spelled "nan", "inf", "-inf".
std::string format_double(double value);

// Writes "# ssl-gmm-lab v<version> schema=<schema>" followed by the column header.
class CsvWriter {
public:
    CsvWriter(std::ostream& out, std::string_view schema, std::initializer_list<std::string_view> columns);
    CsvWriter(std::ostream& out, std::string_view schema, const std::vector<std::string>& columns);

    CsvWriter& cell(double value);
    CsvWriter& cell(long long value);
    CsvWriter& cell(int value) { return cell(static_cast<long long>(value)); }
    CsvWriter& cell(std::string_view value);
    CsvWriter& cell(const char* value) { return cell(std::string_view(value)); }
    CsvWriter& empty();
    void end_row();

private:
    void separator();

    std::ostream& out_;
    std::size_t columns_;
    std::size_t in_row_ = 0;
};

}  // namespace sslgmm

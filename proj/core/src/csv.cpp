#include "sslgmm/csv.hpp"

#include <charconv>
#include <cmath>
#include <ostream>

#include "sslgmm/errors.hpp"

namespace sslgmm {

std::string_view library_version() { return SSLGMM_VERSION; }

std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(std::ostream& out, std::string_view schema,
                     std::initializer_list<std::string_view> columns)
    : CsvWriter(out, schema, std::vector<std::string>(columns.begin(), columns.end())) {}

CsvWriter::CsvWriter(std::ostream& out, std::string_view schema, const std::vector<std::string>& columns)
    : out_(out), columns_(columns.size()) {
    out_ << "# ssl-gmm-lab v" << library_version() << " schema=" << schema << '\n';
    for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
    out_ << '\n';
}

void CsvWriter::separator() {
    if (in_row_ >= columns_) throw InvalidArgument("csv row has more cells than columns");
    if (in_row_++) out_ << ',';
}

CsvWriter& CsvWriter::cell(double value) {
    separator();
    out_ << format_double(value);
    return *this;
}

CsvWriter& CsvWriter::cell(long long value) {
    separator();
    out_ << value;
    return *this;
}

CsvWriter& CsvWriter::cell(std::string_view value) {
    separator();
    out_ << value;
    return *this;
}

CsvWriter& CsvWriter::empty() {
    separator();
    return *this;
}

void CsvWriter::end_row() {
    if (in_row_ != columns_) throw InvalidArgument("csv row has fewer cells than columns");
    out_ << '\n';
    in_row_ = 0;
}

}  // namespace sslgmm

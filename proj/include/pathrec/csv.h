#ifndef PATHREC_CSV_H_
#define PATHREC_CSV_H_

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace pathrec {

struct CsvRecord {
  std::size_t line = 0;  // 1-based line where the record starts
  std::vector<std::string> fields;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<CsvRecord> records;
};

// RFC 4180 reader: quoted fields may contain separators, doubled quotes and
// newlines. The first record is the header. A UTF-8 BOM is skipped.
CsvTable read_csv(std::istream& in);

void write_csv_record(std::ostream& out, std::span<const std::string> fields);

}  // namespace pathrec

#endif  // PATHREC_CSV_H_

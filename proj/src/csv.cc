#include "pathrec/csv.h"

#include <istream>
#include <iterator>
#include <ostream>

#include "pathrec/errors.h"

namespace pathrec {

CsvTable read_csv(std::istream& in) {
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  if (data.starts_with("\xEF\xBB\xBF")) pos = 3;

  CsvTable table;
  std::size_t line = 1;
  bool have_header = false;
  while (pos < data.size()) {
    CsvRecord record;
    record.line = line;
    std::string field;
    bool in_quotes = false;
    bool record_done = false;
    while (pos < data.size() && !record_done) {
      const char c = data[pos++];
      if (in_quotes) {
        if (c == '"') {
          if (pos < data.size() && data[pos] == '"') {
            field.push_back('"');
            ++pos;
          } else {
            in_quotes = false;
          }
        } else {
          if (c == '\n') ++line;
          field.push_back(c);
        }
        continue;
      }
      switch (c) {
        case '"':
          in_quotes = true;
          break;
        case ',':
          record.fields.push_back(std::move(field));
          field.clear();
          break;
        case '\r':
          break;
        case '\n':
          ++line;
          record_done = true;
          break;
        default:
          field.push_back(c);
      }
    }
    if (in_quotes) {
      throw InputError("csv line " + std::to_string(record.line) + ": unterminated quote");
    }
    record.fields.push_back(std::move(field));
    if (record.fields.size() == 1 && record.fields[0].empty()) continue;  // blank line
    if (!have_header) {
      table.header = std::move(record.fields);
      have_header = true;
    } else {
      table.records.push_back(std::move(record));
    }
  }
  return table;
}

void write_csv_record(std::ostream& out, std::span<const std::string> fields) {
  bool first = true;
  for (const std::string& f : fields) {
    if (!first) out << ',';
    first = false;
    if (f.find_first_of(",\"\r\n") == std::string::npos) {
      out << f;
      continue;
    }
    out << '"';
    for (char c : f) {
      if (c == '"') out << '"';
      out << c;
    }
    out << '"';
  }
  out << '\n';
}

}  // namespace pathrec

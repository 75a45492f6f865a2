#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ratnn/real.hpp"

namespace ratnn {

/// CSV emitter: comma-separated, header row, LF endings regardless of
/// platform (the stream is opened in binary mode), reals as full-precision
/// decimal strings.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header,
            const PrecisionContext& ctx)
      : ctx_(ctx), columns_(header.size()) {
    out_.open(path, std::ios::out | std::ios::binary | std::ios::trunc);
    if (!out_) throw std::runtime_error("CsvWriter: cannot open " + path);
    write_row_raw(header);
  }

  void row(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) {
      throw std::invalid_argument("CsvWriter: column count mismatch");
    }
    write_row_raw(cells);
  }

  std::string cell(const Real& x) const { return to_decimal_string(x, ctx_); }
  static std::string cell(long v) { return std::to_string(v); }
  static std::string cell(std::size_t v) { return std::to_string(v); }

 private:
  void write_row_raw(const std::vector<std::string>& cells) {
    std::ostringstream line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) line << ',';
      line << cells[i];
    }
    line << '\n';
    out_ << line.str();
    if (!out_) throw std::runtime_error("CsvWriter: write failed");
  }

  std::ofstream out_;
  PrecisionContext ctx_;
  std::size_t columns_;
};

}  // namespace ratnn

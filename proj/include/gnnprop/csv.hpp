// Copyright 2026 The gnnprop Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "gnnprop/errors.hpp"

namespace gnnprop {

// One CSV cell. Doubles print with 17 significant digits so values round-trip;
// non-finite values print as inf, -inf and nan.
class CsvCell {
 public:
  CsvCell(const std::string& s) : text_(quote(s)) {}
  CsvCell(const char* s) : text_(quote(s)) {}
  CsvCell(double v) : text_(format(v)) {}
  CsvCell(int v) : text_(std::to_string(v)) {}
  CsvCell(std::uint64_t v) : text_(std::to_string(v)) {}
  CsvCell(bool v) : text_(v ? "1" : "0") {}

  const std::string& text() const { return text_; }

  static std::string format(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
  }

 private:
  static std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
      if (c == '"') out += '"';
      out += c;
    }
    return out + "\"";
  }

  std::string text_;
};

class CsvWriter {
 public:
  CsvWriter(const std::string& path, std::vector<std::string> header)
      : path_(path), out_(path), columns_(header.size()) {
    if (!out_) throw IoError("cannot open " + path + " for writing");
    std::vector<CsvCell> cells(header.begin(), header.end());
    write(cells);
  }

  void row(std::initializer_list<CsvCell> cells) {
    write(std::vector<CsvCell>(cells));
  }

  void row(const std::vector<CsvCell>& cells) { write(cells); }

 private:
  void write(const std::vector<CsvCell>& cells) {
    if (cells.size() != columns_) {
      throw ContractError(path_ + ": row has " + std::to_string(cells.size()) +
                          " cells, header has " + std::to_string(columns_));
    }
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i > 0) out_ << ',';
      out_ << cells[i].text();
    }
    out_ << '\n';
    if (!out_) throw IoError("write failed: " + path_);
  }

  std::string path_;
  std::ofstream out_;
  std::size_t columns_;
};

}  // namespace gnnprop

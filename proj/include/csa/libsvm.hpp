#pragma once

#include <cstddef>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "csa/learners.hpp"

namespace csa::io {

// Parse failure with the 1-based line number at which it occurred.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

struct ParseOptions {
    // When the file holds exactly two distinct label values, remap them to
    // +-1 (the smaller value becomes -1).
    bool map_binary_labels = true;
    // Guard against absurd indices blowing up the dense representation.
    std::size_t max_feature_index = 1000000;
};

struct LibsvmData {
    learners::Dataset data;           // dense; unmentioned indices are 0
    std::size_t rows = 0;
    std::size_t cols = 0;             // max feature index seen in the file
    std::vector<double> raw_labels;   // labels as written in the file
    bool labels_mapped = false;
    double negative_label = -1.0;     // original value mapped to -1
    double positive_label = 1.0;      // original value mapped to +1
};

// Reads the LIBSVM sparse text format: one example per line,
//   label index:value index:value ...
// with 1-based strictly increasing indices and whitespace separation.
// Malformed input is rejected with the offending line number.
LibsvmData parse_libsvm(std::istream& in, const ParseOptions& opts = {});

LibsvmData load_libsvm_file(const std::string& path, const ParseOptions& opts = {});

// Writes a dataset in the same format, omitting zero entries.
void write_libsvm(std::ostream& out, const learners::Dataset& data);

}  // namespace csa::io

#pragma once

// Prediction-file ingest/emit and experiment-config loading.
//
// File formats:
//   CSV    header optional; data rows are either "p1,...,pK,label" with a
//          1-based class label, or the binary short form "z,y" where z is the
//          predicted probability of the positive class and y in {0,1} says
//          whether that class occurred.
//   JSONL  one object per line: {"p": [p1, ..., pK], "label": k} (1-based k).
//
// Rows are validated against the simplex within a tolerance; with the
// renormalize option, rows whose coordinate sum drifts beyond it are rescaled
// instead of rejected.  All parse and validation errors carry the 1-based
// line number.

#include "tcal/sample.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>

namespace tcal {

enum class FileFormat { Auto, Csv, Jsonl };

struct IngestOptions {
    FileFormat format = FileFormat::Auto; // Auto: .jsonl/.json -> Jsonl, else Csv
    bool binarize_top1 = false; // reduce to (top-1 confidence, correctness)
    bool renormalize = false;
    double tolerance = 1e-9;
};

CalibrationSample ingest_file(const std::string& path, const IngestOptions& opt);
CalibrationSample ingest_stream(std::istream& is, FileFormat format,
                                const IngestOptions& opt, const std::string& name);

// Emitters round-trip exactly: ingest(emit(s)) == s (bit-for-bit doubles).
void emit_csv(const CalibrationSample& s, std::ostream& os);
void emit_jsonl(const CalibrationSample& s, std::ostream& os);

// Shortest-exact decimal formatting (round-trips to the same double); used by
// every artifact writer so that outputs are byte-deterministic.
std::string format_double(double v);

// Experiment config loader: JSON, or a flat TOML subset (top-level
// `key = value` pairs with numbers, booleans, quoted strings, and flat
// arrays; `#` comments).  Returns a JSON object either way.
nlohmann::json load_config_file(const std::string& path);

} // namespace tcal

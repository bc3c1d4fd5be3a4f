#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "rcabs/attractors.hpp"
#include "rcabs/reservoir.hpp"
#include "rcabs/training.hpp"

namespace rcabs {

struct Model {
  AttractorSpec attractor;
  TrainingConfig training;
  Reservoir reservoir;
  std::optional<OutputMatrix> readout;
};

// Container: "RCABSMDL", uint64 LE length of the JSON header, the JSON header
// (parameters plus an array table), then the arrays as little-endian float64.
// A is stored as nnz x 3 (row, col, value) triples; B, d and W row-major.
void write_model(const Model& model, std::ostream& out);
Model read_model(std::istream& in);

void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

}  // namespace rcabs

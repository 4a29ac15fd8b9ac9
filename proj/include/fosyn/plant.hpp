#pragma once

#include "fosyn/numerics.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace fosyn {

/// Nine-block state-space plant
///   dx/dt = A x  + B1 w  + B2 u
///   z     = C1 x + D11 w + D12 u
///   y     = C2 x + D21 w + D22 u
/// with x the states, u the control inputs, y the measured outputs,
/// w the performance inputs and z the performance outputs.
struct Plant {
  Matrix A, B1, B2, C1, C2, D11, D12, D21, D22;
  std::string name;

  int n() const { return static_cast<int>(A.rows()); }     // states
  int m1() const { return static_cast<int>(B1.cols()); }   // performance inputs
  int m2() const { return static_cast<int>(B2.cols()); }   // control inputs
  int p1() const { return static_cast<int>(C1.rows()); }   // performance outputs
  int p2() const { return static_cast<int>(C2.rows()); }   // measured outputs
};

/// Checks block dimensions and finiteness; returns its argument.
/// Throws DimensionError naming the offending block, or InvalidInputError.
const Plant& validate(const Plant& p);

/// An ordered family of plants closed by a single output-feedback controller.
struct PlantSet {
  std::vector<Plant> plants;
};

/// All plants must share the controller interface (m2, p2) and carry an
/// identical D22 block. Returns its argument on success.
const PlantSet& check_set(const PlantSet& ps);

/// Parses the JSON problem format: top-level fields "A","B1","B2","C1","C2"
/// (required) and "D11","D12","D21","D22" (defaulting to zero blocks of the
/// implied size), each a rectangular array of arrays of numbers in row-major
/// order, plus an optional "name".
Plant load_plant(const std::string& text);

/// load_plant on the file contents; the file stem is used as the plant name
/// when the document does not carry one.
Plant load_plant_file(const std::filesystem::path& path);

/// Emits the problem format with 17-significant-digit decimals so that
/// load_plant(serialize(p)) reproduces p exactly.
std::string serialize(const Plant& p);

void save_plant_file(const Plant& p, const std::filesystem::path& path);

}  // namespace fosyn

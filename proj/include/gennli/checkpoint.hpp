#pragma once

#include <string>

#include "gennli/data.hpp"
#include "gennli/model.hpp"

namespace gennli {

struct Checkpoint {
  Vocabulary vocab;
  ModelParams params;
};

/// Binary archive: a magic header, a JSON block describing dimensions,
/// labels, tokens and the tensor index, followed by raw little-endian
/// doubles. Round-trips are value-exact.
void save_checkpoint(const std::string& path, const ModelParams& params, const Vocabulary& vocab);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace gennli

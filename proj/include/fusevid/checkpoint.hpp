#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fusevid/tensor.hpp"

namespace fusevid {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

// Checkpoint directory layout: manifest.json listing every parameter's
// name, file, shape, and dtype, plus one tensor file per parameter and an
// optional string-to-string metadata map.

void save_checkpoint(const std::string& dir, const NamedTensors& named,
                     const std::map<std::string, std::string>& meta = {});

// Loads every tensor listed in the manifest.
NamedTensors load_checkpoint(const std::string& dir);

std::map<std::string, std::string> load_checkpoint_meta(
    const std::string& dir);

// Copies checkpoint data into existing tensors, matched by name.  Missing
// names, extra names, shape mismatches, and dtype mismatches all throw
// IngestError naming the offending parameter.
void load_checkpoint_into(const std::string& dir, NamedTensors& target);

}  // namespace fusevid

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pbtrom/latent_map.hpp"

namespace pbtrom::checkpoint {

inline constexpr int kFormatVersion = 1;

/// Column directory: manifest.json + weights.bin.
void save_column(const btrom::Column& column, const std::string& dir);
btrom::Column load_column(const std::string& dir);

/// weights.bin bytes: 16-byte header, then every layer of encoder, decoder,
/// projector in order, W row-major then b.
std::vector<std::byte> column_weights(const btrom::Column& column);

struct StackCheckpoint {
    progressive::ProgressiveStack stack;
    std::optional<latent::RbfModel> rbf;
    std::vector<std::string> source_digests; ///< manifest digest of each parent's source checkpoint
};

/// Stack directory: manifest.json, columns/<i>/ (column checkpoints),
/// gates.bin (sorted gate order) and optionally rbf.bin.
void save_stack(const StackCheckpoint& checkpoint, const std::string& dir);
StackCheckpoint load_stack(const std::string& dir);

/// "column" or "stack"; throws FormatError for anything else.
std::string checkpoint_kind(const std::string& dir);

/// SHA-256 of a checkpoint's manifest.json, which itself pins every binary by digest.
std::string manifest_digest(const std::string& dir);

/// Frozen column usable as a parent: a column checkpoint, or the child of a
/// stack checkpoint without parents.
btrom::Column load_parent(const std::string& dir);

} // namespace pbtrom::checkpoint

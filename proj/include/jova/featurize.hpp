#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "jova/common.hpp"
#include "jova/smiles.hpp"

namespace jova {

enum class ViewKind : std::uint8_t {
  CompoundFingerprint,
  CompoundGraph,
  TargetComposition,
  TargetNgram,
};

const char* view_name(ViewKind v);
ViewKind view_from_name(std::string_view name);
bool is_compound_view(ViewKind v);

enum class SegmentKind : std::uint8_t { Entity, Atom, ResidueRange };

/// Provenance of one segment row: the whole entity, one atom index, or a
/// residue range [begin, end).
struct SegmentRef {
  SegmentKind kind = SegmentKind::Entity;
  int index = 0;
  int begin = 0;
  int end = 0;

  std::string describe() const;
};

/// One view's representation: rows x dim, row-major, with per-row provenance.
struct SegmentMatrix {
  ViewKind view = ViewKind::CompoundFingerprint;
  int rows = 0;
  int dim = 0;
  std::vector<double> data;
  std::vector<SegmentRef> segment_map;

  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * dim + c]; }
};

struct FeaturizerConfig {
  int ecfp_radius = 4;  // ECFP8: diameter 8
  int ecfp_nbits = 2048;
  int ngram_n = 3;
  int ngram_stride = 3;
};

/// Morgan circular fingerprint folded to nbits via FNV-1a. Deterministic and
/// invariant to the atom input order of the SMILES spelling.
SegmentMatrix ecfp(const MolecularGraph& g, int radius, int nbits);

/// Per-atom rows: one-hot element + one-hot degree (0-5) + one-hot implicit
/// H (0-4) + aromatic bit + formal charge scalar.
SegmentMatrix atom_features(const MolecularGraph& g);

int atom_feature_dim();

/// Protein sequence composition: normalized 1-/2-/3-mer counts in
/// lexicographic slot order, each k-block normalized to sum 1. Always
/// 20 + 400 + 8000 = 8420 wide.
SegmentMatrix psc(std::string_view sequence);

constexpr int kPscDim = 8420;

/// Non-overlapping residue windows as integer codes 0-19; when the stride
/// does not tile the sequence the last window is right-aligned.
SegmentMatrix ngram_segments(std::string_view sequence, int n, int stride);

const std::string& amino_alphabet();

/// Featurize one compound/target pair into the given views, in order.
std::vector<SegmentMatrix> featurize_pair(std::string_view smiles,
                                          std::string_view sequence,
                                          const std::vector<ViewKind>& views,
                                          const FeaturizerConfig& cfg);

}  // namespace jova

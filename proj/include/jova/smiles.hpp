#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "jova/common.hpp"

namespace jova {

enum class BondOrder : std::uint8_t { Single = 1, Double = 2, Triple = 3, Aromatic = 4 };

struct Atom {
  std::string element;
  bool aromatic = false;
  int formal_charge = 0;
  int implicit_h = 0;
  int degree = 0;  // heavy-atom neighbors
  bool bracket = false;
};

struct Bond {
  int a = 0;
  int b = 0;
  BondOrder order = BondOrder::Single;
};

struct MolecularGraph {
  std::vector<Atom> atoms;
  std::vector<Bond> bonds;
  std::vector<std::vector<int>> adjacency;

  int atom_count() const { return static_cast<int>(atoms.size()); }
  int bond_count() const { return static_cast<int>(bonds.size()); }
  bool has_bond(int a, int b) const;
};

/// Parse the supported SMILES subset: organic-subset atoms B C N O P S F Cl
/// Br I (aromatic b c n o p s), bracket atoms with explicit H count and
/// charge, bond symbols - = # :, branches, ring closures 1-9 and %nn.
/// Stereo markers (/ \ @) and isotopes are accepted and discarded.
MolecularGraph parse_smiles(std::string_view text);

/// Order-independent per-atom code: hash of (element, degree, implicit_h,
/// formal_charge, aromatic). Seeds the fingerprint iteration.
std::vector<std::uint32_t> canonical_invariants(const MolecularGraph& g);

/// Element symbols accepted by the parser, in the fixed order used by
/// one-hot featurization.
const std::vector<std::string>& supported_elements();

}  // namespace jova

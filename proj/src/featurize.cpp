#include "jova/featurize.hpp"

#include <algorithm>
#include <map>
#include <queue>
#include <set>
#include <sstream>

namespace jova {

const char* view_name(ViewKind v) {
  switch (v) {
    case ViewKind::CompoundFingerprint: return "fingerprint";
    case ViewKind::CompoundGraph: return "graph";
    case ViewKind::TargetComposition: return "psc";
    case ViewKind::TargetNgram: return "ngram";
  }
  return "?";
}

ViewKind view_from_name(std::string_view name) {
  if (name == "fingerprint") return ViewKind::CompoundFingerprint;
  if (name == "graph") return ViewKind::CompoundGraph;
  if (name == "psc") return ViewKind::TargetComposition;
  if (name == "ngram") return ViewKind::TargetNgram;
  fail(ErrorCode::ConfigError, "unknown view name '" + std::string(name) + "'");
}

bool is_compound_view(ViewKind v) {
  return v == ViewKind::CompoundFingerprint || v == ViewKind::CompoundGraph;
}

std::string SegmentRef::describe() const {
  switch (kind) {
    case SegmentKind::Entity: return "entity";
    case SegmentKind::Atom: return "atom:" + std::to_string(index);
    case SegmentKind::ResidueRange:
      return "res:" + std::to_string(begin) + ":" + std::to_string(end);
  }
  return "?";
}

namespace {

// BFS distances from one atom; molecules are small, O(V*E) overall is fine.
std::vector<int> bfs_distances(const MolecularGraph& g, int src) {
  std::vector<int> dist(g.atoms.size(), -1);
  std::queue<int> q;
  dist[src] = 0;
  q.push(src);
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    for (int v : g.adjacency[u]) {
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        q.push(v);
      }
    }
  }
  return dist;
}

std::uint8_t bond_code(BondOrder o) { return static_cast<std::uint8_t>(o); }

}  // namespace

SegmentMatrix ecfp(const MolecularGraph& g, int radius, int nbits) {
  if (radius < 0) fail(ErrorCode::ConfigError, "ecfp radius must be >= 0");
  if (nbits <= 0 || (nbits & (nbits - 1)) != 0)
    fail(ErrorCode::ConfigError, "ecfp nbits must be a power of two");

  const int n = g.atom_count();
  std::vector<std::vector<int>> dist(n);
  for (int a = 0; a < n; ++a) dist[a] = bfs_distances(g, a);

  // environment of (atom, r): bonds reaching to distance r from the atom
  auto env_bonds = [&](int atom, int r) {
    std::vector<int> out;
    for (int bi = 0; bi < g.bond_count(); ++bi) {
      const Bond& bd = g.bonds[bi];
      int da = dist[atom][bd.a];
      int db = dist[atom][bd.b];
      int nearer = -1;
      if (da >= 0 && db >= 0) nearer = std::min(da, db);
      else if (da >= 0) nearer = da;
      else if (db >= 0) nearer = db;
      if (nearer >= 0 && nearer <= r - 1) out.push_back(bi);
    }
    return out;
  };

  std::vector<std::uint32_t> cur = canonical_invariants(g);
  std::set<std::vector<int>> seen_envs;
  std::vector<std::uint32_t> identifiers;

  // round 0: every atom code counts, all with the empty environment
  for (std::uint32_t id : cur) identifiers.push_back(id);
  seen_envs.insert({});

  for (int r = 1; r <= radius; ++r) {
    std::vector<std::uint32_t> next(n);
    for (int a = 0; a < n; ++a) {
      std::vector<std::pair<std::uint8_t, std::uint32_t>> nbrs;
      for (int bi = 0; bi < g.bond_count(); ++bi) {
        const Bond& bd = g.bonds[bi];
        if (bd.a == a) nbrs.emplace_back(bond_code(bd.order), cur[bd.b]);
        else if (bd.b == a) nbrs.emplace_back(bond_code(bd.order), cur[bd.a]);
      }
      std::sort(nbrs.begin(), nbrs.end());
      Fnv32 h;
      h.u32(static_cast<std::uint32_t>(r));
      h.u32(cur[a]);
      for (const auto& [code, id] : nbrs) {
        h.byte(code);
        h.u32(id);
      }
      next[a] = h.value();
    }
    // structural dedup: keep one identifier per new environment (bond set);
    // on equal environments within a round keep the smallest identifier so
    // the result cannot depend on atom input order
    std::map<std::vector<int>, std::uint32_t> round_envs;
    for (int a = 0; a < n; ++a) {
      std::vector<int> env = env_bonds(a, r);
      auto [it, inserted] = round_envs.try_emplace(std::move(env), next[a]);
      if (!inserted) it->second = std::min(it->second, next[a]);
    }
    for (const auto& [env, id] : round_envs) {
      if (seen_envs.insert(env).second) identifiers.push_back(id);
    }
    cur = std::move(next);
  }

  SegmentMatrix out;
  out.view = ViewKind::CompoundFingerprint;
  out.rows = 1;
  out.dim = nbits;
  out.data.assign(static_cast<std::size_t>(nbits), 0.0);
  for (std::uint32_t id : identifiers)
    out.data[id % static_cast<std::uint32_t>(nbits)] = 1.0;
  out.segment_map.push_back(SegmentRef{SegmentKind::Entity, 0, 0, 0});
  return out;
}

int atom_feature_dim() {
  return static_cast<int>(supported_elements().size()) + 6 + 5 + 1 + 1;
}

SegmentMatrix atom_features(const MolecularGraph& g) {
  const auto& elements = supported_elements();
  const int d = atom_feature_dim();
  SegmentMatrix out;
  out.view = ViewKind::CompoundGraph;
  out.rows = g.atom_count();
  out.dim = d;
  out.data.assign(static_cast<std::size_t>(out.rows) * d, 0.0);
  for (int i = 0; i < g.atom_count(); ++i) {
    const Atom& a = g.atoms[i];
    double* row = out.data.data() + static_cast<std::size_t>(i) * d;
    auto it = std::find(elements.begin(), elements.end(), a.element);
    row[it - elements.begin()] = 1.0;
    int off = static_cast<int>(elements.size());
    row[off + std::min(a.degree, 5)] = 1.0;
    off += 6;
    row[off + std::clamp(a.implicit_h, 0, 4)] = 1.0;
    off += 5;
    row[off] = a.aromatic ? 1.0 : 0.0;
    row[off + 1] = static_cast<double>(a.formal_charge);
    out.segment_map.push_back(SegmentRef{SegmentKind::Atom, i, 0, 0});
  }
  return out;
}

const std::string& amino_alphabet() {
  static const std::string alphabet = "ACDEFGHIKLMNPQRSTVWY";
  return alphabet;
}

namespace {

std::vector<int> residue_codes(std::string_view seq) {
  const std::string& alphabet = amino_alphabet();
  std::vector<int> codes;
  codes.reserve(seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    std::size_t pos = alphabet.find(seq[i]);
    if (pos == std::string::npos)
      fail(ErrorCode::InvalidResidue,
           std::string("invalid residue '") + seq[i] + "' at position " +
               std::to_string(i));
    codes.push_back(static_cast<int>(pos));
  }
  return codes;
}

}  // namespace

SegmentMatrix psc(std::string_view sequence) {
  if (sequence.size() < 3)
    fail(ErrorCode::SequenceTooShort,
         "PSC requires length >= 3, got " + std::to_string(sequence.size()));
  std::vector<int> codes = residue_codes(sequence);
  SegmentMatrix out;
  out.view = ViewKind::TargetComposition;
  out.rows = 1;
  out.dim = kPscDim;
  out.data.assign(kPscDim, 0.0);

  const int offsets[3] = {0, 20, 420};
  for (int k = 1; k <= 3; ++k) {
    const int count = static_cast<int>(codes.size()) - k + 1;
    for (int i = 0; i < count; ++i) {
      int slot = 0;
      for (int j = 0; j < k; ++j) slot = slot * 20 + codes[i + j];
      out.data[offsets[k - 1] + slot] += 1.0;
    }
    const int begin = offsets[k - 1];
    const int width = k == 1 ? 20 : (k == 2 ? 400 : 8000);
    for (int s = 0; s < width; ++s) out.data[begin + s] /= count;
  }
  out.segment_map.push_back(SegmentRef{SegmentKind::Entity, 0, 0, 0});
  return out;
}

SegmentMatrix ngram_segments(std::string_view sequence, int n, int stride) {
  if (n <= 0 || stride <= 0)
    fail(ErrorCode::ConfigError, "ngram n and stride must be positive");
  if (static_cast<int>(sequence.size()) < n)
    fail(ErrorCode::SequenceTooShort,
         "sequence length " + std::to_string(sequence.size()) +
             " shorter than window " + std::to_string(n));
  std::vector<int> codes = residue_codes(sequence);
  const int len = static_cast<int>(codes.size());

  std::vector<int> starts;
  for (int s = 0; s + n <= len; s += stride) starts.push_back(s);
  if (starts.back() + n < len) starts.push_back(len - n);  // right-aligned tail

  SegmentMatrix out;
  out.view = ViewKind::TargetNgram;
  out.rows = static_cast<int>(starts.size());
  out.dim = n;
  out.data.assign(static_cast<std::size_t>(out.rows) * n, 0.0);
  for (int r = 0; r < out.rows; ++r) {
    for (int j = 0; j < n; ++j)
      out.data[static_cast<std::size_t>(r) * n + j] = codes[starts[r] + j];
    out.segment_map.push_back(
        SegmentRef{SegmentKind::ResidueRange, r, starts[r], starts[r] + n});
  }
  return out;
}

std::vector<SegmentMatrix> featurize_pair(std::string_view smiles,
                                          std::string_view sequence,
                                          const std::vector<ViewKind>& views,
                                          const FeaturizerConfig& cfg) {
  MolecularGraph g = parse_smiles(smiles);
  std::vector<SegmentMatrix> out;
  out.reserve(views.size());
  for (ViewKind v : views) {
    switch (v) {
      case ViewKind::CompoundFingerprint:
        out.push_back(ecfp(g, cfg.ecfp_radius, cfg.ecfp_nbits));
        break;
      case ViewKind::CompoundGraph:
        out.push_back(atom_features(g));
        break;
      case ViewKind::TargetComposition:
        out.push_back(psc(sequence));
        break;
      case ViewKind::TargetNgram:
        out.push_back(ngram_segments(sequence, cfg.ngram_n, cfg.ngram_stride));
        break;
    }
  }
  return out;
}

}  // namespace jova

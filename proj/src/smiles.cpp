#include "jova/smiles.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <map>
#include <optional>
#include <sstream>

namespace jova {

namespace {

const std::vector<std::string> kElements = {"B", "C", "N",  "O", "P",
                                            "S", "F", "Cl", "Br", "I"};

bool element_supported(const std::string& sym) {
  return std::find(kElements.begin(), kElements.end(), sym) != kElements.end();
}

bool aromatic_allowed(const std::string& sym) {
  return sym == "B" || sym == "C" || sym == "N" || sym == "O" || sym == "P" ||
         sym == "S";
}

// Fixed default valences; multi-valent elements use the smallest value
// consistent with the explicit bond sum.
const std::vector<int>& valences_for(const std::string& sym) {
  static const std::map<std::string, std::vector<int>> table = {
      {"B", {3}},  {"C", {4}},  {"N", {3, 5}}, {"O", {2}},      {"P", {3, 5}},
      {"S", {2, 4, 6}}, {"F", {1}}, {"Cl", {1}}, {"Br", {1}}, {"I", {1}}};
  return table.at(sym);
}

struct RingOpening {
  int atom = -1;
  std::optional<BondOrder> order;
};

int bond_order_units(BondOrder o) {
  switch (o) {
    case BondOrder::Single: return 1;
    case BondOrder::Double: return 2;
    case BondOrder::Triple: return 3;
    case BondOrder::Aromatic: return 1;
  }
  return 1;
}

}  // namespace

bool MolecularGraph::has_bond(int a, int b) const {
  for (const Bond& bd : bonds) {
    if ((bd.a == a && bd.b == b) || (bd.a == b && bd.b == a)) return true;
  }
  return false;
}

const std::vector<std::string>& supported_elements() { return kElements; }

namespace {

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  MolecularGraph run() {
    if (text_.empty()) fail(ErrorCode::SyntaxError, "empty SMILES string");
    while (pos_ < text_.size()) step();
    finish();
    return std::move(graph_);
  }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  MolecularGraph graph_;
  int prev_ = -1;
  std::vector<int> branch_stack_;
  std::map<int, RingOpening> open_rings_;
  std::optional<BondOrder> pending_bond_;

  char peek() const { return text_[pos_]; }
  bool done() const { return pos_ >= text_.size(); }

  [[noreturn]] void syntax(const std::string& what) const {
    std::ostringstream os;
    os << what << " at position " << pos_ << " in '" << text_ << "'";
    fail(ErrorCode::SyntaxError, os.str());
  }

  void step() {
    char c = peek();
    if (c == '(') {
      if (prev_ < 0) syntax("branch before any atom");
      branch_stack_.push_back(prev_);
      ++pos_;
    } else if (c == ')') {
      if (branch_stack_.empty())
        fail(ErrorCode::UnbalancedBranch,
             "unmatched ')' at position " + std::to_string(pos_));
      prev_ = branch_stack_.back();
      branch_stack_.pop_back();
      ++pos_;
    } else if (c == '-' || c == '=' || c == '#' || c == ':') {
      if (pending_bond_) syntax("two consecutive bond symbols");
      pending_bond_ = c == '-'   ? BondOrder::Single
                      : c == '=' ? BondOrder::Double
                      : c == '#' ? BondOrder::Triple
                                 : BondOrder::Aromatic;
      ++pos_;
    } else if (c == '/' || c == '\\') {
      // stereo bond, kept as plain single
      if (pending_bond_) syntax("two consecutive bond symbols");
      pending_bond_ = BondOrder::Single;
      ++pos_;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      ring_closure(c - '0');
      ++pos_;
    } else if (c == '%') {
      if (pos_ + 2 >= text_.size() ||
          !std::isdigit(static_cast<unsigned char>(text_[pos_ + 1])) ||
          !std::isdigit(static_cast<unsigned char>(text_[pos_ + 2])))
        syntax("'%' requires two digits");
      int num = (text_[pos_ + 1] - '0') * 10 + (text_[pos_ + 2] - '0');
      pos_ += 3;
      ring_closure(num);
    } else if (c == '[') {
      bracket_atom();
    } else if (std::isupper(static_cast<unsigned char>(c))) {
      organic_atom(/*aromatic=*/false);
    } else if (std::islower(static_cast<unsigned char>(c))) {
      organic_atom(/*aromatic=*/true);
    } else {
      fail(ErrorCode::UnknownAtom,
           std::string("unsupported token '") + c + "' at position " +
               std::to_string(pos_));
    }
  }

  void organic_atom(bool aromatic) {
    std::string sym(1, static_cast<char>(
                           std::toupper(static_cast<unsigned char>(peek()))));
    if (!aromatic && pos_ + 1 < text_.size()) {
      // two-letter symbols are uppercase+lowercase: Cl, Br
      std::string two = sym + text_[pos_ + 1];
      if (two == "Cl" || two == "Br") {
        sym = two;
        ++pos_;
      }
    }
    ++pos_;
    if (!element_supported(sym))
      fail(ErrorCode::UnknownAtom, "unsupported element token '" + sym + "'");
    if (aromatic && !aromatic_allowed(sym))
      fail(ErrorCode::UnknownAtom,
           "element '" + sym + "' has no aromatic form");
    add_atom(sym, aromatic, 0, -1, /*bracket=*/false);
  }

  void bracket_atom() {
    ++pos_;  // consume '['
    // isotope digits: discarded
    while (!done() && std::isdigit(static_cast<unsigned char>(peek()))) ++pos_;
    if (done()) syntax("unterminated bracket atom");

    bool aromatic = false;
    std::string sym;
    char c = peek();
    if (std::islower(static_cast<unsigned char>(c))) {
      aromatic = true;
      sym = std::string(1, static_cast<char>(
                               std::toupper(static_cast<unsigned char>(c))));
      ++pos_;
    } else if (std::isupper(static_cast<unsigned char>(c))) {
      sym = std::string(1, c);
      ++pos_;
      if (!done() && std::islower(static_cast<unsigned char>(peek()))) {
        std::string two = sym + peek();
        if (two == "Cl" || two == "Br") {
          sym = two;
          ++pos_;
        }
      }
    } else {
      syntax("expected element symbol in bracket atom");
    }
    if (!element_supported(sym))
      fail(ErrorCode::UnknownAtom, "unsupported element token '" + sym + "'");
    if (aromatic && !aromatic_allowed(sym))
      fail(ErrorCode::UnknownAtom,
           "element '" + sym + "' has no aromatic form");

    // chirality: discarded
    while (!done() && peek() == '@') ++pos_;

    int hcount = 0;
    if (!done() && peek() == 'H') {
      ++pos_;
      hcount = 1;
      if (!done() && std::isdigit(static_cast<unsigned char>(peek()))) {
        hcount = peek() - '0';
        ++pos_;
      }
    }

    int charge = 0;
    if (!done() && (peek() == '+' || peek() == '-')) {
      int sign = peek() == '+' ? 1 : -1;
      char sc = peek();
      ++pos_;
      if (!done() && std::isdigit(static_cast<unsigned char>(peek()))) {
        charge = sign * (peek() - '0');
        ++pos_;
      } else {
        charge = sign;
        while (!done() && peek() == sc) {  // ++ / -- style
          charge += sign;
          ++pos_;
        }
      }
    }

    // atom class ':nnn' accepted and discarded
    if (!done() && peek() == ':') {
      ++pos_;
      if (done() || !std::isdigit(static_cast<unsigned char>(peek())))
        syntax("atom class requires digits");
      while (!done() && std::isdigit(static_cast<unsigned char>(peek())))
        ++pos_;
    }

    if (done() || peek() != ']') syntax("expected ']'");
    ++pos_;
    add_atom(sym, aromatic, charge, hcount, /*bracket=*/true);
  }

  void add_atom(const std::string& sym, bool aromatic, int charge, int hcount,
                bool bracket) {
    Atom atom;
    atom.element = sym;
    atom.aromatic = aromatic;
    atom.formal_charge = charge;
    atom.implicit_h = bracket ? std::max(hcount, 0) : 0;  // recomputed later
    atom.bracket = bracket;
    int idx = graph_.atom_count();
    graph_.atoms.push_back(std::move(atom));
    if (prev_ >= 0) add_bond(prev_, idx, take_pending());
    else if (pending_bond_) syntax("bond symbol before first atom");
    prev_ = idx;
  }

  std::optional<BondOrder> take_pending() {
    std::optional<BondOrder> b = pending_bond_;
    pending_bond_.reset();
    return b;
  }

  void add_bond(int a, int b, std::optional<BondOrder> explicit_order) {
    if (a == b) syntax("bond from atom to itself");
    if (graph_.has_bond(a, b)) syntax("duplicate bond between atoms");
    BondOrder order;
    if (explicit_order) {
      order = *explicit_order;
    } else {
      order = (graph_.atoms[a].aromatic && graph_.atoms[b].aromatic)
                  ? BondOrder::Aromatic
                  : BondOrder::Single;
    }
    graph_.bonds.push_back(Bond{a, b, order});
  }

  void ring_closure(int digit) {
    if (prev_ < 0) syntax("ring closure before any atom");
    auto it = open_rings_.find(digit);
    if (it == open_rings_.end()) {
      open_rings_[digit] = RingOpening{prev_, take_pending()};
      return;
    }
    RingOpening open = it->second;
    open_rings_.erase(it);
    std::optional<BondOrder> close_order = take_pending();
    std::optional<BondOrder> order = open.order;
    if (order && close_order && *order != *close_order)
      syntax("conflicting bond orders on ring closure " +
             std::to_string(digit));
    if (!order) order = close_order;
    if (open.atom == prev_) syntax("ring closure bonds atom to itself");
    add_bond(open.atom, prev_, order);
  }

  void finish() {
    if (!open_rings_.empty()) {
      std::ostringstream os;
      os << "unmatched ring closure digit(s):";
      for (const auto& [digit, opening] : open_rings_) os << ' ' << digit;
      fail(ErrorCode::UnbalancedRing, os.str());
    }
    if (!branch_stack_.empty())
      fail(ErrorCode::UnbalancedBranch, "unclosed '(' branch");
    if (pending_bond_) syntax("dangling bond symbol at end of input");

    graph_.adjacency.assign(graph_.atoms.size(), {});
    std::vector<int> order_sum(graph_.atoms.size(), 0);
    for (const Bond& bd : graph_.bonds) {
      graph_.adjacency[bd.a].push_back(bd.b);
      graph_.adjacency[bd.b].push_back(bd.a);
      order_sum[bd.a] += bond_order_units(bd.order);
      order_sum[bd.b] += bond_order_units(bd.order);
    }
    for (int i = 0; i < graph_.atom_count(); ++i) {
      Atom& atom = graph_.atoms[i];
      atom.degree = static_cast<int>(graph_.adjacency[i].size());
      if (atom.bracket) continue;  // explicit H count only
      int total = order_sum[i];
      // An aromatic atom that contributes a pi bond (B, C, N, P) carries one
      // extra bonding unit; lone-pair donors (O, S) do not. Benzene carbons
      // get one implicit H, pyridine-type nitrogens and furan oxygens none.
      if (atom.aromatic && (atom.element == "B" || atom.element == "C" ||
                            atom.element == "N" || atom.element == "P"))
        total += 1;
      const std::vector<int>& vs = valences_for(atom.element);
      int chosen = -1;
      for (int v : vs) {
        if (v >= total) {
          chosen = v;
          break;
        }
      }
      if (chosen < 0)
        fail(ErrorCode::ValenceError,
             "explicit bonds (" + std::to_string(total) + ") exceed max valence of " +
                 atom.element);
      atom.implicit_h = chosen - total;
    }
  }
};

}  // namespace

MolecularGraph parse_smiles(std::string_view text) {
  // trim surrounding whitespace; interior whitespace is a syntax error
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front())))
    text.remove_prefix(1);
  while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back())))
    text.remove_suffix(1);
  return Parser(text).run();
}

std::vector<std::uint32_t> canonical_invariants(const MolecularGraph& g) {
  std::vector<std::uint32_t> codes;
  codes.reserve(g.atoms.size());
  for (const Atom& a : g.atoms) {
    Fnv32 h;
    h.str(a.element);
    h.i32(a.degree);
    h.i32(a.implicit_h);
    h.i32(a.formal_charge);
    h.byte(a.aromatic ? 1 : 0);
    codes.push_back(h.value());
  }
  return codes;
}

}  // namespace jova

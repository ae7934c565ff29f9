#pragma once

// Independent brute-force oracle for the label preorder: enumerates every
// simple-label term up to a size bound and closes the four ordering rules
// (plus reflexivity and transitivity) to a fixpoint over that population.
// Used by tests and the lattice-oracle command to validate the recursive
// decision procedure; deliberately shares no code with it.

#include <map>
#include <string>
#include <vector>

#include "sessint/labels.hpp"

namespace sessint::oracle {

struct TermPopulation {
    std::vector<SL> terms;
    std::map<std::string, size_t> index;  // structural key -> position

    size_t find(const SL& t) const;
};

std::string term_key(const SL& t);

// All terms of node count <= max_size over the atoms of the universe.
// Subterm-closed by construction.
TermPopulation enumerate_terms(const Universe& u, int max_size);

class Closure {
  public:
    explicit Closure(size_t n)
        : n_(n), words_((n + 63) / 64), bits_(n * words_, 0) {}

    bool leq(size_t a, size_t b) const {
        return bits_[a * words_ + b / 64] >> (b % 64) & 1;
    }
    bool set(size_t a, size_t b) {
        uint64_t& w = bits_[a * words_ + b / 64];
        uint64_t mask = uint64_t{1} << (b % 64);
        if (w & mask) return false;
        w |= mask;
        return true;
    }
    size_t size() const { return n_; }
    const uint64_t* row(size_t a) const { return &bits_[a * words_]; }
    size_t words() const { return words_; }
    uint64_t* row_mut(size_t a) { return &bits_[a * words_]; }

  private:
    size_t n_;
    size_t words_;
    std::vector<uint64_t> bits_;
};

// The smallest preorder on the population closed under the introduction and
// elimination rules for \/ and /\.
Closure rule_closure(const TermPopulation& pop);

}  // namespace sessint::oracle

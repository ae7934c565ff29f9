#pragma once

// Shared test scaffolding: corpus access, small universes, a deterministic
// random term generator for the property suites.

#include <cstdint>
#include <string>
#include <vector>

#include "sessint/labels.hpp"
#include "sessint/parser.hpp"

namespace sessint::testing {

inline std::string corpus(const std::string& name) {
    return std::string(SESSINT_CORPUS_DIR) + "/" + name;
}

inline World load_corpus(const std::string& name) { return parse_world_file(corpus(name)); }

// Two singleton classes d1, d2.
inline Universe two_domains() {
    Universe u;
    u.add_related_group({"d1"});
    u.add_related_group({"d2"});
    return u;
}

// One related class {base, sib} plus an unrelated domain ext.
inline Universe related_universe() {
    Universe u;
    u.add_related_group({"base", "sib"});
    u.add_related_group({"ext"});
    return u;
}

// splitmix64: small, fast, reproducible.
struct Rng {
    uint64_t state;
    explicit Rng(uint64_t seed) : state(seed) {}
    uint64_t next() {
        uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    int below(int n) { return static_cast<int>(next() % static_cast<uint64_t>(n)); }
    bool coin() { return next() & 1; }
};

inline SL random_term(Rng& rng, const Universe& u, int depth) {
    if (depth <= 0 || rng.below(3) == 0) {
        int d = rng.below(u.domain_count());
        return rng.coin() ? SimpleLabel::http(d) : SimpleLabel::https(d);
    }
    SL a = random_term(rng, u, depth - 1);
    SL b = random_term(rng, u, depth - 1);
    return rng.coin() ? SimpleLabel::disj(a, b) : SimpleLabel::conj(a, b);
}

inline Label random_label(Rng& rng, const Universe& u, int depth = 2) {
    return {random_term(rng, u, depth), random_term(rng, u, depth)};
}

inline SecType random_type(Rng& rng, const Universe& u, int depth = 2) {
    SecType t;
    t.cred = rng.coin();
    t.label = random_label(rng, u, depth);
    return t;
}

}  // namespace sessint::testing

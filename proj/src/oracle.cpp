#include "sessint/oracle.hpp"

#include <stdexcept>

namespace sessint::oracle {

std::string term_key(const SL& t) {
    switch (t->kind()) {
        case SimpleLabel::Kind::Http: return "h" + std::to_string(t->domain());
        case SimpleLabel::Kind::Https: return "s" + std::to_string(t->domain());
        case SimpleLabel::Kind::Or:
            return "(" + term_key(t->left()) + "|" + term_key(t->right()) + ")";
        case SimpleLabel::Kind::And:
            return "(" + term_key(t->left()) + "&" + term_key(t->right()) + ")";
    }
    return "?";
}

size_t TermPopulation::find(const SL& t) const {
    auto it = index.find(term_key(t));
    if (it == index.end()) throw std::out_of_range("term not in population");
    return it->second;
}

TermPopulation enumerate_terms(const Universe& u, int max_size) {
    TermPopulation pop;
    std::vector<std::vector<size_t>> by_size(static_cast<size_t>(max_size) + 1);
    auto add = [&](const SL& t, int size) {
        std::string key = term_key(t);
        if (pop.index.count(key)) return;
        pop.index[key] = pop.terms.size();
        by_size[static_cast<size_t>(size)].push_back(pop.terms.size());
        pop.terms.push_back(t);
    };
    for (int d : u.all_domains()) {
        add(SimpleLabel::http(d), 1);
        add(SimpleLabel::https(d), 1);
    }
    for (int size = 3; size <= max_size; size += 2) {
        for (int ls = 1; ls < size - 1; ++ls) {
            int rs = size - 1 - ls;
            if (rs < 1 || rs > max_size) continue;
            for (size_t li : by_size[static_cast<size_t>(ls)]) {
                for (size_t ri : by_size[static_cast<size_t>(rs)]) {
                    add(SimpleLabel::disj(pop.terms[li], pop.terms[ri]), size);
                    add(SimpleLabel::conj(pop.terms[li], pop.terms[ri]), size);
                }
            }
        }
    }
    return pop;
}

Closure rule_closure(const TermPopulation& pop) {
    size_t n = pop.terms.size();
    Closure cl(n);

    // Structure of each term, as population indices.
    struct Node {
        bool is_or = false, is_and = false;
        size_t l = 0, r = 0;
    };
    std::vector<Node> nodes(n);
    for (size_t i = 0; i < n; ++i) {
        const SL& t = pop.terms[i];
        if (t->is_atom()) continue;
        nodes[i].is_or = t->kind() == SimpleLabel::Kind::Or;
        nodes[i].is_and = t->kind() == SimpleLabel::Kind::And;
        nodes[i].l = pop.find(t->left());
        nodes[i].r = pop.find(t->right());
    }

    // Reflexivity and the two axiom schemas.
    for (size_t i = 0; i < n; ++i) cl.set(i, i);
    for (size_t i = 0; i < n; ++i) {
        if (nodes[i].is_or) {
            cl.set(nodes[i].l, i);
            cl.set(nodes[i].r, i);
        }
        if (nodes[i].is_and) {
            cl.set(i, nodes[i].l);
            cl.set(i, nodes[i].r);
        }
    }

    // Close under transitivity and the two inference rules.
    bool changed = true;
    while (changed) {
        changed = false;
        // transitivity: row(a) |= row(b) for all b with a <= b
        for (size_t a = 0; a < n; ++a) {
            for (size_t b = 0; b < n; ++b) {
                if (!cl.leq(a, b)) continue;
                uint64_t* ra = cl.row_mut(a);
                const uint64_t* rb = cl.row(b);
                for (size_t wd = 0; wd < cl.words(); ++wd) {
                    uint64_t before = ra[wd];
                    ra[wd] |= rb[wd];
                    if (ra[wd] != before) changed = true;
                }
            }
        }
        // or-elimination: l <= c and r <= c imply (l \/ r) <= c
        for (size_t i = 0; i < n; ++i) {
            if (!nodes[i].is_or) continue;
            for (size_t c = 0; c < n; ++c)
                if (cl.leq(nodes[i].l, c) && cl.leq(nodes[i].r, c) && cl.set(i, c)) changed = true;
        }
        // and-introduction: a <= l and a <= r imply a <= (l /\ r)
        for (size_t i = 0; i < n; ++i) {
            if (!nodes[i].is_and) continue;
            for (size_t a = 0; a < n; ++a)
                if (cl.leq(a, nodes[i].l) && cl.leq(a, nodes[i].r) && cl.set(a, i)) changed = true;
        }
    }
    return cl;
}

}  // namespace sessint::oracle
